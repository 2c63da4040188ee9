"""N-additive Runge-Kutta methods."""

from __future__ import annotations

import numpy as np

from .core import AdditiveProblem, StepFailure, Tolerance, UsageError, wrms_norm
from .onestep import (
    DEFAULT_CONTROLLER,
    DEFAULT_NEWTON,
    NewtonConfig,
    StageScheme,
    StepControllerConfig,
)
from .tableaux import ButcherTableau, EmbeddedTableau, TableauClass


class ArkMethod:
    """One tableau per operator, all with the same number of stages."""

    def __init__(self, tableaux, name: str = ""):
        self.tableaux = list(tableaux)
        if not self.tableaux:
            raise UsageError("an ARK method needs at least one tableau")
        s = {t.s for t in self.tableaux}
        if len(s) != 1:
            raise UsageError(f"all ARK tableaux must have the same stage count, got {sorted(s)}")
        self.name = name
        self.scheme = StageScheme.from_tableaux(self.tableaux)

    @property
    def N(self) -> int:
        return len(self.tableaux)

    @property
    def s(self) -> int:
        return self.tableaux[0].s

    @property
    def order(self) -> int:
        return min(t.order for t in self.tableaux)

    @property
    def embedded(self) -> bool:
        return all(isinstance(t, EmbeddedTableau) for t in self.tableaux)

    @property
    def order_hat(self) -> int:
        if not self.embedded:
            raise UsageError("method has no embedded weights")
        return min(t.order_hat for t in self.tableaux)

    @property
    def structure(self) -> TableauClass:
        return self.scheme.structure

    def step(self, ops, t, y, h, newton=DEFAULT_NEWTON, strategy="auto", order=None):
        """``(y_new, err)``; ``err`` is ``None`` unless every tableau is embedded."""
        if len(ops) != self.N:
            raise UsageError(f"method has {self.N} tableaux but {len(ops)} operators were given")
        return self.scheme.step(ops, t, y, h, newton, strategy, order)

    def __repr__(self):
        return f"ArkMethod({self.name or '?'}, N={self.N}, s={self.s})"


def as_ark(method) -> ArkMethod:
    if isinstance(method, ArkMethod):
        return method
    return ArkMethod(method)


def step_sizes(t0, tf, dt):
    """Macro-step grid: equal steps of ``dt``, last one shortened if needed."""
    span = tf - t0
    if span == 0:
        return []
    ratio = span / dt if dt != 0 else -1.0
    if np.real(ratio) <= 0:
        raise UsageError(f"step {dt} does not progress from {t0} to {tf}")
    n = int(round(abs(ratio)))
    if n >= 1 and abs(n - abs(ratio)) <= 1e-12 * max(1.0, abs(ratio)):
        return [dt] * n
    n = int(np.floor(abs(ratio)))
    hs = [dt] * n
    rest = span - n * dt
    if rest != 0:
        hs.append(rest)
    return hs


def fixed_step_loop(step, y0, t0, tf, dt, save_steps=False):
    """Drive ``step(k, t, y, h) -> y`` over the macro-step grid."""
    y = np.asarray(y0)
    t = t0
    ts, ys = [t0], [y.copy()]
    hs = step_sizes(t0, tf, dt)
    for k, h in enumerate(hs):
        try:
            y = step(k, t, y, h)
        except StepFailure as exc:
            if exc.step is None:
                raise StepFailure(exc.message, step=k, stage=exc.stage, operator=exc.operator,
                                  t=t if exc.t is None else exc.t) from exc
            raise
        # exact grid points avoid drift
        t = tf if k + 1 == len(hs) else t0 + (k + 1) * dt
        if save_steps:
            ts.append(t)
            ys.append(np.array(y, copy=True))
    if save_steps:
        return np.array(ts), np.array(ys)
    return y


def ark_step(prob: AdditiveProblem, method, t, y, h, newton: NewtonConfig = DEFAULT_NEWTON,
             strategy="auto"):
    method = as_ark(method)
    y_new, _ = method.step(prob.operators, t, y, h, newton, strategy)
    return y_new


def ark_solve(prob: AdditiveProblem, method, t0, tf, dt, newton: NewtonConfig = DEFAULT_NEWTON,
              save_steps=False, strategy="auto", adaptive=False, tol: Tolerance | None = None,
              ctrl: StepControllerConfig = DEFAULT_CONTROLLER):
    """Integrate ``prob`` with an ARK method.

    Fixed steps of ``dt`` by default. With ``adaptive=True`` (embedded methods
    only) ``dt`` is the initial step and the error estimate
    ``h sum_l sum_i (b_l - b_hat_l)_i F_l`` drives the elementary controller.
    """
    method = as_ark(method)
    if method.N != prob.n_operators:
        raise UsageError(f"method has {method.N} tableaux, problem has {prob.n_operators} operators")
    ops = prob.operators
    if adaptive:
        if not method.embedded:
            raise UsageError("adaptive ARK needs embedded tableaux")
        return _adaptive_ark(prob, method, t0, tf, dt, newton, tol or Tolerance(), ctrl,
                             save_steps, strategy)

    def step(k, t, y, h):
        y_new, _ = method.step(ops, t, y, h, newton, strategy)
        return y_new

    return fixed_step_loop(step, prob.y0, t0, tf, dt, save_steps)


def _adaptive_ark(prob, method, t0, tf, h, newton, tol, ctrl, save_steps, strategy):
    span = tf - t0
    direction = 1.0 if np.real(span) >= 0 else -1.0
    t, y = t0, np.asarray(prob.y0)
    h = abs(h) * direction
    expo = -1.0 / (method.order_hat + 1)
    ts, ys = [t0], [y.copy()]
    hmin = 1e-12 * abs(span)
    k = 0
    while (tf - t) * direction > 0:
        last = abs(h) >= abs(tf - t)
        if last:
            h = tf - t
        try:
            y_new, err = method.step(prob.operators, t, y, h, newton, strategy)
        except StepFailure as exc:
            raise StepFailure(exc.message, step=k, stage=exc.stage, operator=exc.operator,
                              t=t) from exc
        est = wrms_norm(err, y_new, tol)
        if not np.isfinite(est):
            est = np.inf
        if est <= 1.0:
            t = tf if last else t + h
            y = y_new
            k += 1
            if save_steps:
                ts.append(t)
                ys.append(y.copy())
        factor = ctrl.max_factor if est == 0 else ctrl.safety * est**expo
        h = h * min(ctrl.max_factor, max(ctrl.min_factor, factor))
        if (tf - t) * direction > 0 and abs(h) < hmin:
            raise StepFailure("adaptive ARK step size underflow", step=k, t=t)
    if save_steps:
        return np.array(ts), np.array(ys)
    return y


def tableau_pair(A_list, b_list, order=1, name=""):
    """Convenience: build an ArkMethod from raw ``A`` / ``b`` arrays."""
    return ArkMethod([ButcherTableau(A, b, order=order, name=f"{name}[{l}]")
                      for l, (A, b) in enumerate(zip(A_list, b_list))], name=name)
