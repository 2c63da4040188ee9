"""Fractional-step (operator splitting) driver with per-operator sub-integrators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ark import fixed_step_loop
from .core import AdditiveProblem, SolverError, StepFailure, Tolerance, UsageError
from .onestep import DEFAULT_CONTROLLER, DEFAULT_NEWTON, NewtonConfig, integrate_ray, rk_step
from .tableaux import ButcherTableau, EmbeddedTableau, builtin

CONSISTENCY_TOL = 1e-13


class SplittingScheme:
    """``s x N`` fractional-step coefficients; row ``k`` is stage ``k``."""

    def __init__(self, alpha, name: str = "", order: int = 1, check: bool = True):
        alpha = np.atleast_2d(np.array(alpha))
        if not np.iscomplexobj(alpha):
            alpha = alpha.astype(float)
        elif not np.any(alpha.imag):
            alpha = alpha.real.copy()
        if alpha.ndim != 2 or alpha.size == 0:
            raise UsageError("alpha must be a non-empty s x N matrix")
        if check:
            bad = np.abs(alpha.sum(axis=0) - 1) > CONSISTENCY_TOL
            if np.any(bad):
                raise UsageError(
                    f"splitting {name!r} is inconsistent: columns {np.flatnonzero(bad).tolist()} "
                    "do not sum to one"
                )
        self.alpha = alpha
        self.alpha.flags.writeable = False
        self.name = name
        self.order = order

    @property
    def s(self) -> int:
        return self.alpha.shape[0]

    @property
    def N(self) -> int:
        return self.alpha.shape[1]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.alpha)

    def sequence(self):
        """Non-trivial sub-steps ``(stage, operator, alpha)`` in execution order (0-based)."""
        return [(k, l, self.alpha[k, l]) for k in range(self.s) for l in range(self.N)
                if self.alpha[k, l] != 0]

    def __repr__(self):
        return f"SplittingScheme({self.name or '?'}, s={self.s}, N={self.N}, order={self.order})"


# -- sub-integrators -----------------------------------------------------------


@dataclass(frozen=True)
class SingleRK:
    tableau: ButcherTableau
    substeps: int = 1

    def __post_init__(self):
        if self.substeps < 1:
            raise UsageError("substeps must be >= 1")

    def advance(self, f, t, y, h, newton):
        m = self.substeps
        hk = h / m
        for k in range(m):
            y = rk_step(self.tableau, f, t + k * hk, y, hk, newton)
        return y


@dataclass(frozen=True)
class Adaptive:
    pair: EmbeddedTableau = field(default_factory=lambda: builtin("DP54"))
    tol: Tolerance = field(default_factory=lambda: Tolerance(1e-10, 1e-10))

    def advance(self, f, t, y, h, newton):
        return integrate_ray(self.pair, f, t, y, h, self.tol, DEFAULT_CONTROLLER)


@dataclass(frozen=True)
class Analytic:
    """Exact sub-flow ``evaluator(t0, y0, h) -> y(t0 + h)``."""

    evaluator: Callable

    def advance(self, f, t, y, h, newton):
        return self.evaluator(t, y, h)


def as_subintegrator(spec):
    if isinstance(spec, (SingleRK, Adaptive, Analytic)):
        return spec
    if isinstance(spec, EmbeddedTableau):
        return Adaptive(spec)
    if isinstance(spec, ButcherTableau):
        return SingleRK(spec)
    if isinstance(spec, str):
        if spec.lower() in ("adaptive", "adaptive_rk"):
            return Adaptive()
        return SingleRK(builtin(spec))
    raise UsageError(f"cannot interpret {spec!r} as a sub-integrator")


class MethodMap:
    """Sub-integrator lookup keyed by 1-based ``(operator,)`` or ``(operator, stage)``."""

    def __init__(self, default="RK4", overrides: dict | None = None):
        self.default = as_subintegrator(default)
        self.overrides = {}
        for key, spec in (overrides or {}).items():
            key = (key,) if isinstance(key, int) else tuple(key)
            if len(key) not in (1, 2) or key[0] < 1:
                raise UsageError(f"bad method-map key {key!r}")
            self.overrides[key] = as_subintegrator(spec)

    def lookup(self, operator: int, stage: int):
        """Sub-integrator for 1-based ``operator`` at 1-based ``stage``."""
        o = self.overrides
        return o.get((operator, stage)) or o.get((operator,)) or self.default

    def check(self, N: int):
        for key in self.overrides:
            if key[0] > N:
                raise UsageError(f"method map refers to operator {key[0]} but there are only {N}")


def as_method_map(methods) -> MethodMap:
    if isinstance(methods, MethodMap):
        return methods
    if isinstance(methods, dict):
        return MethodMap(methods.get("default", "RK4"),
                         {k: v for k, v in methods.items() if k != "default"})
    return MethodMap(methods)


def build_plan(scheme: SplittingScheme, methods: MethodMap):
    """Flattened list of the non-trivial sub-integrations ``(stage, op, alpha, sub)``."""
    return [(k, l, a, methods.lookup(l + 1, k + 1)) for k, l, a in scheme.sequence()]


def fractional_step(prob: AdditiveProblem, scheme: SplittingScheme, methods, t0, tf, dt,
                    newton: NewtonConfig = DEFAULT_NEWTON, save_steps=False):
    """Integrate with a fractional-step method.

    Per macro step, stages run in order and within a stage the operators run
    in order; every operator keeps its own clock and zero coefficients are
    skipped. ``methods`` may be a :class:`MethodMap`, a dict with 1-based
    keys (plus optional ``"default"``), a tableau, or a method name.
    """
    if scheme.N != prob.n_operators:
        raise UsageError(f"scheme {scheme.name!r} has {scheme.N} columns but the problem "
                         f"has {prob.n_operators} operators")
    methods = as_method_map(methods)
    methods.check(prob.n_operators)
    plan = build_plan(scheme, methods)
    ops = prob.operators
    y0 = np.asarray(prob.y0)
    if scheme.is_complex:
        y0 = y0.astype(np.result_type(y0, np.complex128))

    def step(n, t, y, dt_n):
        clocks = [t] * scheme.N
        for k, l, a, sub in plan:
            h = a * dt_n
            try:
                y = sub.advance(ops[l], clocks[l], y, h, newton)
            except SolverError as exc:
                raise StepFailure(f"sub-integration failed: {exc}", step=n, stage=k + 1,
                                  operator=l + 1, t=t) from exc
            clocks[l] = clocks[l] + h
        return y

    return fixed_step_loop(step, y0, t0, tf, dt, save_steps)


@dataclass
class SchemeReport:
    first_order: np.ndarray
    second_order: dict

    @property
    def max_first(self) -> float:
        return float(np.max(np.abs(self.first_order)))


def validate_scheme(scheme: SplittingScheme) -> SchemeReport:
    """Order-condition residuals of a splitting scheme.

    ``first_order[l] = sum_k alpha[k, l] - 1``. ``second_order[(l, m)]`` for
    ``l < m`` is ``sum_k alpha[k, m] * sum_{j<=k} alpha[j, l] - 1/2``: the
    weight of sub-steps of ``l`` that run before sub-steps of ``m``, which
    must be one half for second order.
    """
    a = scheme.alpha
    first = a.sum(axis=0) - 1
    second = {}
    csum = np.cumsum(a, axis=0)
    for l in range(scheme.N):
        for m in range(l + 1, scheme.N):
            second[(l + 1, m + 1)] = complex(np.sum(a[:, m] * csum[:, l]) - 0.5)
            if not scheme.is_complex:
                second[(l + 1, m + 1)] = second[(l + 1, m + 1)].real
    return SchemeReport(first, second)
