"""Multirate infinitesimal GARK methods (plain and IMEX slow part)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ark import fixed_step_loop
from .core import AdditiveProblem, NewtonError, SolverError, StepFailure, Tolerance, UsageError
from .onestep import DEFAULT_CONTROLLER, DEFAULT_NEWTON, NewtonConfig, integrate_ray, newton_solve
from .tableaux import EmbeddedTableau, builtin

FORCING_TOL = 1e-12


def gamma_bar(mats) -> np.ndarray:
    """Integrated coupling ``sum_k G_k / (k + 1)`` (integral of the polynomial over [0, 1])."""
    mats = [np.asarray(G) for G in mats]
    if not mats:
        raise UsageError("need at least one coupling matrix")
    return sum(G / (k + 1) for k, G in enumerate(mats))


class MriMethod:
    """Slow abscissae plus coupling matrices ``Gamma^{k}`` and optional ``Omega^{k}``."""

    def __init__(self, c, gammas, omegas=None, order: int = 1, name: str = ""):
        self.c = np.asarray(c, dtype=float)
        self.gammas = [np.asarray(G, dtype=float) for G in gammas]
        self.omegas = None if omegas is None else [np.asarray(W, dtype=float) for W in omegas]
        self.order = order
        self.name = name
        self.validate()
        self.gbar = gamma_bar(self.gammas)
        self.wbar = None if self.omegas is None else gamma_bar(self.omegas)

    @property
    def s(self) -> int:
        return self.c.size

    @property
    def imex(self) -> bool:
        return self.omegas is not None

    @property
    def dc(self) -> np.ndarray:
        return np.diff(self.c, prepend=self.c[0])

    def validate(self):
        c, s = self.c, self.c.size
        who = self.name or "MRI method"
        if c.ndim != 1 or s < 2:
            raise UsageError(f"{who}: need at least two slow stages")
        if c[0] != 0 or c[-1] > 1 or np.any(np.diff(c) < 0):
            raise UsageError(f"{who}: abscissae must start at 0, be nondecreasing and end <= 1")
        if not self.gammas:
            raise UsageError(f"{who}: need at least one Gamma matrix")
        for label, mats, strict in (("Gamma", self.gammas, False), ("Omega", self.omegas or [], True)):
            for k, G in enumerate(mats):
                if G.shape != (s, s):
                    raise UsageError(f"{who}: {label}^{k} must be {s}x{s}")
                if np.any(np.triu(G, 1 if not strict else 0)):
                    kind = "strictly lower" if strict else "lower"
                    raise UsageError(f"{who}: {label}^{k} must be {kind} triangular")
        dc = np.diff(c, prepend=0.0)
        for i in range(1, s):
            if dc[i] == 0:
                continue
            for label, mats in (("Gamma", self.gammas), ("Omega", self.omegas or [])):
                if any(np.any(G[i, i:]) for G in mats):
                    raise UsageError(
                        f"{who}: stage {i + 1} has a fast integration and an implicit "
                        f"{label} coupling; this solver does not allow both"
                    )
        for label, mats in (("Gamma", self.gammas), ("Omega", self.omegas)):
            if mats is None:
                continue
            rows = gamma_bar(mats).sum(axis=1)
            bad = np.abs(rows[1:] - dc[1:]) > FORCING_TOL
            if np.any(bad):
                raise UsageError(
                    f"{who}: {label}-bar row sums differ from the abscissa increments in "
                    f"stages {(np.flatnonzero(bad) + 2).tolist()}"
                )


@dataclass(frozen=True)
class FastSolveConfig:
    pair: EmbeddedTableau = field(default_factory=lambda: builtin("DP54"))
    tol: Tolerance = field(default_factory=lambda: Tolerance(atol=1e-12, rtol=1e-10))


DEFAULT_FAST = FastSolveConfig()


def mri_step(f_I, f_E, f_F, meth: MriMethod, t, y, h, fast: FastSolveConfig = DEFAULT_FAST,
             newton: NewtonConfig = DEFAULT_NEWTON):
    """One macro step.

    ``f_I`` is the (implicitly coupled) slow operator, ``f_E`` the explicit
    slow operator of an IMEX method (``None`` otherwise) and ``f_F`` the fast
    operator. Stages with a zero abscissa increment have no fast part; the
    polynomial forcing is integrated exactly and the stage becomes an
    RK-type update, solved by Newton when its diagonal coefficient is nonzero.
    """
    if (f_E is not None) != meth.imex:
        raise UsageError("an explicit slow operator must be given exactly when the method has Omegas")
    y = np.asarray(y)
    if h == 0:
        return y.copy()
    s, c = meth.s, meth.c
    G, W = meth.gammas, meth.omegas or []
    gbar, wbar = meth.gbar, meth.wbar
    needI = np.any(np.stack([g != 0 for g in G]), axis=(0, 1))
    needE = np.any(np.stack([w != 0 for w in W]), axis=(0, 1)) if W else np.zeros(s, bool)
    FI = [None] * s
    FE = [None] * s
    Y = y

    def record(j, Yj):
        tj = t + c[j] * h
        if needI[j]:
            FI[j] = f_I(tj, Yj)
        if needE[j]:
            FE[j] = f_E(tj, Yj)

    record(0, Y)
    for i in range(1, s):
        dc = c[i] - c[i - 1]
        try:
            if dc != 0:
                Y = _fast_stage(f_F, G, W, FI, FE, i, t + c[i - 1] * h, Y, h, dc, fast)
            else:
                Y = _slow_stage(f_I, gbar, wbar, FI, FE, i, t + c[i] * h, Y, h, newton)
        except (NewtonError, SolverError) as exc:
            if isinstance(exc, StepFailure):
                raise
            raise StepFailure(f"MRI stage failed: {exc}", stage=i + 1, t=t) from exc
        record(i, Y)
    return Y


def _forcing_terms(G, W, FI, FE, i):
    """Vectors multiplying ``tau**k`` in the forcing of stage ``i``."""
    terms = []
    for k in range(max(len(G), len(W))):
        acc = None
        for mats, F in ((G, FI), (W, FE)):
            if k >= len(mats):
                continue
            row = mats[k][i]
            for j in np.flatnonzero(row[:i]):
                term = row[j] * F[j]
                acc = term if acc is None else acc + term
        terms.append(acc)
    return terms


def _fast_stage(f_F, G, W, FI, FE, i, T, Y, h, dc, fast):
    terms = _forcing_terms(G, W, FI, FE, i)
    poly = [(k, v) for k, v in enumerate(terms) if v is not None]

    def rhs(theta, v):
        out = dc * f_F(T + dc * theta, v)
        if poly:
            tau = theta / h
            for k, vec in poly:
                out = out + (vec if k == 0 else tau**k * vec)
        return out

    return integrate_ray(fast.pair, rhs, 0.0, Y, h, fast.tol, DEFAULT_CONTROLLER)


def _slow_stage(f_I, gbar, wbar, FI, FE, i, ti, Y, h, newton):
    rhs = Y
    for j in np.flatnonzero(gbar[i, :i]):
        rhs = rhs + (h * gbar[i, j]) * FI[j]
    if wbar is not None:
        for j in np.flatnonzero(wbar[i, :i]):
            rhs = rhs + (h * wbar[i, j]) * FE[j]
    gii = gbar[i, i]
    if gii == 0:
        return rhs
    hg = h * gii

    def residual(Z):
        return Z - rhs - hg * f_I(ti, Z)

    jac = None
    if getattr(f_I, "jac", None) is not None:
        import scipy.sparse as sp

        def jac(Z):
            J = f_I.jac(ti, Z)
            if sp.issparse(J):
                return sp.identity(Z.size, dtype=np.result_type(J.dtype, Z), format="csc") - hg * J
            return np.eye(Z.size) - hg * J

    return newton_solve(residual, np.asarray(Y, dtype=np.result_type(Y, rhs)), newton, jac)


def mri_operators(prob: AdditiveProblem, meth: MriMethod):
    """``(f_I, f_E, f_F)`` from ``[F_S, F_F]`` or, for IMEX methods, ``[F_E, F_I, F_F]``."""
    ops = prob.operators
    if meth.imex:
        if len(ops) != 3:
            raise UsageError(f"{meth.name} is an IMEX method and needs operators [F_E, F_I, F_F]")
        return ops[1], ops[0], ops[2]
    if len(ops) != 2:
        raise UsageError(f"{meth.name} needs operators [F_S, F_F]")
    return ops[0], None, ops[1]


def mri_solve(prob: AdditiveProblem, meth: MriMethod, t0, tf, dt,
              fast: FastSolveConfig = DEFAULT_FAST, newton: NewtonConfig = DEFAULT_NEWTON,
              save_steps=False):
    f_I, f_E, f_F = mri_operators(prob, meth)

    def step(k, t, y, h):
        return mri_step(f_I, f_E, f_F, meth, t, y, h, fast, newton)

    return fixed_step_loop(step, prob.y0, t0, tf, dt, save_steps)
