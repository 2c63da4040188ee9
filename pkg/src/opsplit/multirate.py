"""Multirate GARK methods: expansion to a block GARK tableau and decoupled solve."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .ark import fixed_step_loop
from .core import AdditiveProblem, UsageError
from .gark import GarkTableau, gark_to_ark
from .onestep import DEFAULT_NEWTON, NewtonConfig, topological_stage_order


class MrGarkMethod:
    """Slow/fast RK pair with coupling functions ``A_FS(m, M)`` and ``A_SF(m, M)``."""

    def __init__(self, A_FF, A_SS, b_F, b_S, A_FS: Callable, A_SF: Callable,
                 order: int = 1, name: str = ""):
        self.A_FF = np.asarray(A_FF, dtype=float)
        self.A_SS = np.asarray(A_SS, dtype=float)
        self.b_F = np.asarray(b_F, dtype=float)
        self.b_S = np.asarray(b_S, dtype=float)
        self.A_FS = A_FS
        self.A_SF = A_SF
        self.order = order
        self.name = name
        sF, sS = self.b_F.size, self.b_S.size
        if self.A_FF.shape != (sF, sF) or self.A_SS.shape != (sS, sS):
            raise UsageError("A_FF / A_SS shapes do not match b_F / b_S")
        for label, b in (("b_F", self.b_F), ("b_S", self.b_S)):
            if abs(b.sum() - 1) > 1e-13:
                raise UsageError(f"{label} must sum to one")

    @property
    def s_fast(self) -> int:
        return self.b_F.size

    @property
    def s_slow(self) -> int:
        return self.b_S.size


def mrgark_expand(meth: MrGarkMethod, M: int) -> GarkTableau:
    """Block GARK tableau with ``M`` fast micro-steps per macro step.

    Operator 0 is the fast process, operator 1 the slow one.
    """
    if M < 1:
        raise UsageError("M must be a positive integer")
    sF, sS = meth.s_fast, meth.s_slow
    FF = np.zeros((M * sF, M * sF))
    FS = np.zeros((M * sF, sS))
    SF = np.zeros((sS, M * sF))
    for m in range(1, M + 1):
        r = slice((m - 1) * sF, m * sF)
        FF[r, r] = meth.A_FF / M
        for k in range(1, m):
            FF[r, (k - 1) * sF:k * sF] = np.outer(np.ones(sF), meth.b_F) / M
        fs = np.asarray(meth.A_FS(m, M), dtype=float)
        sf = np.asarray(meth.A_SF(m, M), dtype=float)
        if fs.shape != (sF, sS):
            raise UsageError(f"A_FS({m}, {M}) has shape {fs.shape}, expected {(sF, sS)}")
        if sf.shape != (sS, sF):
            raise UsageError(f"A_SF({m}, {M}) has shape {sf.shape}, expected {(sS, sF)}")
        FS[r] = fs
        SF[:, r] = sf / M
    weights = [np.tile(meth.b_F / M, M), meth.b_S.copy()]
    return GarkTableau([[FF, FS], [SF, meth.A_SS.copy()]], weights, order=meth.order,
                       name=f"{meth.name}(M={M})")


def stage_order(g: GarkTableau) -> list[int]:
    """Execution order of the ARK-form stages respecting every coupling.

    Raises :class:`~opsplit.onestep.StageCycleError` when the method is not
    decoupled.
    """
    D = g.dependency_matrix()
    deps = [set(np.flatnonzero(D[i])) - {i} for i in range(D.shape[0])]
    return topological_stage_order(deps)


def multirate_solve(prob: AdditiveProblem, meth: MrGarkMethod, M: int, t0, tf, dt,
                    newton: NewtonConfig = DEFAULT_NEWTON, save_steps=False):
    """Solve ``y' = F_S + F_F``; ``prob.operators`` must be ``[F_S, F_F]``."""
    if prob.n_operators != 2:
        raise UsageError("multirate_solve needs exactly two operators (slow, fast)")
    g = mrgark_expand(meth, M)
    order = stage_order(g)
    ark = gark_to_ark(g)
    ops = [prob.operators[1], prob.operators[0]]

    def step(k, t, y, h):
        y_new, _ = ark.step(ops, t, y, h, newton, "sequential", order)
        return y_new

    return fixed_step_loop(step, prob.y0, t0, tf, dt, save_steps)


def fast_slow_problem(prob: AdditiveProblem) -> AdditiveProblem:
    """Reorder ``[F_S, F_F]`` into the ``[F_F, F_S]`` layout of expanded tableaux."""
    return AdditiveProblem([prob.operators[1], prob.operators[0]], prob.y0, name=prob.name)
