"""Generalized additive Runge-Kutta tableaux and their ARK form."""

from __future__ import annotations

import numpy as np

from .ark import ArkMethod, ark_solve
from .core import AdditiveProblem, UsageError
from .onestep import DEFAULT_NEWTON, NewtonConfig
from .tableaux import ButcherTableau


class GarkTableau:
    """Block tableau: ``blocks[q][l]`` couples stages of operator ``q`` to ``F_l``.

    Abscissae are never supplied; ``c(q, l)`` is the row sum of block ``(q, l)``.
    """

    def __init__(self, blocks, weights, order: int = 1, name: str = ""):
        N = len(weights)
        if N == 0 or len(blocks) != N or any(len(row) != N for row in blocks):
            raise UsageError("blocks must be an N x N grid matching N weight vectors")
        self.weights = [np.asarray(b) for b in weights]
        self.stages = [b.size for b in self.weights]
        self.blocks = []
        for q in range(N):
            row = []
            for l in range(N):
                B = np.asarray(blocks[q][l])
                if B.shape != (self.stages[q], self.stages[l]):
                    raise UsageError(
                        f"block ({q}, {l}) has shape {B.shape}, "
                        f"expected ({self.stages[q]}, {self.stages[l]})"
                    )
                row.append(B)
            self.blocks.append(row)
        self.order = order
        self.name = name

    @property
    def N(self) -> int:
        return len(self.weights)

    @property
    def total_stages(self) -> int:
        return sum(self.stages)

    def c(self, q: int, l: int):
        return self.blocks[q][l].sum(axis=1)

    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.stages)]).astype(int)

    def dependency_matrix(self):
        """Boolean ``S x S`` matrix: stage ``u`` uses ``F(., Y_v)``."""
        off = self.offsets()
        S = self.total_stages
        D = np.zeros((S, S), dtype=bool)
        for q in range(self.N):
            for l in range(self.N):
                D[off[q]:off[q + 1], off[l]:off[l + 1]] |= self.blocks[q][l] != 0
        return D


def gark_to_ark(g: GarkTableau) -> ArkMethod:
    """Equivalent ARK method with ``S = sum_l s_l`` stages in operator-major order."""
    off = g.offsets()
    S = g.total_stages
    dtype = np.result_type(*[B for row in g.blocks for B in row], *g.weights)
    tabs = []
    for l in range(g.N):
        A = np.zeros((S, S), dtype=dtype)
        for q in range(g.N):
            A[off[q]:off[q + 1], off[l]:off[l + 1]] = g.blocks[q][l]
        b = np.zeros(S, dtype=dtype)
        b[off[l]:off[l + 1]] = g.weights[l]
        tabs.append(ButcherTableau(A, b, order=g.order, name=f"{g.name}[{l}]"))
    return ArkMethod(tabs, name=g.name)


def gark_solve(prob: AdditiveProblem, g: GarkTableau, t0, tf, dt,
               newton: NewtonConfig = DEFAULT_NEWTON, save_steps=False, strategy="auto"):
    return ark_solve(prob, gark_to_ark(g), t0, tf, dt, newton, save_steps, strategy)
