"""Butcher tableaux, structural classification and the built-in RK methods."""

from __future__ import annotations

import enum
from fractions import Fraction as Fr

import numpy as np

from .core import UsageError

CONSISTENCY_TOL = 1e-14


class TableauClass(enum.Enum):
    EXPLICIT = "Explicit"
    DIAGONALLY_IMPLICIT = "DiagonallyImplicit"
    FULLY_IMPLICIT = "FullyImplicit"


def _array(x):
    a = np.array(x)
    if a.dtype == object:
        a = a.astype(complex if any(isinstance(v, complex) for v in a.flat) else float)
    if not np.iscomplexobj(a):
        a = a.astype(float)
    return a


class ButcherTableau:
    """One Runge-Kutta method ``(A, b, c)`` of order ``order``.

    ``c`` is optional; when omitted it is the row sum of ``A``. When given it
    must agree with the row sums.
    """

    def __init__(self, A, b, c=None, order: int = 1, name: str = ""):
        A = _array(A)
        b = _array(b)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise UsageError(f"A must be square, got shape {A.shape}")
        if b.shape != (A.shape[0],):
            raise UsageError(f"b has shape {b.shape}, expected ({A.shape[0]},)")
        if order < 1:
            raise UsageError("order must be positive")
        rowsum = A.sum(axis=1)
        if c is None:
            c = rowsum
        else:
            c = _array(c)
            if c.shape != b.shape:
                raise UsageError(f"c has shape {c.shape}, expected {b.shape}")
            bad = np.abs(c - rowsum) > CONSISTENCY_TOL * np.maximum(1.0, np.abs(c))
            if np.any(bad):
                raise UsageError(
                    f"tableau {name or ''} is not internally consistent: "
                    f"c != A @ 1 in rows {np.flatnonzero(bad).tolist()}"
                )
        self.A = A
        self.b = b
        self.c = c
        self.order = int(order)
        self.name = name
        for arr in (self.A, self.b, self.c):
            arr.flags.writeable = False

    @property
    def s(self) -> int:
        return self.b.size

    @property
    def kind(self) -> TableauClass:
        return classify(self)

    def __repr__(self):
        return f"{type(self).__name__}({self.name or '?'}, s={self.s}, p={self.order})"


class EmbeddedTableau(ButcherTableau):
    """Tableau with a second weight vector ``b_hat`` of order ``order_hat``."""

    def __init__(self, A, b, b_hat, c=None, order: int = 2, order_hat: int = 1, name: str = ""):
        super().__init__(A, b, c, order, name)
        b_hat = _array(b_hat)
        if b_hat.shape != self.b.shape:
            raise UsageError("b_hat must have the same length as b")
        if np.array_equal(b_hat, self.b):
            raise UsageError("b_hat must differ from b")
        self.b_hat = b_hat
        self.b_hat.flags.writeable = False
        self.order_hat = int(order_hat)

    @property
    def base(self) -> ButcherTableau:
        return ButcherTableau(self.A, self.b, self.c, self.order, self.name)

    @property
    def b_err(self):
        return self.b - self.b_hat


def classify(tab: ButcherTableau) -> TableauClass:
    A = tab.A
    if not np.any(np.triu(A, 1)):
        if not np.any(np.diag(A)):
            return TableauClass.EXPLICIT
        return TableauClass.DIAGONALLY_IMPLICIT
    return TableauClass.FULLY_IMPLICIT


def order_residuals(tab: ButcherTableau, order: int | None = None) -> dict[str, float]:
    """Classical order-condition residuals up to ``order`` (at most 4)."""
    p = min(order or tab.order, 4)
    A, b, c = tab.A, tab.b, tab.c
    Ac = A @ c
    res = {"sum_b": b.sum() - 1}
    if p >= 2:
        res["bc"] = b @ c - 1 / 2
    if p >= 3:
        res["bc2"] = b @ c**2 - 1 / 3
        res["bAc"] = b @ Ac - 1 / 6
    if p >= 4:
        res["bc3"] = b @ c**3 - 1 / 4
        res["bcAc"] = (b * c) @ Ac - 1 / 8
        res["bAc2"] = b @ (A @ c**2) - 1 / 12
        res["bAAc"] = b @ (A @ Ac) - 1 / 24
    return {k: float(abs(v)) for k, v in res.items()}


def _fr(rows):
    return [[float(Fr(x)) for x in row] for row in rows]


def _forward_euler():
    return ButcherTableau([[0.0]], [1.0], [0.0], order=1, name="FE")


def _backward_euler():
    return ButcherTableau([[1.0]], [1.0], [1.0], order=1, name="BE")


def _heun2():
    return ButcherTableau([[0, 0], [1, 0]], [0.5, 0.5], [0, 1], order=2, name="Heun2")


def _kutta3():
    return ButcherTableau(
        [[0, 0, 0], [0.5, 0, 0], [-1, 2, 0]], _fr([["1/6", "2/3", "1/6"]])[0], [0, 0.5, 1],
        order=3, name="Kutta3",
    )


def _rk4():
    return ButcherTableau(
        [[0, 0, 0, 0], [0.5, 0, 0, 0], [0, 0.5, 0, 0], [0, 0, 1, 0]],
        _fr([["1/6", "1/3", "1/3", "1/6"]])[0], [0, 0.5, 0.5, 1], order=4, name="RK4",
    )


def _implicit_trapezoidal():
    return ButcherTableau([[0, 0], [0.5, 0.5]], [0.5, 0.5], [0, 1], order=2, name="ImplicitTrapezoidal")


def _sdirk2():
    # L-stable two-stage SDIRK, gamma = 1 - 1/sqrt(2)
    g = 1 - 1 / np.sqrt(2)
    return ButcherTableau([[g, 0], [1 - g, g]], [1 - g, g], order=2, name="SDIRK2")


def _gauss_legendre2():
    r = np.sqrt(3) / 6
    return ButcherTableau(
        [[0.25, 0.25 - r], [0.25 + r, 0.25]], [0.5, 0.5], [0.5 - r, 0.5 + r], order=4, name="GL2",
    )


def _dp54():
    A = _fr([
        [0, 0, 0, 0, 0, 0, 0],
        ["1/5", 0, 0, 0, 0, 0, 0],
        ["3/40", "9/40", 0, 0, 0, 0, 0],
        ["44/45", "-56/15", "32/9", 0, 0, 0, 0],
        ["19372/6561", "-25360/2187", "64448/6561", "-212/729", 0, 0, 0],
        ["9017/3168", "-355/33", "46732/5247", "49/176", "-5103/18656", 0, 0],
        ["35/384", 0, "500/1113", "125/192", "-2187/6784", "11/84", 0],
    ])
    b = _fr([["35/384", 0, "500/1113", "125/192", "-2187/6784", "11/84", 0]])[0]
    b_hat = _fr([["5179/57600", 0, "7571/16695", "393/640", "-92097/339200", "187/2100", "1/40"]])[0]
    c = _fr([[0, "1/5", "3/10", "4/5", "8/9", 1, 1]])[0]
    return EmbeddedTableau(A, b, b_hat, c, order=5, order_hat=4, name="DP54")


_BUILTINS = {
    "FE": _forward_euler,
    "BE": _backward_euler,
    "Heun2": _heun2,
    "Kutta3": _kutta3,
    "RK4": _rk4,
    "ImplicitTrapezoidal": _implicit_trapezoidal,
    "DP54": _dp54,
    "SDIRK2": _sdirk2,
    "GL2": _gauss_legendre2,
}

_ALIASES = {
    "rk1": "FE", "fe": "FE", "be": "BE", "heun": "Heun2", "heun2": "Heun2", "rk2": "Heun2",
    "rk3": "Kutta3", "kutta3": "Kutta3", "rk4": "RK4", "trap": "ImplicitTrapezoidal",
    "implicittrapezoidal": "ImplicitTrapezoidal", "dp54": "DP54", "rk45": "DP54",
    "sdirk2": "SDIRK2", "gl2": "GL2",
}


def builtin_names() -> list[str]:
    return list(_BUILTINS)


def builtin(name: str) -> ButcherTableau:
    """Look up a built-in tableau by name (case-insensitive aliases accepted)."""
    key = name if name in _BUILTINS else _ALIASES.get(name.lower())
    if key is None:
        raise UsageError(f"unknown tableau {name!r}; available: {', '.join(_BUILTINS)}")
    return _BUILTINS[key]()
