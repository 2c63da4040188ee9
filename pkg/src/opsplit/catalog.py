"""Coefficient catalog: splittings, GARK, MrGARK and MRI methods.

Every payload is validated by its constructor when it is built. Irrational
constants are computed at runtime.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import UsageError
from .fractional import SplittingScheme
from .gark import GarkTableau
from .mri import MriMethod
from .multirate import MrGarkMethod


def _key(name: str) -> str:
    return "".join(ch for ch in name.lower() if ch.isalnum())


def _pack(seq, N):
    """Lay out a sequence of ``(operator, fraction)`` sub-steps as stage rows.

    Adjacent steps of the same operator are merged; a new row starts when an
    operator index does not exceed the last one used in the current row.
    """
    merged = []
    for l, a in seq:
        if merged and merged[-1][0] == l:
            merged[-1][1] += a
        else:
            merged.append([l, a])
    rows = []
    last = N
    for l, a in merged:
        if l <= last:
            rows.append([0.0] * N)
        rows[-1][l] = a
        last = l
    return np.array(rows)


def _strang_sequence(N, reverse=False):
    ops = list(range(N))
    if reverse:
        ops = ops[::-1]
    return ([(l, 0.5) for l in ops[:-1]] + [(ops[-1], 1.0)]
            + [(l, 0.5) for l in ops[-2::-1]])


def _check_n(name, N, fixed=None):
    if N < 2:
        raise UsageError(f"{name} needs N >= 2, got {N}")
    if fixed is not None and N != fixed:
        raise UsageError(f"{name} is only defined for N = {fixed}")


def godunov(N: int) -> SplittingScheme:
    _check_n("Godunov", N)
    return SplittingScheme(np.ones((1, N)), name="Godunov", order=1)


def strang(N: int) -> SplittingScheme:
    _check_n("Strang", N)
    return SplittingScheme(_pack(_strang_sequence(N), N), name="Strang", order=2)


PP3_4A3_ROWS = [
    [0.461601939364879971, -0.266589223588183997, -0.360420727960349671],
    [-0.067871053050780081, 0.092457673314333835, 0.579154058410941403],
    [-0.095886885226072025, 0.674131550273850162, 0.483422668461380403],
    [0.483422668461380403, 0.674131550273850162, -0.095886885226072025],
    [0.579154058410941403, 0.092457673314333835, -0.067871053050780081],
    [-0.360420727960349671, -0.266589223588183997, 0.461601939364879971],
]


def pp3_4a3(N: int = 3) -> SplittingScheme:
    _check_n("PP3_4A-3", N, fixed=3)
    return SplittingScheme(PP3_4A3_ROWS, name="PP3_4A-3", order=3)


def yoshida_theta() -> float:
    return 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))


def yoshida_table(N: int = 3) -> SplittingScheme:
    _check_n("Yoshida", N, fixed=3)
    th = yoshida_theta()
    rows = [
        [0, 0, th / 2],
        [0, th / 2, 0],
        [th, th / 2, (1 - th) / 2],
        [0, (1 - 2 * th) / 2, 0],
        [1 - 2 * th, (1 - 2 * th) / 2, (1 - th) / 2],
        [0, th / 2, 0],
        [th, th / 2, th / 2],
    ]
    return SplittingScheme(rows, name="Yoshida", order=4)


def yoshida_composition(N: int) -> SplittingScheme:
    """Triple jump ``(theta, 1 - 2 theta, theta)`` of Strang with operators in reverse."""
    _check_n("Yoshida", N)
    th = yoshida_theta()
    base = _strang_sequence(N, reverse=True)
    seq = [(l, w * a) for w in (th, 1 - 2 * th, th) for l, a in base]
    return SplittingScheme(_pack(seq, N), name="Yoshida-composition", order=4)


def yoshida(N: int) -> SplittingScheme:
    return yoshida_table(N) if N == 3 else yoshida_composition(N)


def clt2(N: int) -> SplittingScheme:
    _check_n("CLT2", N)
    vals = np.array([0.5 + 0.5j, 0.5 - 0.5j])
    return SplittingScheme(np.repeat(vals[:, None], N, axis=1), name="CLT2", order=2)


def clt3(N: int) -> SplittingScheme:
    _check_n("CLT3", N)
    r = 1.0 / (4.0 * np.sqrt(3.0))
    vals = np.array([
        complex(0.25 - r, 0.25 + r),
        complex(0.25 + r, -0.25 + r),
        complex(0.25 + r, 0.25 - r),
        complex(0.25 - r, -0.25 - r),
    ])
    return SplittingScheme(np.repeat(vals[:, None], N, axis=1), name="CLT3", order=3)


# -- GARK / multirate ----------------------------------------------------------


def imex_gark2(beta: float = 0.5) -> GarkTableau:
    """Stability-decoupled IMEX-GARK pair; operator 0 explicit, operator 1 implicit."""
    AEE = [[0, 0, 0], [0.5, 0, 0], [1 - beta, beta, 0]]
    AEI = [[0, 0], [0.5, 0], [0.5, 0.5]]
    AIE = [[0.25, 0, 0], [0.25, 0.5, 0]]
    AII = [[0.25, 0], [0.5, 0.25]]
    blocks = [[np.array(AEE, float), np.array(AEI, float)],
              [np.array(AIE, float), np.array(AII, float)]]
    return GarkTableau(blocks, [np.array([0.25, 0.5, 0.25]), np.array([0.5, 0.5])],
                       order=2, name="IMEX-GARK2")


def mrgark_ex2_im2() -> MrGarkMethod:
    r = 1.0 / np.sqrt(2.0)

    def A_FS(m, M):
        return np.array([[(m - 1) / M, 0.0], [(3 * m - 1) / (3 * M), 0.0]])

    def A_SF(m, M):
        first = [M - M * r, 0.0] if m == 1 else [0.0, 0.0]
        return np.array([first, [0.25, 0.75]])

    return MrGarkMethod(
        A_FF=[[0, 0], [2 / 3, 0]],
        A_SS=[[1 - r, 0], [r, 1 - r]],
        b_F=[0.25, 0.75],
        b_S=[r, 1 - r],
        A_FS=A_FS,
        A_SF=A_SF,
        order=2,
        name="MrGARK-EX2-IM2",
    )


def mri_irk2() -> MriMethod:
    G0 = np.zeros((4, 4))
    G0[1, 0] = 1
    G0[2, 0], G0[2, 2] = -0.5, 0.5
    return MriMethod([0, 1, 1, 1], [G0], order=2, name="MRI-IRK2")


MRI_ESDIRK3A_LAMBDA = 0.435866521508458999416019


def mri_esdirk3a() -> MriMethod:
    lam = MRI_ESDIRK3A_LAMBDA
    G0 = np.zeros((8, 8))
    G0[1, 0] = 1 / 3
    G0[2, 0], G0[2, 2] = -lam, lam
    G0[3, 0] = (3 - 10 * lam) / (24 * lam - 6)
    G0[3, 2] = (5 - 18 * lam) / (6 - 24 * lam)
    G0[4, 0] = (-24 * lam**2 + 6 * lam + 1) / (6 - 24 * lam)
    G0[4, 2] = (-48 * lam**2 + 12 * lam + 1) / (24 * lam - 6)
    G0[4, 4] = lam
    G0[5, 0] = (3 - 16 * lam) / (12 - 48 * lam)
    G0[5, 2] = (48 * lam**2 - 21 * lam + 2) / (12 * lam - 3)
    G0[5, 4] = (3 - 16 * lam) / 4
    G0[6, 0], G0[6, 6] = -lam, lam
    c = [0, 1 / 3, 1 / 3, 2 / 3, 2 / 3, 1, 1, 1]
    return MriMethod(c, [G0], order=3, name="MRI-ESDIRK3a")


IMEX3_LAMBDA = 0.4358665215084589994160194511935568425
IMEX3_C4 = 0.7179332607542294997080097255967784213


def mri_imex3() -> MriMethod:
    """Third-order IMEX-MRI method.

    ``Gamma0[3, 1]`` is ``-lambda`` (1-based); the positive value leaves a
    nonzero sum on a row whose abscissa increment is zero.
    """
    lam = IMEX3_LAMBDA
    G = np.zeros((8, 8))
    W = np.zeros((8, 8))
    G[1, 0] = lam
    G[2, 0], G[2, 2] = -lam, lam
    G[4, 4] = lam
    G[5, 0] = lam
    G[6, 0], G[6, 6] = -lam, lam
    G[3, 0] = -0.4103336962288525014599513720161078937
    G[4, 0] = 0.4103336962288525014599513720161078937
    G[3, 2] = 0.6924004354746230017519416464193294724
    G[4, 2] = -0.8462002177373115008759708232096647362
    G[5, 2] = 0.9264299099302395700444874096601015328
    G[5, 4] = -1.080229692192928069168516586450436797
    W[1, 0] = W[7, 6] = lam
    W[3, 0] = -0.5688715801234400928465032925317932021
    W[3, 2] = 0.8509383193692105931384935669350147809
    W[4, 0] = 0.454283944643608855878770886900124654
    W[4, 2] = -0.454283944643608855878770886900124654
    W[5, 0] = -0.4271371821005074011706645050390732474
    W[5, 2] = 0.1562747733103380821014660497037023496
    W[5, 4] = 0.5529291480359398193611887297385924765
    W[7, 0] = 0.105858296071879638722377459477184953
    W[7, 2] = 0.655567501140070250975288954324730635
    W[7, 4] = -1.197292318720408889113685864995472431
    c = [0, lam, lam, IMEX3_C4, IMEX3_C4, 1, 1, 1]
    return MriMethod(c, [G], [W], order=3, name="MRI-IMEX3")


# -- registry ------------------------------------------------------------------


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    kind: str
    order: int
    n_operators: int | str
    factory: Callable

    def payload(self, N: int | None = None):
        if self.kind == "Splitting":
            if N is None:
                N = self.n_operators if isinstance(self.n_operators, int) else 2
            return self.factory(N)
        return self.factory()


ENTRIES = (
    CatalogEntry("Godunov", "Splitting", 1, "any", godunov),
    CatalogEntry("Strang", "Splitting", 2, "any", strang),
    CatalogEntry("PP3_4A-3", "Splitting", 3, 3, pp3_4a3),
    CatalogEntry("Yoshida", "Splitting", 4, "any", yoshida),
    CatalogEntry("Yoshida-composition", "Splitting", 4, "any", yoshida_composition),
    CatalogEntry("CLT2", "Splitting", 2, "any", clt2),
    CatalogEntry("CLT3", "Splitting", 3, "any", clt3),
    CatalogEntry("IMEX-GARK2", "GarkMethod", 2, 2, imex_gark2),
    CatalogEntry("MrGARK-EX2-IM2", "MrGarkMethod", 2, 2, mrgark_ex2_im2),
    CatalogEntry("MRI-IRK2", "MriMethod", 2, 2, mri_irk2),
    CatalogEntry("MRI-ESDIRK3a", "MriMethod", 3, 2, mri_esdirk3a),
    CatalogEntry("MRI-IMEX3", "MriMethod", 3, 3, mri_imex3),
)

_ALIASES = {"liettrotter": "godunov", "lietrotter": "godunov", "strangmarchuk": "strang",
            "complexlietrotter2": "clt2", "complexlietrotter3": "clt3"}


def entries():
    return list(ENTRIES)


def lookup(name: str, kind: str | None = None) -> CatalogEntry:
    key = _key(name)
    key = _ALIASES.get(key, key)
    for e in ENTRIES:
        if _key(e.name) == key and (kind is None or e.kind == kind):
            return e
    names = [e.name for e in ENTRIES if kind is None or e.kind == kind]
    raise UsageError(f"unknown method {name!r}; available: {', '.join(names)}")


def get_splitting(name: str, N: int) -> SplittingScheme:
    return lookup(name, "Splitting").payload(N)


def get_gark(name: str) -> GarkTableau:
    return lookup(name, "GarkMethod").payload()


def get_mrgark(name: str) -> MrGarkMethod:
    return lookup(name, "MrGarkMethod").payload()


def get_mri(name: str) -> MriMethod:
    return lookup(name, "MriMethod").payload()
