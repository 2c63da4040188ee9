"""Finite-difference semi-discretizations of the benchmark problems.

Every builder returns an :class:`~opsplit.core.AdditiveProblem` whose
operators carry analytic (sparse) Jacobians. ``meta`` records the canonical
spec used for reference caching, the time span, the sample times, the error
norm and an ``observable`` mapping states to the values compared.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from ..core import AdditiveProblem, Operator, UsageError


@dataclass(frozen=True)
class ProblemSpec:
    """Canonical description of a benchmark problem (hashable, JSON-able)."""

    name: str
    split: str = ""
    nx: int = 0
    params: dict = field(default_factory=dict)

    def canonical(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    def __hash__(self):
        return hash(self.canonical())


# -- 1-D difference matrices ---------------------------------------------------


def neumann_first(n_int: int, dx: float) -> sp.csr_matrix:
    """Central first derivative on ``n_int + 1`` nodes with ghost reflection."""
    m = n_int + 1
    D = sp.diags([-np.ones(m - 1), np.ones(m - 1)], [-1, 1], format="lil")
    # u_{-1} = u_1 and u_{m} = u_{m-2} cancel the derivative at both ends
    D[0, 1] = 0.0
    D[m - 1, m - 2] = 0.0
    return (D / (2 * dx)).tocsr()


def neumann_second(n_int: int, dx: float) -> sp.csr_matrix:
    m = n_int + 1
    L = sp.diags([np.ones(m - 1), -2 * np.ones(m), np.ones(m - 1)], [-1, 0, 1], format="lil")
    L[0, 1] = 2.0
    L[m - 1, m - 2] = 2.0
    return (L / dx**2).tocsr()


def _linear_operator(M: sp.spmatrix, name: str) -> Operator:
    M = M.tocsr()

    def f(t, y):
        return M @ y

    return Operator(f, jac=lambda t, y: M, name=name)


# -- 2-D advection-diffusion-reaction -------------------------------------------

ADR_DEFAULTS = {"alpha": -10.0, "epsilon": 0.01, "gamma": 100.0, "tf": 0.1}


def adr2d_initial(nx: int) -> np.ndarray:
    x = np.linspace(0.0, 1.0, nx + 1)
    X, Y = np.meshgrid(x, x, indexing="ij")
    return (256.0 * (X * Y * (1 - X) * (1 - Y)) ** 2 + 0.3).ravel()


def adr2d(nx: int = 40, split: str = "3", **params) -> AdditiveProblem:
    """``u_t = -alpha div(u) + epsilon lap(u) + gamma u (u - 1/2)(1 - u)`` on the unit square.

    Nodes are stored row-major with ``x`` as the slow index. ``split`` is
    ``"3"`` (advection, diffusion, reaction) or ``"4"`` (advection,
    x-diffusion, y-diffusion, reaction).
    """
    split = str(split).replace("-split", "")
    if split not in ("3", "4"):
        raise UsageError(f"ADR2D split must be '3' or '4', got {split!r}")
    if nx < 2:
        raise UsageError("nx must be at least 2")
    p = {**ADR_DEFAULTS, **params}
    dx = 1.0 / nx
    I = sp.identity(nx + 1, format="csr")
    D1, D2 = neumann_first(nx, dx), neumann_second(nx, dx)
    Dx, Dy = sp.kron(D1, I), sp.kron(I, D1)
    Lxx, Lyy = sp.kron(D2, I), sp.kron(I, D2)
    adv = _linear_operator(-p["alpha"] * (Dx + Dy), "advection")
    g = p["gamma"]

    def reaction(t, u):
        return g * u * (u - 0.5) * (1 - u)

    def reaction_jac(t, u):
        return sp.diags(g * (-3 * u**2 + 3 * u - 0.5), format="csr")

    react = Operator(reaction, jac=reaction_jac, name="reaction")
    eps = p["epsilon"]
    if split == "3":
        ops = [adv, _linear_operator(eps * (Lxx + Lyy), "diffusion"), react]
    else:
        ops = [adv, _linear_operator(eps * Lxx, "x-diffusion"),
               _linear_operator(eps * Lyy, "y-diffusion"), react]
    spec = ProblemSpec("adr2d", split, nx, {k: float(v) for k, v in p.items()})
    return AdditiveProblem(ops, adr2d_initial(nx), name=f"adr2d-{split}split",
                           meta={"spec": spec, "t0": 0.0, "tf": p["tf"], "samples": [p["tf"]],
                                 "norm": "l2"})


# -- complex-valued scalar ODE -----------------------------------------------


def _complex_observable(y):
    return y[..., 0]


def _real_observable(y):
    return y[..., 0] + 1j * y[..., 1]


def complex_ode(form: str = "complex", tf: float = 100.0) -> AdditiveProblem:
    """``u' = i u + 0.1 u - 0.1 u**3``, ``u(0) = 0.1``, split into three terms.

    ``form="complex"`` keeps the scalar complex state; ``form="real"`` uses
    ``(x, y)`` with ``u = x + i y``.
    """
    if form == "complex":
        def c1(t, u):
            return 1j * u

        def c2(t, u):
            return 0.1 * u

        def c3(t, u):
            return -0.1 * u**3

        ops = [
            Operator(c1, jac=lambda t, u: np.array([[1j]]), name="C1"),
            Operator(c2, jac=lambda t, u: np.array([[0.1 + 0j]]), name="C2"),
            Operator(c3, jac=lambda t, u: np.array([[-0.3 * u[0] ** 2]]), name="C3"),
        ]
        y0 = np.array([0.1 + 0j])
        obs = _complex_observable
    elif form == "real":
        R1 = np.array([[0.0, -1.0], [1.0, 0.0]])
        R2 = 0.1 * np.eye(2)

        def r3(t, z):
            x, y = z
            return np.array([0.3 * x * y**2 - 0.1 * x**3, -0.3 * x**2 * y + 0.1 * y**3])

        def r3_jac(t, z):
            x, y = z
            return np.array([[0.3 * y**2 - 0.3 * x**2, 0.6 * x * y],
                             [-0.6 * x * y, -0.3 * x**2 + 0.3 * y**2]])

        ops = [
            Operator(lambda t, z: R1 @ z, jac=lambda t, z: R1, name="R1"),
            Operator(lambda t, z: R2 @ z, jac=lambda t, z: R2, name="R2"),
            Operator(r3, jac=r3_jac, name="R3"),
        ]
        y0 = np.array([0.1, 0.0])
        obs = _real_observable
    else:
        raise UsageError(f"complex-ode form must be 'complex' or 'real', got {form!r}")
    samples = [float(t) for t in range(1, int(np.floor(tf)) + 1)] or [tf]
    spec = ProblemSpec("complex-ode", form, 0, {"tf": float(tf)})
    return AdditiveProblem(ops, y0, name=f"complex-ode-{form}",
                           meta={"spec": spec, "t0": 0.0, "tf": float(tf), "samples": samples,
                                 "norm": "mrms", "observable": obs})


# -- stiff Brusselator ----------------------------------------------------------

BRUSS_DEFAULTS = {"alpha": 1e-2, "rho": 1e-3, "a": 0.6, "b": 2.0, "epsilon": 1e-3, "tf": 3.0}
BRUSS_SPLITS = ("s-f", "e-i-f", "1-2")


def brusselator_initial(n: int, a: float, b: float) -> np.ndarray:
    x = np.linspace(0.0, 1.0, n)
    s = 0.1 * np.sin(np.pi * x)
    return np.column_stack([a + s, b / a + s, b + s]).ravel()


def brusselator(nx: int = 201, split: str = "s-f", **params) -> AdditiveProblem:
    """Stiff 1-D Brusselator on ``nx`` nodes with interleaved ``(u, v, w)`` storage.

    Boundary nodes are stationary (zero right-hand side in every operator).
    ``split`` selects ``[F_S, F_F]`` (``"s-f"``), ``[F_E, F_I, F_F]``
    (``"e-i-f"``) or ``[F_1, F_2]`` (``"1-2"``).
    """
    if split not in BRUSS_SPLITS:
        raise UsageError(f"Brusselator split must be one of {BRUSS_SPLITS}, got {split!r}")
    if nx < 3:
        raise UsageError("nx must be at least 3")
    p = {**BRUSS_DEFAULTS, **params}
    dx = 1.0 / (nx - 1)
    m = nx
    D1 = sp.diags([-np.ones(m - 1), np.ones(m - 1)], [-1, 1], format="lil") / (2 * dx)
    D2 = sp.diags([np.ones(m - 1), -2 * np.ones(m), np.ones(m - 1)], [-1, 0, 1],
                  format="lil") / dx**2
    interior = np.ones(m)
    interior[[0, -1]] = 0.0
    mask1 = sp.diags(interior)
    I3 = sp.identity(3, format="csr")
    adv = sp.kron(mask1 @ D1.tocsr(), I3).tocsr() * p["rho"]
    dif = sp.kron(mask1 @ D2.tocsr(), I3).tocsr() * p["alpha"]
    mask = np.repeat(interior, 3)
    a, b, eps = p["a"], p["b"], p["epsilon"]

    def reaction(t, y):
        u, v, w = y[0::3], y[1::3], y[2::3]
        out = np.empty_like(y)
        out[0::3] = a - (w + 1) * u + u * u * v
        out[1::3] = w * u - u * u * v
        out[2::3] = (b - w) / eps - w * u
        return out * mask

    rows = np.repeat(np.arange(3 * m), 3)
    cols = np.repeat(3 * np.arange(m), 9) + np.tile([0, 1, 2], 3 * m)

    def reaction_jac(t, y):
        u, v, w = y[0::3], y[1::3], y[2::3]
        blk = np.empty((m, 3, 3), dtype=np.result_type(y, float))
        blk[:, 0] = np.column_stack([-(w + 1) + 2 * u * v, u * u, -u])
        blk[:, 1] = np.column_stack([w - 2 * u * v, -u * u, u])
        blk[:, 2] = np.column_stack([-w, np.zeros_like(u), -1.0 / eps - u])
        blk *= interior[:, None, None]
        return sp.csr_matrix((blk.ravel(), (rows, cols)), shape=(3 * m, 3 * m))

    react = Operator(reaction, jac=reaction_jac, name="reaction")
    if split == "s-f":
        slow = adv + dif

        def f_slow(t, y):
            # same rounding as the three-way split
            return adv @ y + dif @ y

        ops = [Operator(f_slow, jac=lambda t, y: slow, name="slow"), react]
    elif split == "e-i-f":
        ops = [_linear_operator(adv, "advection"), _linear_operator(dif, "diffusion"), react]
    else:
        def f2(t, y):
            return dif @ y + reaction(t, y)

        ops = [_linear_operator(adv, "advection"),
               Operator(f2, jac=lambda t, y: dif + reaction_jac(t, y), name="diffusion+reaction")]
    spec = ProblemSpec("brusselator", split, nx, {k: float(v) for k, v in p.items()})
    return AdditiveProblem(ops, brusselator_initial(m, a, b), name=f"brusselator-{split}",
                           meta={"spec": spec, "t0": 0.0, "tf": p["tf"], "samples": [p["tf"]],
                                 "norm": "l2"})


# -- dispatch -------------------------------------------------------------------

PROBLEMS = ("adr2d", "complex-ode", "brusselator")


def build_problem(spec: ProblemSpec | str, **kwargs) -> AdditiveProblem:
    """Build a benchmark problem from a :class:`ProblemSpec` or a name plus options."""
    if isinstance(spec, str):
        spec = ProblemSpec(spec, kwargs.pop("split", ""), kwargs.pop("nx", 0), kwargs)
    params = dict(spec.params)
    if spec.name == "adr2d":
        return adr2d(spec.nx or 40, spec.split or "3", **params)
    if spec.name == "complex-ode":
        return complex_ode(spec.split or "complex", params.get("tf", 100.0))
    if spec.name == "brusselator":
        return brusselator(spec.nx or 201, spec.split or "s-f", **params)
    raise UsageError(f"unknown problem {spec.name!r}; choose from {', '.join(PROBLEMS)}")


def observe(prob: AdditiveProblem, y):
    obs = prob.meta.get("observable")
    return obs(np.asarray(y)) if obs is not None else np.asarray(y)
