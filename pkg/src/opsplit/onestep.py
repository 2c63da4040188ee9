"""Single-step machinery: Newton, additive RK stage solves, adaptive integration.

The stage solver here handles any list of ``N`` tableaux sharing ``s`` stages,
so plain RK (``N = 1``), ARK, GARK (after conversion) and MrGARK all run
through :class:`StageScheme`.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import (
    NewtonError,
    StepFailure,
    StepSizeError,
    Tolerance,
    UsageError,
    wrms_norm,
)
from .tableaux import ButcherTableau, EmbeddedTableau, TableauClass, classify


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-12
    max_iter: int = 50
    fd_epsilon: float = 1e-8

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1 or self.fd_epsilon <= 0:
            raise UsageError(f"invalid Newton configuration {self}")


@dataclass(frozen=True)
class StepControllerConfig:
    safety: float = 0.9
    min_factor: float = 0.2
    max_factor: float = 5.0
    h_init_fraction: float = 1e-2

    def __post_init__(self):
        if not (0 < self.min_factor < 1 < self.max_factor and 0 < self.safety < 1):
            raise UsageError(f"invalid controller configuration {self}")
        if self.h_init_fraction <= 0:
            raise UsageError("h_init_fraction must be positive")


DEFAULT_NEWTON = NewtonConfig()
DEFAULT_CONTROLLER = StepControllerConfig()


# ----------------------------------------------------------------------------
# Newton


def fd_jacobian(fun, x, fx, eps: float):
    """One-sided finite-difference Jacobian with increments ``eps*(1+|x_j|)``."""
    n = x.size
    J = np.empty((fx.size, n), dtype=np.result_type(fx, x))
    xp = x.copy()
    for j in range(n):
        e = eps * (1.0 + abs(x[j]))
        xp[j] = x[j] + e
        J[:, j] = (fun(xp) - fx) / e
        xp[j] = x[j]
    return J


def _linear_solve(J, r):
    with np.errstate(divide="ignore", invalid="ignore"):
        if sp.issparse(J):
            dx = spla.spsolve(sp.csc_matrix(J), r)
        else:
            try:
                dx = scipy.linalg.solve(J, r, check_finite=False)
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
                raise NewtonError(f"singular Jacobian: {exc}") from exc
    if not np.all(np.isfinite(dx)):
        raise NewtonError("singular Jacobian (non-finite Newton update)")
    return dx


def newton_solve(residual, guess, cfg: NewtonConfig = DEFAULT_NEWTON, jac=None):
    """Solve ``residual(x) = 0`` by Newton's method.

    Convergence is declared when the residual, or the last Newton update, has
    WRMS norm at most one with ``atol = rtol = cfg.tol``. ``jac(x)`` may return
    a dense array or a scipy sparse matrix; without it the Jacobian is
    rebuilt by finite differences every iteration.
    """
    x = np.array(guess, copy=True)
    tol = Tolerance(cfg.tol, cfg.tol)
    rnorm = float("nan")
    for _ in range(cfg.max_iter):
        r = residual(x)
        if r.dtype != x.dtype:
            x = x.astype(np.result_type(x, r))
        rnorm = wrms_norm(r, x, tol)
        if not np.isfinite(rnorm):
            raise NewtonError("residual is not finite", rnorm)
        if rnorm <= 1.0:
            return x
        J = jac(x) if jac is not None else fd_jacobian(residual, x, r, cfg.fd_epsilon)
        dx = _linear_solve(J, r)
        x = x - dx
        if wrms_norm(dx, x, tol) <= 1.0:
            return x
    raise NewtonError(f"Newton did not converge in {cfg.max_iter} iterations "
                      f"(residual WRMS {rnorm:.3e})", rnorm)


def operator_jacobian(op, t, y, eps: float):
    jac = getattr(op, "jac", None)
    if jac is not None:
        return jac(t, y)
    fy = op(t, y)
    return fd_jacobian(lambda z: op(t, z), y, fy, eps)


# ----------------------------------------------------------------------------
# stage dependency ordering


class StageCycleError(UsageError):
    """Stages are mutually dependent; no sequential order exists."""

    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("stages are coupled through the cycle " + " -> ".join(map(str, self.cycle)))


def topological_stage_order(deps: list[set]) -> list[int]:
    """Smallest-index-first topological order of stages.

    ``deps[i]`` holds the stages (other than ``i``) that stage ``i`` needs.
    """
    s = len(deps)
    users = [[] for _ in range(s)]
    indeg = [0] * s
    for i, d in enumerate(deps):
        indeg[i] = len(d)
        for j in d:
            users[j].append(i)
    ready = [i for i in range(s) if indeg[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        j = heapq.heappop(ready)
        order.append(j)
        for i in users[j]:
            indeg[i] -= 1
            if indeg[i] == 0:
                heapq.heappush(ready, i)
    if len(order) < s:
        left = set(range(s)) - set(order)
        node = min(left)
        seen = []
        while node not in seen:
            seen.append(node)
            node = min(j for j in deps[node] if j in left)
        raise StageCycleError(seen[seen.index(node):] + [node])
    return order


# ----------------------------------------------------------------------------
# additive stage solver


class StageScheme:
    """Stage structure of an additive RK method with ``N`` tableaux of ``s`` stages.

    Stage ``i`` obeys ``Y_i = y + h sum_l sum_j A_l[i, j] F_l(t + c_l[j] h, Y_j)``
    and the step is ``y + h sum_l sum_i b_l[i] F_l(t + c_l[i] h, Y_i)``.
    Each ``F_l(., Y_j)`` is evaluated once, and only when some coefficient
    multiplies it.
    """

    def __init__(self, As, bs, cs=None, b_hats=None, order=None):
        self.As = [np.asarray(A) for A in As]
        self.bs = [np.asarray(b) for b in bs]
        self.N = len(self.As)
        if self.N == 0 or len(self.bs) != self.N:
            raise UsageError("need one (A, b) pair per operator")
        s = self.As[0].shape[0]
        for A, b in zip(self.As, self.bs):
            if A.shape != (s, s) or b.shape != (s,):
                raise UsageError("all tableaux must share the same stage count")
        self.s = s
        self.cs = [A.sum(axis=1) if c is None else np.asarray(c)
                   for A, c in zip(self.As, cs or [None] * self.N)]
        self.b_hats = None if b_hats is None else [np.asarray(b) for b in b_hats]
        self.coef_dtype = np.result_type(*self.As, *self.bs, *self.cs)

        nz = [A != 0 for A in self.As]
        self.needed = [m.any(axis=0) | (b != 0) for m, b in zip(nz, self.bs)]
        if self.b_hats is not None:
            self.needed = [n | (bh != 0) for n, bh in zip(self.needed, self.b_hats)]
        joint = np.zeros((s, s), dtype=bool)
        for m in nz:
            joint |= m
        self.joint = joint
        self.deps = [set(np.flatnonzero(joint[i])) - {i} for i in range(s)]
        self.diag = [[l for l in range(self.N) if self.As[l][i, i] != 0] for i in range(s)]
        # (l, j, a) triples for the explicit part of each stage row
        self.rows = [
            [(l, j, self.As[l][i, j]) for l in range(self.N) for j in np.flatnonzero(nz[l][i]) if j != i]
            for i in range(s)
        ]
        lower = all(all(j < i for j in d) for i, d in enumerate(self.deps))
        self.natural = lower
        try:
            self.sequential_order = list(range(s)) if lower else topological_stage_order(self.deps)
        except StageCycleError:
            self.sequential_order = None
        self.b_terms = self._terms(self.bs)
        self.e_terms = (None if self.b_hats is None
                        else self._terms([b - bh for b, bh in zip(self.bs, self.b_hats)]))
        self.order = order

    @staticmethod
    def _terms(weights):
        return [(l, j, w[j]) for l, w in enumerate(weights) for j in np.flatnonzero(w)]

    @classmethod
    def from_tableaux(cls, tabs):
        tabs = list(tabs)
        embedded = all(isinstance(t, EmbeddedTableau) for t in tabs)
        return cls(
            [t.A for t in tabs], [t.b for t in tabs], [t.c for t in tabs],
            [t.b_hat for t in tabs] if embedded else None,
            order=min(t.order for t in tabs),
        )

    @property
    def structure(self) -> TableauClass:
        """Joint classification over all operators (in natural stage order)."""
        if not self.natural:
            return TableauClass.FULLY_IMPLICIT
        if any(self.diag):
            return TableauClass.DIAGONALLY_IMPLICIT
        return TableauClass.EXPLICIT

    # -- stage solves --------------------------------------------------------

    def stages(self, ops, t, y, h, newton=DEFAULT_NEWTON, strategy="auto", order=None):
        """Return ``K[l][j] = F_l(t + c_l[j] h, Y_j)`` (``None`` where unused)."""
        if strategy not in ("auto", "sequential", "coupled"):
            raise UsageError(f"unknown stage strategy {strategy!r}")
        if order is None and strategy != "coupled":
            order = self.sequential_order
            if order is None:
                if strategy == "sequential":
                    raise StageCycleError(["coupled stages"])
                strategy = "coupled"
        if strategy == "coupled":
            return self._coupled(ops, t, y, h, newton)
        return self._sequential(ops, t, y, h, newton, order)

    def _sequential(self, ops, t, y, h, newton, order):
        K = [[None] * self.s for _ in range(self.N)]
        trusted = order is self.sequential_order
        done = set()
        for i in order:
            if not trusted:
                missing = self.deps[i] - done
                if missing:
                    raise UsageError(f"stage {i} scheduled before its dependencies {sorted(missing)}")
                done.add(i)
            rhs = y
            for l, j, a in self.rows[i]:
                rhs = rhs + (h * a) * K[l][j]
            diag = self.diag[i]
            if diag:
                Yi = self._implicit_stage(ops, t, y, h, newton, i, rhs, diag)
            else:
                Yi = rhs
            for l in range(self.N):
                if self.needed[l][i]:
                    K[l][i] = ops[l](t + self.cs[l][i] * h, Yi)
        return K

    def _implicit_stage(self, ops, t, y, h, newton, i, rhs, diag):
        coefs = [(l, h * self.As[l][i, i], t + self.cs[l][i] * h) for l in diag]

        def residual(Y):
            r = Y - rhs
            for l, ha, tl in coefs:
                r = r - ha * ops[l](tl, Y)
            return r

        jac = None
        if all(getattr(ops[l], "jac", None) is not None for l, _, _ in coefs):
            n = y.size

            def jac(Y):
                J = None
                for l, ha, tl in coefs:
                    Jl = ops[l].jac(tl, Y)
                    J = -ha * Jl if J is None else J - ha * Jl
                if sp.issparse(J):
                    return sp.identity(n, dtype=J.dtype, format="csc") + J
                return np.eye(n, dtype=J.dtype) + J

        guess = np.asarray(y, dtype=np.result_type(y, rhs))
        try:
            return newton_solve(residual, guess, newton, jac)
        except NewtonError as exc:
            raise StepFailure(f"implicit stage solve failed: {exc}", stage=i, t=t) from exc

    def _coupled(self, ops, t, y, h, newton):
        s, N, n = self.s, self.N, y.size
        cols = [[j for j in range(s) if self.As[l][:, j].any()] for l in range(N)]
        dtype = np.result_type(y, self.coef_dtype, np.asarray(h))

        def evals(Z):
            Y = Z.reshape(s, n)
            return {(l, j): ops[l](t + self.cs[l][j] * h, Y[j]) for l in range(N) for j in cols[l]}

        def residual(Z):
            Y = Z.reshape(s, n)
            F = evals(Z)
            R = Y - y
            for (l, j), f in F.items():
                R = R - (h * self.As[l][:, j])[:, None] * f[None, :]
            return R.ravel()

        def jac(Z):
            Y = Z.reshape(s, n)
            blocks = [[None] * s for _ in range(s)]
            use_sparse = False
            for l in range(N):
                for j in cols[l]:
                    Jl = operator_jacobian(ops[l], t + self.cs[l][j] * h, Y[j], newton.fd_epsilon)
                    use_sparse |= sp.issparse(Jl)
                    for i in range(s):
                        a = self.As[l][i, j]
                        if a != 0:
                            term = -(h * a) * Jl
                            blocks[i][j] = term if blocks[i][j] is None else blocks[i][j] + term
            if use_sparse:
                eye = sp.identity(n, dtype=dtype, format="csr")
                for i in range(s):
                    blocks[i][i] = eye if blocks[i][i] is None else eye + blocks[i][i]
                return sp.bmat(blocks, format="csc")
            J = np.zeros((s * n, s * n), dtype=dtype)
            for i in range(s):
                for j in range(s):
                    if blocks[i][j] is not None:
                        J[i * n:(i + 1) * n, j * n:(j + 1) * n] = blocks[i][j]
                J[i * n:(i + 1) * n, i * n:(i + 1) * n] += np.eye(n)
            return J

        guess = np.tile(np.asarray(y, dtype=dtype), s)
        try:
            Z = newton_solve(residual, guess, newton, jac)
        except NewtonError as exc:
            raise StepFailure(f"coupled stage solve failed: {exc}", t=t) from exc
        Y = Z.reshape(s, n)
        K = [[None] * s for _ in range(N)]
        for l in range(N):
            for j in range(s):
                if self.needed[l][j]:
                    K[l][j] = ops[l](t + self.cs[l][j] * h, Y[j])
        return K

    def combine(self, y, h, K, terms):
        """``y + h sum w K[l][j]`` over ``(l, j, w)`` terms."""
        out = y
        for l, j, w in terms:
            out = out + (h * w) * K[l][j]
        return out

    def step(self, ops, t, y, h, newton=DEFAULT_NEWTON, strategy="auto", order=None):
        """One step; returns ``(y_new, error_estimate_or_None)``."""
        if h == 0:
            return np.array(y, copy=True), (np.zeros_like(y) if self.b_hats is not None else None)
        K = self.stages(ops, t, y, h, newton, strategy, order)
        y_new = self.combine(y, h, K, self.b_terms)
        err = None
        if self.e_terms is not None:
            err = self.combine(np.zeros_like(y_new), h, K, self.e_terms)
        return y_new, err


def rk_step(tab: ButcherTableau, f, t, y, h, newton: NewtonConfig = DEFAULT_NEWTON, strategy="auto"):
    """One step of a single RK method; ``h`` may be negative or complex."""
    y = np.asarray(y)
    if h == 0:
        return y.copy()
    scheme = _scheme_cache(tab)
    y_new, _ = scheme.step([f], t, y, h, newton, strategy)
    return y_new


_SCHEMES: dict = {}


def _scheme_cache(tab):
    key = id(tab)
    hit = _SCHEMES.get(key)
    if hit is None or hit[0] is not tab:
        if len(_SCHEMES) > 256:
            _SCHEMES.clear()
        hit = (tab, StageScheme([tab.A], [tab.b], [tab.c]))
        _SCHEMES[key] = hit
    return hit[1]


# ----------------------------------------------------------------------------
# adaptive integration along a ray in the complex time plane


@dataclass
class AdaptiveStats:
    accepted: int = 0
    rejected: int = 0
    last_h: float = 0.0


def integrate_ray(pair: EmbeddedTableau, f, t0, y0, H, tol: Tolerance,
                  ctrl: StepControllerConfig = DEFAULT_CONTROLLER, h0=None, stats=None):
    """Adaptive explicit embedded RK from ``t0`` to ``t0 + H`` on a straight line.

    With ``d = H/|H|`` this solves ``v'(tau) = d f(t0 + tau d, v)`` for real
    ``tau`` in ``[0, |H|]``. ``h0`` overrides the initial (real) step length.
    """
    if classify(pair) is not TableauClass.EXPLICIT:
        raise UsageError("adaptive integration needs an explicit embedded pair")
    y0 = np.asarray(y0)
    if H == 0:
        return y0.copy()
    L = abs(H)
    d = H / L
    complex_dir = isinstance(d, complex) or np.iscomplexobj(d)
    if complex_dir and np.imag(d) == 0:
        d = float(np.real(d))
        complex_dir = False
    v = np.asarray(y0)
    k_first = d * f(t0, v)
    dtype = np.result_type(v, k_first, np.complex128 if complex_dir else np.float64)
    v = np.array(v, dtype=dtype)
    A, b, c, e = pair.A, pair.b, pair.c, pair.b - pair.b_hat
    s = pair.s
    # first-same-as-last: final stage is evaluated at the accepted solution
    fsal = c[0] == 0 and c[-1] == 1 and np.array_equal(A[-1], b)
    expo = -1.0 / (pair.order_hat + 1)
    hmin = 1e-12 * L
    hs = min(L, h0 if h0 else ctrl.h_init_fraction * L)
    tau = 0.0
    K = np.empty((s, v.size), dtype=dtype)
    stats = stats if stats is not None else AdaptiveStats()
    rows = [np.flatnonzero(A[i, :i]) for i in range(s)]
    bnz, enz = np.flatnonzero(b), np.flatnonzero(e)
    while tau < L:
        last = hs >= L - tau
        if last:
            hs = L - tau
        K[0] = k_first
        for i in range(1, s):
            Yi = v
            if rows[i].size:
                Yi = v + hs * (A[i, rows[i]] @ K[rows[i]])
            K[i] = d * f(t0 + (tau + c[i] * hs) * d, Yi)
        y_high = v + hs * (b[bnz] @ K[bnz])
        err = hs * (e[enz] @ K[enz])
        est = wrms_norm(err, y_high, tol)
        if not np.isfinite(est):
            est = np.inf
        if est <= 1.0:
            v = y_high
            tau = L if last else tau + hs
            stats.accepted += 1
            stats.last_h = hs
            if tau < L:
                k_first = K[-1].copy() if fsal else d * f(t0 + tau * d, v)
        else:
            stats.rejected += 1
        factor = ctrl.max_factor if est == 0 else ctrl.safety * est**expo
        hs = hs * min(ctrl.max_factor, max(ctrl.min_factor, factor))
        if tau < L and hs < hmin:
            raise StepSizeError(
                f"step size {hs:.3e} fell below {hmin:.3e} at tau={tau:.6g} of {L:.6g}; "
                "the problem may be too stiff for an explicit pair or the tolerance too tight"
            )
    return v


def adaptive_integrate(pair: EmbeddedTableau, f, t0, y0, H, tol: Tolerance,
                       ctrl: StepControllerConfig = DEFAULT_CONTROLLER):
    """Integrate ``y' = f(t, y)`` from ``t0`` to ``t0 + H`` (``H`` real or complex)."""
    return integrate_ray(pair, f, t0, y0, H, tol, ctrl)
