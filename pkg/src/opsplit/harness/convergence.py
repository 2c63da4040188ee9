"""Convergence and work-precision studies."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import catalog
from ..ark import ArkMethod, ark_solve
from ..core import AdditiveProblem, SolverError, Tolerance, UsageError, l2_error, mrms_error
from ..fractional import fractional_step
from ..gark import gark_solve
from ..mri import DEFAULT_FAST, FastSolveConfig, mri_solve
from ..multirate import multirate_solve
from ..onestep import DEFAULT_NEWTON, NewtonConfig
from ..tableaux import builtin, builtin_names
from .problems import build_problem, observe
from .reference import reference_solution

WORKERS_ENV = "OPSPLIT_MAX_WORKERS"


def max_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError as exc:
            raise UsageError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
        return max(1, n)
    return max(1, min(4, os.cpu_count() or 1))


@dataclass(frozen=True)
class MethodSpec:
    """What to run: a catalog method (plus options) or a builtin RK tableau.

    ``sub`` is the sub-integrator for splittings (a name, a tableau, or a
    dict accepted by :class:`~opsplit.fractional.MethodMap`).
    """

    name: str
    sub: object = "RK4"
    M: int = 10
    fast: FastSolveConfig = DEFAULT_FAST
    newton: NewtonConfig = DEFAULT_NEWTON

    @property
    def label(self) -> str:
        entry = _entry(self.name)
        if entry is None:
            return self.name
        if entry.kind == "Splitting":
            sub = self.sub if isinstance(self.sub, str) else getattr(self.sub, "name", "custom")
            return f"{entry.name}+{sub}"
        if entry.kind == "MrGarkMethod":
            return f"{entry.name}(M={self.M})"
        return entry.name


def _entry(name):
    try:
        return catalog.lookup(name)
    except UsageError:
        return None


def make_solver(spec: MethodSpec):
    """``solve(prob, t0, tf, dt, save_steps)`` for ``spec``."""
    entry = _entry(spec.name)
    if entry is None:
        try:
            tab = builtin(spec.name)
        except UsageError:
            names = [e.name for e in catalog.entries()] + builtin_names()
            raise UsageError(f"unknown method {spec.name!r}; available: {', '.join(names)}") from None

        def solve(prob, t0, tf, dt, save_steps=False):
            mono = AdditiveProblem([prob.monolithic()], prob.y0, name=prob.name)
            return ark_solve(mono, ArkMethod([tab]), t0, tf, dt, spec.newton, save_steps)

        return solve
    kind = entry.kind
    if kind == "Splitting":
        def solve(prob, t0, tf, dt, save_steps=False):
            scheme = entry.payload(prob.n_operators)
            return fractional_step(prob, scheme, spec.sub, t0, tf, dt, spec.newton, save_steps)
    elif kind == "GarkMethod":
        g = entry.payload()

        def solve(prob, t0, tf, dt, save_steps=False):
            return gark_solve(prob, g, t0, tf, dt, spec.newton, save_steps)
    elif kind == "MrGarkMethod":
        meth = entry.payload()

        def solve(prob, t0, tf, dt, save_steps=False):
            return multirate_solve(prob, meth, spec.M, t0, tf, dt, spec.newton, save_steps)
    else:
        meth = entry.payload()

        def solve(prob, t0, tf, dt, save_steps=False):
            return mri_solve(prob, meth, t0, tf, dt, spec.fast, spec.newton, save_steps)
    return solve


def solve_samples(prob: AdditiveProblem, solve, dt, t0=None, samples=None):
    """Numerical states at the problem's sample times."""
    meta = prob.meta
    t0 = meta.get("t0", 0.0) if t0 is None else t0
    samples = list(meta.get("samples", [meta.get("tf")])) if samples is None else list(samples)
    tf = samples[-1]
    if len(samples) == 1:
        return np.array([solve(prob, t0, tf, dt)])
    ts, ys = solve(prob, t0, tf, dt, save_steps=True)
    out = []
    for s in samples:
        k = int(np.argmin(np.abs(ts - s)))
        if abs(ts[k] - s) > 1e-9 * max(1.0, abs(s)):
            raise UsageError(f"step {dt} does not land on sample time {s}")
        out.append(ys[k])
    return np.array(out)


def measure_error(prob: AdditiveProblem, ys, ref, norm: str) -> float:
    a, b = observe(prob, ys), observe(prob, ref)
    if norm == "mrms":
        return mrms_error(a, b)
    if norm == "l2":
        return l2_error(a[-1], b[-1])
    raise UsageError(f"unknown norm {norm!r}; use 'l2' or 'mrms'")


# -- slope fitting ------------------------------------------------------------------


def pairwise_orders(dts, errors) -> list[float]:
    out = []
    for (h0, e0), (h1, e1) in zip(zip(dts, errors), zip(dts[1:], errors[1:])):
        if e0 > 0 and e1 > 0 and np.isfinite(e0) and np.isfinite(e1):
            out.append(math.log(e0 / e1) / math.log(h0 / h1))
        else:
            out.append(float("nan"))
    return out


def select_window(dts, errors, max_jump: float = 0.5) -> tuple[int, int]:
    """Largest index range ``[i, j]`` whose successive pairwise orders differ by < ``max_jump``.

    Ties go to the smaller step sizes. Falls back to the finest usable pair.
    """
    p = pairwise_orders(dts, errors)
    best = None
    i = 0
    while i < len(p):
        if not np.isfinite(p[i]):
            i += 1
            continue
        j = i
        while j + 1 < len(p) and np.isfinite(p[j + 1]) and abs(p[j + 1] - p[j]) < max_jump:
            j += 1
        # pairwise orders i..j span points i..j+1
        cand = (i, j + 1)
        if best is None or cand[1] - cand[0] >= best[1] - best[0]:
            best = cand
        i = j + 1
    if best is None:
        raise SolverError("fewer than two usable error values; cannot fit an order")
    return best


def fit_order(dts, errors, window) -> float:
    i, j = window
    x = np.log(np.asarray(dts[i:j + 1], dtype=float))
    y = np.log(np.asarray(errors[i:j + 1], dtype=float))
    if x.size < 2 or not np.all(np.isfinite(y)):
        raise SolverError(f"window {window} does not contain two finite errors")
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class ConvergenceReport:
    dts: list
    errors: list
    observed_order: float
    window: tuple
    method: str = ""
    problem: str = ""
    norm: str = ""
    failures: dict = field(default_factory=dict)

    @property
    def pairwise(self) -> list[float]:
        return pairwise_orders(self.dts, self.errors)

    def rows(self):
        """``(dt, error, order_pairwise)``; the first row has no pairwise order."""
        p = [float("nan")] + self.pairwise
        return list(zip(self.dts, self.errors, p))


def _prepare(prob, dts):
    dts = [float(d) for d in dts]
    if len(dts) < 4:
        raise UsageError("a convergence study needs at least four step sizes")
    if any(b >= a for a, b in zip(dts, dts[1:])):
        raise UsageError("step sizes must be strictly decreasing")
    if isinstance(prob, AdditiveProblem):
        spec = prob.meta.get("spec")
        factory = (lambda: build_problem(spec)) if spec is not None else None
        return prob, factory, dts
    prob_obj = build_problem(prob)
    return prob_obj, (lambda: build_problem(prob)), dts


def _run_one(factory, base, solve, dt, ref, norm):
    prob = factory() if factory is not None else base
    ys = solve_samples(prob, solve, dt)
    return measure_error(prob, ys, ref, norm)


def run_convergence(prob, method: MethodSpec | str, dts, norm: str | None = None,
                    window: tuple | None = None, ref_tol: Tolerance | float | None = None,
                    workers: int | None = None) -> ConvergenceReport:
    """Sweep ``dts`` and fit the observed order.

    ``prob`` is an :class:`AdditiveProblem` or a problem spec. Independent
    runs execute in worker threads when the problem can be rebuilt from its
    spec (each thread owns a fresh instance). Failed runs are recorded with
    a NaN error and the fit skips them.
    """
    method = MethodSpec(method) if isinstance(method, str) else method
    base, factory, dts = _prepare(prob, dts)
    norm = norm or base.meta.get("norm", "l2")
    solve = make_solver(method)
    ref = reference_solution(base, tol=ref_tol)
    n_workers = workers or max_workers()
    if factory is None:
        n_workers = 1
    errors = [float("nan")] * len(dts)
    failures = {}

    def task(k):
        try:
            errors[k] = _run_one(factory, base, solve, dts[k], ref, norm)
        except SolverError as exc:
            failures[dts[k]] = str(exc)
        except FloatingPointError as exc:
            failures[dts[k]] = str(exc)

    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as pool:
            list(pool.map(task, range(len(dts))))
    else:
        for k in range(len(dts)):
            task(k)
    if window is None:
        window = select_window(dts, errors)
    else:
        window = tuple(int(w) for w in window)
        if not (0 <= window[0] < window[1] < len(dts)):
            raise UsageError(f"window {window} is outside 0..{len(dts) - 1}")
    order = fit_order(dts, errors, window)
    return ConvergenceReport(dts, errors, order, window, method.label, base.name, norm, failures)


# -- work-precision ------------------------------------------------------------------


@dataclass
class WorkRecord:
    dt: float
    error: float
    evals: list
    wall_seconds: float

    @property
    def total_evals(self) -> int:
        return int(sum(self.evals))


def run_work_precision(prob, method: MethodSpec | str, dts, norm: str | None = None,
                       ref_tol: Tolerance | float | None = None) -> list[WorkRecord]:
    """Error, per-operator evaluation counts and wall time for each ``dt`` (serial)."""
    method = MethodSpec(method) if isinstance(method, str) else method
    base = prob if isinstance(prob, AdditiveProblem) else build_problem(prob)
    norm = norm or base.meta.get("norm", "l2")
    solve = make_solver(method)
    ref = reference_solution(base, tol=ref_tol)
    out = []
    for dt in dts:
        base.reset_counts()
        start = time.perf_counter()
        ys = solve_samples(base, solve, float(dt))
        wall = time.perf_counter() - start
        out.append(WorkRecord(float(dt), measure_error(base, ys, ref, norm),
                              base.eval_counts(), wall))
    return out


def evals_at_error(records: list[WorkRecord], target: float) -> float:
    """Total evaluations at ``target`` error, log-log interpolated between runs."""
    pts = sorted((r.error, r.total_evals) for r in records if np.isfinite(r.error) and r.error > 0)
    for (e0, w0), (e1, w1) in zip(pts, pts[1:]):
        if e0 <= target <= e1:
            if e1 == e0:
                return float(min(w0, w1))
            s = (math.log(target) - math.log(e0)) / (math.log(e1) - math.log(e0))
            return float(math.exp(math.log(w0) + s * (math.log(w1) - math.log(w0))))
    raise UsageError(f"target error {target:g} is outside the measured range")
