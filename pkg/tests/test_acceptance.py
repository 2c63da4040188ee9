"""Acceptance suite: one printed PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to watch the lines as they
appear; they are also emitted with capture disabled so ``pytest -v`` shows them.
"""

import time

import numpy as np
import pytest

from opsplit import catalog
from opsplit.ark import ark_solve, tableau_pair
from opsplit.core import AdditiveProblem, Operator, Tolerance, wrms_norm, zero_operator
from opsplit.fractional import fractional_step
from opsplit.gark import gark_solve, gark_to_ark
from opsplit.harness import MethodSpec, ProblemSpec, evals_at_error, run_convergence, run_work_precision
from opsplit.harness.problems import adr2d
from opsplit.mri import FastSolveConfig, gamma_bar, mri_solve
from opsplit.multirate import fast_slow_problem, mrgark_expand, multirate_solve
from opsplit.onestep import NewtonConfig, adaptive_integrate, rk_step
from opsplit.tableaux import ButcherTableau, builtin, builtin_names, classify, order_residuals, TableauClass

TOL = 0.3
TIGHT = NewtonConfig(tol=1e-14)
FAST = FastSolveConfig(tol=Tolerance(atol=1e-12, rtol=1e-10))


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return emit


def sweep(prob, method, dts):
    rep = run_convergence(prob, method, dts)
    return rep.observed_order, rep


def order_gate(n, verdict, runs, budget, start):
    """``runs`` holds ``(label, expected, observed)``."""
    elapsed = time.perf_counter() - start
    ok = all(abs(obs - exp) <= TOL for _, exp, obs in runs) and elapsed < budget
    detail = "; ".join(f"{lab} {obs:.3f} (want {exp})" for lab, exp, obs in runs)
    return verdict(n, ok, f"{detail}; {elapsed:.1f}s (budget {budget:.0f}s)")


ADR_DTS = [1e-2 / 2**k for k in range(10)]


@pytest.mark.slow
def test_criterion_1_adr_three_split(verdict):
    start = time.perf_counter()
    spec = ProblemSpec("adr2d", "3", 40)
    cases = [("Godunov", "FE", 1, [1e-2 / 2**k for k in range(12)]),
             ("Strang", "Heun2", 2, ADR_DTS),
             ("PP3_4A-3", "Kutta3", 3, ADR_DTS),
             ("Yoshida", "RK4", 4, ADR_DTS)]
    runs = []
    for name, sub, p, dts in cases:
        obs, _ = sweep(spec, MethodSpec(name, sub=sub), dts)
        runs.append((f"{name}+{sub}", p, obs))
    assert order_gate(1, verdict, runs, 600, start)


@pytest.mark.slow
def test_criterion_2_adr_four_split(verdict):
    start = time.perf_counter()
    spec = ProblemSpec("adr2d", "4", 40)
    runs = []
    for name, sub, p in [("Strang", "Heun2", 2), ("CLT2", "Heun2", 2), ("CLT3", "Kutta3", 3)]:
        obs, _ = sweep(spec, MethodSpec(name, sub=sub), ADR_DTS)
        runs.append((f"{name}+{sub}", p, obs))
    # the CLT trajectories live in the complex field
    prob = adr2d(split="4")
    y = fractional_step(prob, catalog.get_splitting("CLT3", 4), "Kutta3", 0.0, 0.1, 1e-2 / 64)
    complex_ok = np.iscomplexobj(y) and np.abs(y.imag).max() > 0
    ok = order_gate(2, verdict, runs, 600, start) and complex_ok
    if not complex_ok:
        verdict(2, False, "CLT3 state was not complex-valued")
    assert ok


@pytest.mark.slow
def test_criterion_3_complex_ode(verdict):
    start = time.perf_counter()
    dts = [0.1, 0.05, 0.025, 0.0125, 0.00625]
    runs = []
    for form in ("complex", "real"):
        for name, p in [("Strang", 2), ("CLT2", 2), ("CLT3", 3)]:
            obs, rep = sweep(ProblemSpec("complex-ode", form), MethodSpec(name, sub="Kutta3"), dts)
            assert rep.norm == "mrms"
            runs.append((f"{name}+RK3/{form}", p, obs))
    assert order_gate(3, verdict, runs, 60, start)


@pytest.mark.slow
def test_criterion_4_brusselator(verdict):
    start = time.perf_counter()
    spec_sf = ProblemSpec("brusselator", "s-f", 201)
    dts = [0.1, 0.05, 0.025, 0.0125, 0.00625]
    cases = [("MRI-IRK2", spec_sf, 2, dts),
             ("MRI-ESDIRK3a", spec_sf, 3, dts),
             ("MRI-IMEX3", ProblemSpec("brusselator", "e-i-f", 201), 3, dts),
             ("IMEX-GARK2", ProblemSpec("brusselator", "1-2", 201), 2, dts),
             # explicit fast micro-steps are unstable for dt >= 0.025 at M=10
             ("MrGARK-EX2-IM2", spec_sf, 2, [0.0125 / 2**k for k in range(5)])]
    runs = []
    for name, spec, p, sweep_dts in cases:
        obs, _ = sweep(spec, MethodSpec(name, M=10, fast=FAST), sweep_dts)
        runs.append((name, p, obs))
    assert order_gate(4, verdict, runs, 1200, start)


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="both forms perform identical operator-evaluation counts "
                   "for fixed-step Strang+RK3, so 'fewer evaluations' cannot hold")
def test_criterion_5_complex_form_needs_fewer_evaluations(verdict):
    target = 1e-8
    recs, interp = {}, {}
    for form in ("complex", "real"):
        recs[form] = run_work_precision(ProblemSpec("complex-ode", form),
                                        MethodSpec("Strang", sub="Kutta3"), [5e-4, 4e-4])
        interp[form] = evals_at_error(recs[form], target)
    # runs at the same dt reach the same MRMS error (relative spread printed below),
    # so matched error means matched dt and the counts can be compared run by run
    spread = max(abs(c.error - r.error) / r.error for c, r in zip(recs["complex"], recs["real"]))
    ok = all(c.total_evals < r.total_evals for c, r in zip(recs["complex"], recs["real"]))
    counts = ", ".join(f"dt={c.dt:g}: complex {c.total_evals} vs real {r.total_evals} "
                       f"(MRMS {c.error:.2e})" for c, r in zip(recs["complex"], recs["real"]))
    verdict(5, ok, f"{counts}; relative error spread {spread:.1e}; log-log interpolated at "
                   f"{target:g}: complex {interp['complex']:.0f}, real {interp['real']:.0f}")
    assert ok


def random_linear(n_ops, dim, seed):
    rng = np.random.default_rng(seed)
    mats = [rng.normal(size=(dim, dim)) * 0.5 for _ in range(n_ops)]
    ops = [Operator(lambda t, y, M=M: M @ y, jac=lambda t, y, M=M: M) for M in mats]
    return AdditiveProblem(ops, rng.normal(size=dim))


def test_criterion_6_oracle_equivalences(verdict):
    checks = {}
    prob = random_linear(2, 4, 1)
    g = catalog.get_gark("IMEX-GARK2")
    a = gark_solve(prob, g, 0.0, 1.0, 0.1, TIGHT, strategy="coupled")
    b = ark_solve(prob, gark_to_ark(g), 0.0, 1.0, 0.1, TIGHT, strategy="coupled")
    checks["gark==ark(conversion)"] = (np.abs(a - b).max(), 1e-14)

    meth = catalog.get_mrgark("MrGARK-EX2-IM2")
    for M in (1, 2):
        a = multirate_solve(prob, meth, M, 0.0, 1.0, 0.1, TIGHT)
        b = gark_solve(fast_slow_problem(prob), mrgark_expand(meth, M), 0.0, 1.0, 0.1, TIGHT,
                       strategy="coupled")
        checks[f"multirate==gark(expand) M={M}"] = (np.abs(a - b).max(), 1e-12)

    def slow(t, y):
        return -y + np.sin(t)

    p = AdditiveProblem([Operator(slow), zero_operator()], [1.0])
    y = mri_solve(p, catalog.get_mri("MRI-IRK2"), 0.0, 1.0, 0.1, newton=TIGHT)
    z, t = np.array([1.0]), 0.0
    for _ in range(10):
        z = rk_step(builtin("ImplicitTrapezoidal"), slow, t, z, 0.1, TIGHT)
        t += 0.1
    checks["MRI-IRK2(zero fast)==trapezoid"] = (np.abs(y - z).max(), 1e-12)

    fast = ButcherTableau(meth.A_FF, meth.b_F, order=2)

    def f(t, y):
        return np.array([y[1], -y[0]]) * (1 + 0.1 * t)

    p = AdditiveProblem([zero_operator(), f], [1.0, 0.0])
    M = 3
    y = multirate_solve(p, meth, M, 0.0, 1.0, 0.1, TIGHT)
    z, t = np.array([1.0, 0.0]), 0.0
    for _ in range(10 * M):
        z = rk_step(fast, f, t, z, 0.1 / M)
        t += 0.1 / M
    checks["MrGARK(zero slow)==fast micro-steps"] = (np.abs(y - z).max(), 1e-12)

    prob = random_linear(2, 3, 2)
    y_split = fractional_step(prob, catalog.get_splitting("Godunov", 2), "FE", 0.0, 1.0, 0.1)
    ark = tableau_pair([[[0, 0], [1, 0]], [[0, 0], [0, 0]]], [[1, 0], [0, 1]])
    y_ark = ark_solve(prob, ark, 0.0, 1.0, 0.1)
    checks["Godunov(FE,FE)==2-stage ARK"] = (np.abs(y_split - y_ark).max(), 1e-12)

    ok = all(err <= tol for err, tol in checks.values())
    detail = "; ".join(f"{k} {err:.1e}<={tol:g}" for k, (err, tol) in checks.items())
    assert verdict(6, ok, detail)


def test_criterion_7_coefficient_validation(verdict):
    start = time.perf_counter()
    worst = 0.0
    exact = True
    for e in catalog.entries():
        N = e.n_operators if isinstance(e.n_operators, int) else 3
        e.payload(N)
    for name in ("Godunov", "Strang", "PP3_4A-3", "Yoshida", "CLT2", "CLT3"):
        alpha = catalog.get_splitting(name, 3).alpha
        worst = max(worst, np.abs(alpha.sum(axis=0) - 1).max())
        if name.startswith("CLT"):
            exact &= bool(np.all(alpha.sum(axis=0).imag == 0))
    row_err = 0.0
    for name in ("MRI-IRK2", "MRI-ESDIRK3a", "MRI-IMEX3"):
        m = catalog.get_mri(name)
        dc = np.diff(m.c, prepend=0.0)
        row_err = max(row_err, np.abs(gamma_bar(m.gammas).sum(axis=1) - dc).max())
        if m.omegas is not None:
            row_err = max(row_err, np.abs(gamma_bar(m.omegas).sum(axis=1) - dc).max())
    elapsed = time.perf_counter() - start
    ok = worst < 1e-13 and exact and row_err <= 1e-12 and elapsed < 1.0
    assert verdict(7, ok, f"splitting column sums {worst:.1e}, CLT sums exact={exact}, "
                          f"MRI row sums {row_err:.1e}; {elapsed:.2f}s")


def stability_function(tab, z):
    A, b, s = tab.A, tab.b, tab.s
    if classify(tab) is TableauClass.FULLY_IMPLICIT:
        Y = np.linalg.solve(np.eye(s) - z * A, np.ones(s))
    else:
        Y = np.zeros(s, dtype=complex)
        for i in range(s):
            Y[i] = (1 + z * (A[i, :i] @ Y[:i])) / (1 - z * A[i, i])
    return 1 + z * (b @ Y)


def test_criterion_8_one_step_engine(verdict):
    start = time.perf_counter()
    order_res = max(max(order_residuals(builtin(n)).values()) for n in builtin_names())
    stab = 0.0
    for n in builtin_names():
        tab = builtin(n)
        for z in (-0.3, -2.0 + 1.0j, 0.5j):
            y = rk_step(tab, lambda t, y, lam=z / 0.1: lam * y, 0.0, np.array([1.0 + 0j]), 0.1, TIGHT)
            stab = max(stab, abs(y[0] - stability_function(tab, z)))
    e = adaptive_integrate(builtin("DP54"), lambda t, y: y, 0.0, np.array([1.0]), np.pi * 1j,
                           Tolerance(1e-10, 1e-10))
    euler = abs(e[0] + 1)
    tol = Tolerance(1e-9, 1e-9)

    def f(t, y):
        return np.array([y[1], -np.sin(y[0])]) + 0.1 * t

    y0 = np.array([0.3, -0.2], dtype=complex)
    H = 0.7 + 0.4j
    y1 = adaptive_integrate(builtin("DP54"), f, 0.0, y0, H, tol)
    back = adaptive_integrate(builtin("DP54"), f, H, y1, -H, tol)
    trip = wrms_norm(back - y0, y0, tol)
    elapsed = time.perf_counter() - start
    ok = order_res < 1e-13 and stab < 1e-12 and euler < 1e-8 and trip <= 10 and elapsed < 10
    assert verdict(8, ok, f"order residuals {order_res:.1e}, stability {stab:.1e}, "
                          f"|e^(i pi)+1| {euler:.1e}, round trip {trip:.2f} tol units; {elapsed:.2f}s")
