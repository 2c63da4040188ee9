import numpy as np
import pytest

from opsplit.catalog import get_mri
from opsplit.core import AdditiveProblem, Operator, Tolerance, UsageError, zero_operator
from opsplit.mri import FastSolveConfig, MriMethod, gamma_bar, mri_solve, mri_step
from opsplit.onestep import NewtonConfig, adaptive_integrate, rk_step
from opsplit.tableaux import builtin

TIGHT = NewtonConfig(tol=1e-14)


def slow(t, y):
    return -y + np.sin(t)


def test_gamma_bar():
    G0, G1 = np.eye(2), 2 * np.eye(2)
    np.testing.assert_allclose(gamma_bar([G0, G1]), 2 * np.eye(2))


def test_irk2_without_fast_is_trapezoidal_rule():
    prob = AdditiveProblem([Operator(slow), zero_operator()], [1.0])
    y = mri_solve(prob, get_mri("MRI-IRK2"), 0.0, 1.0, 0.1, newton=TIGHT)
    z, t = np.array([1.0]), 0.0
    for _ in range(10):
        z = rk_step(builtin("ImplicitTrapezoidal"), slow, t, z, 0.1, TIGHT)
        t += 0.1
    np.testing.assert_allclose(y, z, rtol=0, atol=1e-12)


def test_esdirk3a_without_fast_is_third_order():
    exact = adaptive_integrate(builtin("DP54"), slow, 0.0, np.array([1.0]), 1.0, Tolerance(1e-13, 1e-13))
    dts = [0.1 / 2**k for k in range(4)]
    errs = []
    for h in dts:
        prob = AdditiveProblem([Operator(slow), zero_operator()], [1.0])
        errs.append(abs(mri_solve(prob, get_mri("MRI-ESDIRK3a"), 0.0, 1.0, h, newton=TIGHT) - exact)[0])
    assert abs(np.polyfit(np.log(dts), np.log(errs), 1)[0] - 3) <= 0.3


def test_zero_slow_reduces_to_fast_solve():
    def fast(t, y):
        return np.array([y[1], -4 * y[0]])

    prob = AdditiveProblem([zero_operator(), Operator(fast)], [1.0, 0.0])
    y = mri_solve(prob, get_mri("MRI-ESDIRK3a"), 0.0, 1.0, 0.25)
    np.testing.assert_allclose(y, [np.cos(2.0), -2 * np.sin(2.0)], atol=1e-8)


def test_imex3_third_order_on_scalar():
    fe = lambda t, y: 0.5 * np.sin(t) + 0 * y
    fi = lambda t, y: -y
    ff = lambda t, y: -3 * y + np.cos(t)
    total = lambda t, y: fe(t, y) + fi(t, y) + ff(t, y)
    exact = adaptive_integrate(builtin("DP54"), total, 0.0, np.array([1.0]), 1.0, Tolerance(1e-13, 1e-13))
    dts = [0.2 / 2**k for k in range(4)]
    errs = [abs(mri_solve(AdditiveProblem([fe, fi, ff], [1.0]), get_mri("MRI-IMEX3"), 0.0, 1.0, h)
                - exact)[0] for h in dts]
    assert abs(np.polyfit(np.log(dts), np.log(errs), 1)[0] - 3) <= 0.3


def test_complex_state_supported():
    prob = AdditiveProblem([lambda t, y: 1j * y, lambda t, y: -0.5 * y], [1.0 + 0j])
    y = mri_solve(prob, get_mri("MRI-ESDIRK3a"), 0.0, 1.0, 0.05)
    assert abs(y[0] - np.exp(1j - 0.5)) < 1e-5


def test_validation_rejects_bad_row_sums():
    G = np.zeros((3, 3))
    G[1, 0] = 0.4
    with pytest.raises(UsageError, match="row sums"):
        MriMethod([0, 0.5, 1.0], [G])


def test_validation_rejects_implicit_fast_stage():
    G = np.zeros((2, 2))
    G[1, 0] = G[1, 1] = 0.5
    with pytest.raises(UsageError, match="fast integration"):
        MriMethod([0, 1.0], [G])


def test_validation_rejects_bad_abscissae():
    with pytest.raises(UsageError):
        MriMethod([0.1, 1.0], [np.zeros((2, 2))])
    with pytest.raises(UsageError):
        MriMethod([0, 0.6, 0.3], [np.zeros((3, 3))])


def test_operator_layout_checked():
    prob = AdditiveProblem([zero_operator(), zero_operator()], [1.0])
    with pytest.raises(UsageError):
        mri_solve(prob, get_mri("MRI-IMEX3"), 0, 1, 0.1)
    with pytest.raises(UsageError):
        mri_step(slow, slow, slow, get_mri("MRI-IRK2"), 0.0, np.ones(1), 0.1)


def test_fast_tolerance_is_used():
    calls = []

    def fast(t, y):
        calls.append(1)
        return -y

    loose = FastSolveConfig(tol=Tolerance(1e-4, 1e-4))
    prob = AdditiveProblem([zero_operator(), Operator(fast)], [1.0])
    mri_solve(prob, get_mri("MRI-IRK2"), 0.0, 1.0, 0.5, fast=loose)
    n_loose = len(calls)
    calls.clear()
    mri_solve(prob, get_mri("MRI-IRK2"), 0.0, 1.0, 0.5)
    assert len(calls) > n_loose
