import csv
import io
import os

import numpy as np
import pytest

from opsplit.core import AdditiveProblem, Tolerance, UsageError, zero_operator
from opsplit.harness import (
    MethodSpec,
    ProblemSpec,
    build_problem,
    reference_solution,
    run_convergence,
    run_work_precision,
    select_window,
)
from opsplit.harness.cli import main
from opsplit.harness.convergence import fit_order, max_workers, pairwise_orders
from opsplit.harness.problems import adr2d, brusselator, complex_ode
from opsplit.harness.reference import MAGIC, cache_dir, cache_key


def test_brusselator_splits_regroup():
    y = brusselator(split="s-f").y0
    sums = [brusselator(split=s).rhs(0.0, y) for s in ("s-f", "e-i-f", "1-2")]
    np.testing.assert_allclose(sums[0], sums[1], rtol=0, atol=1e-14)
    np.testing.assert_allclose(sums[0], sums[2], rtol=1e-14, atol=1e-12)


def test_brusselator_layout_and_boundaries():
    prob = brusselator(nx=21)
    assert prob.n == 63
    np.testing.assert_allclose(prob.y0[:3], [0.6, 2 / 0.6, 2.0])
    f = prob.rhs(0.0, prob.y0 + 0.1)
    np.testing.assert_array_equal(f[:3], 0)
    np.testing.assert_array_equal(f[-3:], 0)


def test_adr_splits_agree():
    a, b = adr2d(split="3"), adr2d(split="4")
    np.testing.assert_allclose(a.rhs(0, a.y0), b.rhs(0, b.y0), rtol=0, atol=1e-13)
    assert a.n == 41 * 41


def test_adr_initial_condition_row_major():
    y = adr2d(nx=4).y0.reshape(5, 5)
    x = 0.25
    assert y[1, 2] == pytest.approx(256 * (x * 0.5 * (1 - x) * 0.5) ** 2 + 0.3)


def test_complex_ode_operators():
    prob = complex_ode("complex")
    total = sum(op(0.0, np.array([0.1 + 0j])) for op in prob.operators)
    assert total[0] == pytest.approx(1j * 0.1 + 0.01 - 0.0001)
    real = complex_ode("real")
    z = np.array([0.3, -0.2])
    u = complex(*z)
    r = real.rhs(0.0, z)
    c = 1j * u + 0.1 * u - 0.1 * u**3
    assert complex(*r) == pytest.approx(c)


def test_invalid_split_names():
    for kw in ({"name": "adr2d", "split": "5"}, {"name": "brusselator", "split": "x"},
               {"name": "complex-ode", "split": "quaternion"}, {"name": "nope"}):
        with pytest.raises(UsageError):
            build_problem(ProblemSpec(**kw))


def test_reference_zero_rhs_returns_initial_state():
    prob = AdditiveProblem([zero_operator()], [1.0, 2.0])
    ref = reference_solution(prob, [0.5, 1.0], Tolerance(1e-10, 1e-10), t0=0.0)
    np.testing.assert_array_equal(ref, [[1.0, 2.0], [1.0, 2.0]])


def test_reference_cache_roundtrip(tmp_path, monkeypatch):
    monkeypatch.setenv("OPSPLIT_CACHE_DIR", str(tmp_path))
    prob = complex_ode("complex", tf=2.0)
    tol = Tolerance(1e-10, 1e-10)
    first = reference_solution(prob, tol=tol)
    files = list(tmp_path.glob("*.ref"))
    assert len(files) == 1 and files[0].read_bytes().startswith(MAGIC)
    assert files[0].stem == cache_key(prob, 0.0, prob.meta["samples"], tol)
    np.testing.assert_array_equal(reference_solution(prob, tol=tol), first)
    assert cache_key(prob, 0.0, [1.0, 2.0], Tolerance(1e-11, 1e-11)) != files[0].stem
    assert cache_dir() == tmp_path


def test_complex_and_real_references_agree():
    c = reference_solution(complex_ode("complex"))
    r = reference_solution(complex_ode("real"))
    assert abs(c[-1, 0] - complex(*r[-1])) < 1e-8


def test_adr_reference_self_consistent():
    prob = adr2d()
    a = reference_solution(prob, tol=1e-12)
    b = reference_solution(prob, tol=1e-13)
    assert np.linalg.norm(a[-1] - b[-1]) < 1e-10


def test_strang_complex_and_real_forms_agree():
    spec = MethodSpec("Strang", sub="rk3")
    from opsplit.harness.convergence import make_solver, solve_samples

    solve = make_solver(spec)
    pc, pr = complex_ode("complex"), complex_ode("real")
    yc = solve_samples(pc, solve, 0.05)[:, 0]
    yr = solve_samples(pr, solve, 0.05)
    yr = yr[:, 0] + 1j * yr[:, 1]
    refc = reference_solution(pc)[:, 0]
    refr = reference_solution(pr)
    refr = refr[:, 0] + 1j * refr[:, 1]
    bound = np.abs(yc - refc).max() + np.abs(yr - refr).max()
    assert np.abs(yc - yr).max() <= bound


def test_forward_euler_convergence_monolithic():
    prob = AdditiveProblem([lambda t, y: y], [1.0],
                           meta={"t0": 0.0, "tf": 1.0, "samples": [1.0], "norm": "l2"})
    rep = run_convergence(prob, MethodSpec("FE"), [2.0**-k for k in range(4, 10)])
    assert 0.8 <= rep.observed_order <= 1.2
    assert len(rep.rows()) == 6


def test_strang_heun_on_adr():
    rep = run_convergence(ProblemSpec("adr2d", "3", 40), MethodSpec("Strang", sub="heun"),
                          [1e-2 / 2**k for k in range(2, 8)])
    assert 1.7 <= rep.observed_order <= 2.3


def test_clt3_rk3_on_complex_ode():
    rep = run_convergence(ProblemSpec("complex-ode", "complex"), MethodSpec("CLT3", sub="rk3"),
                          [0.1, 0.05, 0.025, 0.0125])
    assert 2.7 <= rep.observed_order <= 3.3


def test_window_selection():
    dts = [1, 0.5, 0.25, 0.125, 0.0625]
    errs = [np.nan, 10.0, 0.1, 0.025, 0.00625]
    assert select_window(dts, errs) == (2, 4)
    assert fit_order(dts, errs, (2, 4)) == pytest.approx(2.0)
    p = pairwise_orders(dts, errs)
    assert np.isnan(p[0]) and p[-1] == pytest.approx(2.0)


def test_manual_window_and_validation():
    prob = AdditiveProblem([lambda t, y: y], [1.0],
                           meta={"t0": 0.0, "tf": 1.0, "samples": [1.0], "norm": "l2"})
    rep = run_convergence(prob, "FE", [0.1, 0.05, 0.025, 0.0125], window=(2, 3))
    assert rep.window == (2, 3)
    with pytest.raises(UsageError):
        run_convergence(prob, "FE", [0.1, 0.05, 0.025])
    with pytest.raises(UsageError):
        run_convergence(prob, "FE", [0.1, 0.2, 0.025, 0.01])


def test_failed_runs_leave_gaps():
    rep = run_convergence(ProblemSpec("brusselator", "s-f", 21, {"tf": 0.1}),
                          MethodSpec("MrGARK-EX2-IM2"), [0.1, 0.05, 0.0025, 0.00125, 0.000625])
    assert rep.failures and np.isnan(rep.errors[0])
    assert rep.window[0] >= 2


def test_work_precision_counts():
    recs = run_work_precision(ProblemSpec("complex-ode", "complex", params={"tf": 2.0}),
                              MethodSpec("Strang", sub="rk3"), [0.1, 0.05])
    # three RK3 stages per sub-step; Strang has 5 sub-steps over 3 operators
    assert recs[0].evals == [2 * 3 * 20, 2 * 3 * 20, 3 * 20]
    assert recs[1].total_evals == 2 * recs[0].total_evals


def test_worker_env(monkeypatch):
    monkeypatch.setenv("OPSPLIT_MAX_WORKERS", "1")
    assert max_workers() == 1
    monkeypatch.setenv("OPSPLIT_MAX_WORKERS", "x")
    with pytest.raises(UsageError):
        max_workers()


# -- CLI ---------------------------------------------------------------------------


def test_cli_list_methods(capsys):
    assert main(["list-methods"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert "MRI-IMEX3,MriMethod,3,3" in lines
    assert all(len(line.split(",")) == 4 for line in lines)


def test_cli_converge_csv_is_deterministic(capsys):
    args = ["converge", "--problem", "complex-ode", "--form", "complex", "--scheme", "clt3",
            "--sub", "rk3", "--dts", "0.1,0.05,0.025,0.0125"]
    assert main(args) == 0
    first = capsys.readouterr().out
    assert main(args) == 0
    assert capsys.readouterr().out == first
    rows = list(csv.reader(io.StringIO(first)))
    assert rows[0] == ["dt", "error", "order_pairwise"]
    assert len(rows) == 5 and rows[1][2] == ""
    assert abs(float(rows[-1][2]) - 3) < 0.3


def test_cli_solve_writes_trajectory(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    code = main(["solve", "--problem", "brusselator", "--split", "s-f", "--method", "mri-esdirk3a",
                 "--dt", "0.01", "--tf", "0.05", "--output", str(out)])
    assert code == 0
    rows = list(csv.reader(out.open()))
    assert rows[0][0] == "t" and len(rows[0]) == 1 + 603
    assert len(rows) == 1 + 6
    assert "evaluations=" in capsys.readouterr().out


def test_cli_solve_complex_columns(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["solve", "--problem", "complex-ode", "--method", "CLT2", "--sub", "rk3",
                 "--dt", "0.5", "--tf", "1", "-o", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "t,y0.re,y0.im"


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["solve", "--problem", "nope", "--method", "x", "--dt", "1"]) == 1
    assert main(["solve", "--problem", "adr2d", "--method", "nope", "--dt", "0.1",
                 "-o", str(tmp_path / "a.csv")]) == 1
    assert main(["solve", "--problem", "brusselator", "--nx", "21", "--method", "MrGARK-EX2-IM2",
                 "--dt", "0.1", "-o", str(tmp_path / "b.csv")]) == 2
    assert main([]) == 1


def test_cli_work_precision(capsys):
    assert main(["work-precision", "--problem", "complex-ode", "--tf", "2", "--method", "strang",
                 "--sub", "rk3", "--dts", "0.1,0.05"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["dt", "error", "n_evals_op1", "n_evals_op2", "n_evals_op3", "wall_seconds"]
    assert rows[1][2:5] == ["120", "120", "60"]
