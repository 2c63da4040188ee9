"""Command-line interface: ``opsplit {solve,converge,list-methods,work-precision}``.

Exit status is 0 on success, 1 on usage errors and 2 on solver failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

import numpy as np

from .. import catalog
from ..core import SolverError, Tolerance, UsageError
from ..mri import FastSolveConfig
from ..onestep import NewtonConfig
from .convergence import MethodSpec, make_solver, run_convergence, run_work_precision
from .problems import PROBLEMS, ProblemSpec, build_problem

EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def fmt(x) -> str:
    return f"{float(x):.17g}"


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse step sizes {text!r}") from exc


def _window(text: str | None):
    if not text:
        return None
    try:
        i, j = (int(v) for v in text.split(":"))
    except ValueError as exc:
        raise UsageError(f"window must look like 'i:j', got {text!r}") from exc
    return (i, j)


def _add_problem_args(p):
    p.add_argument("--problem", required=True, choices=PROBLEMS)
    p.add_argument("--split", default="", help="adr2d: 3|4; brusselator: s-f|e-i-f|1-2")
    p.add_argument("--form", default="", help="complex-ode: complex|real")
    p.add_argument("--nx", type=int, default=0, help="grid size (adr2d intervals, brusselator nodes)")
    p.add_argument("--tf", type=float, default=None, help="final time (default: problem's own)")


def _add_method_args(p):
    p.add_argument("--method", "--scheme", dest="method", required=True,
                   help="catalog method or builtin tableau name (see list-methods)")
    p.add_argument("--sub", default="RK4", help="sub-integrator for splittings")
    p.add_argument("--M", type=int, default=10, help="fast micro-steps for MrGARK")
    p.add_argument("--fast-rtol", type=float, default=1e-10)
    p.add_argument("--fast-atol", type=float, default=1e-12)
    p.add_argument("--newton-tol", type=float, default=1e-12)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="opsplit", description="Operator-splitting IVP solvers and studies.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="one run; writes a trajectory CSV")
    _add_problem_args(p)
    _add_method_args(p)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--output", "-o", default="trajectory.csv", help="CSV path or '-' for stdout")

    for name, help_ in (("converge", "step-size sweep; writes dt,error,order_pairwise"),
                        ("work-precision", "error, evaluation counts and wall time per dt")):
        p = sub.add_parser(name, help=help_)
        _add_problem_args(p)
        _add_method_args(p)
        p.add_argument("--dts", type=_floats, required=True, help="comma-separated step sizes")
        p.add_argument("--ref-tol", type=float, default=None)
        p.add_argument("--output", "-o", default="-", help="CSV path or '-' for stdout")
        if name == "converge":
            p.add_argument("--window", default=None, help="manual fit window 'i:j' (indices into dts)")
            p.add_argument("--workers", type=int, default=None)

    sub.add_parser("list-methods", help="print name,kind,order,n_operators per catalog entry")
    return parser


def _problem(args):
    split = args.form or args.split
    params = {}
    if args.tf is not None:
        params["tf"] = args.tf
    return build_problem(ProblemSpec(args.problem, split, args.nx, params))


def _method(args) -> MethodSpec:
    fast = FastSolveConfig(tol=Tolerance(atol=args.fast_atol, rtol=args.fast_rtol))
    return MethodSpec(args.method, sub=args.sub, M=args.M, fast=fast,
                      newton=NewtonConfig(tol=args.newton_tol))


def _emit(text: str, path: str):
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _state_header(y):
    if np.iscomplexobj(y):
        return [f"y{k}.{part}" for k in range(y.size) for part in ("re", "im")]
    return [f"y{k}" for k in range(y.size)]


def _state_values(y):
    if np.iscomplexobj(y):
        return [fmt(v) for z in y for v in (z.real, z.imag)]
    return [fmt(v) for v in y]


def cmd_solve(args) -> int:
    prob = _problem(args)
    spec = _method(args)
    solve = make_solver(spec)
    t0, tf = prob.meta["t0"], prob.meta["tf"]
    ts, ys = solve(prob, t0, tf, args.dt, save_steps=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + _state_header(ys[-1]))
    for t, y in zip(ts, ys):
        w.writerow([fmt(t)] + _state_values(y))
    _emit(buf.getvalue(), args.output)
    y = ys[-1]
    out = sys.stderr if args.output == "-" else sys.stdout
    print(f"problem={prob.name} method={spec.label} dt={fmt(args.dt)} steps={len(ts) - 1}", file=out)
    print(f"t_final={fmt(ts[-1])} n={y.size} max|y|={fmt(np.max(np.abs(y)))} "
          f"l2={fmt(np.linalg.norm(y))}", file=out)
    print("evaluations=" + ",".join(str(c) for c in prob.eval_counts()), file=out)
    return EXIT_OK


def cmd_converge(args) -> int:
    report = run_convergence(_problem(args), _method(args), args.dts, window=_window(args.window),
                             ref_tol=args.ref_tol, workers=args.workers)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dt", "error", "order_pairwise"])
    for dt, err, p in report.rows():
        w.writerow([fmt(dt), fmt(err), "" if not np.isfinite(p) else fmt(p)])
    _emit(buf.getvalue(), args.output)
    i, j = report.window
    print(f"observed order {report.observed_order:.4f} over dts[{i}:{j}] "
          f"({report.method} on {report.problem}, {report.norm})", file=sys.stderr)
    for dt, msg in report.failures.items():
        print(f"dt={fmt(dt)} failed: {msg}", file=sys.stderr)
    return EXIT_OK


def cmd_work_precision(args) -> int:
    prob = _problem(args)
    records = run_work_precision(prob, _method(args), args.dts, ref_tol=args.ref_tol)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dt", "error"] + [f"n_evals_op{k + 1}" for k in range(prob.n_operators)]
               + ["wall_seconds"])
    for r in records:
        w.writerow([fmt(r.dt), fmt(r.error)] + [str(c) for c in r.evals] + [f"{r.wall_seconds:.6f}"])
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def cmd_list_methods(args) -> int:
    for e in catalog.entries():
        print(f"{e.name},{e.kind},{e.order},{e.n_operators}")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "converge": cmd_converge, "work-precision": cmd_work_precision,
            "list-methods": cmd_list_methods}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        with np.errstate(over="ignore", invalid="ignore"):
            return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
