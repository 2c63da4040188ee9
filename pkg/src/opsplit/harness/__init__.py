"""Benchmark problems, reference solutions, convergence studies and the CLI."""

from .convergence import (
    ConvergenceReport,
    MethodSpec,
    WorkRecord,
    evals_at_error,
    make_solver,
    run_convergence,
    run_work_precision,
    select_window,
)
from .problems import ProblemSpec, adr2d, brusselator, build_problem, complex_ode
from .reference import reference_solution
