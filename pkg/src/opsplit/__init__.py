"""Operator-splitting and multirate integrators for additively split IVPs."""

from .ark import ArkMethod, ark_solve, ark_step, step_sizes
from .catalog import CatalogEntry, entries, get_gark, get_mri, get_mrgark, get_splitting
from .core import (
    AdditiveProblem,
    NewtonError,
    Operator,
    OpsplitError,
    SolverError,
    StepFailure,
    StepSizeError,
    Tolerance,
    UsageError,
    l2_error,
    mrms_error,
    wrms_norm,
)
from .fractional import (
    Adaptive,
    Analytic,
    MethodMap,
    SingleRK,
    SplittingScheme,
    fractional_step,
    validate_scheme,
)
from .gark import GarkTableau, gark_solve, gark_to_ark
from .mri import FastSolveConfig, MriMethod, mri_solve, mri_step
from .multirate import MrGarkMethod, mrgark_expand, multirate_solve
from .onestep import NewtonConfig, StepControllerConfig, adaptive_integrate, newton_solve, rk_step
from .tableaux import ButcherTableau, EmbeddedTableau, TableauClass, builtin

__version__ = "0.1.0"
