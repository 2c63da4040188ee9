"""Shared types: operators, additive problems, tolerances, error norms."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

RHS = Callable[[complex, np.ndarray], np.ndarray]


class OpsplitError(Exception):
    """Base class for every error raised by this package."""


class UsageError(OpsplitError, ValueError):
    """Inconsistent arguments (shapes, counts, unknown names)."""


class SolverError(OpsplitError, RuntimeError):
    """A numerical solve failed."""


class NewtonError(SolverError):
    """Newton iteration failed to converge or hit a singular Jacobian."""

    def __init__(self, message: str, residual_norm: float = float("nan")):
        super().__init__(message)
        self.residual_norm = residual_norm


class StepSizeError(SolverError):
    """Adaptive controller drove the step below its floor."""


class StepFailure(SolverError):
    """A step failed; carries where it happened."""

    def __init__(self, message: str, *, stage=None, operator=None, step=None, t=None):
        parts = [message]
        for key, val in (("step", step), ("stage", stage), ("operator", operator), ("t", t)):
            if val is not None:
                parts.append(f"{key}={val}")
        super().__init__(", ".join(parts))
        self.message = message
        self.stage = stage
        self.operator = operator
        self.step = step
        self.t = t


class Operator:
    """Callable wrapper around ``f(t, y)`` that counts evaluations.

    An optional ``jac(t, y)`` returning a dense array or a scipy sparse
    matrix is used by the Newton solver instead of finite differences.
    """

    def __init__(self, fn: RHS, jac: RHS | None = None, name: str = ""):
        if isinstance(fn, Operator):
            jac = jac if jac is not None else fn.jac
            name = name or fn.name
            fn = fn.fn
        self.fn = fn
        self.jac = jac
        self.name = name or getattr(fn, "__name__", "op")
        self.n_evals = 0
        self._lock = threading.Lock()

    def __call__(self, t, y):
        with self._lock:
            self.n_evals += 1
        return self.fn(t, y)

    def reset(self):
        self.n_evals = 0

    def __repr__(self):
        return f"Operator({self.name!r}, n_evals={self.n_evals})"


def as_operator(f) -> Operator:
    return f if isinstance(f, Operator) else Operator(f)


def zero_operator(name: str = "zero") -> Operator:
    def f(t, y):
        return np.zeros_like(y)

    return Operator(f, jac=lambda t, y: np.zeros((y.size, y.size), dtype=y.dtype), name=name)


@dataclass
class AdditiveProblem:
    """``y' = sum_l F_l(t, y)`` with ``y(t0) = y0`` on a flat state vector."""

    operators: list
    y0: np.ndarray
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.operators) < 1:
            raise UsageError("an additive problem needs at least one operator")
        self.operators = [as_operator(f) for f in self.operators]
        self.y0 = np.atleast_1d(np.asarray(self.y0))
        if self.y0.ndim != 1:
            raise UsageError("state must be a flat vector")

    @property
    def n(self) -> int:
        return self.y0.size

    @property
    def n_operators(self) -> int:
        return len(self.operators)

    def rhs(self, t, y):
        """Full right-hand side (sum of all operators)."""
        out = self.operators[0](t, y)
        for f in self.operators[1:]:
            out = out + f(t, y)
        return out

    def monolithic(self) -> Operator:
        """The summed operator, with a summed Jacobian when all parts have one."""
        jac = None
        if all(op.jac is not None for op in self.operators):
            def jac(t, y):
                J = self.operators[0].jac(t, y)
                for op in self.operators[1:]:
                    J = J + op.jac(t, y)
                return J
        return Operator(self.rhs, jac=jac, name=f"{self.name or 'problem'}:sum")

    def eval_counts(self) -> list[int]:
        return [op.n_evals for op in self.operators]

    def reset_counts(self):
        for op in self.operators:
            op.reset()


@dataclass(frozen=True)
class Tolerance:
    atol: float = 1e-8
    rtol: float = 1e-8

    def __post_init__(self):
        if self.atol < 0 or self.rtol < 0 or self.atol + self.rtol <= 0:
            raise UsageError(f"invalid tolerance atol={self.atol}, rtol={self.rtol}")


def _pair(a, b, what):
    a = np.atleast_1d(np.asarray(a))
    b = np.atleast_1d(np.asarray(b))
    if a.shape != b.shape:
        raise UsageError(f"{what}: shape mismatch {a.shape} vs {b.shape}")
    return a, b


def wrms_norm(err, y_ref, tol: Tolerance) -> float:
    """Weighted RMS norm used for step acceptance and Newton convergence."""
    err, y_ref = _pair(err, y_ref, "wrms_norm")
    if err.size == 0:
        raise UsageError("wrms_norm: empty vector")
    w = tol.atol + tol.rtol * np.abs(y_ref)
    return float(np.sqrt(np.mean((np.abs(err) / w) ** 2)))


def mrms_error(traj: Sequence, ref: Sequence) -> float:
    """Mixed RMS error pooled over every component of every sample.

    ``sqrt(mean(((u - u_ref) / (1 + |u_ref|))**2))``
    """
    traj, ref = _pair(traj, ref, "mrms_error")
    if traj.size == 0:
        raise UsageError("mrms_error: empty trajectory")
    r = np.abs(traj - ref) / (1.0 + np.abs(ref))
    return float(np.sqrt(np.mean(r**2)))


def l2_error(y, y_ref) -> float:
    y, y_ref = _pair(y, y_ref, "l2_error")
    return float(np.sqrt(np.sum(np.abs(y - y_ref) ** 2)))


def is_complex_value(x) -> bool:
    return bool(np.iscomplexobj(x) and np.any(np.imag(x) != 0))


def result_dtype(*values):
    """float64 unless any value carries a nonzero imaginary part."""
    for v in values:
        if is_complex_value(v):
            return np.complex128
    return np.float64
