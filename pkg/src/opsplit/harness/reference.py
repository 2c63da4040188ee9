"""Reference solutions by tight-tolerance DP54, cached on disk."""

from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from ..core import AdditiveProblem, SolverError, StepSizeError, Tolerance, UsageError
from ..onestep import adaptive_integrate
from ..tableaux import builtin

MAGIC = b"OPSPLIT-REF-1\n"
CACHE_ENV = "OPSPLIT_CACHE_DIR"


def cache_dir() -> Path:
    root = os.environ.get(CACHE_ENV)
    if root:
        return Path(root)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "opsplit"


def cache_key(prob: AdditiveProblem, t0, t_samples, tol: Tolerance) -> str | None:
    spec = prob.meta.get("spec")
    if spec is None:
        return None
    payload = json.dumps({
        "format": MAGIC.decode().strip(),
        "spec": json.loads(spec.canonical()),
        "t0": float(t0),
        "samples": [float(t) for t in t_samples],
        "atol": tol.atol,
        "rtol": tol.rtol,
    }, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def _read(path: Path) -> np.ndarray | None:
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        return None
    if not raw.startswith(MAGIC):
        return None
    return np.load(io.BytesIO(raw[len(MAGIC):]), allow_pickle=False)


def _write_once(path: Path, data: np.ndarray):
    """Publish ``data`` at ``path`` unless another writer got there first."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".ref-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            np.save(fh, data, allow_pickle=False)
        try:
            os.link(tmp, path)
        except FileExistsError:
            pass
    finally:
        os.unlink(tmp)


def compute_reference(prob: AdditiveProblem, t0, t_samples, tol: Tolerance) -> np.ndarray:
    """Monolithic DP54 solution at every time in ``t_samples`` (increasing)."""
    f = prob.monolithic()
    pair = builtin("DP54")
    y = np.asarray(prob.y0)
    t = t0
    out = []
    for ts in t_samples:
        if ts < t:
            raise UsageError("sample times must be nondecreasing and not before t0")
        try:
            y = adaptive_integrate(pair, f, t, y, ts - t, tol)
        except StepSizeError as exc:
            raise SolverError(f"reference integration failed ({exc}); try a looser tolerance") from exc
        t = ts
        out.append(np.array(y, copy=True))
    return np.array(out)


def reference_solution(prob: AdditiveProblem, t_samples=None, tol: Tolerance | float | None = None,
                       t0=None, use_cache: bool = True) -> np.ndarray:
    """Reference states at ``t_samples`` (defaults taken from ``prob.meta``).

    Results are cached under :func:`cache_dir` keyed by the SHA-256 of the
    problem spec, sample times and tolerance. Cache files are written once
    via exclusive link creation, so concurrent callers never see partial data.
    """
    meta = prob.meta
    t0 = meta.get("t0", 0.0) if t0 is None else t0
    t_samples = list(meta.get("samples", [])) if t_samples is None else list(t_samples)
    if not t_samples:
        raise UsageError("no sample times given")
    if tol is None:
        tol = default_reference_tol(prob)
    if not isinstance(tol, Tolerance):
        tol = Tolerance(float(tol), float(tol))
    key = cache_key(prob, t0, t_samples, tol) if use_cache else None
    path = cache_dir() / f"{key}.ref" if key else None
    if path is not None:
        cached = _read(path)
        if cached is not None:
            return cached
    ref = compute_reference(prob, t0, t_samples, tol)
    if path is not None:
        try:
            _write_once(path, ref)
        except OSError:
            pass
    return ref


def default_reference_tol(prob: AdditiveProblem) -> Tolerance:
    spec = prob.meta.get("spec")
    if spec is not None and spec.name == "complex-ode":
        return Tolerance(1e-13, 1e-13)
    return Tolerance(1e-12, 1e-12)
