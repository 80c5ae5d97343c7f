"""Input validation helpers shared by the estimator, CLI, and file I/O."""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionMismatch


def check_symmetric_matrix(a, name="A", tol=1e-10):
    """Coerce to a float array and require a finite square symmetric matrix."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if float(np.abs(a - a.T).max(initial=0.0)) > tol * scale:
        raise ValueError(f"{name} is not symmetric")
    return 0.5 * (a + a.T)


def check_permutation(p, n=None):
    p = np.asarray(p, dtype=np.intp).ravel()
    if n is not None and p.size != n:
        raise DimensionMismatch(f"permutation has length {p.size}, expected {n}")
    if np.any(np.sort(p) != np.arange(p.size)):
        raise ValueError("not a permutation of 0..n-1")
    return p
