"""Brute-force reference implementations, for tests only.

Everything here is deliberately independent of the factorization machinery:
the objective is evaluated through symmetric eigenvalue decompositions, the
minimizer is coordinate descent with golden-section line minimization, and
derivatives come from central finite differences.  Agreement between these
and the Newton solvers is the anti-circular check the test suite leans on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import FeasibleIntervalCollapse, StepLeavesFeasibleSet

__all__ = [
    "OracleOptions",
    "oracle_phi",
    "brute_force_minimize",
    "finite_diff_gradient",
    "finite_diff_hessian",
    "exhaustive_psd_search",
]

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class OracleOptions:
    coordinate_sweeps: int = 500
    line_search_tolerance: float = 1e-12
    feasibility_shrink: float = 0.5

    def __post_init__(self):
        if self.coordinate_sweeps <= 0 or self.line_search_tolerance <= 0 \
                or not 0 < self.feasibility_shrink < 1:
            raise ValueError("oracle options must be positive")


def _dense_elements(basis):
    if hasattr(basis, "elements"):
        # accept a SubspaceBasis but work in the caller's original scaling
        return [e.to_dense() * s for e, s in zip(basis.elements, basis.original_norms)]
    return [np.asarray(d, dtype=float) for d in basis]


def oracle_phi(a, mats, x):
    """-log det(A - sum x_k D_k) via eigenvalues; +inf outside the feasible set."""
    m = np.asarray(a, dtype=float).copy()
    for xk, d in zip(np.asarray(x, dtype=float), mats):
        m -= xk * d
    w = np.linalg.eigvalsh(0.5 * (m + m.T))
    if w[0] <= 0:
        return np.inf
    return float(-np.sum(np.log(w)))


def _golden_minimize(f, lo, hi, tol):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _parabolic_polish(f, t, lo, hi):
    """One quadratic-fit refinement; golden section alone stalls at the
    sqrt(eps) function-value noise floor, the parabola vertex does not."""
    h = 1e-5 * (1.0 + abs(t))
    if t - h <= lo or t + h >= hi:
        h = 0.25 * min(t - lo, hi - t)
        if h <= 0:
            return t
    f0, fp, fm = f(t), f(t + h), f(t - h)
    denom = fp - 2.0 * f0 + fm
    if denom <= 0 or not np.isfinite(denom):
        return t
    step = -0.5 * h * (fp - fm) / denom
    if abs(step) <= h:
        return t + step
    return t


def _feasible_interval(phi_line, shrink):
    """Open interval of feasible steps around 0 by doubling and bisection."""

    def boundary(sign):
        step = 1.0
        # grow until infeasible (or give up far out)
        while phi_line(sign * step) < np.inf:
            step *= 2.0
            if step > 1e12:
                return sign * step
        lo, hi = 0.0, step
        while hi - lo > 1e-9 * (1.0 + hi):
            mid = lo + shrink * (hi - lo)
            if phi_line(sign * mid) < np.inf:
                lo = mid
            else:
                hi = mid
        return sign * lo

    left = boundary(-1.0)
    right = boundary(+1.0)
    if right - left <= 1e-12:
        raise FeasibleIntervalCollapse(
            "feasible interval degenerated; subspace nearly infeasible")
    return left, right


def brute_force_minimize(a, basis, options: OracleOptions | None = None):
    """Cyclic coordinate descent on the eigenvalue-based objective.

    Intended for tiny instances (n <= 10, m <= 6); exploits uniqueness of
    the minimizer to validate any solver that claims convergence.
    """
    opts = options or OracleOptions()
    a = np.asarray(a.to_dense() if hasattr(a, "to_dense") else a, dtype=float)
    mats = _dense_elements(basis)
    n, m = a.shape[0], len(mats)
    if n > 10 or m > 6:
        raise ValueError("oracle minimizer is restricted to n <= 10, m <= 6")
    x = np.zeros(m)
    phi = oracle_phi(a, mats, x)
    for _ in range(opts.coordinate_sweeps):
        moved = 0.0
        for k in range(m):
            base = x.copy()

            def phi_line(t, k=k, base=base):
                trial = base.copy()
                trial[k] += t
                return oracle_phi(a, mats, trial)

            left, right = _feasible_interval(phi_line, opts.feasibility_shrink)
            pad = 1e-12 * (1.0 + right - left)
            t = _golden_minimize(phi_line, left + pad, right - pad,
                                 opts.line_search_tolerance)
            t = _parabolic_polish(phi_line, t, left + pad, right - pad)
            x[k] += t
            moved = max(moved, abs(t))
        phi = oracle_phi(a, mats, x)
        # per-sweep movement contracts geometrically until it hits the
        # line-minimization jitter floor near 1e-10
        if moved < 1e-9 * (1.0 + np.linalg.norm(x)):
            break
    return x, phi


def finite_diff_gradient(a, basis, x, h=None):
    """Central differences of the eigenvalue-based objective."""
    a = np.asarray(a.to_dense() if hasattr(a, "to_dense") else a, dtype=float)
    mats = _dense_elements(basis)
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-6 * (1.0 + np.linalg.norm(x))
    g = np.zeros(x.size)
    for k in range(x.size):
        e = np.zeros(x.size)
        e[k] = h
        up = oracle_phi(a, mats, x + e)
        dn = oracle_phi(a, mats, x - e)
        if not np.isfinite(up) or not np.isfinite(dn):
            raise StepLeavesFeasibleSet(f"stencil left the feasible set at k={k}")
        g[k] = (up - dn) / (2.0 * h)
    return g


def finite_diff_hessian(a, basis, x, h=None):
    a = np.asarray(a.to_dense() if hasattr(a, "to_dense") else a, dtype=float)
    mats = _dense_elements(basis)
    x = np.asarray(x, dtype=float)
    m = x.size
    if h is None:
        h = 1e-4 * (1.0 + np.linalg.norm(x))
    hess = np.zeros((m, m))

    def phi_at(delta):
        val = oracle_phi(a, mats, x + delta)
        if not np.isfinite(val):
            raise StepLeavesFeasibleSet("stencil left the feasible set")
        return val

    f0 = phi_at(np.zeros(m))
    for i in range(m):
        ei = np.zeros(m)
        ei[i] = h
        fpp = phi_at(2 * ei)
        fp = phi_at(ei)
        fm = phi_at(-ei)
        fmm = phi_at(-2 * ei)
        hess[i, i] = (-fpp + 16 * fp - 30 * f0 + 16 * fm - fmm) / (12 * h * h)
        for j in range(i + 1, m):
            ej = np.zeros(m)
            ej[j] = h
            val = (phi_at(ei + ej) - phi_at(ei - ej)
                   - phi_at(-ei + ej) + phi_at(-ei - ej)) / (4 * h * h)
            hess[i, j] = hess[j, i] = val
    return hess


def exhaustive_psd_search(basis, samples=20000, seed=0):
    """Search for a unit-norm PSD combination of the basis elements.

    Dense random sampling of the coefficient sphere plus local polish on the
    minimum eigenvalue; returns the witness matrix or None.  Restricted to
    m <= 4.
    """
    mats = _dense_elements(basis)
    m = len(mats)
    if m > 4:
        raise ValueError("exhaustive search is restricted to m <= 4")
    if m == 0:
        return None
    stack = np.stack(mats)

    def min_eig(c):
        mat = np.tensordot(c, stack, axes=1)
        nrm = np.linalg.norm(mat)
        if nrm == 0:
            return -np.inf, mat
        return float(np.linalg.eigvalsh(mat / nrm)[0]), mat / nrm

    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal((samples, m))
    coeffs /= np.linalg.norm(coeffs, axis=1, keepdims=True)
    if m == 1:
        coeffs = np.array([[1.0], [-1.0]])
    best_c, best_val = None, -np.inf
    for c in coeffs:
        val, _ = min_eig(c)
        if val > best_val:
            best_val, best_c = val, c.copy()
    # local polish: greedy coordinate perturbation
    step = 0.1
    while step > 1e-6:
        improved = False
        for k in range(m):
            for s in (step, -step):
                c = best_c.copy()
                c[k] += s
                c /= np.linalg.norm(c)
                val, _ = min_eig(c)
                if val > best_val:
                    best_val, best_c, improved = val, c, True
        if not improved:
            step *= 0.5
    val, witness = min_eig(best_c)
    if val >= -1e-8:
        return witness
    return None
