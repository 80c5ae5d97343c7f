"""Structure-aware SPD factorizations.

Every solver path in the package reduces to the primitives here: factorize a
symmetric positive definite matrix that carries a structure tag (dense, banded,
or Toeplitz), then query solves, the log-determinant, selected entries of the
inverse, and the two trace forms tr(M^-1 D) and tr(M^-1 D1 M^-1 D2).

A failed factorization raises :class:`NotPositiveDefinite`; the Newton line
searches use exactly this as their feasibility test.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg as sla
from scipy import sparse

from .exceptions import DimensionMismatch, NotPositiveDefinite, PatternOutsideBand

__all__ = [
    "SparseSymMatrix",
    "StructuredSpdMatrix",
    "Factorization",
    "factorize",
    "solve",
    "selected_inverse",
    "trace_inv_times",
    "trace_inv_pair",
    "detect_structure",
]


class SparseSymMatrix:
    """Sparse symmetric matrix stored as upper-triangle COO entries.

    Entries are canonicalized to i <= j.  Duplicate positions and non-finite
    values are rejected.  The class records the metadata the solvers dispatch
    on: zero-diagonal flag, half bandwidth, and support size.
    """

    def __init__(self, n, rows, cols, vals):
        self.n = int(n)
        rows = np.asarray(rows, dtype=np.intp).ravel()
        cols = np.asarray(cols, dtype=np.intp).ravel()
        vals = np.asarray(vals, dtype=float).ravel()
        if not (rows.shape == cols.shape == vals.shape):
            raise DimensionMismatch("rows, cols, vals must have equal length")
        if rows.size and (rows.min() < 0 or cols.min() < 0
                          or rows.max() >= self.n or cols.max() >= self.n):
            raise DimensionMismatch("entry index outside [0, n)")
        if not np.all(np.isfinite(vals)):
            raise ValueError("entries must be finite")
        swap = rows > cols
        rows, cols = np.where(swap, cols, rows), np.where(swap, rows, cols)
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        lin = rows * self.n + cols
        if np.unique(lin).size != lin.size:
            raise ValueError("duplicate (i, j) entries")
        self.rows = rows
        self.cols = cols
        self.vals = vals

    @classmethod
    def from_dense(cls, a, tol=0.0):
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch("expected a square matrix")
        if not np.allclose(a, a.T, atol=1e-12 * max(1.0, np.abs(a).max(initial=0.0))):
            raise ValueError("matrix is not symmetric")
        a = 0.5 * (a + a.T)
        iu, ju = np.triu_indices(a.shape[0])
        keep = np.abs(a[iu, ju]) > tol
        return cls(a.shape[0], iu[keep], ju[keep], a[iu, ju][keep])

    @property
    def nnz(self):
        return self.vals.size

    @property
    def support_size(self):
        return self.vals.size

    @property
    def zero_diagonal(self):
        return not np.any(self.rows == self.cols)

    @property
    def half_bandwidth(self):
        if self.vals.size == 0:
            return 0
        return int(np.max(self.cols - self.rows))

    def full_coo(self):
        """Both triangles as (rows, cols, vals); off-diagonal entries doubled up."""
        off = self.rows != self.cols
        rows = np.concatenate([self.rows, self.cols[off]])
        cols = np.concatenate([self.cols, self.rows[off]])
        vals = np.concatenate([self.vals, self.vals[off]])
        return rows, cols, vals

    def to_dense(self):
        a = np.zeros((self.n, self.n))
        a[self.rows, self.cols] = self.vals
        a[self.cols, self.rows] = self.vals
        return a

    def to_csr(self):
        r, c, v = self.full_coo()
        return sparse.csr_matrix((v, (r, c)), shape=(self.n, self.n))

    def frobenius_norm(self):
        off = self.rows != self.cols
        return float(np.sqrt(np.sum(self.vals[~off] ** 2) + 2.0 * np.sum(self.vals[off] ** 2)))

    def scaled(self, c):
        return SparseSymMatrix(self.n, self.rows, self.cols, c * self.vals)

    def toeplitz_first_column(self):
        """First column if the densified matrix is Toeplitz, else None.

        Each diagonal must either be fully populated with a single value or
        entirely absent (implicit zeros).
        """
        col = np.zeros(self.n)
        diags = self.cols - self.rows
        for d in np.unique(diags):
            sel = diags == d
            v = self.vals[sel]
            if np.abs(v - v[0]).max() > 1e-14 * (1.0 + np.abs(v[0])):
                return None
            if np.count_nonzero(sel) != self.n - d:
                return None
            col[d] = v[0]
        return col


class StructuredSpdMatrix:
    """Symmetric matrix tagged with the structure its factorization exploits.

    Structure tags: ``"dense"`` (full symmetric array), ``"banded"`` (lower
    band storage, half bandwidth b), ``"toeplitz"`` (first column).  The tag
    drives solver dispatch; it is the caller's claim, verified on
    construction where cheap.
    """

    def __init__(self, structure, n, *, dense_data=None, band_data=None,
                 half_bandwidth=None, first_column=None):
        self.structure = structure
        self.n = int(n)
        self._dense = dense_data
        self._ab = band_data
        self.half_bandwidth = half_bandwidth
        self.first_column = first_column

    @classmethod
    def dense(cls, a):
        a = np.asarray(a, dtype=float)
        _check_square_symmetric(a)
        return cls("dense", a.shape[0], dense_data=0.5 * (a + a.T))

    @classmethod
    def banded(cls, a, half_bandwidth):
        a = np.asarray(a, dtype=float)
        _check_square_symmetric(a)
        n = a.shape[0]
        b = int(half_bandwidth)
        if b < 0 or b >= n:
            raise ValueError("half bandwidth must be in [0, n)")
        i, j = np.nonzero(a)
        if i.size and np.abs(i - j).max() > b:
            raise ValueError("matrix has entries outside the declared band")
        ab = np.zeros((b + 1, n))
        for d in range(b + 1):
            ab[d, : n - d] = np.diagonal(a, -d)
        return cls("banded", n, band_data=ab, half_bandwidth=b)

    @classmethod
    def from_band_array(cls, ab):
        ab = np.asarray(ab, dtype=float)
        return cls("banded", ab.shape[1], band_data=ab, half_bandwidth=ab.shape[0] - 1)

    @classmethod
    def toeplitz(cls, first_column):
        col = np.asarray(first_column, dtype=float).ravel()
        if col.size == 0:
            raise ValueError("empty first column")
        return cls("toeplitz", col.size, first_column=col)

    def to_dense(self):
        if self.structure == "dense":
            return self._dense.copy()
        if self.structure == "banded":
            n, b = self.n, self.half_bandwidth
            a = np.zeros((n, n))
            for d in range(b + 1):
                idx = np.arange(n - d)
                a[idx + d, idx] = self._ab[d, : n - d]
                a[idx, idx + d] = self._ab[d, : n - d]
            return a
        return sla.toeplitz(self.first_column)

    @property
    def band_array(self):
        return self._ab


def _check_square_symmetric(a):
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch("expected a square matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    scale = max(1.0, np.abs(a).max(initial=0.0))
    if np.abs(a - a.T).max(initial=0.0) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")


def detect_structure(a, tol=1e-14):
    """Wrap a dense array with the most specific structure tag it supports."""
    a = np.asarray(a, dtype=float)
    _check_square_symmetric(a)
    n = a.shape[0]
    i, j = np.nonzero(np.abs(a) > tol)
    b = int(np.abs(i - j).max()) if i.size else 0
    if b <= max(1, n // 3) and b < n - 1:
        return StructuredSpdMatrix.banded(np.where(np.abs(a) > tol, a, 0.0), b)
    first = a[:, 0]
    if np.allclose(a, sla.toeplitz(first), rtol=0, atol=tol * max(1.0, np.abs(a).max())):
        return StructuredSpdMatrix.toeplitz(first)
    return StructuredSpdMatrix.dense(a)


# ---------------------------------------------------------------------------
# Factorizations
# ---------------------------------------------------------------------------


class Factorization:
    """Base interface: solve, log-determinant, and inverse-entry queries.

    Instances are immutable after construction; every derived quantity a
    query needs (the dense inverse, the Takahashi band, the Trench inverse)
    is computed eagerly at factorization time so shared read-only use is safe.
    """

    structure = None

    def __init__(self, n, log_determinant):
        self.n = n
        self.log_determinant = float(log_determinant)

    def solve(self, rhs):
        raise NotImplementedError

    def inverse_entries(self, rows, cols):
        raise NotImplementedError

    def inv_columns(self, idx):
        """Columns of M^-1 at the given indices, as an (n, len(idx)) array."""
        raise NotImplementedError

    def inverse_dense(self):
        raise NotImplementedError

    def _check_rhs(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.n:
            raise DimensionMismatch(
                f"rhs has {rhs.shape[0]} rows, factorization has n={self.n}")
        return rhs


class DenseFactorization(Factorization):
    structure = "dense"

    def __init__(self, a):
        try:
            lower = np.linalg.cholesky(a)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(str(exc)) from exc
        super().__init__(a.shape[0], 2.0 * np.sum(np.log(np.diag(lower))))
        self._lower = lower
        inv = sla.cho_solve((lower, True), np.eye(self.n), check_finite=False)
        self._inv = 0.5 * (inv + inv.T)

    def solve(self, rhs):
        rhs = self._check_rhs(rhs)
        return sla.cho_solve((self._lower, True), rhs, check_finite=False)

    def inverse_entries(self, rows, cols):
        return self._inv[rows, cols]

    def inv_columns(self, idx):
        return self._inv[:, idx]

    def inverse_dense(self):
        return self._inv.copy()


class BandedFactorization(Factorization):
    structure = "banded"

    def __init__(self, ab):
        ab = np.asarray(ab, dtype=float)
        b, n = ab.shape[0] - 1, ab.shape[1]
        try:
            cb = sla.cholesky_banded(ab, lower=True, check_finite=False)
        except sla.LinAlgError as exc:
            raise NotPositiveDefinite(str(exc)) from exc
        if np.any(cb[0] <= 0):
            raise NotPositiveDefinite("non-positive pivot in banded Cholesky")
        super().__init__(n, 2.0 * np.sum(np.log(cb[0])))
        self.half_bandwidth = b
        self._cb = cb
        self._band_inv = self._takahashi(cb, b, n)

    @staticmethod
    def _takahashi(cb, b, n):
        # Selected inverse on the band from the LDL^T form of the Cholesky
        # factor: Z_ij = delta_ij/d_i - sum_{k>i} L_ki Z_kj, swept backwards.
        d = cb[0] ** 2
        lunit = cb[1:] / cb[0]  # lunit[t-1, j] = L[j+t, j], t = 1..b
        z = np.zeros((b + 1, n))
        for j in range(n - 1, -1, -1):
            for i in range(j, max(j - b, 0) - 1, -1):
                kmax = min(i + b, n - 1)
                s = 0.0
                for k in range(i + 1, kmax + 1):
                    lki = lunit[k - i - 1, i]
                    if k >= j:
                        zkj = z[k - j, j]
                    else:
                        zkj = z[j - k, k]
                    s += lki * zkj
                val = (1.0 / d[i] if i == j else 0.0) - s
                z[j - i, i] = val
        return z

    def solve(self, rhs):
        rhs = self._check_rhs(rhs)
        return sla.cho_solve_banded((self._cb, True), rhs, check_finite=False)

    def inverse_entries(self, rows, cols):
        rows = np.asarray(rows, dtype=np.intp)
        cols = np.asarray(cols, dtype=np.intp)
        lo = np.minimum(rows, cols)
        d = np.abs(rows - cols)
        if d.size and d.max() > self.half_bandwidth:
            raise PatternOutsideBand(
                "requested inverse entries outside the factor band")
        return self._band_inv[d, lo]

    def inv_columns(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        rhs = np.zeros((self.n, idx.size))
        rhs[idx, np.arange(idx.size)] = 1.0
        return self.solve(rhs)

    def inverse_dense(self):
        return self.solve(np.eye(self.n))


class ToeplitzFactorization(Factorization):
    """Levinson-Durbin factorization of a symmetric PD Toeplitz matrix.

    Stores the Gohberg-Semencul generator x = T^-1 e_1 obtained from the
    Durbin recursion; the log-determinant is the running product of the
    prediction errors.  A non-positive prediction error is a Levinson
    breakdown and is reported as NotPositiveDefinite, matching the role a
    failed Cholesky plays on the other paths.  The full inverse is filled by
    the Trench recursion (same O(n^2) cost as the recursion itself) and
    serves entry queries.
    """

    structure = "toeplitz"

    def __init__(self, first_column):
        r = np.asarray(first_column, dtype=float).ravel()
        n = r.size
        if r[0] <= 0 or not np.all(np.isfinite(r)):
            raise NotPositiveDefinite("non-positive leading entry")
        a = np.zeros(n)
        a[0] = 1.0
        err = r[0]
        logdet = np.log(err)
        for k in range(1, n):
            acc = r[k] + a[1:k] @ r[k - 1:0:-1]
            kappa = -acc / err
            err = err * (1.0 - kappa * kappa)
            if err <= 0 or not np.isfinite(err):
                raise NotPositiveDefinite(
                    f"Levinson breakdown at order {k} (matrix not SPD)")
            a[1:k] += kappa * a[k - 1:0:-1]
            a[k] = kappa
            logdet += np.log(err)
        super().__init__(n, logdet)
        self.first_column = r
        self.generator = a / err  # x = T^-1 e_1
        self._inv = self._trench(self.generator)

    @staticmethod
    def _trench(x):
        n = x.size
        z = np.zeros((n, n))
        z[0, :] = x
        x0 = x[0]
        for i in range(1, n):
            # Z[i, j] = Z[i-1, j-1] + (x_i x_j - x_{n-i} x_{n-j}) / x_0, j >= i
            tail = x[1:n - i + 1][::-1]  # x_{n-j} for j = i..n-1
            z[i, i:] = z[i - 1, i - 1:n - 1] + (x[i] * x[i:] - x[n - i] * tail) / x0
        z = np.triu(z)
        return z + np.triu(z, 1).T

    def gs_entry(self, i, j):
        """Single inverse entry straight from the generator, O(min(i, j))."""
        x = self.generator
        n = self.n
        mu = min(i, j)
        t1 = float(np.dot(x[i - mu:i + 1], x[j - mu:j + 1]))
        t2 = float(np.dot(x[n - i:n - i + mu], x[n - j:n - j + mu])) if mu else 0.0
        return (t1 - t2) / x[0]

    def solve(self, rhs):
        rhs = self._check_rhs(rhs)
        return self._inv @ rhs

    def inverse_entries(self, rows, cols):
        return self._inv[rows, cols]

    def inv_columns(self, idx):
        return self._inv[:, idx]

    def inverse_dense(self):
        return self._inv.copy()


def factorize(m: StructuredSpdMatrix) -> Factorization:
    """Factorize per the structure tag.

    Raises NotPositiveDefinite when the input is not SPD; dense cost is
    cubic, banded O(n b^2), Toeplitz O(n^2).
    """
    if isinstance(m, np.ndarray):
        m = StructuredSpdMatrix.dense(m)
    if m.structure == "dense":
        return DenseFactorization(m._dense)
    if m.structure == "banded":
        return BandedFactorization(m.band_array)
    if m.structure == "toeplitz":
        return ToeplitzFactorization(m.first_column)
    raise ValueError(f"unknown structure tag {m.structure!r}")


def solve(f: Factorization, rhs):
    """M^-1 @ rhs through the factorization."""
    return f.solve(rhs)


def selected_inverse(f: Factorization, pattern):
    """Entries (M^-1)_ij for each (i, j) in pattern.

    The banded path serves entries inside the factor band only and raises
    PatternOutsideBand otherwise.
    """
    if len(pattern) == 0:
        return []
    rows = np.array([p[0] for p in pattern], dtype=np.intp)
    cols = np.array([p[1] for p in pattern], dtype=np.intp)
    if rows.min() < 0 or cols.min() < 0 or rows.max() >= f.n or cols.max() >= f.n:
        raise DimensionMismatch("pattern index outside [0, n)")
    return list(f.inverse_entries(rows, cols))


def trace_inv_times(f: Factorization, d: SparseSymMatrix) -> float:
    """tr(M^-1 D) for sparse symmetric D.

    Uses selected-inverse entries when the structure permits (always for the
    dense and Toeplitz paths, inside the band for the banded path), and
    solves against the sparse columns of D otherwise.
    """
    if d.n != f.n:
        raise DimensionMismatch(f"D has n={d.n}, factorization has n={f.n}")
    rows, cols, vals = d.full_coo()
    if rows.size == 0:
        return 0.0
    if f.structure == "banded" and d.half_bandwidth > f.half_bandwidth:
        ucols, pos = np.unique(cols, return_inverse=True)
        u = f.inv_columns(ucols)
        return float(vals @ u[rows, pos])
    return float(vals @ f.inverse_entries(rows, cols))


def trace_inv_pair(f: Factorization, d1: SparseSymMatrix, d2: SparseSymMatrix) -> float:
    """tr(M^-1 D1 M^-1 D2), via solves only.

    Solves against the support columns of D1, then contracts the small
    Gram-like matrix U^T D2 U with the entries of D1.
    """
    if d1.n != f.n or d2.n != f.n:
        raise DimensionMismatch("dimension mismatch in trace_inv_pair")
    r1, c1, v1 = d1.full_coo()
    if r1.size == 0 or d2.nnz == 0:
        return 0.0
    support = np.unique(np.concatenate([r1, c1]))
    pos = np.full(f.n, -1, dtype=np.intp)
    pos[support] = np.arange(support.size)
    u = f.inv_columns(support)
    g = u.T @ (d2.to_csr() @ u)
    return float(v1 @ g[pos[r1], pos[c1]])
