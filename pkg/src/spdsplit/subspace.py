"""Constraint subspaces of symmetric matrices.

A :class:`SubspaceBasis` holds the span S = span(D_1, ..., D_m) the C
component is constrained to.  Elements are rescaled to unit Frobenius norm on
ingestion (this conditions the Hessian Gram matrix); the per-element scale
factors are kept so solver coordinates can be mapped back to the caller's
basis.  The module also provides trace-orthogonal complements, the Reynolds
reduction to a group-fixed subspace, and the (deliberately incomplete)
feasibility check for the nondegeneracy condition S `intersect` PSD = {0}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy import sparse

from .exceptions import (
    DimensionMismatch,
    NotInvariantSubspace,
    NotOrthogonal,
    RankDeficientBasis,
)
from .linalg import SparseSymMatrix

__all__ = [
    "SubspaceBasis",
    "GroupAction",
    "FeasibilityVerdict",
    "half_vectorize",
    "inverse_half_vectorize",
    "complement_basis",
    "fixed_subspace",
    "check_feasibility",
]

_CERT_EIG_TOL = 1e-10
_DENSE_GRAM_LIMIT = 4000


def half_vectorize(x):
    """Isometric coordinates for the trace inner product.

    Upper-triangle row-major ordering (0,0), (0,1), ..., (1,1), ...; diagonal
    entries copied, off-diagonal entries scaled by sqrt(2), so that
    dot(hv(X), hv(Y)) = tr(X Y).
    """
    if isinstance(x, SparseSymMatrix):
        n = x.n
        out = np.zeros(n * (n + 1) // 2)
        p = _triu_position(x.rows, x.cols, n)
        w = np.where(x.rows == x.cols, 1.0, np.sqrt(2.0))
        out[p] = w * x.vals
        return out
    a = np.asarray(x, dtype=float)
    n = a.shape[0]
    iu, ju = np.triu_indices(n)
    w = np.where(iu == ju, 1.0, np.sqrt(2.0))
    return w * a[iu, ju]


def inverse_half_vectorize(v, n):
    v = np.asarray(v, dtype=float)
    iu, ju = np.triu_indices(n)
    if v.size != iu.size:
        raise DimensionMismatch("vector length does not match n(n+1)/2")
    a = np.zeros((n, n))
    w = np.where(iu == ju, 1.0, 1.0 / np.sqrt(2.0))
    a[iu, ju] = w * v
    return a + np.triu(a, 1).T


def _triu_position(i, j, n):
    # row-major upper-triangle linear index of (i, j) with i <= j
    return i * n - (i * (i - 1)) // 2 + (j - i)


class SubspaceBasis:
    """Ordered basis D_1..D_m of a subspace of symmetric n x n matrices.

    Raises RankDeficientBasis when the elements are not linearly independent
    (Gram matrix of the unit-normalized half-vectorized elements has an
    eigenvalue at or below 1e-10).
    """

    def __init__(self, n, matrices):
        self.n = int(n)
        elements = []
        norms = []
        for k, mat in enumerate(matrices):
            if not isinstance(mat, SparseSymMatrix):
                mat = SparseSymMatrix.from_dense(mat)
            if mat.n != self.n:
                raise DimensionMismatch(f"basis element {k} has n={mat.n}, expected {self.n}")
            nrm = mat.frobenius_norm()
            if nrm == 0.0:
                raise RankDeficientBasis(f"basis element {k} is zero")
            norms.append(nrm)
            elements.append(mat.scaled(1.0 / nrm))
        self.elements = elements
        self.original_norms = np.asarray(norms, dtype=float)
        self.m = len(elements)
        if self.m > self.n * (self.n + 1) // 2:
            raise RankDeficientBasis("more elements than dim of symmetric matrices")

        self.all_zero_diagonal = all(e.zero_diagonal for e in elements)
        self.max_half_bandwidth = max((e.half_bandwidth for e in elements), default=0)

        # concatenated full-symmetric COO over all elements, for vectorized traces
        if self.m:
            rr, cc, vv, ii = [], [], [], []
            for k, e in enumerate(elements):
                r, c, v = e.full_coo()
                rr.append(r)
                cc.append(c)
                vv.append(v)
                ii.append(np.full(r.size, k, dtype=np.intp))
            self._rows = np.concatenate(rr)
            self._cols = np.concatenate(cc)
            self._vals = np.concatenate(vv)
            self._elem = np.concatenate(ii)
        else:
            self._rows = np.empty(0, dtype=np.intp)
            self._cols = np.empty(0, dtype=np.intp)
            self._vals = np.empty(0)
            self._elem = np.empty(0, dtype=np.intp)
        self._support = np.unique(np.concatenate([self._rows, self._cols])) \
            if self.m else np.empty(0, dtype=np.intp)

        self._coordinate = self.m > 0 and all(e.nnz == 1 for e in elements)
        if self._coordinate:
            pos = {(int(e.rows[0]), int(e.cols[0])) for e in elements}
            self._coordinate = len(pos) == self.m
        self._certify()
        self._toeplitz_cols = None

    # -- certificate -------------------------------------------------------

    def _certify(self):
        if self.m == 0:
            self.gram = np.zeros((0, 0))
            self.gram_min_eigenvalue = np.inf
            self._orthonormal = True
            return
        if self._coordinate:
            # distinct single-position unit-norm elements are orthonormal
            self.gram = None
            self.gram_min_eigenvalue = 1.0
            self._orthonormal = True
            return
        if self.m <= _DENSE_GRAM_LIMIT:
            v = np.stack([half_vectorize(e) for e in self.elements])
            gram = v @ v.T
        else:
            vs = self._sparse_halfvec()
            gram = np.asarray((vs @ vs.T).todense())
        w = np.linalg.eigvalsh(gram)
        if w[0] <= _CERT_EIG_TOL:
            raise RankDeficientBasis(
                f"basis Gram matrix has minimum eigenvalue {w[0]:.3e}")
        self.gram = gram
        self.gram_min_eigenvalue = float(w[0])
        self._orthonormal = bool(np.allclose(gram, np.eye(self.m), atol=1e-12))

    def _sparse_halfvec(self):
        rows, cols, data = [], [], []
        for k, e in enumerate(self.elements):
            p = _triu_position(e.rows, e.cols, self.n)
            w = np.where(e.rows == e.cols, 1.0, np.sqrt(2.0))
            rows.append(np.full(p.size, k, dtype=np.intp))
            cols.append(p)
            data.append(w * e.vals)
        ldim = self.n * (self.n + 1) // 2
        return sparse.csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.m, ldim))

    # -- combinations and traces --------------------------------------------

    def combination_dense(self, coeffs):
        """C = sum_k coeffs_k D_k as a dense array (normalized coordinates)."""
        coeffs = self._check_coeffs(coeffs)
        c = np.zeros((self.n, self.n))
        if self.m:
            np.add.at(c, (self._rows, self._cols), coeffs[self._elem] * self._vals)
        return c

    def combination_sparse(self, coeffs):
        coeffs = self._check_coeffs(coeffs)
        return sparse.csr_matrix(
            (coeffs[self._elem] * self._vals, (self._rows, self._cols)),
            shape=(self.n, self.n))

    def traces_against(self, entries_of):
        """Vector t with t_k = tr(X D_k), where entries_of(rows, cols) returns X entries."""
        if self.m == 0:
            return np.zeros(0)
        vals = entries_of(self._rows, self._cols)
        return np.bincount(self._elem, weights=self._vals * vals, minlength=self.m)

    def traces_with_dense(self, x):
        return self.traces_against(lambda r, c: np.asarray(x)[r, c])

    def pair_traces(self, gram_small, pos):
        """Vector q with q_k = sum over entries of D_k of D_k[i,j] * W[i,j],
        where W restricted to the basis support is given by gram_small and
        pos maps matrix indices to gram_small positions."""
        if self.m == 0:
            return np.zeros(0)
        w = gram_small[pos[self._rows], pos[self._cols]]
        return np.bincount(self._elem, weights=self._vals * w, minlength=self.m)

    def project(self, x):
        """Trace-orthogonal projection of symmetric X onto the span.

        Returns (coeffs, projection) with projection = sum coeffs_k D_k.
        """
        t = self.traces_with_dense(x)
        if self._orthonormal:
            coeffs = t
        else:
            coeffs = sla.solve(self.gram, t, assume_a="pos")
        return coeffs, self.combination_dense(coeffs)

    def to_original_coordinates(self, coeffs):
        """Map normalized-basis coefficients to the caller's original scaling."""
        return np.asarray(coeffs, dtype=float) / self.original_norms

    def to_normalized_coordinates(self, coeffs):
        return np.asarray(coeffs, dtype=float) * self.original_norms

    def _check_coeffs(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float).ravel()
        if coeffs.size != self.m:
            raise DimensionMismatch(f"expected {self.m} coefficients, got {coeffs.size}")
        return coeffs

    @property
    def support_indices(self):
        return self._support

    def toeplitz_columns(self):
        """Per-element first columns when every element is Toeplitz, else None."""
        if self._toeplitz_cols is None:
            cols = []
            for e in self.elements:
                c = e.toeplitz_first_column()
                if c is None:
                    self._toeplitz_cols = (False, None)
                    break
                cols.append(c)
            else:
                self._toeplitz_cols = (True, np.stack(cols) if cols else np.zeros((0, self.n)))
        ok, cols = self._toeplitz_cols
        return cols if ok else None

    def conjugated(self, p):
        """Basis of P S P^T for an orthogonal P (matrix or permutation array)."""
        mats = [_conjugate(e.to_dense(), p) for e in self.elements]
        return SubspaceBasis(self.n, mats)


@dataclass
class FeasibilityVerdict:
    PROVEN_FEASIBLE = "proven-feasible"
    PROVEN_INFEASIBLE = "proven-infeasible"
    UNKNOWN = "unknown"

    status: str
    witness: np.ndarray | None = None

    @property
    def feasible(self):
        return self.status == self.PROVEN_FEASIBLE

    @property
    def infeasible(self):
        return self.status == self.PROVEN_INFEASIBLE


class GroupAction:
    """A finite list of orthogonal matrices acting on Sym(n) by conjugation.

    Permutations may be passed as 1-D integer arrays p, meaning the matrix P
    with P[i, p[i]] = 1, so P X P^T = X[p][:, p].  The Reynolds average runs
    over the provided list as-is; closure is not checked, so callers must
    pass the full group for the average to be the fixed-space projector.
    """

    def __init__(self, elements, n=None):
        self._elems = []
        for e in elements:
            arr = np.asarray(e)
            if arr.ndim == 1:
                p = arr.astype(np.intp)
                if n is None:
                    n = p.size
                if p.size != n or np.any(np.sort(p) != np.arange(n)):
                    raise NotOrthogonal("invalid permutation array")
                self._elems.append(("perm", p))
            else:
                mat = arr.astype(float)
                if n is None:
                    n = mat.shape[0]
                if mat.shape != (n, n):
                    raise DimensionMismatch("group element has wrong shape")
                if np.linalg.norm(mat.T @ mat - np.eye(n)) > 1e-12 * n:
                    raise NotOrthogonal("group element is not orthogonal")
                self._elems.append(("mat", mat))
        if n is None:
            raise ValueError("empty group")
        self.n = int(n)

    def __len__(self):
        return len(self._elems)

    def __iter__(self):
        return iter(self._elems)

    def conjugate(self, x, element):
        return _conjugate(x, element)

    def reynolds(self, x):
        """(1/|G|) sum_P P X P^T over the provided list."""
        x = np.asarray(x, dtype=float)
        acc = np.zeros_like(x)
        for e in self._elems:
            acc += _conjugate(x, e)
        return acc / len(self._elems)


def _conjugate(x, element):
    if isinstance(element, tuple):
        kind, p = element
    elif isinstance(element, np.ndarray) and element.ndim == 1:
        kind, p = "perm", element.astype(np.intp)
    else:
        kind, p = "mat", np.asarray(element, dtype=float)
    if kind == "perm":
        return x[np.ix_(p, p)]
    return p @ x @ p.T


def complement_basis(basis: SubspaceBasis) -> SubspaceBasis:
    """Trace-orthogonal complement of the span, of dimension n(n+1)/2 - m.

    Coordinate subspaces (distinct single-position elements) get their
    complement directly as the unit matrices on the remaining positions; the
    general case takes the nullspace of the half-vectorized basis.
    """
    n = basis.n
    ldim = n * (n + 1) // 2
    iu, ju = np.triu_indices(n)
    if basis.m == 0 or basis._coordinate:
        taken = np.zeros(ldim, dtype=bool)
        for e in basis.elements:
            taken[_triu_position(e.rows, e.cols, n)] = True
        mats = [
            SparseSymMatrix(n, [iu[p]], [ju[p]], [1.0])
            for p in np.nonzero(~taken)[0]
        ]
        return SubspaceBasis(n, mats)
    v = np.stack([half_vectorize(e) for e in basis.elements])
    ns = sla.null_space(v)
    if ns.shape[1] != ldim - basis.m:
        raise RankDeficientBasis(
            f"nullspace dimension {ns.shape[1]} != {ldim - basis.m}")
    mats = [inverse_half_vectorize(ns[:, j], n) for j in range(ns.shape[1])]
    return SubspaceBasis(n, mats)


def _batched_reynolds(group: GroupAction, stack):
    """Reynolds average applied to a stack of matrices at once."""
    acc = np.zeros_like(stack)
    for kind, p in group:
        if kind == "perm":
            acc += stack[:, p][:, :, p]
        else:
            acc += np.einsum("ij,mjk,lk->mil", p, stack, p)
    return acc / len(group)


def fixed_subspace(basis: SubspaceBasis, group: GroupAction) -> SubspaceBasis:
    """Basis of the group-fixed subspace S^G via the Reynolds operator.

    Requires S to be G-invariant: the Reynolds image of every element must
    stay in span(S) to 1e-8, otherwise NotInvariantSubspace is raised.
    """
    if group.n != basis.n:
        raise DimensionMismatch("group and basis dimensions differ")
    if basis.m == 0:
        return basis
    n = basis.n
    stack = np.stack([e.to_dense() for e in basis.elements])
    images = _batched_reynolds(group, stack)
    iu, ju = np.triu_indices(n)
    wts = np.where(iu == ju, 1.0, np.sqrt(2.0))
    v = wts * stack[:, iu, ju]
    w = wts * images[:, iu, ju]
    coeffs, _, _, _ = np.linalg.lstsq(v.T, w.T, rcond=None)
    resid = np.linalg.norm(v.T @ coeffs - w.T, axis=0)
    scale = np.maximum(1.0, np.linalg.norm(w, axis=1))
    worst = int(np.argmax(resid / scale))
    if resid[worst] > 1e-8 * scale[worst]:
        raise NotInvariantSubspace(
            f"Reynolds image of element {worst} leaves the span "
            f"(residual {resid[worst]:.2e})")
    _, s, vt = np.linalg.svd(w, full_matrices=False)
    rank = int(np.sum(s > 1e-10 * max(1.0, s[0] if s.size else 0.0)))
    mats = [inverse_half_vectorize(vt[j], n) for j in range(rank)]
    return SubspaceBasis(n, mats)


def check_feasibility(basis: SubspaceBasis) -> FeasibilityVerdict:
    """Decide S `intersect` PSD = {0} where cheaply possible.

    Proven feasible when the basis is all zero-diagonal, or when the
    trace-orthogonal projection of the identity onto the complement is SPD
    (that projection is then the witness of the sufficient condition).
    Proven infeasible when a basis element, or the projection of the
    identity onto the span, is PSD and nonzero.  Unknown otherwise; the
    solvers accept Unknown with a warning and rely on their divergence
    diagnostic at run time.
    """
    n = basis.n
    if basis.m == 0 or basis.all_zero_diagonal:
        return FeasibilityVerdict(FeasibilityVerdict.PROVEN_FEASIBLE, np.eye(n))

    for e in basis.elements:
        w = _psd_direction(e)
        if w is not None:
            return FeasibilityVerdict(FeasibilityVerdict.PROVEN_INFEASIBLE, w)

    # projection of I onto the span: PSD and nonzero proves infeasibility
    coeffs, proj = basis.project(np.eye(n))
    pnorm = np.linalg.norm(proj)
    if pnorm > 1e-10:
        unit = proj / pnorm
        if np.linalg.eigvalsh(unit)[0] >= -1e-10:
            return FeasibilityVerdict(FeasibilityVerdict.PROVEN_INFEASIBLE, unit)

    # Remark-style witness: projection of I onto the complement, if SPD
    witness = np.eye(n) - proj
    if np.linalg.eigvalsh(witness)[0] > 1e-10:
        return FeasibilityVerdict(FeasibilityVerdict.PROVEN_FEASIBLE, witness)

    return FeasibilityVerdict(FeasibilityVerdict.UNKNOWN)


def _psd_direction(e: SparseSymMatrix):
    """Unit-norm PSD multiple of a basis element, or None."""
    if e.nnz == 1:
        if e.rows[0] != e.cols[0]:
            return None  # single off-diagonal pair is indefinite
        d = e.to_dense()
        return d / np.linalg.norm(d) if e.vals[0] > 0 else -d / np.linalg.norm(d)
    d = e.to_dense()
    nrm = np.linalg.norm(d)
    w = np.linalg.eigvalsh(d / nrm)
    if w[0] >= -1e-10:
        return d / nrm
    if w[-1] <= 1e-10:
        return -d / nrm
    return None
