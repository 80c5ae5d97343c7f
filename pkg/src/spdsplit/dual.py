"""Dual solver: maximize Psi(B) = log|B| - tr(B A) over B in S-perp, B > 0.

The dual variable is parameterized as B(y) = B0 + sum_j y_j E_j over a basis
of the trace-orthogonal complement, so every iterate is orthogonal to S by
construction.  The same Newton-CG core as the primal runs on the negated
objective; the system matrix tr(B^-1 E_j B^-1 E_k) is positive definite.

Preferable when dim(S-perp) is small compared to dim(S), e.g. a tridiagonal
complement of a high-dimensional constraint span.
"""

from __future__ import annotations

import numpy as np

from .exceptions import NoObviousDualStart
from .linalg import StructuredSpdMatrix
from .primal import (
    DecompositionResult,
    SolverOptions,
    _as_structured,
    _finish,
    _LogDetObjective,
    _newton_loop,
    _precheck,
)
from .subspace import SubspaceBasis, complement_basis

__all__ = [
    "DualState",
    "initial_dual_point",
    "evaluate_psi_grad",
    "dual_hv_product",
    "dual_newton_cg",
]


def initial_dual_point(a, basis: SubspaceBasis, complement=None):
    """An SPD element of S-perp to anchor the affine parameterization.

    Tries the trace-orthogonal projection of I onto S-perp, then of A^-1.
    Raises NoObviousDualStart when neither is SPD; the caller must then
    supply B0 explicitly.
    """
    n = basis.n
    _, proj_i = basis.project(np.eye(n))
    candidate = np.eye(n) - proj_i
    if np.linalg.eigvalsh(candidate)[0] > 1e-12:
        return candidate
    a_dense = _as_structured(a).to_dense()
    a_inv = np.linalg.inv(a_dense)
    a_inv = 0.5 * (a_inv + a_inv.T)
    _, proj_ai = basis.project(a_inv)
    candidate = a_inv - proj_ai
    if np.linalg.eigvalsh(candidate)[0] > 1e-12:
        return candidate
    raise NoObviousDualStart(
        "neither projection of I nor of A^-1 onto S-perp is SPD")


def _detect_half_bandwidth(mat, tol=0.0):
    i, j = np.nonzero(np.abs(mat) > tol)
    return int(np.abs(i - j).max()) if i.size else 0


def _dual_objective(a, complement: SubspaceBasis, b0, structure="auto"):
    a_dense = _as_structured(a).to_dense()
    n = a_dense.shape[0]
    b0 = np.asarray(b0, dtype=float)
    lin = complement.traces_with_dense(a_dense)
    const = float(np.sum(a_dense * b0))
    kind = structure
    if structure == "auto":
        b = max(_detect_half_bandwidth(b0), complement.max_half_bandwidth)
        kind = "banded" if 3 * b < n else "dense"
    if kind == "banded":
        base = StructuredSpdMatrix.banded(
            b0, max(_detect_half_bandwidth(b0), complement.max_half_bandwidth))
    else:
        base = StructuredSpdMatrix.dense(b0)
    # minimize -Psi(y) = -log|B(y)| + tr(A B(y))
    return _LogDetObjective(base, complement, sign=+1.0, lin=lin, const=const,
                            structure=kind), a_dense


class DualState:
    """Evaluated dual iterate: y (original complement coordinates), B(y),
    Psi, the Psi-gradient, and the factorization of B(y)."""

    def __init__(self, objective, inner, complement):
        self._objective = objective
        self._inner = inner
        self._complement = complement
        self.y = complement.to_original_coordinates(inner.coeffs)
        self.B = inner.matrix.to_dense()
        self.psi = -inner.value
        self.grad = -inner.grad * complement.original_norms
        self.fact = inner.fact


def evaluate_psi_grad(a, complement: SubspaceBasis, b0, y) -> DualState:
    """Psi(y), its gradient tr(B^-1 E_j) - tr(A E_j), and B(y)'s factorization."""
    objective, _ = _dual_objective(a, complement, b0)
    inner = objective.evaluate(complement.to_normalized_coordinates(y))
    return DualState(objective, inner, complement)


def dual_hv_product(state: DualState, complement: SubspaceBasis, p):
    """Product with the positive definite system matrix
    tr(B^-1 E_j B^-1 E_k); the Psi-Hessian is its negative."""
    p = np.asarray(p, dtype=float)
    qn = state._objective.hv(state._inner, p * complement.original_norms)
    return qn * complement.original_norms


def dual_newton_cg(a, basis: SubspaceBasis, options: SolverOptions | None = None,
                   b0=None, complement: SubspaceBasis | None = None,
                   structure="auto") -> DecompositionResult:
    """Solve the dual and recover the decomposition of A.

    C* is the trace projection of A - B*^-1 onto S; the out-of-subspace
    residual of that projection is reported in ``projection_residual`` and
    should be of the order of the final gradient norm.
    """
    opts = options or SolverOptions()
    _precheck(basis, opts)
    comp = complement if complement is not None else complement_basis(basis)
    start = b0 if b0 is not None else initial_dual_point(a, basis, comp)
    objective, a_dense = _dual_objective(a, comp, start, structure)
    state, iterations, history = _newton_loop(
        objective, opts, np.zeros(comp.m), exact=False)
    b_star = state.matrix.to_dense()
    c_raw = a_dense - state.fact.inverse_dense()
    c_raw = 0.5 * (c_raw + c_raw.T)
    coeffs, c_proj = basis.project(c_raw)
    residual = float(np.linalg.norm(c_raw - c_proj))
    return _finish(a, basis, state, iterations, history, "dual",
                   projection_residual=residual, c_override=c_proj,
                   b_override=b_star, x_coeffs=coeffs)
