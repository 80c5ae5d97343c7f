"""Scikit-learn style estimator facade over the solvers.

Mirrors the convention of sklearn's covariance module: the functional
solvers (:func:`spdsplit.newton_cg` and friends) do the work, and
:class:`ConstrainedDecomposition` wraps them with ``fit`` / ``get_params``
so the decomposition composes with pipelines, grid search, and cloning.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .dual import dual_newton_cg
from .primal import SolverOptions, exact_newton, newton_cg
from .subspace import SubspaceBasis
from .validation import check_symmetric_matrix

__all__ = ["ConstrainedDecomposition"]


class ConstrainedDecomposition(BaseEstimator):
    """Split an SPD matrix A into inv(B) + C with C confined to a subspace.

    Parameters
    ----------
    basis : SubspaceBasis or sequence of symmetric matrices
        Span of the C component.
    method : {"auto", "newton-cg", "exact-newton", "dual"}
        "auto" uses exact Newton for small spans, the dual solver when the
        trace-orthogonal complement is lower dimensional than the span, and
        Newton-CG otherwise.
    tol : float
        Gradient-norm stopping tolerance.
    max_iter : int
        Newton iteration cap.
    structure : {"auto", "dense", "banded", "toeplitz"}
        Structure tag used when factorizing A - C(x).
    check_feasibility : bool
        Run the static subspace feasibility check before solving.

    Attributes
    ----------
    B_, C_ : ndarray
        The two components, A = inv(B_) + C_.
    x_ : ndarray
        Coordinates of C_ in the supplied basis.
    n_iter_ : int
        Newton iterations performed.
    result_ : DecompositionResult
        Full solver output with diagnostics.

    Examples
    --------
    >>> import numpy as np
    >>> from spdsplit import ConstrainedDecomposition
    >>> a = np.array([[2.0, 1.0], [1.0, 2.0]])
    >>> est = ConstrainedDecomposition(basis=[np.array([[0.0, 1.0], [1.0, 0.0]])])
    >>> est.fit(a).x_
    array([1.])
    """

    def __init__(self, basis=None, method="auto", tol=1e-8, max_iter=200,
                 structure="auto", check_feasibility=True):
        self.basis = basis
        self.method = method
        self.tol = tol
        self.max_iter = max_iter
        self.structure = structure
        self.check_feasibility = check_feasibility

    def _resolve_basis(self, n):
        if isinstance(self.basis, SubspaceBasis):
            if self.basis.n != n:
                raise ValueError(
                    f"basis dimension {self.basis.n} does not match matrix size {n}")
            return self.basis
        if self.basis is None:
            raise ValueError("a basis is required")
        return SubspaceBasis(n, list(self.basis))

    def fit(self, A, y=None):
        """Compute the decomposition of the SPD matrix ``A``."""
        a = check_symmetric_matrix(A)
        n = a.shape[0]
        basis = self._resolve_basis(n)
        opts = SolverOptions(
            grad_tolerance=self.tol,
            max_newton_iterations=self.max_iter,
            feasibility_check=self.check_feasibility,
        )
        method = self.method
        if method == "auto":
            m_perp = n * (n + 1) // 2 - basis.m
            if basis.m <= opts.auto_exact_threshold:
                method = "exact-newton"
            elif m_perp < basis.m:
                method = "dual"
            else:
                method = "newton-cg"
        if method == "exact-newton":
            result = exact_newton(a, basis, opts, structure=self.structure)
        elif method == "newton-cg":
            result = newton_cg(a, basis, opts, structure=self.structure)
        elif method == "dual":
            result = dual_newton_cg(a, basis, opts)
        else:
            raise ValueError(f"unknown method {self.method!r}")
        self.n_features_in_ = n
        self.basis_ = basis
        self.result_ = result
        self.B_ = result.B
        self.C_ = result.C
        self.x_ = np.asarray(result.x)
        self.phi_ = result.phi
        self.n_iter_ = result.iterations
        self.grad_norm_ = result.final_grad_norm
        self.reconstruction_error_ = result.reconstruction_error
        self.orthogonality_residual_ = result.orthogonality_residual
        return self
