"""Primal solvers: minimize Phi(x) = -log|A - C(x)| over the feasible set.

Newton-CG is the default engine; the Newton system is solved matrix-free by
conjugate gradients on Hessian-vector products, each of which reduces to
trace queries against one shared factorization of M(x) = A - C(x).  Exact
Newton forms the m x m Hessian and is intended for small m.  Both use
feasibility-preserving Armijo backtracking: a trial step is accepted only if
M(x + t d) factorizes.

Public derivative operations take and return quantities in the caller's
original basis coordinates; internally the loop runs in the unit-Frobenius
rescaled coordinates of the :class:`SubspaceBasis`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .exceptions import (
    InfeasibleSubspace,
    LineSearchFailure,
    MaxIterationsReached,
    NotPositiveDefinite,
    SuspectedInfeasibleSubspace,
)
from .linalg import StructuredSpdMatrix, factorize
from .subspace import SubspaceBasis, check_feasibility

logger = logging.getLogger(__name__)

__all__ = [
    "SolverOptions",
    "PrimalState",
    "DecompositionResult",
    "evaluate_phi_grad",
    "hv_product",
    "exact_hessian",
    "line_search",
    "newton_cg",
    "exact_newton",
    "decompose",
]


@dataclass
class SolverOptions:
    """Knobs shared by all Newton-type solvers.

    ``cg_relative_tolerance=None`` selects the superlinear forcing rule
    eta = min(0.5, sqrt(||g||)), floored at ``cg_tolerance_floor``.
    ``method="auto"`` picks exact Newton when m <= ``auto_exact_threshold``.
    """

    grad_tolerance: float = 1e-8
    cg_relative_tolerance: float | None = None
    cg_tolerance_floor: float = 1e-12
    cg_max_iterations: int | None = None
    armijo_c1: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 60
    max_newton_iterations: int = 200
    divergence_radius: float = 1e8
    method: str = "auto"
    auto_exact_threshold: int = 64
    feasibility_check: bool = True

    def __post_init__(self):
        if self.grad_tolerance <= 0 or self.cg_tolerance_floor <= 0:
            raise ValueError("tolerances must be positive")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not 0.0 < self.armijo_c1 < 0.5:
            raise ValueError("armijo_c1 must lie in (0, 0.5)")
        if self.method not in ("newton-cg", "exact-newton", "auto"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.divergence_radius <= 0 or self.max_backtracks < 1:
            raise ValueError("invalid option values")


@dataclass
class DecompositionResult:
    """Solution of A = B^-1 + C with convergence diagnostics.

    ``x`` is expressed in the caller's original basis coordinates.  The
    orthogonality residual max_k |tr(B D_k)| is measured against the
    unit-Frobenius normalized basis, matching the solver's stop rule.
    """

    x: np.ndarray
    C: np.ndarray
    B: np.ndarray
    phi: float
    iterations: int
    final_grad_norm: float
    reconstruction_error: float
    orthogonality_residual: float
    method: str
    grad_norm_history: list = field(default_factory=list)
    projection_residual: float | None = None

    @property
    def n(self):
        return self.B.shape[0]

    def summary(self):
        return {
            "method": self.method,
            "n": int(self.n),
            "m": int(np.asarray(self.x).size),
            "iterations": int(self.iterations),
            "phi": float(self.phi),
            "final_grad_norm": float(self.final_grad_norm),
            "reconstruction_error": float(self.reconstruction_error),
            "orthogonality_residual": float(self.orthogonality_residual),
            **({"projection_residual": float(self.projection_residual)}
               if self.projection_residual is not None else {}),
        }


# ---------------------------------------------------------------------------
# M(x) construction plans (structure inheritance)
# ---------------------------------------------------------------------------


class _MPlan:
    """Builds M(coeffs) = base + sign * sum_k coeffs_k D_k in the structure
    that survives the combination.

    Structure rule: banded iff the base is banded (result half bandwidth is
    the max of base and basis bandwidths), Toeplitz iff base and every basis
    element are Toeplitz, dense otherwise.
    """

    def __init__(self, base: StructuredSpdMatrix, basis: SubspaceBasis, sign,
                 structure="auto"):
        self.basis = basis
        self.sign = float(sign)
        n = base.n
        kind = structure
        if structure == "auto":
            if base.structure == "banded" and max(base.half_bandwidth,
                                                  basis.max_half_bandwidth) < n - 1:
                kind = "banded"
            elif base.structure == "toeplitz" and basis.toeplitz_columns() is not None:
                kind = "toeplitz"
            else:
                kind = "dense"
        self.kind = kind

        if kind == "dense":
            self.base_dense = base.to_dense()
        elif kind == "banded":
            if base.structure != "banded":
                raise ValueError("banded plan requires a banded base matrix")
            self.bandwidth = max(base.half_bandwidth, basis.max_half_bandwidth)
            ab = np.zeros((self.bandwidth + 1, n))
            ab[: base.half_bandwidth + 1] = base.band_array
            self.base_band = ab
            lower = basis._rows >= basis._cols
            self._lb_off = basis._rows[lower] - basis._cols[lower]
            self._lb_col = basis._cols[lower]
            self._lb_val = basis._vals[lower]
            self._lb_elem = basis._elem[lower]
        elif kind == "toeplitz":
            cols = basis.toeplitz_columns()
            if base.structure != "toeplitz" or cols is None:
                raise ValueError("toeplitz plan requires Toeplitz base and basis")
            self.base_col = base.first_column
            self.basis_cols = cols
        else:
            raise ValueError(f"unknown structure {structure!r}")

    def build(self, coeffs) -> StructuredSpdMatrix:
        if self.kind == "dense":
            m = self.base_dense + self.sign * self.basis.combination_dense(coeffs)
            return StructuredSpdMatrix("dense", m.shape[0], dense_data=m)
        if self.kind == "banded":
            ab = self.base_band.copy()
            coeffs = np.asarray(coeffs, dtype=float)
            if coeffs.size:
                np.add.at(ab, (self._lb_off, self._lb_col),
                          self.sign * coeffs[self._lb_elem] * self._lb_val)
            return StructuredSpdMatrix.from_band_array(ab)
        col = self.base_col + self.sign * (np.asarray(coeffs) @ self.basis_cols) \
            if self.basis.m else self.base_col.copy()
        return StructuredSpdMatrix.toeplitz(col)


def _as_structured(a) -> StructuredSpdMatrix:
    if isinstance(a, StructuredSpdMatrix):
        return a
    return StructuredSpdMatrix.dense(np.asarray(a, dtype=float))


# ---------------------------------------------------------------------------
# Iterate state and trace plumbing (normalized coordinates)
# ---------------------------------------------------------------------------


class _IterState:
    """One evaluated iterate: value, gradient, factorization of the built
    matrix, and a lazily computed block of inverse columns over the basis
    support (reused by every Hessian-vector product at this iterate)."""

    __slots__ = ("coeffs", "value", "grad", "fact", "matrix", "_u")

    def __init__(self, coeffs, value, grad, fact, matrix):
        self.coeffs = coeffs
        self.value = value
        self.grad = grad
        self.fact = fact
        self.matrix = matrix
        self._u = None

    def support_columns(self, support):
        if self._u is None:
            self._u = self.fact.inv_columns(support)
        return self._u


def _inverse_trace_vector(fact, basis: SubspaceBasis):
    """g with g_k = tr(M^-1 D_k) for every basis element at once."""
    if basis.m == 0:
        return np.zeros(0)
    if fact.structure == "banded" and basis.max_half_bandwidth > fact.half_bandwidth:
        def entries(r, c):
            ucols, inv = np.unique(c, return_inverse=True)
            u = fact.inv_columns(ucols)
            return u[r, inv]
        return basis.traces_against(entries)
    return basis.traces_against(fact.inverse_entries)


class _LogDetObjective:
    """phi(coeffs) = -log|base + sign*C(coeffs)| + lin . coeffs + const.

    The primal problem is (sign=-1, lin=0); the negated dual objective is
    (sign=+1, lin=tr(A E_j)).  Gradients and Hessian products share the same
    trace machinery either way.
    """

    def __init__(self, base, basis, sign, lin=None, const=0.0, structure="auto"):
        self.basis = basis
        self.plan = _MPlan(base, basis, sign, structure=structure)
        self.sign = float(sign)
        self.lin = np.zeros(basis.m) if lin is None else np.asarray(lin, dtype=float)
        self.const = float(const)
        self.support = basis.support_indices
        self.pos = np.full(basis.n, -1, dtype=np.intp)
        self.pos[self.support] = np.arange(self.support.size)

    def evaluate(self, coeffs) -> _IterState:
        coeffs = np.asarray(coeffs, dtype=float)
        matrix = self.plan.build(coeffs)
        fact = factorize(matrix)
        value = -fact.log_determinant + float(self.lin @ coeffs) + self.const
        grad = self.sign * -_inverse_trace_vector(fact, self.basis) + self.lin
        return _IterState(coeffs, value, grad, fact, matrix)

    def hv(self, state: _IterState, p):
        """(H p)_k = tr(M^-1 D_k M^-1 D(p)); the linear term drops out."""
        p = np.asarray(p, dtype=float)
        if self.basis.m == 0:
            return np.zeros(0)
        u = state.support_columns(self.support)
        dv = self.basis.combination_sparse(p)
        g = u.T @ (dv @ u)
        return self.basis.pair_traces(g, self.pos)

    def hessian(self, state: _IterState):
        m = self.basis.m
        h = np.empty((m, m))
        if m == 0:
            return h
        u = state.support_columns(self.support)
        for l, e in enumerate(self.basis.elements):
            g = u.T @ (e.to_csr() @ u)
            h[:, l] = self.basis.pair_traces(g, self.pos)
        return 0.5 * (h + h.T)


# ---------------------------------------------------------------------------
# Newton-CG driver
# ---------------------------------------------------------------------------


def _cg_solve(hv, rhs, rel_tol, max_iter):
    """Plain CG on the SPD system H d = rhs, matrix-free."""
    d = np.zeros_like(rhs)
    r = rhs.copy()
    p = r.copy()
    rr = float(r @ r)
    target = (rel_tol * np.sqrt(rr)) ** 2
    for _ in range(max_iter):
        if rr <= target:
            break
        hp = hv(p)
        php = float(p @ hp)
        if php <= 0:
            break  # round-off negative curvature; return current iterate
        alpha = rr / php
        d += alpha * p
        r -= alpha * hp
        rr_new = float(r @ r)
        p = r + (rr_new / rr) * p
        rr = rr_new
    return d


def _backtrack(objective, state, direction, opts: SolverOptions):
    """Feasibility-preserving Armijo backtracking; first trial is t = 1.

    Once the predicted decrease falls below the floating-point resolution of
    the objective value, the Armijo comparison is pure noise; the first
    feasible step is then accepted so the quadratic phase can finish.
    """
    if not np.any(direction):
        return 1.0, state
    slope = float(state.grad @ direction)
    noise = 16.0 * np.finfo(float).eps * (1.0 + abs(state.value))
    t = 1.0
    for _ in range(opts.max_backtracks + 1):
        try:
            cand = objective.evaluate(state.coeffs + t * direction)
        except NotPositiveDefinite:
            t *= opts.backtrack_factor
            continue
        if slope < 0.0 and -slope * t <= noise:
            return t, cand
        if cand.value <= state.value + opts.armijo_c1 * t * slope:
            return t, cand
        t *= opts.backtrack_factor
    raise LineSearchFailure(
        f"no acceptable step after {opts.max_backtracks} backtracks")


def _newton_loop(objective: _LogDetObjective, opts: SolverOptions, x0, exact):
    state = objective.evaluate(np.asarray(x0, dtype=float))
    m = objective.basis.m
    cg_max = opts.cg_max_iterations if opts.cg_max_iterations is not None else max(m, 1)
    history = [float(np.linalg.norm(state.grad))]
    iterations = 0
    while True:
        gnorm = history[-1]
        if gnorm <= opts.grad_tolerance:
            return state, iterations, history
        if np.linalg.norm(state.coeffs) > opts.divergence_radius:
            raise SuspectedInfeasibleSubspace(
                "iterates exceeded the divergence radius; the objective "
                "appears unbounded below (subspace likely infeasible)")
        if iterations >= opts.max_newton_iterations:
            raise MaxIterationsReached(
                f"gradient norm {gnorm:.3e} after {iterations} iterations")
        if exact:
            h = objective.hessian(state)
            try:
                direction = -sla.solve(h, state.grad, assume_a="pos")
            except sla.LinAlgError:
                logger.warning("Hessian solve failed; falling back to steepest descent")
                direction = -state.grad
        else:
            eta = opts.cg_relative_tolerance
            if eta is None:
                eta = min(0.5, np.sqrt(gnorm))
            eta = max(eta, opts.cg_tolerance_floor)
            direction = _cg_solve(lambda p: objective.hv(state, p),
                                  -state.grad, eta, cg_max)
        if float(state.grad @ direction) >= 0.0:
            direction = -state.grad  # round-off safeguard
        previous_value = state.value
        _, state = _backtrack(objective, state, direction, opts)
        iterations += 1
        history.append(float(np.linalg.norm(state.grad)))
        if state.value >= previous_value and history[-1] > 100 * opts.grad_tolerance:
            # diagnostic only: stopping stays on the gradient norm
            logger.warning(
                "objective stagnated at iteration %d (gradient norm %.3e)",
                iterations, history[-1])


# ---------------------------------------------------------------------------
# Public derivative operations (original coordinates)
# ---------------------------------------------------------------------------


class PrimalState:
    """Evaluated primal iterate in original basis coordinates."""

    def __init__(self, objective, inner, basis):
        self._objective = objective
        self._inner = inner
        self._basis = basis
        self.x = basis.to_original_coordinates(inner.coeffs)
        self.phi = inner.value
        self.grad = inner.grad * basis.original_norms
        self.fact = inner.fact


def _primal_objective(a, basis, structure="auto"):
    return _LogDetObjective(_as_structured(a), basis, sign=-1.0, structure=structure)


def evaluate_phi_grad(a, basis: SubspaceBasis, x, structure="auto") -> PrimalState:
    """Phi(x), its gradient g_k = tr(M(x)^-1 D_k), and the factorization of
    M(x) = A - C(x).  Raises NotPositiveDefinite when x is infeasible."""
    objective = _primal_objective(a, basis, structure)
    inner = objective.evaluate(basis.to_normalized_coordinates(x))
    return PrimalState(objective, inner, basis)


def hv_product(state: PrimalState, basis: SubspaceBasis, p):
    """Hessian-vector product q_k = tr(B D_k B D(p)) at the state's iterate."""
    p = np.asarray(p, dtype=float)
    qn = state._objective.hv(state._inner, p * basis.original_norms)
    return qn * basis.original_norms


def exact_hessian(state: PrimalState, basis: SubspaceBasis):
    """Dense m x m Hessian tr(B D_k B D_l); SPD on the feasible set."""
    hn = state._objective.hessian(state._inner)
    scale = basis.original_norms
    return hn * np.outer(scale, scale)


def line_search(a, basis: SubspaceBasis, state: PrimalState, d, opts=None):
    """Feasibility-preserving Armijo backtracking from the state along d.

    Returns (t, next_state); the first trial is always t = 1.
    """
    opts = opts or SolverOptions()
    dn = np.asarray(d, dtype=float) * basis.original_norms
    t, inner = _backtrack(state._objective, state._inner, dn, opts)
    return t, PrimalState(state._objective, inner, basis)


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------


def _precheck(basis, opts):
    if not opts.feasibility_check:
        return
    verdict = check_feasibility(basis)
    if verdict.infeasible:
        raise InfeasibleSubspace(
            "subspace contains a nonzero PSD matrix; the decomposition "
            "does not exist", witness=verdict.witness)
    if verdict.status == verdict.UNKNOWN:
        logger.warning(
            "feasibility of the subspace could not be certified; relying on "
            "the divergence diagnostic at run time")


def _finish(a, basis, state, iterations, history, method,
            projection_residual=None, c_override=None, b_override=None,
            x_coeffs=None):
    a_dense = _as_structured(a).to_dense()
    coeffs = state.coeffs if x_coeffs is None else np.asarray(x_coeffs, dtype=float)
    c = basis.combination_dense(coeffs) if c_override is None else c_override
    b = state.fact.inverse_dense() if b_override is None else b_override
    b = 0.5 * (b + b.T)
    try:
        lower = np.linalg.cholesky(b)
        b_inv = sla.cho_solve((lower, True), np.eye(b.shape[0]), check_finite=False)
    except np.linalg.LinAlgError:
        b_inv = np.linalg.inv(b)
    recon = float(np.linalg.norm(a_dense - b_inv - c))
    orth_vec = basis.traces_with_dense(b)
    orth = float(np.max(np.abs(orth_vec))) if orth_vec.size else 0.0
    phi = -float(np.linalg.slogdet(b_inv)[1]) if b_override is not None \
        else -state.fact.log_determinant
    return DecompositionResult(
        x=basis.to_original_coordinates(coeffs),
        C=c,
        B=b,
        phi=phi,
        iterations=iterations,
        final_grad_norm=history[-1],
        reconstruction_error=recon,
        orthogonality_residual=orth,
        method=method,
        grad_norm_history=history,
        projection_residual=projection_residual,
    )


def _run_primal(a, basis, opts, x0, exact, structure):
    _precheck(basis, opts)
    objective = _primal_objective(a, basis, structure)
    x0n = np.zeros(basis.m) if x0 is None \
        else basis.to_normalized_coordinates(np.asarray(x0, dtype=float))
    state, iterations, history = _newton_loop(objective, opts, x0n, exact)
    method = "exact-newton" if exact else "newton-cg"
    return _finish(a, basis, state, iterations, history, method)


def newton_cg(a, basis: SubspaceBasis, options: SolverOptions | None = None,
              x0=None, structure="auto") -> DecompositionResult:
    """Newton-CG from x0 (default 0, always feasible for SPD A).

    Converges to the unique stationary point; the returned decomposition
    satisfies A = B^-1 + C with tr(B D_k) = 0 to the gradient tolerance.
    """
    return _run_primal(a, basis, options or SolverOptions(), x0, False, structure)


def exact_newton(a, basis: SubspaceBasis, options: SolverOptions | None = None,
                 x0=None, structure="auto") -> DecompositionResult:
    """Newton with the dense m x m Hessian solved directly; for small m."""
    return _run_primal(a, basis, options or SolverOptions(), x0, True, structure)


def decompose(a, basis: SubspaceBasis, options: SolverOptions | None = None,
              x0=None, structure="auto") -> DecompositionResult:
    """Dispatch on options.method ("auto": exact Newton for small m)."""
    opts = options or SolverOptions()
    if opts.method == "exact-newton" or (
            opts.method == "auto" and basis.m <= opts.auto_exact_threshold):
        return exact_newton(a, basis, opts, x0, structure)
    return newton_cg(a, basis, opts, x0, structure)
