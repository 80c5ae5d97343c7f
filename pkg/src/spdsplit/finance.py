"""Exponential-utility experiment on a mixed Brownian / fractional market.

A single tradable index S_t = W_t + alpha * B^H_t is observed on an N-point
grid.  The 2N-dimensional increment vector (index increment, Brownian
increment per step, interleaved) is Gaussian; under exponential utility the
optimal linear strategy and its value come from decomposing the precision
matrix against the zero-diagonal span encoding which past increments each
position may depend on.  Two information structures are built: full
information (every past increment) and Markovian (current aggregate levels
only, i.e. past increments enter only through their sums).

The optimal value is v* = (log|Sigma| - log|Q|)/2 with Q the SPD component
of the precision decomposition; it is nonnegative and vanishes at H = 1/2
where increments are independent.
"""

from __future__ import annotations

import concurrent.futures
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg as sla

from .exceptions import NotPositiveDefinite
from .linalg import SparseSymMatrix, StructuredSpdMatrix, factorize
from .primal import DecompositionResult, SolverOptions, decompose
from .subspace import SubspaceBasis

logger = logging.getLogger(__name__)

__all__ = [
    "MarketSpec",
    "MarketInstance",
    "UtilityResult",
    "SweepRow",
    "fbm_increment_covariance",
    "build_market",
    "utility_value",
    "value_sweep",
]

_MODE_ALIASES = {
    "full": "full", "full-info": "full", "fullinfo": "full",
    "markov": "markov", "markovian": "markov",
}


@dataclass
class MarketSpec:
    """Experiment description: N steps of size delta_t, mixing weight alpha,
    Hurst index hurst in (0.5, 1), and the information mode.

    hurst = 0.5 (independent increments) is admitted as a boundary case for
    the trivial zero-value check and flagged via ``is_boundary``.
    """

    n_steps: int
    delta_t: float
    alpha: float
    hurst: float
    mode: str = "full"

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.delta_t <= 0 or self.alpha <= 0:
            raise ValueError("delta_t and alpha must be positive")
        if not 0.5 <= self.hurst < 1.0:
            raise ValueError("hurst must lie in [0.5, 1)")
        if self.mode not in _MODE_ALIASES:
            raise ValueError(f"unknown mode {self.mode!r}")
        self.mode = _MODE_ALIASES[self.mode]

    @property
    def is_boundary(self):
        return self.hurst == 0.5

    @property
    def terminal_time(self):
        return self.n_steps * self.delta_t

    @classmethod
    def from_json(cls, payload):
        """Build from a JSON string or an already-parsed mapping."""
        import json

        if isinstance(payload, str):
            payload = json.loads(payload)
        return cls(
            n_steps=int(payload["n_steps"]),
            delta_t=float(payload["delta_t"]),
            alpha=float(payload["alpha"]),
            hurst=float(payload["hurst"]),
            mode=payload.get("mode", "full"),
        )

    def to_json(self):
        import json

        return json.dumps({
            "n_steps": self.n_steps, "delta_t": self.delta_t,
            "alpha": self.alpha, "hurst": self.hurst, "mode": self.mode,
        })


def fbm_increment_covariance(n_steps, delta_t, hurst) -> StructuredSpdMatrix:
    """Toeplitz covariance of fBm increments on a uniform grid.

    Lag-d entry: 0.5 * dt^(2H) * ((d+1)^(2H) + |d-1|^(2H) - 2 d^(2H)).
    """
    d = np.arange(n_steps, dtype=float)
    two_h = 2.0 * float(hurst)
    col = 0.5 * delta_t ** two_h * (
        (d + 1.0) ** two_h + np.abs(d - 1.0) ** two_h - 2.0 * d ** two_h)
    return StructuredSpdMatrix.toeplitz(col)


@dataclass
class MarketInstance:
    sigma: StructuredSpdMatrix          # 2N x 2N, interleaved ordering
    basis: SubspaceBasis                # strategy span, zero diagonal
    permutation: np.ndarray             # tau with (P Sigma P^T)_{ij} = Sigma[tau_i, tau_j]
    sigma1: StructuredSpdMatrix         # N x N Toeplitz fBm increment covariance
    raw_elements: list = field(default_factory=list)


def _full_info_elements(n_steps):
    """Unit pair (i, 2k-2) for every past increment i < 2k-2 (0-based,
    index increments sit at even positions)."""
    n = 2 * n_steps
    out = []
    for k in range(2, n_steps + 1):
        c = 2 * k - 2
        for i in range(c):
            out.append(SparseSymMatrix(n, [i], [c], [1.0]))
    return out


def _markov_elements(n_steps):
    """Aggregated pairs: for each step k >= 2 and each component parity,
    the sum of the full-information pairs of that parity."""
    n = 2 * n_steps
    out = []
    for k in range(2, n_steps + 1):
        c = 2 * k - 2
        for parity in (0, 1):
            rows = np.arange(parity, c, 2, dtype=np.intp)
            out.append(SparseSymMatrix(n, rows, np.full(rows.size, c), np.ones(rows.size)))
    return out


def build_market(spec: MarketSpec) -> MarketInstance:
    """Assemble the covariance from its permuted block form and the strategy span.

    In block order (index increments first, Brownian increments second) the
    covariance is [[alpha^2 Sigma1 + dt I, dt I], [dt I, dt I]]; the stored
    Sigma is its conjugation back to the interleaved ordering.
    """
    n_steps = spec.n_steps
    n = 2 * n_steps
    if spec.is_boundary:
        logger.info("hurst = 0.5 boundary case: increments are independent")
    sigma1 = fbm_increment_covariance(n_steps, spec.delta_t, spec.hurst)
    s1 = sigma1.to_dense()
    dt_eye = spec.delta_t * np.eye(n_steps)
    block = np.block([
        [spec.alpha ** 2 * s1 + dt_eye, dt_eye],
        [dt_eye, dt_eye],
    ])
    tau = np.empty(n, dtype=np.intp)
    tau[:n_steps] = 2 * np.arange(n_steps)
    tau[n_steps:] = 2 * np.arange(n_steps) + 1
    sigma = np.empty((n, n))
    sigma[np.ix_(tau, tau)] = block
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("market covariance is not SPD") from exc
    raw = _full_info_elements(n_steps) if spec.mode == "full" \
        else _markov_elements(n_steps)
    basis = SubspaceBasis(n, raw)
    return MarketInstance(
        sigma=StructuredSpdMatrix.dense(sigma),
        basis=basis,
        permutation=tau,
        sigma1=sigma1,
        raw_elements=raw,
    )


@dataclass
class UtilityResult:
    v_star: float
    qhat_logdet: float
    sigma_logdet: float
    decomposition: DecompositionResult


def utility_value(spec: MarketSpec, options: SolverOptions | None = None,
                  use_schur: bool = False) -> UtilityResult:
    """Optimal investment value via the precision-matrix decomposition.

    ``use_schur`` runs the solver in the permuted block coordinates where
    the precision matrix is assembled from the inverse of the N x N Toeplitz
    Schur complement alpha^2 Sigma1 instead of inverting the full 2N matrix;
    results are mapped back by conjugation and must agree with the dense
    path.
    """
    opts = options or SolverOptions()
    market = build_market(spec)
    if use_schur:
        return _utility_schur(spec, market, opts)
    sig = market.sigma.to_dense()
    lower = np.linalg.cholesky(sig)
    sigma_logdet = 2.0 * float(np.sum(np.log(np.diag(lower))))
    pi = sla.cho_solve((lower, True), np.eye(sig.shape[0]), check_finite=False)
    pi = 0.5 * (pi + pi.T)
    result = decompose(StructuredSpdMatrix.dense(pi), market.basis, opts)
    qhat_logdet = result.phi
    v_star = 0.5 * (sigma_logdet - qhat_logdet)
    return UtilityResult(v_star, qhat_logdet, sigma_logdet, result)


def _utility_schur(spec, market, opts):
    n_steps = spec.n_steps
    n = 2 * n_steps
    scaled = StructuredSpdMatrix.toeplitz(
        spec.alpha ** 2 * market.sigma1.first_column)
    f1 = factorize(scaled)
    g = f1.inverse_dense()
    # precision of [[E, F], [F, F]] with F = dt I is [[G, -G], [-G, G + I/dt]]
    pi_block = np.block([
        [g, -g],
        [-g, g + np.eye(n_steps) / spec.delta_t],
    ])
    sigma_logdet = n_steps * np.log(spec.delta_t) + f1.log_determinant
    tau = market.permutation
    inv = np.empty(n, dtype=np.intp)
    inv[tau] = np.arange(n)
    basis_perm = SubspaceBasis(n, [
        SparseSymMatrix(n, inv[e.rows], inv[e.cols], e.vals)
        for e in market.raw_elements
    ])
    res = decompose(StructuredSpdMatrix.dense(pi_block), basis_perm, opts)
    c_orig = res.C[np.ix_(inv, inv)]
    b_orig = res.B[np.ix_(inv, inv)]
    mapped = DecompositionResult(
        x=res.x,
        C=c_orig,
        B=b_orig,
        phi=res.phi,
        iterations=res.iterations,
        final_grad_norm=res.final_grad_norm,
        reconstruction_error=res.reconstruction_error,
        orthogonality_residual=res.orthogonality_residual,
        method=res.method,
        grad_norm_history=res.grad_norm_history,
    )
    v_star = 0.5 * (sigma_logdet - res.phi)
    return UtilityResult(v_star, res.phi, sigma_logdet, mapped)


@dataclass
class SweepRow:
    hurst: float
    mode: str
    v_star: float | None
    iterations: int | None
    grad_norm: float | None
    error: str | None = None


def value_sweep(template: MarketSpec, hurst_grid, modes=("full", "markov"),
                options: SolverOptions | None = None, use_schur: bool = False,
                jobs: int = 1):
    """One row per (H, mode), computed independently; a failed row is
    recorded with its error and the sweep continues.  Rows are returned in
    grid order regardless of completion order."""
    tasks = [(float(h), _MODE_ALIASES[m]) for h in hurst_grid for m in modes]

    def run(task):
        h, mode = task
        try:
            spec = replace(template, hurst=h, mode=mode)
            res = utility_value(spec, options, use_schur)
            return SweepRow(h, mode, res.v_star,
                            res.decomposition.iterations,
                            res.decomposition.final_grad_norm)
        except Exception as exc:  # per-row containment
            logger.warning("sweep row (H=%s, %s) failed: %s", h, mode, exc)
            return SweepRow(h, mode, None, None, None, error=str(exc))

    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run, tasks))
    else:
        rows = [run(t) for t in tasks]
    return rows
