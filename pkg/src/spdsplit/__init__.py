"""spdsplit: constrained decomposition of symmetric positive definite matrices.

Splits an SPD matrix A uniquely as A = inv(B) + C, where C is confined to a
prescribed linear subspace S of symmetric matrices and B is SPD and
trace-orthogonal to S.  The split exists and is unique whenever S contains
no nonzero PSD matrix.
"""

from .dual import dual_newton_cg, evaluate_psi_grad, initial_dual_point
from .estimator import ConstrainedDecomposition
from .exceptions import (
    DimensionMismatch,
    FeasibleIntervalCollapse,
    InfeasibleSubspace,
    LineSearchFailure,
    MatrixParseError,
    MaxIterationsReached,
    NoObviousDualStart,
    NotInvariantSubspace,
    NotOrthogonal,
    NotPositiveDefinite,
    PatternOutsideBand,
    RankDeficientBasis,
    SingularJacobian,
    SpdsplitError,
    StepLeavesFeasibleSet,
    SuspectedInfeasibleSubspace,
)
from .finance import (
    MarketSpec,
    build_market,
    fbm_increment_covariance,
    utility_value,
    value_sweep,
)
from .linalg import (
    Factorization,
    SparseSymMatrix,
    StructuredSpdMatrix,
    detect_structure,
    factorize,
    selected_inverse,
    solve,
    trace_inv_pair,
    trace_inv_times,
)
from .primal import (
    DecompositionResult,
    SolverOptions,
    decompose,
    evaluate_phi_grad,
    exact_hessian,
    exact_newton,
    hv_product,
    line_search,
    newton_cg,
)
from .properties import (
    VerificationReport,
    VerificationTolerances,
    conjugate_decomposition,
    group_fixed_check,
    inverse_decomposition,
    sensitivity,
    verify_decomposition,
)
from .subspace import (
    FeasibilityVerdict,
    GroupAction,
    SubspaceBasis,
    check_feasibility,
    complement_basis,
    fixed_subspace,
    half_vectorize,
    inverse_half_vectorize,
)

__version__ = "0.1.0"
