"""Exception types shared across the package."""


class SpdsplitError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(SpdsplitError):
    """Operands have incompatible shapes."""


class NotPositiveDefinite(SpdsplitError):
    """A factorization found a non-positive pivot (the matrix is not SPD).

    Inside the solvers this doubles as the feasibility test of a trial point:
    a failed factorization of M(x) = A - C(x) means x is outside the feasible
    region.
    """


class PatternOutsideBand(SpdsplitError):
    """A selected-inverse query on a banded factor left the stored band."""


class RankDeficientBasis(SpdsplitError):
    """The supplied subspace basis matrices are not linearly independent."""


class NotInvariantSubspace(SpdsplitError):
    """The subspace is not invariant under the supplied group action."""


class NotOrthogonal(SpdsplitError):
    """The supplied matrix is not orthogonal to the required tolerance."""


class LineSearchFailure(SpdsplitError):
    """Backtracking exhausted its budget without an acceptable step."""


class MaxIterationsReached(SpdsplitError):
    """The Newton loop hit its iteration cap before reaching the tolerance."""


class SuspectedInfeasibleSubspace(SpdsplitError):
    """Iterates diverged past the divergence radius.

    The objective is unbounded below exactly when the subspace contains a
    nonzero PSD matrix, so runaway iterates are the runtime symptom of an
    infeasible subspace that the static checks could not certify.
    """


class InfeasibleSubspace(SpdsplitError):
    """The subspace provably contains a nonzero PSD matrix."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NoObviousDualStart(SpdsplitError):
    """No SPD element of the complement was found; supply B0 explicitly."""


class SingularJacobian(SpdsplitError):
    """The sensitivity Jacobian is numerically singular."""


class FeasibleIntervalCollapse(SpdsplitError):
    """A coordinate's feasible interval degenerated (near-infeasible subspace)."""


class StepLeavesFeasibleSet(SpdsplitError):
    """A finite-difference stencil point fell outside the feasible region."""


class MatrixParseError(SpdsplitError):
    """A matrix or basis file could not be parsed."""

    def __init__(self, message, path=None, line=None, column=None):
        loc = ""
        if path is not None:
            loc += f"{path}"
        if line is not None:
            loc += f":{line}"
        if column is not None:
            loc += f":{column}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line
        self.column = column
