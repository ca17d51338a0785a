"""Exception types shared across the package."""


class NclError(Exception):
    """Base class for all package errors."""


class DomainError(NclError):
    """An evaluation produced a non-finite value (log of a negative number, overflow, ...)."""


class BadDimension(NclError):
    """A vector or matrix argument has the wrong shape."""


class NonPositiveRho(NclError):
    """The penalty parameter must be strictly positive."""


class EvaluationError(NclError):
    """A model evaluation failed at the solver's current iterate.

    The last accepted primal-dual iterate is attached as ``point`` so callers
    can inspect or restart from it.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class NonInterior(NclError):
    """A bounded component sits on (or outside) its bound where strict interiority is required."""


class SingularSystem(NclError):
    """The reduced KKT matrix is numerically singular (rank-deficient Jacobian, no residual block)."""


class RegularizationFailed(NclError):
    """No diagonal shift up to the admissible limit produced the required inertia."""


class SubsolverFailure(NclError):
    """Three consecutive subproblem solves failed hard."""


class NoConstraints(NclError):
    """A feasibility-residual reformulation needs at least one constraint."""


class UnknownProblem(NclError):
    """The requested name is not in the problem registry."""


class DegenerateMetric(NclError):
    """A performance-profile metric has a zero minimum for some problem."""


class ParseError(NclError):
    """Model-text syntax error with source position."""

    def __init__(self, message, line, col):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class UndeclaredVariable(NclError):
    """An expression references an identifier that was never declared."""


class NonConstantExponent(NclError):
    """The exponent of '^' must be a constant expression."""
