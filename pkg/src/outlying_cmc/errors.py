"""Exception hierarchy shared by every module of the package."""


class OutlyingCMCError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(OutlyingCMCError, ValueError):
    pass


class DomainError(OutlyingCMCError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class EvaluationError(OutlyingCMCError, ArithmeticError):
    """A field returned a non-finite value at a quadrature node."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class InconsistencyError(OutlyingCMCError):
    """Two independent evaluation routes disagree beyond tolerance."""


class BoundaryError(OutlyingCMCError):
    """An iterative search left the admissible region (no interior critical point)."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class SolverFailure(OutlyingCMCError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class IllConditionedError(SolverFailure):
    pass


class GeometryError(OutlyingCMCError):
    pass


class MetricDegenerateError(OutlyingCMCError):
    """The metric fails to be positive definite at some evaluation point."""


class ConstructionFailure(OutlyingCMCError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class DegenerateS0Error(ConstructionFailure):
    """The derivative of I vanishes (numerically) at the chosen s0."""
