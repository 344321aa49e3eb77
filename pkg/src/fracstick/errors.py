"""Exception types shared across the package."""


class FracstickError(Exception):
    """Base class for all package-specific errors."""


class DomainError(FracstickError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ResolutionError(FracstickError, ValueError):
    """The grid or sampling resolution is too coarse for the request."""


class PreconditionError(FracstickError, ValueError):
    """A structural precondition (set inclusion, disjointness, ...) fails."""


class DivergedError(FracstickError, RuntimeError):
    """Iteration diverged; carries the residual trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []
