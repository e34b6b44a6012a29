"""Exception types shared across the library."""


class SolverError(RuntimeError):
    """A linear solve failed to reach the requested residual.

    Carries the residual history so callers can inspect stagnation.
    """

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class OptimizerError(RuntimeError):
    """A nonlinear minimization failed to converge; carries the trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class ResolutionError(ValueError):
    """The domain cannot resolve the requested design."""


class InfeasibleError(ValueError):
    """Requested design parameters do not fit in the domain."""
