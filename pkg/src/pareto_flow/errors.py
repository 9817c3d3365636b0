"""Exception hierarchy."""


class ParetoFlowError(Exception):
    """Base class for all package errors."""


class DimensionError(ParetoFlowError, ValueError):
    """Arrays with incompatible shapes were combined."""


class InfeasiblePointError(ParetoFlowError, ValueError):
    """A point that must lie in the constraint set does not."""


class ConfigError(ParetoFlowError, ValueError):
    """A problem configuration document failed to parse or validate."""


class CapabilityError(ParetoFlowError, NotImplementedError):
    """The requested operation is not available for this objective kind."""


class ConvergenceError(ParetoFlowError, RuntimeError):
    """An iterative solver stopped without meeting its tolerance.

    ``best`` holds the best iterate found and ``residual`` its residual.
    """

    def __init__(self, message, best=None, residual=None, **info):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.info = info


class StepFailure(ConvergenceError):
    """A line search or integration step could not be completed."""
