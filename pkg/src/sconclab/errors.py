"""Exception hierarchy shared by every module."""


class SconcError(Exception):
    """Base class for all library errors."""


class OutOfDomain(SconcError):
    pass


class NonConvexObjective(SconcError):
    pass


class MaximizerOnBoundary(SconcError):
    pass


class NoDifferentiablePointsFound(SconcError):
    pass


class NoConvergence(SconcError):
    """Iterative solver stopped early; ``best`` carries the last iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ShootingNotDiffeo(SconcError):
    pass


class LocalizationViolated(SconcError):
    pass


class MissingConstants(SconcError):
    pass


class StepRejected(SconcError):
    pass


class NotConvexAtX(SconcError):
    pass


class OutsideWindow(SconcError):
    pass


class EmptyCloud(SconcError):
    pass


class CriticalTimeExceeded(SconcError):
    pass


class DegenerateScales(SconcError):
    pass


class EndpointsSingular(SconcError):
    pass


class NoPathFoundAtResolution(SconcError):
    def __init__(self, message, failure_density=None):
        super().__init__(message)
        self.failure_density = failure_density


class ConfigError(SconcError):
    pass
