"""Exception hierarchy shared by all modules."""


class HarmgradError(ValueError):
    """Base class for every error raised by the package."""


class InvalidGridError(HarmgradError):
    pass


class UnsupportedDomainError(HarmgradError):
    pass


class PreconditionError(HarmgradError):
    pass


class SingularityError(PreconditionError):
    pass


class ConstructionError(HarmgradError):
    pass


class TruncationError(HarmgradError):
    """A jet is too short for the requested expansion order."""

    def __init__(self, message, required_order=None):
        super().__init__(message)
        self.required_order = required_order


class QuadratureError(HarmgradError):
    def __init__(self, message, error_estimate=None):
        super().__init__(message)
        self.error_estimate = error_estimate


class ConditioningError(HarmgradError):
    pass


class SeriesDivergenceError(HarmgradError):
    pass


class DiagnosticsError(HarmgradError):
    pass


class SmallnessViolatedError(HarmgradError):
    def __init__(self, message, ratio=None):
        super().__init__(message)
        self.ratio = ratio


class ResolutionError(HarmgradError):
    pass


class ConsistencyError(HarmgradError):
    """Two routes to the same quantity disagree beyond tolerance."""


class ConfigError(HarmgradError):
    pass
