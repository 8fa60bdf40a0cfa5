"""Exception types shared across the package."""


class RadReactError(Exception):
    """Base class for all package errors."""


class DimensionError(RadReactError, ValueError):
    """Operands live in different (or unsupported) spacetime dimensions."""


class ExtrapolationError(RadReactError, ValueError):
    """A worldline was queried outside its stored parameter range."""


class HistoryTooShortError(RadReactError):
    """The stored history does not reach back to the retarded time of a field point."""


class SingularPointError(RadReactError):
    """The field point lies on the worldline itself."""


class RaySingularityError(RadReactError):
    """Field requested on the forward ray of a massless charge, where r = 0.

    The null direction ``k`` of the offending emission event is kept so that
    callers can apply an angular cutoff around it.
    """

    def __init__(self, message, k=None, s=None):
        super().__init__(message)
        self.k = k
        self.s = s


class StepSizeUnderflowError(RadReactError):
    """Adaptive integration could not meet tolerance with a representable step."""


class RunawayError(RadReactError):
    """Self-accelerating (runaway) solution detected during integration.

    ``verdict`` is a :class:`radreact.dynamics.RunawayVerdict` describing the
    measured growth.
    """

    def __init__(self, message, verdict=None):
        super().__init__(message)
        self.verdict = verdict


class ConfigError(RadReactError, ValueError):
    """Malformed scenario configuration."""
