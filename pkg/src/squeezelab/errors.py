"""Exception hierarchy for squeezelab."""


class SqueezelabError(Exception):
    """Base class for all package errors."""


class ParameterError(SqueezelabError):
    """Invalid or inconsistent input parameters."""


class ConfigError(SqueezelabError):
    """Malformed or incomplete configuration document."""


class NormalizationError(SqueezelabError):
    """A quantity violates its normalization bound (e.g. |c_j| > 1)."""


class SingularResponseError(SqueezelabError):
    """The response denominator vanished; system at an instability threshold."""


class InstabilityError(SqueezelabError):
    """Operation refused because the configuration is dynamically unstable."""


class NumericalError(SqueezelabError):
    """A numerical routine failed to converge or produced non-finite output."""


class ResourceError(SqueezelabError):
    """Requested computation exceeds a hard resource guard."""
