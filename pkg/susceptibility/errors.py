"""Exception types shared by the library and the command layer."""


class SusceptibilityError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SusceptibilityError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PreconditionError(SusceptibilityError, ValueError):
    """A theorem hypothesis does not hold for the supplied constants."""


class CapabilityError(SusceptibilityError, NotImplementedError):
    """The requested combination (set, metric, norm) is not supported."""


class ConfigError(SusceptibilityError, ValueError):
    """A command-line flag or config-file value is missing or malformed."""
