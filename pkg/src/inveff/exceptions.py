"""Exception types shared across the package."""


class InvEffError(Exception):
    """Base class for package errors."""


class ConfigError(InvEffError, ValueError):
    """Bad argument, bad configuration, or mismatched models."""


class ModelError(InvEffError):
    """A model quantity needed by an estimator is unusable (e.g. zero Fisher information)."""


class ValidationFailure(InvEffError):
    """A checked mathematical condition does not hold."""


class SummabilityRefusal(ValidationFailure):
    """The functional is not in the range of the adjoint inverse, so no efficient estimator is built."""
