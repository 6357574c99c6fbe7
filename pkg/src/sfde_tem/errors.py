"""Exception hierarchy shared across the package."""


class SfdeTemError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(SfdeTemError):
    """Invalid run setup: bad step/horizon ratios, unknown config keys, etc."""


class NumericalError(SfdeTemError):
    """Non-finite value or unreachable tolerance, with context for debugging."""

    def __init__(self, message: str, **context):
        if context:
            details = ", ".join(f"{k}={v}" for k, v in context.items())
            message = f"{message} ({details})"
        super().__init__(message)
        self.context = context


class DegenerateFitError(SfdeTemError):
    """Rate fit requested on data with zero or negative error values."""


class UnsupportedPointError(SfdeTemError):
    """Continuous-extension evaluation requested off the fine time grid."""
