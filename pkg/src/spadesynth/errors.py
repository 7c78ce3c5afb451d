"""Exception types shared across the package."""


class SpadeError(Exception):
    """Root of the package's exception hierarchy."""


class DimensionError(SpadeError, ValueError):
    """Tensor shapes incompatible with the requested operation."""


class ConfigError(SpadeError, ValueError):
    """Invalid or inconsistent configuration value."""


class UsageError(SpadeError, ValueError):
    """API misuse, e.g. backward on a non-scalar."""


class ParseError(SpadeError, ValueError):
    """Malformed file content; message names the offending location."""


class TrainingDiverged(SpadeError, RuntimeError):
    """Non-finite loss encountered; message names the offending tensor."""
