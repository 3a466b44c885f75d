"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A value or configuration violates a documented invariant."""


class DegenerateProfileError(ValueError):
    """All attenuation weights are zero; normalization is undefined."""


class DimensionMismatchError(ValueError):
    """Vector or matrix dimensions do not agree."""


class IncompleteEpochError(RuntimeError):
    """A distance update was requested before the epoch's runs completed."""


class ConfigError(ValidationError):
    """A run configuration file failed to parse or validate."""
