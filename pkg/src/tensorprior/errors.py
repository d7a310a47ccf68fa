"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible dimensions."""


class ConfigError(ValueError):
    """A user-supplied configuration is invalid (bad geometry, flags, ranges)."""


class NumericError(RuntimeError):
    """A computation produced non-finite values or failed to factorize."""
