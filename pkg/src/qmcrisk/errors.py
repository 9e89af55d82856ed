"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: bad key, bad flag value, dimension mismatch,
    or a precondition the caller could have checked."""


class PrecisionError(ValueError):
    """Point coordinates are not representable on the required dyadic grid."""


class WorkLimitError(RuntimeError):
    """Requested verification job exceeds the hard work budget."""
