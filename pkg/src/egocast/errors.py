"""Shared exception types and the process exit codes they map to."""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4


class ConfigError(ValueError):
    """Invalid configuration value or inconsistent option combination."""


class ShapeError(ConfigError):
    """Operands with incompatible shapes; the message names both shapes."""


class MaskError(ConfigError):
    """A softmax mask left some row with no unmasked entry."""


class ContractError(RuntimeError):
    """An operation was invoked outside its contract (e.g. missing gradients)."""


class DataError(ValueError):
    """Malformed or unacceptable input data."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


class OracleError(RuntimeError):
    """A verification oracle's own preconditions do not hold."""
