"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand sizes do not match, or a qubit index is out of range."""


class PreconditionError(ValueError):
    """An operation was called outside its documented domain."""


class ConfigurationError(ValueError):
    """Incompatible backend / noise / experiment settings."""


class UnsupportedGateError(ConfigurationError):
    """The backend cannot execute the requested gate (e.g. T on a tableau)."""


class GadgetAbortError(RuntimeError):
    """Ancilla preparation was rejected on every allowed attempt."""


class InsufficientDataError(ValueError):
    """Too few usable points for a fit."""


class NoConvergenceError(ValueError):
    """Concatenation cannot reach the target because p is not below threshold."""
