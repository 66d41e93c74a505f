"""Exception hierarchy shared by all modules."""


class KoopnemError(Exception):
    """Base class for library errors."""


class ConfigurationError(KoopnemError, ValueError):
    """Invalid kernel, model or experiment settings."""


class InputError(KoopnemError, ValueError):
    """Array shapes or dimensions that do not fit together."""


class FitError(KoopnemError, RuntimeError):
    """Operator fitting failed (ill-conditioning, eigensolver trouble)."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class SimulationError(KoopnemError, RuntimeError):
    """Ground-truth simulation hit a non-physical or non-finite state."""
