"""Exception taxonomy shared across the package."""


class SpanRlError(Exception):
    """Base class for all package errors."""


class DimensionError(SpanRlError):
    """Array shapes incompatible with the requested operation."""


class DomainError(SpanRlError):
    """Input outside the mathematical domain of an operation."""


class InputError(SpanRlError):
    """Non-finite or malformed network input."""


class ActionError(SpanRlError):
    """Action invalid for the environment's action space."""


class ProtocolError(SpanRlError):
    """Environment API used out of order (e.g. step after episode end)."""


class TrainingFault(SpanRlError):
    """Non-finite quantity encountered during training.

    Carries enough context (parameter entry, seed) to locate the fault.
    """

    def __init__(self, message, entry=None, seed=None):
        super().__init__(message)
        self.entry = entry
        self.seed = seed


class ConfigError(SpanRlError):
    """Unparseable or inconsistent run configuration."""


class CheckpointError(SpanRlError):
    """Malformed parameter or dataset container file."""
