"""Exception types shared across the toolkit."""


class PlanarMpcError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(PlanarMpcError, ValueError):
    """Invalid model, task, or solver configuration."""


class DimensionError(PlanarMpcError, ValueError):
    """Input vector does not match the model's layout."""


class DynamicsError(PlanarMpcError, RuntimeError):
    """Forward dynamics failed (singular mass matrix or non-finite result)."""


class ProtocolError(PlanarMpcError, ValueError):
    """Malformed or invalid session protocol message."""
