class DimensionMismatch(ValueError):
    """Two objects that must share a dimension ``n`` do not."""


class MarginError(ValueError):
    """Energy level too close to the quantization scale: needs ``B >= E + 10``."""


class CapExceeded(RuntimeError):
    """An enumeration would exceed its configured work or memory cap."""


class ConfigError(ValueError):
    """Experiment configuration failed validation."""
