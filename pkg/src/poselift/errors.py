"""Exception types shared across the package."""


class PoseLiftError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(PoseLiftError):
    """Tensor shapes are incompatible for the requested operation."""


class SequenceTooShortError(DimensionError):
    """A temporal operation needs more frames than the input provides."""


class ConfigError(PoseLiftError):
    """Invalid or inconsistent configuration value."""


class FormatError(PoseLiftError):
    """On-disk data is corrupt, truncated, or has an unsupported version."""


class TrainingError(PoseLiftError):
    """Training or gradient bookkeeping reached an invalid state."""
