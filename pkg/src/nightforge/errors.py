"""Exception and warning types shared across the package."""


class NightforgeError(Exception):
    """Base class for all package-specific errors."""


class ImageFormatError(NightforgeError):
    """File is not one of the supported image formats."""


class CorruptImageError(NightforgeError):
    """File claims a supported format but its contents are unreadable."""


class DataError(NightforgeError):
    """A dataset precondition failed (empty directory, no usable files)."""


class DimensionError(NightforgeError):
    """Operands that must share a shape do not."""


class CheckpointError(NightforgeError):
    """Checkpoint file is malformed or does not match the model architecture."""


class OptimizerError(NightforgeError):
    """Optimizer update rejected (non-finite gradient)."""


class TrainingError(NightforgeError):
    """Training aborted; carries the loss trace collected so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class MetricError(NightforgeError):
    """Base class for quality-metric failures."""


class MetricProcessError(MetricError):
    """External metric command exited with a non-zero status."""


class MetricTimeoutError(MetricError):
    """External metric command exceeded its timeout."""


class MetricParseError(MetricError):
    """External metric output was not a single finite decimal number."""


class DegenerateImageWarning(UserWarning):
    """Raised when normalization hits a constant image (max == min)."""
