"""Exception hierarchy shared across the package."""


class RmfeatError(Exception):
    """Base class for all package-specific errors."""


class FormatError(RmfeatError):
    """A binary or text artifact violates its file format contract."""


class NumericError(RmfeatError):
    """Non-finite values where finite data is required."""


class ConfigError(RmfeatError):
    """Invalid configuration: missing files, bad modes, dimension clashes."""


class InputError(RmfeatError):
    """A single input image (or its tensors) could not be processed."""

    def __init__(self, image_id: str, message: str):
        super().__init__(f"{image_id}: {message}")
        self.image_id = image_id


class FitError(RmfeatError):
    """Model fitting preconditions violated (sample sizes, dimensions)."""


class EvaluationError(RmfeatError):
    """Ground truth and rankings are inconsistent."""


class BatchError(RmfeatError):
    """Every item of a batch failed."""
