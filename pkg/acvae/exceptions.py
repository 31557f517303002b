"""Custom exceptions for acvae.

Every exception carries the process exit code the command line maps it to.
"""

from pathlib import Path

__all__ = [
    "AcvaeError",
    "ConfigurationError",
    "UnsupportedModeError",
    "DataError",
    "DataFileNotFoundError",
    "BadMagicError",
    "TruncatedFileError",
    "TrailingBytesError",
    "LabelOutOfRangeError",
    "ArtifactIOError",
    "DownloadError",
    "NumericError",
    "ShapeMismatchError",
    "NoCachedForwardError",
    "NonFiniteError",
    "CheckpointError",
    "CheckpointVersionError",
]

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_CHECKPOINT = 5


class AcvaeError(Exception):
    """Base exception for all acvae errors."""

    def __init__(self, message: str, exit_code: int = 1) -> None:
        """Initialize error with message and the exit code it maps to."""
        self.message = message
        self.exit_code = exit_code
        super().__init__(message)


class ConfigurationError(AcvaeError):
    """Raised when flags or configuration values violate an invariant."""

    def __init__(self, message: str) -> None:
        """Initialize configuration error."""
        super().__init__(message, exit_code=EXIT_CONFIG)


class UnsupportedModeError(ConfigurationError):
    """Raised when a task requires a conditioning mode the model lacks."""

    def __init__(self, mode: str, task: str) -> None:
        """Initialize unsupported-mode error."""
        super().__init__(f"task '{task}' is not supported for conditioning mode '{mode}'")
        self.mode = mode
        self.task = task


class DataError(AcvaeError):
    """Raised when input data cannot be read or is malformed."""

    def __init__(self, message: str) -> None:
        """Initialize data error."""
        super().__init__(message, exit_code=EXIT_DATA)


class DataFileNotFoundError(DataError):
    """Raised when an expected dataset file is missing."""

    def __init__(self, path: Path | str) -> None:
        """Initialize missing-file error."""
        super().__init__(f"data file not found: {path}")
        self.path = Path(path)


class BadMagicError(DataError):
    """Raised when an IDX header carries the wrong magic number."""

    def __init__(self, found: int, expected: int) -> None:
        """Initialize bad-magic error."""
        super().__init__(f"BadMagic(found=0x{found:08x}, expected=0x{expected:08x})")
        self.found = found
        self.expected = expected


class TruncatedFileError(DataError):
    """Raised when an IDX payload is shorter than its header declares."""

    def __init__(self, expected: int, got: int) -> None:
        """Initialize truncated-file error."""
        super().__init__(f"TruncatedFile(expected={expected}, got={got})")
        self.expected = expected
        self.got = got


class TrailingBytesError(DataError):
    """Raised when bytes remain after the declared IDX payload."""

    def __init__(self, count: int) -> None:
        """Initialize trailing-bytes error."""
        super().__init__(f"TrailingBytes(count={count})")
        self.count = count


class LabelOutOfRangeError(DataError):
    """Raised when a class label lies outside the known classes."""

    def __init__(self, value: int, index: int) -> None:
        """Initialize label-range error."""
        super().__init__(f"LabelOutOfRange(value={value}, index={index})")
        self.value = value
        self.index = index


class ArtifactIOError(DataError):
    """Raised when an artifact cannot be read or written."""

    def __init__(self, path: Path | str, original_error: Exception | None = None) -> None:
        """Initialize artifact I/O error."""
        detail = f": {original_error}" if original_error else ""
        super().__init__(f"I/O error on {path}{detail}")
        self.path = Path(path)
        self.original_error = original_error


class DownloadError(DataError):
    """Raised when a dataset file cannot be downloaded."""

    def __init__(self, message: str, original_error: Exception | None = None) -> None:
        """Initialize download error."""
        super().__init__(message)
        self.original_error = original_error


class NumericError(AcvaeError):
    """Raised when a numeric kernel cannot produce a valid result."""

    def __init__(self, message: str) -> None:
        """Initialize numeric error."""
        super().__init__(message, exit_code=EXIT_NUMERIC)


class ShapeMismatchError(NumericError):
    """Raised when operand shapes are incompatible."""

    def __init__(
        self,
        shape_a: tuple[int, ...],
        shape_b: tuple[int, ...],
        op: str = "matmul",
    ) -> None:
        """Initialize shape-mismatch error naming both shapes."""
        super().__init__(f"{op}: shape mismatch {shape_a} vs {shape_b}")
        self.shape_a = shape_a
        self.shape_b = shape_b
        self.op = op


class NoCachedForwardError(NumericError):
    """Raised when backward is called without a matching forward."""

    def __init__(self, layer: str) -> None:
        """Initialize missing-cache error."""
        super().__init__(f"backward called on '{layer}' without a cached forward pass")
        self.layer = layer


class NonFiniteError(NumericError):
    """Raised when a loss, gradient or parameter stops being finite."""

    def __init__(self, where: str, detail: str = "") -> None:
        """Initialize non-finite error."""
        suffix = f" ({detail})" if detail else ""
        super().__init__(f"non-finite value in {where}{suffix}")
        self.where = where
        self.detail = detail


class CheckpointError(AcvaeError):
    """Raised when a checkpoint file is malformed."""

    def __init__(self, message: str) -> None:
        """Initialize checkpoint error."""
        super().__init__(message, exit_code=EXIT_CHECKPOINT)


class CheckpointVersionError(CheckpointError):
    """Raised when a checkpoint was written by an incompatible format version."""

    def __init__(self, found: int, expected: int) -> None:
        """Initialize checkpoint-version error."""
        super().__init__(f"checkpoint format version {found}, expected {expected}")
        self.found = found
        self.expected = expected
