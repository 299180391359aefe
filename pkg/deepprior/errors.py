"""
Error hierarchy for the hand pose pipeline.

Every error carries the exit code the CLI reports for it.
"""


class DeepPriorError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 2


class ConfigError(DeepPriorError):
    """Invalid run configuration or command-line usage."""

    exit_code = 1


class DomainError(DeepPriorError, ValueError):
    """A value lies outside the domain of an operation (e.g. depth <= 0)."""


class ShapeError(DeepPriorError, ValueError):
    """Array shapes or lengths do not match what an operation expects."""


class EmptyCropError(DeepPriorError):
    """The crop cube projects entirely outside the depth frame."""


class NoHandError(DeepPriorError):
    """No hand pixels could be found in a depth frame."""


class OutOfViewError(DeepPriorError):
    """A synthetic hand does not fit inside the camera frustum."""


class InsufficientDataError(DeepPriorError):
    """Too few samples to fit a model."""


class DimensionError(DeepPriorError, ValueError):
    """Requested dimensionality exceeds the data dimensionality."""


class TrainingError(DeepPriorError):
    """Training diverged (non-finite loss or gradient)."""

    exit_code = 3


class DatasetFormatError(DeepPriorError):
    """A dataset or model file is malformed."""


class VersionMismatchError(DatasetFormatError):
    """File format version is not supported by this build."""


class TruncatedFileError(DatasetFormatError):
    """File ends before all declared content was read."""


class ChecksumError(DatasetFormatError):
    """Stored checksum does not match the file content."""


class ArchitectureMismatchError(DatasetFormatError):
    """A model file holds a different architecture than requested."""


class RecordStoreError(DeepPriorError):
    """The run records database could not be read or written."""
