"""Exception types shared across the toolkit."""


class StackQCError(Exception):
    """Base class for all toolkit errors."""


class ParseError(StackQCError):
    """A binary or text input could not be parsed.

    Parameters
    ----------
    offset : int
        Byte (or row) offset at which parsing failed.
    reason : str
        Human-readable description of the problem.
    """

    def __init__(self, offset, reason):
        self.offset = offset
        self.reason = reason
        super().__init__(f"parse error at offset {offset}: {reason}")


class UnsupportedDatatype(StackQCError):
    """Voxel datatype outside the supported set."""


class DimensionError(StackQCError):
    """Array rank or extents incompatible with the operation."""


class EmptyDataset(StackQCError):
    """A dataset index or table contains no usable entries."""


class DuplicateRun(StackQCError):
    """Two dataset entries share the same (subject, run) identity."""


class SchemaError(StackQCError):
    """A table or serialized object is missing mandatory structure."""


class EmptyRegion(StackQCError):
    """A mask or region of interest contains no voxels."""


class InsufficientSlices(StackQCError):
    """Fewer than the required number of usable slices."""


class DegenerateFeatures(StackQCError):
    """Feature matrix collapsed to nothing (all columns removed, rank 0...)."""


class DegenerateLabels(StackQCError):
    """Labels carry no signal (single class or zero variance)."""


class InsufficientGroups(StackQCError):
    """Not enough distinct groups for the requested split."""


class EvaluationError(StackQCError):
    """Model evaluation could not produce a result."""


class SingleClassError(StackQCError):
    """A ranking metric was requested on a single-class target."""


class Unsupported(StackQCError):
    """Operation not defined for this model family or configuration."""


class VersionError(StackQCError):
    """Serialized artifact written by an incompatible format version."""


class IoError(StackQCError):
    """Filesystem write or read failure."""
