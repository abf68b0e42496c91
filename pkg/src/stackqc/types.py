"""Core domain types: stacks, masks, dataset indices, ratings, IQM vectors."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, EmptyRegion

ORIENTATIONS = ("axial", "coronal", "sagittal", "unknown")

#: Artifact flags a rater can grade (0 = absent .. 3 = severe).
ARTIFACT_FLAGS = (
    "inter_slice_motion",
    "signal_drop",
    "bias_field",
    "incomplete_fov",
    "noise",
    "other",
)

#: Continuous ratings at or below this value mean "exclude".
EXCLUDE_THRESHOLD = 1.0


def through_plane_axis(spacing) -> int:
    """Axis with the coarsest spacing; ties broken towards the highest axis."""
    spacing = np.asarray(spacing, dtype=float)
    return int(2 - np.argmax(spacing[::-1]))


@dataclass
class Stack:
    """One low-resolution 3D stack of 2D slices.

    ``voxels`` is a non-negative float32 array; ``spacing`` is (dx, dy, dz)
    in mm; ``affine`` maps voxel indices to world mm. The through-plane axis
    is the axis with the largest spacing.
    """

    subject_id: str
    run_id: str
    voxels: np.ndarray
    spacing: tuple[float, float, float]
    affine: np.ndarray
    through_plane_axis: int = -1

    def __post_init__(self):
        self.voxels = np.asarray(self.voxels)
        if self.voxels.ndim != 3 or min(self.voxels.shape) < 1:
            raise DimensionError(
                f"stack voxels must be rank 3 with positive extents, got shape {self.voxels.shape}"
            )
        self.spacing = tuple(float(s) for s in self.spacing)
        if any(s <= 0 for s in self.spacing):
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        self.affine = np.asarray(self.affine, dtype=np.float64)
        if self.affine.shape != (4, 4):
            raise DimensionError("affine must be 4x4")
        if self.through_plane_axis < 0:
            self.through_plane_axis = through_plane_axis(self.spacing)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.voxels.shape

    def in_plane_axes(self) -> tuple[int, int]:
        return tuple(a for a in range(3) if a != self.through_plane_axis)


@dataclass
class BrainMask:
    """Binary mask co-registered with a stack (same grid, same spacing)."""

    voxels: np.ndarray
    spacing: tuple[float, float, float]
    affine: np.ndarray

    def __post_init__(self):
        self.voxels = np.asarray(self.voxels)
        if self.voxels.ndim != 3:
            raise DimensionError(f"mask must be rank 3, got shape {self.voxels.shape}")
        uniq = np.unique(self.voxels)
        if not np.all(np.isin(uniq, (0, 1))):
            raise ValueError("mask values must be 0 or 1")
        self.voxels = self.voxels.astype(np.uint8)
        self.spacing = tuple(float(s) for s in self.spacing)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.voxels.shape

    def require_nonempty(self):
        if not self.voxels.any():
            raise EmptyRegion("mask has no nonzero voxels")

    def count(self) -> int:
        return int(np.count_nonzero(self.voxels))


@dataclass
class IndexEntry:
    subject_id: str
    run_id: str
    stack_path: Path
    mask_path: Path

    @property
    def key(self) -> tuple[str, str]:
        return (self.subject_id, self.run_id)


@dataclass
class DatasetIndex:
    """Paired (stack, mask) files found under a BIDS-style tree.

    ``unmatched`` lists stack paths that had no mask; they are reported,
    never silently dropped.
    """

    entries: list[IndexEntry]
    unmatched: list[Path] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


@dataclass
class Rating:
    """One human quality annotation for a stack."""

    subject_id: str
    run_id: str
    quality: float
    orientation: str = "unknown"
    artifacts: dict[str, int] = field(default_factory=dict)
    rater_id: str = "unknown"
    seconds_spent: float = 0.0
    timestamp: str = ""

    def __post_init__(self):
        self.quality = float(self.quality)
        if not 0.0 <= self.quality <= 4.0:
            raise ValueError(f"quality must be in [0, 4], got {self.quality}")
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"orientation must be one of {ORIENTATIONS}, got {self.orientation!r}")
        for name, grade in self.artifacts.items():
            grade = int(grade)
            if not 0 <= grade <= 3:
                raise ValueError(f"artifact grade for {name!r} must be in 0..3, got {grade}")
            self.artifacts[name] = grade
        self.seconds_spent = float(self.seconds_spent)
        if self.seconds_spent < 0:
            raise ValueError("seconds_spent must be non-negative")

    @property
    def include(self) -> bool:
        """QC label: include unless quality is at or below the exclude threshold."""
        return self.quality > EXCLUDE_THRESHOLD

    @property
    def label(self) -> str:
        return "include" if self.include else "exclude"

    def to_dict(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "run_id": self.run_id,
            "quality": self.quality,
            "orientation": self.orientation,
            "artifacts": dict(self.artifacts),
            "rater_id": self.rater_id,
            "seconds_spent": self.seconds_spent,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Rating":
        if "quality" not in data:
            raise ValueError("rating is missing the 'quality' field")
        known = {
            "subject_id", "run_id", "quality", "orientation", "artifacts",
            "rater_id", "seconds_spent", "timestamp",
        }
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass
class IQMVector:
    """Named, ordered feature values for one stack.

    Entries whose preconditions failed are NaN in ``values`` and flagged in
    ``missing``; downstream tables serialize them as the textual sentinel
    ``NA`` so a NaN never travels silently.
    """

    names: tuple[str, ...]
    values: np.ndarray
    missing: tuple[str, ...] = ()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.names),):
            raise DimensionError("IQM vector length must match its name list")

    @property
    def complete(self) -> bool:
        return len(self.missing) == 0

    def to_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))

    def __len__(self):
        return len(self.names)
