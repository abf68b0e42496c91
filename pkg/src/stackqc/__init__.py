"""Quality metrics and automated quality control for low-resolution fetal brain MRI stacks."""

__version__ = "0.1.0"

from .types import BrainMask, DatasetIndex, IQMVector, Rating, Stack  # noqa: F401
