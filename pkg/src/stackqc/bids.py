"""BIDS-style dataset traversal: pair T2w stacks with their brain masks."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .errors import DimensionError, DuplicateRun, EmptyDataset
from .nifti import load_nifti
from .types import BrainMask, DatasetIndex, IndexEntry, Stack

DEFAULT_MASK_PATTERN = "{stem}_mask.nii.gz"

_EXTS = (".nii.gz", ".nii")


def _stem(name: str) -> str:
    for ext in _EXTS:
        if name.endswith(ext):
            return name[: -len(ext)]
    return name


def _run_id(stem: str, subject_id: str) -> str:
    """Middle entities of the filename (ses-*, run-*, ...), or run-1."""
    middle = stem
    if middle.startswith(subject_id + "_"):
        middle = middle[len(subject_id) + 1:]
    middle = re.sub(r"_?T2w$", "", middle)
    return middle if middle else "run-1"


def index_bids(root, mask_root, mask_pattern: str = DEFAULT_MASK_PATTERN) -> DatasetIndex:
    """Walk ``sub-*/[ses-*/]anat/*_T2w.nii[.gz]`` and pair each stack with a mask.

    Masks are looked up under ``mask_root`` in the directory mirroring the
    stack's location, with ``mask_pattern`` applied to the stack's filename
    stem. Stacks without a mask end up in the index's ``unmatched`` list.
    """
    root = Path(root)
    mask_root = Path(mask_root)
    if not root.is_dir():
        raise EmptyDataset(f"dataset root {root} does not exist")

    entries: list[IndexEntry] = []
    unmatched: list[Path] = []
    seen: dict[tuple[str, str], Path] = {}

    anat_dirs = []
    for sub in sorted(root.glob("sub-*")):
        if not sub.is_dir():
            continue
        if (sub / "anat").is_dir():
            anat_dirs.append(sub / "anat")
        for ses in sorted(sub.glob("ses-*")):
            if (ses / "anat").is_dir():
                anat_dirs.append(ses / "anat")

    for anat in anat_dirs:
        stacks = sorted(p for p in anat.iterdir() if _stem(p.name).endswith("_T2w"))
        for stack_path in stacks:
            stem = _stem(stack_path.name)
            subject_id = stack_path.name.split("_")[0]
            run_id = _run_id(stem, subject_id)
            key = (subject_id, run_id)
            if key in seen:
                raise DuplicateRun(
                    f"{key} maps to both {seen[key]} and {stack_path}"
                )
            seen[key] = stack_path
            rel_dir = stack_path.parent.relative_to(root)
            mask_path = mask_root / rel_dir / mask_pattern.format(stem=stem)
            if mask_path.exists():
                entries.append(IndexEntry(subject_id, run_id, stack_path, mask_path))
            else:
                unmatched.append(stack_path)

    entries.sort(key=lambda e: (e.subject_id, e.run_id))
    if not entries:
        raise EmptyDataset(f"no (stack, mask) pairs found under {root}")
    return DatasetIndex(entries=entries, unmatched=unmatched)


def load_pair(entry: IndexEntry) -> tuple[Stack, BrainMask]:
    """Load one index entry, checking the mask matches the stack's grid."""
    stack = load_nifti(entry.stack_path, subject_id=entry.subject_id, run_id=entry.run_id)
    raw = load_nifti(entry.mask_path)
    if raw.voxels.shape != stack.voxels.shape:
        raise DimensionError(
            f"mask shape {raw.voxels.shape} does not match stack shape "
            f"{stack.voxels.shape} for {entry.subject_id}/{entry.run_id}"
        )
    mask = BrainMask(
        voxels=(raw.voxels > 0.5).astype(np.uint8),
        spacing=stack.spacing,
        affine=stack.affine,
    )
    mask.require_nonempty()
    return stack, mask
