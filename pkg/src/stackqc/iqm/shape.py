"""Brain-mask derived quality metrics."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import EmptyRegion, InsufficientSlices
from ..types import BrainMask, Stack
from .intensity import region_indices

DEFAULT_CLOSING_RADIUS = 1
DEFAULT_RANK_THRESHOLD = 0.9


def mask_volume(mask: BrainMask) -> float:
    """Mask volume in mm^3: voxel count times voxel volume."""
    mask.require_nonempty()
    dx, dy, dz = mask.spacing
    return mask.count() * dx * dy * dz


def centroid_features(mask: BrainMask, axis: int, region: str = "full",
                      spacing=None) -> tuple[float, float]:
    """Dispersion of per-slice centroids around the volume centroid, in mm.

    Returns (mean displacement, max displacement) of each usable slice's
    in-plane centroid from the in-plane position of the centroid of all
    in-region mask voxels. A straight cylinder scores (0, 0); inter-slice
    motion shifts individual slices and inflates both numbers.
    """
    spacing = mask.spacing if spacing is None else spacing
    indices = region_indices(mask, axis, region)
    if len(indices) < 2:
        raise InsufficientSlices(f"need >= 2 usable slices, got {len(indices)}")
    in_plane = [a for a in range(3) if a != axis]
    sp = np.array([spacing[a] for a in in_plane])

    per_slice = []
    weights = []
    for i in indices:
        sl = np.take(mask.voxels, i, axis=axis)
        coords = np.nonzero(sl)
        c = np.array([coords[0].mean(), coords[1].mean()]) * sp
        per_slice.append(c)
        weights.append(len(coords[0]))
    per_slice = np.array(per_slice)
    weights = np.array(weights, dtype=float)
    overall = (per_slice * weights[:, None]).sum(axis=0) / weights.sum()

    disp = np.linalg.norm(per_slice - overall, axis=1)
    return float(disp.mean()), float(disp.max())


def _close_along_axis(mask_vox: np.ndarray, axis: int, radius: int) -> np.ndarray:
    """Binary closing with a 1D line element of half-length ``radius``.

    Pads with zeros so dilation is never clipped at the volume border,
    keeping the closing extensive (closed set contains the original).
    """
    size = 2 * radius + 1
    pad = [(0, 0)] * 3
    pad[axis] = (size, size)
    padded = np.pad(mask_vox.astype(np.uint8), pad, mode="constant")
    dilated = ndimage.maximum_filter1d(padded, size=size, axis=axis, mode="constant")
    closed = ndimage.minimum_filter1d(dilated, size=size, axis=axis, mode="constant")
    sl = [slice(None)] * 3
    sl[axis] = slice(size, -size)
    return closed[tuple(sl)]


def closing_mask(mask: BrainMask, axis: int, region: str = "full",
                 radius: int = DEFAULT_CLOSING_RADIUS) -> float:
    """Fraction of voxels added by through-plane morphological closing.

    Inter-slice motion leaves jagged through-plane profiles that closing
    fills in, so larger values indicate more motion. A solid cylinder is a
    fixed point and scores exactly 0.
    """
    mask.require_nonempty()
    vox = mask.voxels
    if region == "center":
        indices = region_indices(mask, axis, "center")
        if not indices:
            raise EmptyRegion("center region has no usable slices")
        sl = [slice(None)] * 3
        sl[axis] = slice(min(indices), max(indices) + 1)
        vox = vox[tuple(sl)]
    closed = _close_along_axis(vox, axis, radius)
    original = int(np.count_nonzero(vox))
    if original == 0:
        raise EmptyRegion("mask region is empty")
    added = int(np.count_nonzero(closed)) - original
    return added / original


def mask_sharpness(mask: BrainMask, filter: str = "laplace") -> float:
    """Mean absolute filter response of the binary mask over its bounding box.

    Per-axis responses are scaled by 1/spacing so the value is in 1/mm and
    the through-plane direction is weighted by 1/dz relative to 1/dx
    in-plane. Smooth masks score low; slice-to-slice jitter scores high.
    """
    mask.require_nonempty()
    m = mask.voxels.astype(np.float64)

    if filter == "laplace":
        resp = np.zeros_like(m)
        for axis in range(3):
            resp += ndimage.correlate1d(m, [1.0, -2.0, 1.0], axis=axis,
                                        mode="nearest") / mask.spacing[axis]
        resp = np.abs(resp)
    elif filter == "sobel":
        sq = np.zeros_like(m)
        for axis in range(3):
            g = ndimage.sobel(m, axis=axis, mode="nearest") / mask.spacing[axis]
            sq += g * g
        resp = np.sqrt(sq)
    else:
        raise ValueError(f"unknown filter {filter!r}")

    # filter responses live on the full grid so the mask's outer boundary
    # counts; the average is taken over the mask's bounding box
    coords = np.nonzero(mask.voxels)
    box = tuple(slice(c.min(), c.max() + 1) for c in coords)
    return float(resp[box].mean())


def rank_error(stack: Stack, mask: BrainMask, region: str = "full",
               threshold: float = DEFAULT_RANK_THRESHOLD) -> float:
    """Compressibility score of the masked slice stack.

    Each in-region masked slice becomes one row of a matrix; r is the
    smallest rank capturing ``threshold`` of the squared singular-value
    energy. The score is (r / n_slices) times the relative Frobenius error
    of the rank-min(r, n-1) reconstruction: 0 for perfectly redundant
    slices, higher for stacks whose slices are mutually inconsistent
    (e.g. motion). Capping the reconstruction rank at n-1 keeps the score
    strictly positive for incompressible (full-rank) stacks, which would
    otherwise hit a zero reconstruction error at r = n.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    axis = stack.through_plane_axis
    indices = region_indices(mask, axis, region)
    if len(indices) < 2:
        raise InsufficientSlices(f"need >= 2 usable slices, got {len(indices)}")
    rows = []
    for i in indices:
        img = np.take(stack.voxels, i, axis=axis).astype(np.float64)
        msk = np.take(mask.voxels, i, axis=axis)
        rows.append((img * msk).ravel())
    matrix = np.vstack(rows)
    sv = np.linalg.svd(matrix, compute_uv=False)
    energy = sv * sv
    total = float(energy.sum())
    if total == 0.0:
        return 0.0
    ratios = np.cumsum(energy) / total
    r = int(np.searchsorted(ratios, threshold) + 1)
    r = min(r, len(sv))
    r_err = min(r, len(indices) - 1)
    residual = float(energy[r_err:].sum())
    rel_err = float(np.sqrt(residual / total))
    return (r / len(indices)) * rel_err
