"""Intensity-based image quality metrics.

Slice-difference metrics compare in-plane slices along the through-plane
axis; the remaining metrics summarize the intensity distribution (summary
statistics, entropy), estimate the smooth multiplicative bias field, or
measure sharpness with derivative filters.

Conventions, fixed for reproducibility:

* absolute-difference slice metrics (mae, nmae, rmse, nrmse, psnr) compare
  background-zeroed slices over the union of the two mask slices, so brain
  that moved out of a slice counts as difference; correlation-style metrics
  (ncc, ssim) use the intersection, where both slices see brain, because
  zero-padding would swamp the correlation; pairs with an empty
  intersection are skipped during aggregation;
* MI / normalized MI / joint entropy use raw intensities over the union or
  intersection of the masks, 32-bin joint histograms, entropies in bits;
* image entropy uses 128 equal-width bins over the observed range;
* SSIM uses a 7x7 uniform window with constants (0.01*L)^2 and (0.03*L)^2,
  L = 99th percentile of the stack's in-mask intensities;
* degenerate cases return finite values, never NaN: ncc of a constant slice
  is 0, normalized mae/rmse fall back to their unnormalized value when the
  mean intensity is 0, PSNR is capped at 100 dB.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from ..errors import DimensionError, EmptyRegion, InsufficientSlices
from ..types import BrainMask, Stack

PAIR_METRICS = ("mae", "nmae", "rmse", "nrmse", "ncc", "psnr", "ssim")
INFO_METRICS = ("mi", "nmi", "joint_entropy")

MI_BINS = 32
ENTROPY_BINS = 128
SSIM_WINDOW = 7
PSNR_CAP = 100.0
DEFAULT_WINDOW = 3


# ---------------------------------------------------------------------------
# slice bookkeeping
# ---------------------------------------------------------------------------

def usable_slice_indices(mask: BrainMask, axis: int) -> list[int]:
    """Indices along ``axis`` whose mask slice contains at least one voxel."""
    m = mask.voxels
    other = tuple(a for a in range(3) if a != axis)
    counts = m.sum(axis=other)
    return [int(i) for i in np.nonzero(counts)[0]]


def center_third_indices(mask: BrainMask, axis: int) -> list[int]:
    """The ceil(n/3) usable slices closest to the mask centroid along ``axis``."""
    usable = usable_slice_indices(mask, axis)
    n = len(usable)
    if n == 0:
        return []
    coords = np.nonzero(mask.voxels)
    centroid = float(np.mean(coords[axis]))
    take = math.ceil(n / 3)
    ranked = sorted(usable, key=lambda i: (abs(i - centroid), i))
    return sorted(ranked[:take])


def region_indices(mask: BrainMask, axis: int, region: str) -> list[int]:
    if region == "full":
        return usable_slice_indices(mask, axis)
    if region == "center":
        return center_third_indices(mask, axis)
    raise ValueError(f"unknown region {region!r}")


def _take_slice(volume: np.ndarray, axis: int, index: int) -> np.ndarray:
    return np.take(volume, index, axis=axis)


# ---------------------------------------------------------------------------
# per-pair metrics
# ---------------------------------------------------------------------------

def _entropy_bits(values: np.ndarray, bins: int) -> float:
    vmin, vmax = float(values.min()), float(values.max())
    if vmin == vmax:
        return 0.0
    hist, _ = np.histogram(values, bins=bins, range=(vmin, vmax))
    p = hist[hist > 0] / hist.sum()
    return float(-(p * np.log2(p)).sum())


def _joint_entropies(a: np.ndarray, b: np.ndarray, bins: int):
    """(H(a), H(b), H(a,b)) in bits from a joint equal-width histogram."""
    joint, _, _ = np.histogram2d(a, b, bins=bins)
    p = joint / joint.sum()
    pa = p.sum(axis=1)
    pb = p.sum(axis=0)

    def ent(q):
        q = q[q > 0]
        return float(-(q * np.log2(q)).sum())

    return ent(pa), ent(pb), ent(p.ravel())


def mutual_information(a: np.ndarray, b: np.ndarray, bins: int = MI_BINS,
                       normalized: bool = False, mask_a: np.ndarray | None = None,
                       mask_b: np.ndarray | None = None,
                       mask_combine: str = "union") -> float:
    """MI (bits) between two slices, optionally restricted to combined masks.

    The joint histogram uses ``bins`` equal-width bins per axis spanning each
    sample's own min-max. With ``normalized`` the result is 2*MI/(H(a)+H(b)),
    which is 1 for identical non-constant samples and defined as 1 when both
    samples are constant.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if mask_a is not None or mask_b is not None:
        mask_a = np.ones(a.shape, dtype=bool) if mask_a is None else mask_a.astype(bool)
        mask_b = np.ones(b.shape, dtype=bool) if mask_b is None else mask_b.astype(bool)
        if mask_combine == "union":
            region = mask_a | mask_b
        elif mask_combine == "intersection":
            region = mask_a & mask_b
        else:
            raise ValueError(f"unknown mask_combine {mask_combine!r}")
        a, b = a[region], b[region]
    a, b = a.ravel(), b.ravel()
    if a.size == 0 or b.size == 0:
        raise EmptyRegion("mutual information needs a nonempty region")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    ha, hb, hab = _joint_entropies(a, b, bins)
    mi = max(ha + hb - hab, 0.0)
    if not normalized:
        return mi
    if ha + hb == 0.0:
        return 1.0
    return 2.0 * mi / (ha + hb)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    va = float(np.dot(a, a))
    vb = float(np.dot(b, b))
    if va == 0.0 or vb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / np.sqrt(va * vb), -1.0, 1.0))


class _SliceData:
    """Precomputed per-slice arrays reused across all pairs of one region."""

    def __init__(self, stack: Stack, mask: BrainMask, indices: list[int]):
        axis = stack.through_plane_axis
        self.indices = indices
        self.images = [np.asarray(_take_slice(stack.voxels, axis, i), dtype=np.float64)
                       for i in indices]
        self.masks = [_take_slice(mask.voxels, axis, i).astype(bool) for i in indices]
        self.zeroed = [img * m for img, m in zip(self.images, self.masks)]
        # uniform-window means for SSIM, computed once per slice
        size = SSIM_WINDOW
        self.mu = [ndimage.uniform_filter(z, size=size, mode="reflect") for z in self.zeroed]
        self.mu_sq = [ndimage.uniform_filter(z * z, size=size, mode="reflect")
                      for z in self.zeroed]


def _pair_values(data: _SliceData, i: int, j: int, ssim_range: float) -> dict[str, float]:
    """All pair metrics for slices at positions i, j of the region list."""
    union = data.masks[i] | data.masks[j]
    inter = data.masks[i] & data.masks[j]

    if not inter.any():
        values = {m: np.nan for m in PAIR_METRICS}  # pair skipped downstream
    else:
        a = data.zeroed[i][union]
        b = data.zeroed[j][union]
        diff = a - b
        mae = float(np.abs(diff).mean())
        rmse = float(np.sqrt((diff * diff).mean()))
        norm = 0.5 * float(a.mean() + b.mean())
        nmae = mae / norm if norm > 0 else mae
        nrmse = rmse / norm if norm > 0 else rmse
        ncc = _pearson(data.images[i][inter], data.images[j][inter])

        peak = max(float(a.max()), float(b.max()))
        mse = float((diff * diff).mean())
        if mse == 0.0 or peak <= 0.0:
            psnr = PSNR_CAP
        else:
            psnr = min(10.0 * math.log10(peak * peak / mse), PSNR_CAP)

        # SSIM map from cached window means; averaged over intersection pixels
        L = ssim_range if ssim_range > 0 else 1.0
        c1 = (0.01 * L) ** 2
        c2 = (0.03 * L) ** 2
        mu_x, mu_y = data.mu[i], data.mu[j]
        var_x = data.mu_sq[i] - mu_x * mu_x
        var_y = data.mu_sq[j] - mu_y * mu_y
        cov = ndimage.uniform_filter(data.zeroed[i] * data.zeroed[j],
                                     size=SSIM_WINDOW, mode="reflect") - mu_x * mu_y
        ssim_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
            (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2))
        ssim = float(np.clip(ssim_map[inter].mean(), -1.0, 1.0))

        values = {"mae": mae, "nmae": nmae, "rmse": rmse, "nrmse": nrmse,
                  "ncc": ncc, "psnr": psnr, "ssim": ssim}

    for combine in ("union", "intersection"):
        region = union if combine == "union" else (data.masks[i] & data.masks[j])
        suffix = "" if combine == "union" else "_inter"
        if not region.any():
            for metric in INFO_METRICS:
                values[metric + suffix] = np.nan  # pair skipped in aggregation
            continue
        ra = data.images[i][region]
        rb = data.images[j][region]
        ha, hb, hab = _joint_entropies(ra, rb, MI_BINS)
        mi = max(ha + hb - hab, 0.0)
        nmi = 1.0 if (ha + hb) == 0.0 else 2.0 * mi / (ha + hb)
        values["mi" + suffix] = mi
        values["nmi" + suffix] = nmi
        values["joint_entropy" + suffix] = hab
    return values


class SlicePairTable:
    """Every unordered slice pair of a region with its metric values.

    ``dist`` is the positional distance within the region's ordered slice
    list, so window modes behave identically for contiguous and gapped masks.
    """

    def __init__(self, stack: Stack, mask: BrainMask, region: str):
        axis = stack.through_plane_axis
        indices = region_indices(mask, axis, region)
        if len(indices) < 2:
            raise InsufficientSlices(
                f"region {region!r} has {len(indices)} usable slices, need >= 2")
        inmask = stack.voxels[mask.voxels.astype(bool)]
        ssim_range = float(np.percentile(inmask, 99)) if inmask.size else 1.0

        data = _SliceData(stack, mask, indices)
        pairs = [(i, j) for i in range(len(indices)) for j in range(i + 1, len(indices))]
        self.dist = np.array([j - i for i, j in pairs])
        rows = [_pair_values(data, i, j, ssim_range) for i, j in pairs]
        self.values = {key: np.array([r[key] for r in rows]) for key in rows[0]}
        self.n_slices = len(indices)

    def aggregate(self, metric: str, mode: str, aggregate: str,
                  window: int = DEFAULT_WINDOW) -> float:
        vals = self.values[metric]
        if mode == "window":
            vals = vals[self.dist <= window]
        elif mode != "pairwise":
            raise ValueError(f"unknown mode {mode!r}")
        vals = vals[np.isfinite(vals)]
        if vals.size == 0:
            raise InsufficientSlices(f"no usable slice pairs for {metric} in mode {mode}")
        if aggregate == "mean":
            return float(vals.mean())
        if aggregate == "median":
            return float(np.median(vals))
        raise ValueError(f"unknown aggregate {aggregate!r}")


def slice_loss(stack: Stack, mask: BrainMask, metric: str, mode: str = "pairwise",
               region: str = "full", aggregate: str = "mean",
               window: int = DEFAULT_WINDOW, mask_combine: str = "union") -> float:
    """Aggregate one slice-difference metric across slice pairs."""
    key = metric
    if metric in INFO_METRICS and mask_combine == "intersection":
        key = metric + "_inter"
    table = SlicePairTable(stack, mask, region)
    return table.aggregate(key, mode, aggregate, window)


# ---------------------------------------------------------------------------
# whole-stack metrics
# ---------------------------------------------------------------------------

def summary_stats(stack: Stack, mask: BrainMask) -> dict[str, float]:
    """mean/median/std/p5/p95/cov/kurtosis over in-mask voxels.

    std is the population standard deviation, percentiles use linear
    interpolation and kurtosis is the excess (Fisher) kurtosis, 0 for a
    constant sample by convention.
    """
    mask.require_nonempty()
    vals = stack.voxels[mask.voxels.astype(bool)].astype(np.float64)
    mean = float(vals.mean())
    std = float(vals.std())
    if std == 0.0:
        kurt = 0.0
    else:
        z = (vals - mean) / std
        kurt = float((z ** 4).mean() - 3.0)
    return {
        "mean": mean,
        "median": float(np.median(vals)),
        "std": std,
        "p5": float(np.percentile(vals, 5)),
        "p95": float(np.percentile(vals, 95)),
        "cov": std / mean if mean > 0 else 0.0,
        "kurtosis": kurt,
    }


def image_entropy(stack: Stack, mask: BrainMask | None = None,
                  region: str = "mask", bins: int = ENTROPY_BINS) -> float:
    """Shannon entropy (bits) of the intensity histogram over a region."""
    if region == "mask":
        if mask is None:
            raise EmptyRegion("mask region requested without a mask")
        mask.require_nonempty()
        vals = stack.voxels[mask.voxels.astype(bool)]
    elif region == "whole_image":
        vals = stack.voxels.ravel()
    else:
        raise ValueError(f"unknown region {region!r}")
    if vals.size == 0:
        raise EmptyRegion("entropy region is empty")
    return _entropy_bits(np.asarray(vals, dtype=np.float64), bins)


def _masked_gaussian(img: np.ndarray, mask: np.ndarray, sigma) -> np.ndarray:
    num = ndimage.gaussian_filter(img * mask, sigma=sigma, mode="nearest")
    den = ndimage.gaussian_filter(mask.astype(np.float64), sigma=sigma, mode="nearest")
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 1e-12)
    return out


def bias_level(stack: Stack, mask: BrainMask, iterations: int = 3) -> float:
    """Coefficient of variation of the estimated smooth multiplicative field.

    The field is fitted in the log domain by iteratively low-pass filtering
    the residual with a Gaussian whose sigma is a fixed fraction (1/8) of
    the mask bounding-box diagonal; 0 means no detectable bias.
    """
    mask.require_nonempty()
    m = mask.voxels.astype(bool)
    vals = stack.voxels[m]
    if float(vals.max()) <= 0:
        raise EmptyRegion("in-mask intensities are all zero")

    eps = 1e-6 * float(vals[vals > 0].mean())
    log_img = np.log(np.asarray(stack.voxels, dtype=np.float64) + eps)

    spans = []
    coords = np.nonzero(m)
    for axis in range(3):
        extent = (coords[axis].max() - coords[axis].min() + 1) * stack.spacing[axis]
        spans.append(float(extent))
    sigma_mm = np.linalg.norm(spans) / 8.0
    sigma_vox = tuple(max(sigma_mm / s, 0.5) for s in stack.spacing)

    mf = m.astype(np.float64)
    field_log = np.zeros_like(log_img)
    for _ in range(iterations):
        field_log = field_log + _masked_gaussian(log_img - field_log, mf, sigma_vox)
    field_log_in = field_log[m]
    field = np.exp(field_log_in - field_log_in.mean())
    mean = float(field.mean())
    return float(field.std() / mean) if mean > 0 else 0.0


def sharpness_filters(stack: Stack, mask: BrainMask | None = None,
                      filter: str = "laplace", region: str = "mask") -> float:
    """Mean absolute Laplacian / Sobel-magnitude response over a region.

    The response is normalized by the region's mean intensity when positive,
    making the feature invariant to global intensity scaling.
    """
    vox = np.asarray(stack.voxels, dtype=np.float64)
    if min(vox.shape) < 3:
        raise DimensionError(f"filtering needs >= 3 voxels per axis, got {vox.shape}")
    if filter == "laplace":
        resp = np.abs(ndimage.laplace(vox, mode="nearest"))
    elif filter == "sobel":
        sq = np.zeros_like(vox)
        for axis in range(3):
            g = ndimage.sobel(vox, axis=axis, mode="nearest")
            sq += g * g
        resp = np.sqrt(sq)
    else:
        raise ValueError(f"unknown filter {filter!r}")

    if region == "mask":
        if mask is None:
            raise EmptyRegion("mask region requested without a mask")
        mask.require_nonempty()
        sel = mask.voxels.astype(bool)
    elif region == "full":
        sel = np.ones(vox.shape, dtype=bool)
    else:
        raise ValueError(f"unknown region {region!r}")

    mean_int = float(vox[sel].mean())
    mean_resp = float(resp[sel].mean())
    return mean_resp / mean_int if mean_int > 0 else mean_resp
