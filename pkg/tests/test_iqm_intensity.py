"""Intensity IQM tests against brute-force oracles."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stackqc.errors import InsufficientSlices
from stackqc.iqm import intensity
from stackqc.iqm.intensity import (
    bias_level,
    image_entropy,
    mutual_information,
    sharpness_filters,
    slice_loss,
    summary_stats,
)

from conftest import full_mask, make_mask, make_stack, textured_stack


# --- slice_loss ---


def brute_force_pair_mean(slices, metric_fn):
    """Oracle: evaluate metric_fn on every unordered slice pair, average."""
    vals = [metric_fn(a, b) for a, b in itertools.combinations(slices, 2)]
    return float(np.mean(vals))


def test_identical_slices_ncc_and_mae():
    base = np.arange(16, dtype=np.float32).reshape(4, 4)
    vox = np.stack([base] * 4, axis=2)
    stack = make_stack(vox)
    mask = full_mask(stack)
    assert slice_loss(stack, mask, "ncc") == pytest.approx(1.0)
    assert slice_loss(stack, mask, "mae") == pytest.approx(0.0)


def test_three_slice_mae_matches_pair_enumeration():
    a = np.array([[0.0, 1.0], [2.0, 3.0]], dtype=np.float32)
    vox = np.stack([a, a, a + 10.0], axis=2)
    stack = make_stack(vox, spacing=(1, 1, 3))
    mask = full_mask(stack)

    oracle = brute_force_pair_mean(
        [a.astype(np.float64), a.astype(np.float64), (a + 10.0).astype(np.float64)],
        lambda x, y: np.abs(x - y).mean())
    assert oracle == pytest.approx(20.0 / 3.0)
    got = slice_loss(stack, mask, "mae", mode="pairwise", region="full",
                     aggregate="mean")
    assert got == pytest.approx(oracle, abs=1e-8)


def test_pair_metrics_symmetric(phantom):
    stack, mask = phantom
    flipped_vox = np.flip(stack.voxels, axis=2).copy()
    flipped_mask = np.flip(mask.voxels, axis=2).copy()
    rev_stack = make_stack(flipped_vox, stack.spacing)
    rev_mask = make_mask(flipped_mask, stack.spacing)
    for metric in ("mae", "nmae", "rmse", "nrmse", "ncc", "psnr", "ssim",
                   "mi", "nmi", "joint_entropy"):
        a = slice_loss(stack, mask, metric, region="full")
        b = slice_loss(rev_stack, rev_mask, metric, region="full")
        assert a == pytest.approx(b, rel=1e-10), metric


def test_metric_ranges(phantom):
    stack, mask = phantom
    for metric in ("ncc", "ssim"):
        v = slice_loss(stack, mask, metric, region="full")
        assert -1.0 <= v <= 1.0
    for metric in ("mae", "rmse", "joint_entropy"):
        assert slice_loss(stack, mask, metric, region="full") >= 0.0


def test_window_covering_all_slices_equals_pairwise(phantom):
    stack, mask = phantom
    n = stack.voxels.shape[2]
    for metric in ("mae", "ncc", "mi"):
        pairwise = slice_loss(stack, mask, metric, mode="pairwise", region="full")
        windowed = slice_loss(stack, mask, metric, mode="window", region="full",
                              window=n)
        assert pairwise == pytest.approx(windowed, rel=1e-12)


def test_window_mode_restricts_to_neighbors(phantom):
    stack, mask = phantom
    w = slice_loss(stack, mask, "mae", mode="window", region="full", window=1)
    # oracle: adjacent usable slices only
    axis = stack.through_plane_axis
    slices = [np.take(stack.voxels, i, axis=axis).astype(np.float64)
              * np.take(mask.voxels, i, axis=axis)
              for i in range(stack.voxels.shape[axis])]
    union = [np.take(mask.voxels, i, axis=axis).astype(bool)
             for i in range(stack.voxels.shape[axis])]
    vals = []
    for i in range(len(slices) - 1):
        dom = union[i] | union[i + 1]
        vals.append(np.abs(slices[i][dom] - slices[i + 1][dom]).mean())
    assert w == pytest.approx(float(np.mean(vals)), abs=1e-10)


def test_noise_monotonicity_fixed_phantom():
    stack, mask = textured_stack(seed=3)
    rng = np.random.default_rng(11)
    noise = rng.standard_normal(stack.voxels.shape).astype(np.float32)
    noise[:, :, ::2] = 0.0  # perturb every second slice only

    results = {m: [] for m in ("mae", "rmse", "ncc", "ssim")}
    for amp in (2.0, 6.0, 18.0):
        noisy = make_stack(np.clip(stack.voxels + amp * noise, 0, None),
                           stack.spacing)
        for metric in results:
            results[metric].append(slice_loss(noisy, mask, metric, region="full"))
    for metric in ("mae", "rmse"):
        assert results[metric][0] < results[metric][1] < results[metric][2]
    for metric in ("ncc", "ssim"):
        assert results[metric][0] > results[metric][1] > results[metric][2]


def test_insufficient_slices():
    vox = np.ones((4, 4, 1), dtype=np.float32)
    stack = make_stack(vox)
    with pytest.raises(InsufficientSlices):
        slice_loss(stack, full_mask(stack), "mae", region="full")


def test_zero_dynamic_range_returns_finite():
    vox = np.zeros((4, 4, 3), dtype=np.float32)
    stack = make_stack(vox)
    mask = full_mask(stack)
    for metric in ("nmae", "nrmse", "ncc", "psnr", "ssim"):
        value = slice_loss(stack, mask, metric, region="full")
        assert np.isfinite(value), metric
    assert slice_loss(stack, mask, "ncc", region="full") == 0.0
    assert slice_loss(stack, mask, "psnr", region="full") == 100.0


def test_center_third_region_selection():
    # 9 usable slices; mask centroid at slice 4 -> center third = {3, 4, 5}
    vox = np.ones((6, 6, 9), dtype=np.float32)
    stack = make_stack(vox)
    mask = full_mask(stack)
    idx = intensity.center_third_indices(mask, stack.through_plane_axis)
    assert idx == [3, 4, 5]


# --- mutual information ---


def brute_force_mi(a, b, bins):
    """Oracle: explicit joint histogram + plogp sums."""
    a, b = np.asarray(a, float), np.asarray(b, float)

    def edges(x):
        lo, hi = x.min(), x.max()
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        return np.linspace(lo, hi, bins + 1)

    ea, eb = edges(a), edges(b)
    joint = np.zeros((bins, bins))
    for x, y in zip(a, b):
        i = min(np.searchsorted(ea, x, side="right") - 1, bins - 1)
        j = min(np.searchsorted(eb, y, side="right") - 1, bins - 1)
        joint[i, j] += 1
    p = joint / joint.sum()
    mi = 0.0
    pa, pb = p.sum(1), p.sum(0)
    for i in range(bins):
        for j in range(bins):
            if p[i, j] > 0:
                mi += p[i, j] * math.log2(p[i, j] / (pa[i] * pb[j]))
    return mi


def test_mi_identical_signal():
    a = np.array([0.0, 0.0, 1.0, 1.0, 2.0, 2.0])
    mi = mutual_information(a, a, bins=4)
    h = image_entropy(make_stack(np.tile(a, (3, 1, 2)).astype(np.float32)),
                      region="whole_image", bins=4)
    assert mi == pytest.approx(h, abs=1e-12)
    assert mutual_information(a, a, bins=4, normalized=True) == pytest.approx(1.0)


def test_mi_constant_signal_is_zero():
    a = np.full(8, 3.0)
    b = np.arange(8, dtype=float)
    assert mutual_information(a, b, bins=4) == 0.0


def test_mi_independent_signals():
    a = np.array([0.0, 0.0, 1.0, 1.0])
    b = np.array([0.0, 1.0, 0.0, 1.0])
    assert brute_force_mi(a, b, 2) == pytest.approx(0.0, abs=1e-12)
    assert mutual_information(a, b, bins=2) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_mi_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = rng.integers(4, 64)
    a = rng.uniform(0, 10, n)
    b = rng.uniform(0, 10, n)
    assert mutual_information(a, b, bins=8) == pytest.approx(
        brute_force_mi(a, b, 8), abs=1e-10)


def test_mi_mask_combine():
    a = np.arange(16, dtype=float).reshape(4, 4)
    b = a[::-1].copy()
    ma = np.zeros((4, 4), dtype=bool)
    ma[:2] = True
    mb = np.zeros((4, 4), dtype=bool)
    mb[1:3] = True
    mi_union = mutual_information(a, b, bins=4, mask_a=ma, mask_b=mb,
                                  mask_combine="union")
    mi_inter = mutual_information(a, b, bins=4, mask_a=ma, mask_b=mb,
                                  mask_combine="intersection")
    assert np.isfinite(mi_union) and np.isfinite(mi_inter)
    assert mi_union == pytest.approx(brute_force_mi(a[ma | mb], b[ma | mb], 4), abs=1e-10)


# --- summary stats ---


def test_summary_stats_constant_input():
    vox = np.full((4, 4, 3), 7.0, dtype=np.float32)
    stack = make_stack(vox)
    stats = summary_stats(stack, full_mask(stack))
    assert stats["mean"] == stats["median"] == stats["p5"] == stats["p95"] == 7.0
    assert stats["std"] == 0.0
    assert stats["cov"] == 0.0
    assert stats["kurtosis"] == 0.0


def test_summary_stats_small_sample():
    vox = np.zeros((5, 1, 2), dtype=np.float32)
    vox[:, 0, 0] = [1, 2, 3, 4, 5]
    stack = make_stack(vox)
    mask = np.zeros_like(vox, dtype=np.uint8)
    mask[:, 0, 0] = 1
    stats = summary_stats(stack, make_mask(mask))
    assert stats["mean"] == pytest.approx(3.0)
    assert stats["median"] == pytest.approx(3.0)
    assert stats["std"] == pytest.approx(math.sqrt(2.0))
    assert stats["p5"] == pytest.approx(1.2)
    assert stats["p95"] == pytest.approx(4.8)
    assert stats["cov"] == pytest.approx(math.sqrt(2.0) / 3.0)


def test_kurtosis_standard_normal_monte_carlo():
    rng = np.random.default_rng(42)
    n = 100_000
    vals = rng.standard_normal(n).astype(np.float32)
    vals -= vals.min()  # loader guarantees non-negative intensities
    vox = vals.reshape(100, 100, 10)
    stack = make_stack(vox, spacing=(1, 1, 2))
    stats = summary_stats(stack, full_mask(stack))
    assert abs(stats["kurtosis"]) < 0.1


# --- entropy ---


def test_entropy_constant_region():
    vox = np.full((4, 4, 3), 5.0, dtype=np.float32)
    stack = make_stack(vox)
    assert image_entropy(stack, full_mask(stack), region="mask") == 0.0


def test_entropy_fair_coin():
    vox = np.zeros((4, 4, 2), dtype=np.float32)
    vox[:, :, 1] = 1.0
    stack = make_stack(vox)
    assert image_entropy(stack, region="whole_image", bins=2) == pytest.approx(1.0)


def test_entropy_uniform_256():
    vox = np.arange(256, dtype=np.float32).reshape(16, 16, 1) + 0.5
    stack = make_stack(vox)
    got = image_entropy(stack, region="whole_image", bins=256)
    assert got == pytest.approx(8.0, abs=1e-9)


# --- bias level ---


def test_bias_uniform_intensities_near_zero():
    vox = np.full((16, 16, 6), 50.0, dtype=np.float32)
    stack = make_stack(vox)
    assert bias_level(stack, full_mask(stack)) <= 1e-3


def test_bias_monotone_in_field_strength():
    stack, mask = textured_stack(seed=5)
    x = np.arange(stack.voxels.shape[0], dtype=np.float32)
    ramp = (x / x.max())[:, None, None]
    weak = make_stack(stack.voxels * (1.0 + 0.1 * ramp), stack.spacing)
    strong = make_stack(stack.voxels * (1.0 + 0.4 * ramp), stack.spacing)
    b_weak = bias_level(weak, mask)
    b_strong = bias_level(strong, mask)
    assert b_strong > b_weak
    assert b_weak >= 0.0


def test_bias_nonnegative(phantom):
    stack, mask = phantom
    assert bias_level(stack, mask) >= 0.0


# --- sharpness filters ---


def test_sharpness_constant_image_zero():
    vox = np.full((6, 6, 6), 9.0, dtype=np.float32)
    stack = make_stack(vox, spacing=(1, 1, 1))
    for filt in ("laplace", "sobel"):
        assert sharpness_filters(stack, full_mask(stack), filter=filt,
                                 region="full") == pytest.approx(0.0, abs=1e-12)


def test_sharpness_linear_ramp_zero_laplacian_interior():
    x = np.arange(8, dtype=np.float32)
    vox = np.broadcast_to(x[:, None, None], (8, 6, 6)).copy()
    stack = make_stack(vox, spacing=(1, 1, 1))
    mask = np.zeros_like(vox, dtype=np.uint8)
    mask[1:-1, 1:-1, 1:-1] = 1  # interior only
    value = sharpness_filters(stack, make_mask(mask, (1, 1, 1)),
                              filter="laplace", region="mask")
    assert value == pytest.approx(0.0, abs=1e-12)


def laplace_stencil_oracle(vox):
    """Direct 6-neighbor second-difference sum at interior voxels."""
    out = np.zeros_like(vox)
    for i in range(1, vox.shape[0] - 1):
        for j in range(1, vox.shape[1] - 1):
            for k in range(1, vox.shape[2] - 1):
                out[i, j, k] = (
                    vox[i - 1, j, k] + vox[i + 1, j, k]
                    + vox[i, j - 1, k] + vox[i, j + 1, k]
                    + vox[i, j, k - 1] + vox[i, j, k + 1]
                    - 6 * vox[i, j, k])
    return out


def test_sharpness_impulse_matches_stencil_oracle():
    vox = np.zeros((7, 7, 7), dtype=np.float32)
    vox[3, 3, 3] = 5.0
    stack = make_stack(vox, spacing=(1, 1, 1))
    mask = np.zeros_like(vox, dtype=np.uint8)
    mask[1:-1, 1:-1, 1:-1] = 1
    sel = mask.astype(bool)

    oracle = laplace_stencil_oracle(vox)
    mean_int = vox[sel].mean()
    expected = np.abs(oracle)[sel].mean() / mean_int

    got = sharpness_filters(stack, make_mask(mask, (1, 1, 1)),
                            filter="laplace", region="mask")
    assert got == pytest.approx(expected, abs=1e-8)
