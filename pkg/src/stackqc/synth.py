"""Synthetic phantom stacks with parameterized degradations.

Real clinical stacks cannot ship with the toolkit, so tests and examples
use a textured ellipsoid phantom degraded by the four artifact mechanisms
the quality metrics are designed to catch: inter-slice motion, smooth
multiplicative bias, additive noise and in-plane signal drop. Degradations
scale deterministically with a level in [0, 1] given a seed, so metric
responses can be checked for monotonicity.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .nifti import save_nifti
from .tables import write_ratings_table
from .types import BrainMask, Rating, Stack

PHANTOM_SHAPE = (48, 48, 14)
PHANTOM_SPACING = (1.0, 1.0, 3.0)

DEGRADATIONS = ("motion", "bias", "noise", "drop")

#: Documented monotone responses of the designated IQMs: +1 means the
#: feature strictly increases with the degradation level, -1 decreases.
#: Pairs without a causal mechanism (the mask is untouched by noise, the
#: bias field is too smooth to change the mask) are not listed.
DEGRADATION_RESPONSES = {
    ("motion", "closing_mask_full"): +1,
    ("motion", "slice_mae_full"): +1,
    ("motion", "slice_ncc_full"): -1,
    ("motion", "rank_error_full"): +1,
    ("bias", "bias"): +1,
    ("bias", "slice_mae_full"): +1,
    ("noise", "slice_mae_full"): +1,
    ("noise", "slice_ncc_full"): -1,
    ("noise", "rank_error_full"): +1,
    ("drop", "slice_ncc_full"): -1,
    ("drop", "bias"): +1,
}

#: Weights of each degradation in the simulated expert quality score.
QUALITY_WEIGHTS = {"motion": 2.2, "noise": 1.4, "drop": 0.8, "bias": 0.5}
QUALITY_NOISE_STD = 0.18


def make_phantom(seed: int = 0, shape=PHANTOM_SHAPE, spacing=PHANTOM_SPACING,
                 subject_id: str = "sub-00", run_id: str = "run-1"
                 ) -> tuple[Stack, BrainMask]:
    """Textured ellipsoid brain inside a dimmer maternal ellipsoid."""
    rng = np.random.default_rng(np.random.SeedSequence((101, seed)))
    nx, ny, nz = shape
    cx, cy, cz = nx / 2, ny / 2, nz / 2
    ax = rng.uniform(0.30, 0.33) * nx
    ay = rng.uniform(0.28, 0.31) * ny
    az = rng.uniform(0.34, 0.38) * nz

    xx, yy, zz = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz),
                             indexing="ij")
    r2 = (((xx - cx) / ax) ** 2 + ((yy - cy) / ay) ** 2 + ((zz - cz) / az) ** 2)
    brain = r2 <= 1.0
    body = r2 <= 2.6

    # texture correlates over several slices, as real anatomy does, so
    # slice-difference metrics see far pairs as related, not as noise
    texture = gaussian_filter(rng.normal(size=shape), sigma=(2.5, 2.5, 2.5))
    texture = (texture - texture.min()) / (np.ptp(texture) + 1e-12)
    background = gaussian_filter(rng.normal(size=shape), sigma=(4.0, 4.0, 1.5))
    background = (background - background.min()) / (np.ptp(background) + 1e-12)

    vox = np.full(shape, 2.0)
    vox[body] = 20.0 + 15.0 * background[body]
    vox[brain] = 60.0 + 60.0 * texture[brain]
    # dark ventricle-like core: sharp structure that moves with the slices
    core = r2 <= 0.22
    vox[core] *= 0.45

    affine = np.diag(list(spacing) + [1.0])
    stack = Stack(subject_id, run_id, vox.astype(np.float32), spacing, affine)
    mask = BrainMask(brain.astype(np.uint8), spacing, affine)
    return stack, mask


def apply_degradations(stack: Stack, mask: BrainMask, levels: dict,
                       seed: int = 0) -> tuple[Stack, BrainMask]:
    """Degrade a phantom; every effect scales with its level in [0, 1].

    Motion shifts alternate slices in-plane (image and mask together), bias
    multiplies by a smooth field with in-plane and through-plane gradients,
    drop attenuates alternate slices with a smooth dent at a random per-slice
    location, and noise adds a fixed Gaussian field scaled by the level.
    """
    rng = np.random.default_rng(np.random.SeedSequence((202, seed)))
    vox = np.asarray(stack.voxels, dtype=np.float64).copy()
    mvox = mask.voxels.copy()
    nx, ny, nz = vox.shape
    axis = stack.through_plane_axis
    assert axis == 2, "phantom degradations assume the last axis is through-plane"

    # draw every random ingredient unconditionally so that the remaining
    # effects are identical whichever subset of levels is nonzero
    shift_mag = rng.uniform(3.0, 4.5, size=nz)
    shift_dir = rng.choice([-1, 1], size=(nz, 2))
    noise_field = rng.standard_normal(size=vox.shape)
    drop_centers = rng.uniform(0.25, 0.75, size=(nz, 2))

    motion = float(levels.get("motion", 0.0))
    if motion > 0:
        for k in range(1, nz, 2):
            dx = int(round(motion * shift_mag[k])) * shift_dir[k, 0]
            dy = int(round(motion * shift_mag[k] * 0.5)) * shift_dir[k, 1]
            vox[:, :, k] = np.roll(vox[:, :, k], (dx, dy), axis=(0, 1))
            mvox[:, :, k] = np.roll(mvox[:, :, k], (dx, dy), axis=(0, 1))

    bias = float(levels.get("bias", 0.0))
    if bias > 0:
        gx = (np.arange(nx) / max(nx - 1, 1) - 0.5) * 2.0
        gz = (np.arange(nz) / max(nz - 1, 1) - 0.5) * 2.0
        field = 1.0 + bias * 0.6 * (0.7 * gx[:, None, None] + 0.3 * gz[None, None, :])
        vox *= field

    drop = float(levels.get("drop", 0.0))
    if drop > 0:
        gx, gy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        sigma2 = (0.22 * nx) ** 2
        for k in range(1, nz, 2):
            px, py = drop_centers[k, 0] * nx, drop_centers[k, 1] * ny
            dent = np.exp(-((gx - px) ** 2 + (gy - py) ** 2) / (2 * sigma2))
            vox[:, :, k] *= 1.0 - drop * (0.3 + 0.45 * dent)

    noise = float(levels.get("noise", 0.0))
    if noise > 0:
        brain_mean = float(vox[mvox.astype(bool)].mean())
        vox += noise * 0.12 * brain_mean * noise_field

    vox = np.clip(vox, 0.0, None).astype(np.float32)
    degraded = Stack(stack.subject_id, stack.run_id, vox, stack.spacing,
                     stack.affine, stack.through_plane_axis)
    return degraded, BrainMask(mvox, mask.spacing, mask.affine)


def quality_score(levels: dict, rng) -> float:
    """Simulated expert rating: 4 minus weighted degradations plus noise."""
    penalty = sum(QUALITY_WEIGHTS[d] * float(levels.get(d, 0.0))
                  for d in DEGRADATIONS)
    return float(np.clip(4.4 - penalty + rng.normal(0.0, QUALITY_NOISE_STD),
                         0.0, 4.0))


def sample_levels(subject_rng, stack_rng) -> dict:
    """Stack degradation levels with a subject-level propensity component.

    The propensity term correlates stacks of one subject (fetal activity
    differs between subjects), which is what makes grouped CV matter; the
    per-stack term keeps every subject's stacks spread over the scale.
    """
    propensity = {d: subject_rng.uniform(0.0, 1.0) for d in DEGRADATIONS}
    return {d: float(np.clip(0.2 * propensity[d] + 0.95 * stack_rng.uniform(), 0, 1))
            for d in DEGRADATIONS}


def generate_dataset(out_dir, mask_dir, n_subjects: int = 10,
                     stacks_per_subject: int = 3, seed: int = 0,
                     ratings_dir=None, clean_fraction: float = 0.1) -> dict:
    """Write a BIDS-style synthetic dataset.

    Produces stacks and masks, one rating JSON per stack (simulated rater),
    a merged ratings table and a ground-truth degradation table. Returns a
    manifest dict. ``clean_fraction`` of the stacks stay undegraded so the
    excellent end of the scale is populated.
    """
    out_dir, mask_dir = Path(out_dir), Path(mask_dir)
    ratings_dir = Path(ratings_dir) if ratings_dir else out_dir / "ratings"
    ratings_dir.mkdir(parents=True, exist_ok=True)

    ratings = []
    truth_rows = []
    for i in range(n_subjects):
        subject = f"sub-{i + 1:03d}"
        subject_rng = np.random.default_rng(np.random.SeedSequence((seed, i)))
        base_stack, base_mask = make_phantom(
            seed=int(subject_rng.integers(0, 2 ** 31)), subject_id=subject)
        subject_prop_rng = np.random.default_rng(
            np.random.SeedSequence((303, seed, i)))
        for j in range(stacks_per_subject):
            run = f"run-{j + 1}"
            stack_rng = np.random.default_rng(np.random.SeedSequence((seed, i, j)))
            if stack_rng.uniform() < clean_fraction:
                levels = {d: 0.0 for d in DEGRADATIONS}
            else:
                levels = sample_levels(subject_prop_rng, stack_rng)
            degraded, mask = apply_degradations(
                base_stack, base_mask, levels,
                seed=int(stack_rng.integers(0, 2 ** 31)))

            stem = f"{subject}_{run}_T2w"
            save_nifti(degraded.voxels, degraded.spacing, degraded.affine,
                       out_dir / subject / "anat" / f"{stem}.nii.gz")
            save_nifti(mask.voxels.astype(np.float32), mask.spacing, mask.affine,
                       mask_dir / subject / "anat" / f"{stem}_mask.nii.gz")

            quality = quality_score(levels, stack_rng)
            rating = Rating(
                subject_id=subject, run_id=run, quality=round(quality, 2),
                orientation="axial",
                artifacts={"inter_slice_motion": int(round(3 * levels["motion"])),
                           "signal_drop": int(round(3 * levels["drop"])),
                           "bias_field": int(round(3 * levels["bias"])),
                           "noise": int(round(3 * levels["noise"]))},
                rater_id="sim-rater",
                seconds_spent=float(np.round(stack_rng.uniform(20, 60), 1)),
                timestamp="2024-01-01T00:00:00",
            )
            ratings.append(rating)
            (ratings_dir / f"{subject}_{run}_rating.json").write_text(
                json.dumps(rating.to_dict(), sort_keys=True, indent=1))
            truth_rows.append({"subject_id": subject, "run_id": run,
                               **{k: round(v, 4) for k, v in levels.items()},
                               "quality": rating.quality})

    write_ratings_table(out_dir / "ratings.tsv", ratings)
    truth_path = out_dir / "truth.tsv"
    header = ["subject_id", "run_id", *DEGRADATIONS, "quality"]
    lines = ["\t".join(header)]
    for row in truth_rows:
        lines.append("\t".join(str(row[h]) for h in header))
    truth_path.write_text("\n".join(lines) + "\n")

    n = n_subjects * stacks_per_subject
    excluded = sum(1 for r in ratings if not r.include)
    return {"n_stacks": n, "n_subjects": n_subjects, "n_excluded": excluded,
            "ratings_table": str(out_dir / "ratings.tsv"),
            "truth_table": str(truth_path)}
