"""Shared fixtures: small synthetic stacks and masks."""

import numpy as np
import pytest

from stackqc.types import BrainMask, Stack


def make_stack(voxels, spacing=(1.0, 1.0, 3.0), subject="sub-01", run="run-1"):
    voxels = np.asarray(voxels, dtype=np.float32)
    affine = np.diag(list(spacing) + [1.0])
    return Stack(subject, run, voxels, spacing, affine)


def make_mask(voxels, spacing=(1.0, 1.0, 3.0)):
    affine = np.diag(list(spacing) + [1.0])
    return BrainMask(np.asarray(voxels, dtype=np.uint8), spacing, affine)


def full_mask(stack):
    return make_mask(np.ones(stack.voxels.shape, dtype=np.uint8), stack.spacing)


def disk_mask_2d(shape, center, radius):
    yy, xx = np.mgrid[: shape[0], : shape[1]]
    return ((yy - center[0]) ** 2 + (xx - center[1]) ** 2 <= radius ** 2)


def cylinder(shape=(16, 16, 5), radius=5, spacing=(1.0, 1.0, 3.0), value=1.0):
    """Binary cylinder along the last (through-plane) axis."""
    disk = disk_mask_2d(shape[:2], (shape[0] // 2, shape[1] // 2), radius)
    vox = np.repeat(disk[:, :, None], shape[2], axis=2).astype(np.float32) * value
    return vox


def textured_stack(shape=(24, 24, 8), spacing=(1.0, 1.0, 3.0), seed=0,
                   radius=8):
    """Smoothly textured ellipsoid 'brain' with a matching mask."""
    from scipy.ndimage import gaussian_filter

    rng = np.random.default_rng(seed)
    texture = gaussian_filter(rng.normal(size=shape), sigma=(2.5, 2.5, 0.8))
    texture = (texture - texture.min()) / (np.ptp(texture) + 1e-12)
    disk = disk_mask_2d(shape[:2], (shape[0] // 2, shape[1] // 2), radius)
    mask = np.repeat(disk[:, :, None], shape[2], axis=2)
    vox = (0.4 + 0.6 * texture) * 100.0 * mask
    stack = make_stack(vox, spacing)
    return stack, make_mask(mask.astype(np.uint8), spacing)


@pytest.fixture
def phantom():
    return textured_stack()
