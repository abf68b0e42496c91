"""NIfTI-1 reader/writer tests against hand-packed files."""

import gzip
import struct

import numpy as np
import pytest

from stackqc.errors import DimensionError, ParseError, UnsupportedDatatype
from stackqc.nifti import load_nifti, save_nifti, save_stack


def pack_header(shape, datatype, bitpix, pixdim, vox_offset=352.0,
                scl_slope=0.0, scl_inter=0.0, magic=b"n+1\x00", endian="<"):
    """Build a 348-byte header by writing fields at their spec offsets.

    Deliberately independent of the package's own field table.
    """
    hdr = bytearray(348)
    struct.pack_into(endian + "i", hdr, 0, 348)
    dim = [len(shape)] + list(shape) + [1] * (7 - len(shape))
    struct.pack_into(endian + "8h", hdr, 40, *dim)
    struct.pack_into(endian + "h", hdr, 70, datatype)
    struct.pack_into(endian + "h", hdr, 72, bitpix)
    pd = [1.0] + list(pixdim) + [0.0] * (7 - len(pixdim))
    struct.pack_into(endian + "8f", hdr, 76, *pd)
    struct.pack_into(endian + "f", hdr, 108, vox_offset)
    struct.pack_into(endian + "f", hdr, 112, scl_slope)
    struct.pack_into(endian + "f", hdr, 116, scl_inter)
    struct.pack_into("4s", hdr, 344, magic)
    return bytes(hdr)


def write_nifti_bytes(path, voxels, pixdim, datatype=16, bitpix=32,
                      scl_slope=0.0, scl_inter=0.0, endian="<", gz=False):
    dtype = {2: "u1", 4: "i2", 8: "i4", 16: "f4", 64: "f8"}[datatype]
    hdr = pack_header(voxels.shape, datatype, bitpix, pixdim,
                      scl_slope=scl_slope, scl_inter=scl_inter, endian=endian)
    blob = hdr + b"\x00" * 4 + np.asarray(voxels, dtype=endian + dtype).tobytes(order="F")
    data = gzip.compress(blob) if gz else blob
    path.write_bytes(data)


def test_load_small_float32_volume(tmp_path):
    rng = np.random.default_rng(7)
    vox = rng.uniform(0, 10, size=(4, 4, 3)).astype(np.float32)
    path = tmp_path / "small.nii"
    write_nifti_bytes(path, vox, pixdim=(1.0, 1.0, 3.0))

    stack = load_nifti(path)
    assert stack.voxels.shape == (4, 4, 3)
    assert stack.spacing == (1.0, 1.0, 3.0)
    assert stack.through_plane_axis == 2
    np.testing.assert_array_equal(stack.voxels, vox)


def test_gzip_transparency(tmp_path):
    rng = np.random.default_rng(8)
    vox = rng.uniform(0, 10, size=(4, 4, 3)).astype(np.float32)
    write_nifti_bytes(tmp_path / "a.nii", vox, pixdim=(1.0, 1.0, 3.0))
    write_nifti_bytes(tmp_path / "a.nii.gz", vox, pixdim=(1.0, 1.0, 3.0), gz=True)
    a = load_nifti(tmp_path / "a.nii")
    b = load_nifti(tmp_path / "a.nii.gz")
    np.testing.assert_array_equal(a.voxels, b.voxels)
    assert a.spacing == b.spacing


def test_bad_magic_raises(tmp_path):
    vox = np.zeros((2, 2, 2), dtype=np.float32)
    path = tmp_path / "bad.nii"
    write_nifti_bytes(path, vox, pixdim=(1, 1, 1))
    raw = bytearray(path.read_bytes())
    raw[344:348] = b"XXX\x00"
    path.write_bytes(bytes(raw))
    with pytest.raises(ParseError):
        load_nifti(path)


def test_bad_sizeof_hdr_raises(tmp_path):
    path = tmp_path / "bad.nii"
    path.write_bytes(b"\x00" * 400)
    with pytest.raises(ParseError) as err:
        load_nifti(path)
    assert err.value.offset == 0


def test_unsupported_datatype(tmp_path):
    path = tmp_path / "c64.nii"
    hdr = pack_header((2, 2, 2), datatype=32, bitpix=64, pixdim=(1, 1, 1))
    path.write_bytes(hdr + b"\x00" * 4 + b"\x00" * 64)
    with pytest.raises(UnsupportedDatatype):
        load_nifti(path)


def test_4d_volume_rejected_but_trailing_singletons_ok(tmp_path):
    vox4 = np.zeros((3, 3, 2, 2), dtype=np.float32)
    write_nifti_bytes(tmp_path / "4d.nii", vox4, pixdim=(1, 1, 2, 1))
    with pytest.raises(DimensionError):
        load_nifti(tmp_path / "4d.nii")

    vox41 = np.zeros((3, 3, 2, 1), dtype=np.float32)
    write_nifti_bytes(tmp_path / "4d1.nii", vox41, pixdim=(1, 1, 2, 1))
    stack = load_nifti(tmp_path / "4d1.nii")
    assert stack.voxels.shape == (3, 3, 2)


def test_single_slice_volume_loads(tmp_path):
    vox = np.ones((5, 5, 1), dtype=np.float32)
    write_nifti_bytes(tmp_path / "one.nii", vox, pixdim=(1, 1, 4))
    stack = load_nifti(tmp_path / "one.nii")
    assert stack.voxels.shape == (5, 5, 1)
    assert stack.through_plane_axis == 2


@pytest.mark.parametrize("datatype,np_dtype", [(2, np.uint8), (4, np.int16),
                                               (8, np.int32), (64, np.float64)])
def test_integer_and_double_datatypes(tmp_path, datatype, np_dtype):
    rng = np.random.default_rng(datatype)
    vox = rng.integers(0, 100, size=(3, 4, 2)).astype(np_dtype)
    bitpix = {2: 8, 4: 16, 8: 32, 64: 64}[datatype]
    write_nifti_bytes(tmp_path / "v.nii", vox, pixdim=(1, 1, 2),
                      datatype=datatype, bitpix=bitpix)
    stack = load_nifti(tmp_path / "v.nii")
    np.testing.assert_array_equal(stack.voxels, vox.astype(np.float32))


def test_big_endian_file(tmp_path):
    vox = np.arange(12, dtype=np.float32).reshape(2, 3, 2)
    write_nifti_bytes(tmp_path / "be.nii", vox, pixdim=(2, 1, 1), endian=">")
    stack = load_nifti(tmp_path / "be.nii")
    np.testing.assert_array_equal(stack.voxels, vox)
    assert stack.through_plane_axis == 0


def test_scl_slope_inter_applied_and_negatives_clipped(tmp_path):
    vox = np.array([[[-2.0, 1.0], [2.0, 3.0]]], dtype=np.float32).reshape(1, 2, 2)
    # expand to 3D shape (2,2,2) for a valid stack
    vox = np.stack([vox[0], vox[0]], axis=2)
    write_nifti_bytes(tmp_path / "s.nii", vox, pixdim=(1, 1, 1),
                      scl_slope=2.0, scl_inter=1.0)
    stack = load_nifti(tmp_path / "s.nii")
    expected = np.maximum(vox * 2.0 + 1.0, 0.0)
    np.testing.assert_array_equal(stack.voxels, expected)


def test_truncated_data_raises(tmp_path):
    vox = np.zeros((4, 4, 4), dtype=np.float32)
    path = tmp_path / "t.nii"
    write_nifti_bytes(path, vox, pixdim=(1, 1, 1))
    path.write_bytes(path.read_bytes()[:400])
    with pytest.raises(ParseError):
        load_nifti(path)


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    vox = rng.uniform(0, 50, size=(6, 5, 4)).astype(np.float32)
    affine = np.diag([1.1, 1.1, 3.3, 1.0])
    affine[:3, 3] = (-10.0, 5.0, 2.5)
    for name in ("rt.nii", "rt.nii.gz"):
        save_nifti(vox, (1.1, 1.1, 3.3), affine, tmp_path / name)
        stack = load_nifti(tmp_path / name)
        np.testing.assert_array_equal(stack.voxels, vox)
        np.testing.assert_allclose(stack.spacing, (1.1, 1.1, 3.3), rtol=1e-6)
        np.testing.assert_allclose(stack.affine, affine, rtol=1e-6, atol=1e-6)


def test_save_stack_round_trip(tmp_path):
    from stackqc.types import Stack

    vox = np.full((3, 3, 3), 7.0, dtype=np.float32)
    stack = Stack("sub-01", "run-1", vox, (1.0, 1.0, 2.0), np.eye(4))
    save_stack(stack, tmp_path / "s.nii.gz")
    again = load_nifti(tmp_path / "s.nii.gz", subject_id="sub-01", run_id="run-1")
    np.testing.assert_array_equal(again.voxels, vox)
    assert again.subject_id == "sub-01"
    assert again.through_plane_axis == 2
