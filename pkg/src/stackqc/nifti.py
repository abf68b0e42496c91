"""Minimal NIfTI-1 reader/writer for 3D single-frame volumes.

Supports little- and big-endian files, optional gzip wrapping, the ``n+1``
(single file) and ``ni1`` (header + .img) layouts, and the five datatypes
used by clinical T2w stacks: uint8, int16, int32, float32, float64.
Voxels are returned as float32 with ``scl_slope``/``scl_inter`` applied and
negative intensities clipped to zero.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .errors import DimensionError, ParseError, UnsupportedDatatype
from .types import Stack, through_plane_axis

HEADER_SIZE = 348

# NIfTI-1 datatype code -> numpy dtype character (endianness prefixed later).
_DTYPES = {2: "u1", 4: "i2", 8: "i4", 16: "f4", 64: "f8"}
_BITPIX = {2: 8, 4: 16, 8: 32, 16: 32, 64: 64}

# (struct format, field name) pairs covering the full 348-byte header.
_FIELDS = [
    ("i", "sizeof_hdr"),
    ("10s", "data_type"),
    ("18s", "db_name"),
    ("i", "extents"),
    ("h", "session_error"),
    ("b", "regular"),
    ("b", "dim_info"),
    ("8h", "dim"),
    ("f", "intent_p1"),
    ("f", "intent_p2"),
    ("f", "intent_p3"),
    ("h", "intent_code"),
    ("h", "datatype"),
    ("h", "bitpix"),
    ("h", "slice_start"),
    ("8f", "pixdim"),
    ("f", "vox_offset"),
    ("f", "scl_slope"),
    ("f", "scl_inter"),
    ("h", "slice_end"),
    ("b", "slice_code"),
    ("B", "xyzt_units"),
    ("f", "cal_max"),
    ("f", "cal_min"),
    ("f", "slice_duration"),
    ("f", "toffset"),
    ("i", "glmax"),
    ("i", "glmin"),
    ("80s", "descrip"),
    ("24s", "aux_file"),
    ("h", "qform_code"),
    ("h", "sform_code"),
    ("f", "quatern_b"),
    ("f", "quatern_c"),
    ("f", "quatern_d"),
    ("f", "qoffset_x"),
    ("f", "qoffset_y"),
    ("f", "qoffset_z"),
    ("4f", "srow_x"),
    ("4f", "srow_y"),
    ("4f", "srow_z"),
    ("16s", "intent_name"),
    ("4s", "magic"),
]

_STRUCT_FMT = "".join(fmt for fmt, _ in _FIELDS)
assert struct.calcsize("<" + _STRUCT_FMT) == HEADER_SIZE


def _read_bytes(path: Path) -> bytes:
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _unpack_header(raw: bytes) -> tuple[dict, str]:
    if len(raw) < HEADER_SIZE:
        raise ParseError(len(raw), f"file shorter than the {HEADER_SIZE}-byte header")
    (size_le,) = struct.unpack("<i", raw[:4])
    (size_be,) = struct.unpack(">i", raw[:4])
    if size_le == HEADER_SIZE:
        endian = "<"
    elif size_be == HEADER_SIZE:
        endian = ">"
    else:
        raise ParseError(0, f"sizeof_hdr is {size_le}, expected {HEADER_SIZE}")
    values = struct.unpack(endian + _STRUCT_FMT, raw[:HEADER_SIZE])
    header = {}
    pos = 0
    for fmt, name in _FIELDS:
        count = struct.calcsize(fmt) // struct.calcsize(fmt[-1])
        if fmt[-1] == "s":
            header[name] = values[pos]
            pos += 1
        elif count == 1:
            header[name] = values[pos]
            pos += 1
        else:
            header[name] = values[pos:pos + count]
            pos += count
    return header, endian


def _affine_from_header(header: dict, spacing: tuple[float, float, float]) -> np.ndarray:
    affine = np.eye(4)
    if header["sform_code"] > 0:
        affine[0, :] = header["srow_x"]
        affine[1, :] = header["srow_y"]
        affine[2, :] = header["srow_z"]
        return affine
    if header["qform_code"] > 0:
        b, c, d = header["quatern_b"], header["quatern_c"], header["quatern_d"]
        a_sq = 1.0 - (b * b + c * c + d * d)
        a = np.sqrt(a_sq) if a_sq > 0 else 0.0
        rot = np.array([
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c],
        ])
        qfac = -1.0 if header["pixdim"][0] == -1.0 else 1.0
        scale = np.array(spacing)
        scale[2] *= qfac
        affine[:3, :3] = rot * scale
        affine[:3, 3] = (header["qoffset_x"], header["qoffset_y"], header["qoffset_z"])
        return affine
    affine[:3, :3] = np.diag(spacing)
    return affine


def load_nifti(path, subject_id: str = "", run_id: str = "") -> Stack:
    """Load a 3D NIfTI-1 volume (optionally gzip-compressed) as a Stack.

    Raises ParseError for malformed headers, UnsupportedDatatype for
    datatypes outside {uint8, int16, int32, float32, float64}, and
    DimensionError when the volume is not 3D after dropping trailing
    singleton dimensions beyond the third.
    """
    path = Path(path)
    raw = _read_bytes(path)
    header, endian = _unpack_header(raw)

    magic = header["magic"].rstrip(b"\x00")
    if magic not in (b"n+1", b"ni1"):
        raise ParseError(344, f"bad magic {magic!r}, expected 'n+1' or 'ni1'")

    code = header["datatype"]
    if code not in _DTYPES:
        raise UnsupportedDatatype(f"datatype code {code} is not supported")
    if header["bitpix"] != _BITPIX[code]:
        raise ParseError(72, f"bitpix {header['bitpix']} inconsistent with datatype {code}")

    dim = header["dim"]
    nd = dim[0]
    if not 1 <= nd <= 7:
        raise ParseError(40, f"dim[0] must be in 1..7, got {nd}")
    shape = list(dim[1:1 + nd])
    if any(s < 1 for s in shape):
        raise ParseError(40, f"non-positive dimension in {shape}")
    while len(shape) > 3 and shape[-1] == 1:
        shape.pop()
    if len(shape) != 3:
        raise DimensionError(f"expected a 3D volume, got shape {tuple(shape)}")

    pixdim = header["pixdim"]
    spacing = tuple(abs(float(p)) for p in pixdim[1:4])
    if any(s <= 0 for s in spacing):
        raise ParseError(76, f"non-positive pixdim {spacing}")

    if magic == b"n+1":
        offset = int(header["vox_offset"])
        if offset < HEADER_SIZE:
            raise ParseError(108, f"vox_offset {offset} overlaps the header")
        data_bytes = raw
    else:
        # ni1: voxels live in a sibling .img (optionally .img.gz) file.
        base = path.name
        for ext in (".hdr.gz", ".hdr", ".nii.gz", ".nii"):
            if base.endswith(ext):
                base = base[: -len(ext)]
                break
        img = path.with_name(base + ".img")
        if not img.exists() and img.with_suffix(".img.gz").exists():
            img = img.with_suffix(".img.gz")
        if not img.exists():
            raise ParseError(344, f"ni1 file without a matching image file {img.name}")
        data_bytes = _read_bytes(img)
        offset = int(header["vox_offset"])

    dtype = np.dtype(endian + _DTYPES[code])
    count = int(np.prod(shape))
    need = offset + count * dtype.itemsize
    if len(data_bytes) < need:
        raise ParseError(len(data_bytes), f"file truncated: need {need} bytes for voxel data")
    vox = np.frombuffer(data_bytes, dtype=dtype, count=count, offset=offset)
    vox = vox.reshape(shape, order="F").astype(np.float32)

    slope, inter = float(header["scl_slope"]), float(header["scl_inter"])
    if slope != 0.0 and np.isfinite(slope):
        vox = vox * np.float32(slope) + np.float32(inter)
    vox = np.maximum(vox, 0.0, dtype=np.float32)

    affine = _affine_from_header(header, spacing)
    return Stack(
        subject_id=subject_id,
        run_id=run_id,
        voxels=vox,
        spacing=spacing,
        affine=affine,
        through_plane_axis=through_plane_axis(spacing),
    )


def save_nifti(voxels: np.ndarray, spacing, affine, path) -> None:
    """Write a 3D float32 NIfTI-1 (n+1) file; gzip when the path ends in .gz."""
    voxels = np.asarray(voxels, dtype=np.float32)
    if voxels.ndim != 3:
        raise DimensionError(f"can only save 3D volumes, got shape {voxels.shape}")
    affine = np.asarray(affine, dtype=np.float64)

    header = {name: (b"" if fmt.endswith("s") else 0) for fmt, name in _FIELDS}
    header.update(
        sizeof_hdr=HEADER_SIZE,
        dim=(3, *voxels.shape, 1, 1, 1, 1),
        datatype=16,
        bitpix=32,
        pixdim=(1.0, *[float(s) for s in spacing], 0.0, 0.0, 0.0, 0.0),
        vox_offset=352.0,
        scl_slope=1.0,
        scl_inter=0.0,
        sform_code=1,
        qform_code=0,
        srow_x=tuple(affine[0, :]),
        srow_y=tuple(affine[1, :]),
        srow_z=tuple(affine[2, :]),
        magic=b"n+1\x00",
    )
    packed = []
    for fmt, name in _FIELDS:
        value = header[name]
        if fmt.endswith("s"):
            packed.append(struct.pack("<" + fmt, value))
        elif len(fmt) > 1 and not fmt.endswith("s"):
            packed.append(struct.pack("<" + fmt, *value))
        else:
            kind = fmt[-1]
            value = float(value) if kind == "f" else int(value)
            packed.append(struct.pack("<" + fmt, value))
    blob = b"".join(packed)
    blob += b"\x00" * 4  # extension flag
    blob += voxels.tobytes(order="F")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.name.endswith(".gz"):
        with open(path, "wb") as fh:
            with gzip.GzipFile(fileobj=fh, mode="wb", mtime=0) as gz:
                gz.write(blob)
    else:
        path.write_bytes(blob)


def save_stack(stack: Stack, path) -> None:
    save_nifti(stack.voxels, stack.spacing, stack.affine, path)
