"""Reader/writer for a strict NIfTI-1 subset.

Single-file ``.nii`` / ``.nii.gz`` volumes, little-endian, 3 spatial
dimensions, datatype uint8 / int16 / float32. Orientation handling is
deliberately narrow: only the sform affine is honoured and it must be
axis-aligned (diagonal up to sign). Negative diagonals are normalised at
load time by flipping the data axis and adjusting the origin, so every
in-memory grid has positive spacing. Files that only carry a qform
quaternion are rejected outright rather than silently reinterpreted.

Header fields honoured: dim, datatype, pixdim, vox_offset, scl_slope,
scl_inter, sform_code, srow_x/y/z, magic. Everything else is ignored on
read and zeroed on write.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .errors import CorruptFileError, LabelRangeError, UnsupportedFormatError
from .volume import Kind, VolumeGrid

HEADER_SIZE = 348
MAGIC_SINGLE = b"n+1\x00"

_DTYPE_CODES = {2: np.uint8, 4: np.int16, 16: np.float32}
_CODE_FOR_KIND = {Kind.MASK: 2, Kind.LABELS: 4, Kind.INTENSITY: 16}
_BITPIX = {2: 8, 4: 16, 16: 32}

_GZIP_MAGIC = b"\x1f\x8b"


def _read_blob(path: Path) -> bytes:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:2] == _GZIP_MAGIC:
        try:
            blob = gzip.decompress(blob)
        except (EOFError, gzip.BadGzipFile, OSError) as exc:
            raise CorruptFileError(f"{path}: broken gzip stream ({exc})") from exc
    return blob


def load_volume(path, kind: Kind | None = None) -> VolumeGrid:
    """Load a NIfTI-1 volume.

    ``kind`` forces the interpretation of the voxel values (mask / labels /
    intensity); when omitted it is inferred from the datatype and value
    range. Raises :class:`UnsupportedFormatError` for files outside the
    supported subset and :class:`CorruptFileError` for truncated ones.
    """
    path = Path(path)
    blob = _read_blob(path)
    if len(blob) < HEADER_SIZE:
        raise CorruptFileError(f"{path}: header truncated ({len(blob)} < {HEADER_SIZE} bytes)")

    (sizeof_hdr,) = struct.unpack_from("<i", blob, 0)
    if sizeof_hdr != HEADER_SIZE:
        if struct.unpack_from(">i", blob, 0)[0] == HEADER_SIZE:
            raise UnsupportedFormatError(f"{path}: big-endian files are not supported")
        raise CorruptFileError(f"{path}: bad sizeof_hdr {sizeof_hdr}")
    magic = blob[344:348]
    if magic != MAGIC_SINGLE:
        raise UnsupportedFormatError(f"{path}: magic {magic!r} is not a single-file NIfTI-1")

    dim = struct.unpack_from("<8h", blob, 40)
    ndim = dim[0]
    if ndim < 3 or ndim > 7 or any(d != 1 for d in dim[4 : 1 + ndim]):
        raise UnsupportedFormatError(f"{path}: expected 3 spatial dimensions, got dim={dim}")
    shape = tuple(int(d) for d in dim[1:4])
    if min(shape) < 1:
        raise CorruptFileError(f"{path}: non-positive spatial dims {shape}")

    (datatype,) = struct.unpack_from("<h", blob, 70)
    if datatype not in _DTYPE_CODES:
        raise UnsupportedFormatError(f"{path}: datatype code {datatype} not in supported set {{2, 4, 16}}")
    dtype = _DTYPE_CODES[datatype]

    pixdim = struct.unpack_from("<8f", blob, 76)
    (vox_offset,) = struct.unpack_from("<f", blob, 108)
    scl_slope, scl_inter = struct.unpack_from("<2f", blob, 112)
    qform_code, sform_code = struct.unpack_from("<2h", blob, 252)
    srows = np.array([struct.unpack_from("<4f", blob, off) for off in (280, 296, 312)], dtype=np.float64)

    spacing = np.array(pixdim[1:4], dtype=np.float64)
    flips = [False, False, False]
    if sform_code > 0:
        linear = srows[:, :3]
        offdiag = linear - np.diag(np.diag(linear))
        if np.abs(offdiag).max() > 1e-4 * max(np.abs(np.diag(linear)).max(), 1.0):
            raise UnsupportedFormatError(f"{path}: rotated or oblique sform affines are not supported")
        diag = np.diag(linear)
        if np.any(diag == 0) or not np.all(np.isfinite(diag)):
            raise CorruptFileError(f"{path}: degenerate sform diagonal {tuple(diag)}")
        origin = srows[:, 3].copy()
        for ax in range(3):
            if diag[ax] < 0:
                flips[ax] = True
                origin[ax] = origin[ax] + diag[ax] * (shape[ax] - 1)
        if not np.all(np.isfinite(spacing)) or np.any(spacing <= 0):
            spacing = np.abs(diag)
    elif qform_code > 0:
        raise UnsupportedFormatError(
            f"{path}: file carries only a qform quaternion; re-save with an sform affine"
        )
    else:
        origin = np.zeros(3)
    if not np.all(np.isfinite(spacing)) or np.any(spacing <= 0):
        raise CorruptFileError(f"{path}: invalid pixdim spacing {tuple(spacing)}")

    offset = int(vox_offset) if vox_offset >= HEADER_SIZE else HEADER_SIZE + 4
    nbytes = int(np.prod(shape)) * np.dtype(dtype).itemsize
    if len(blob) < offset + nbytes:
        raise CorruptFileError(f"{path}: voxel data truncated ({len(blob) - offset} < {nbytes} bytes)")

    data = np.frombuffer(blob, dtype=np.dtype(dtype).newbyteorder("<"), count=int(np.prod(shape)), offset=offset)
    data = data.reshape(shape, order="F")
    for ax, flip in enumerate(flips):
        if flip:
            data = np.flip(data, axis=ax)
    if np.isfinite(scl_slope) and scl_slope != 0.0 and (scl_slope != 1.0 or scl_inter != 0.0):
        data = data.astype(np.float32) * np.float32(scl_slope) + np.float32(scl_inter)

    if kind is None:
        kind = _infer_kind(data)
    elif kind in (Kind.MASK, Kind.LABELS) and data.dtype.kind == "f":
        as_int = data.astype(np.int32)
        if not np.array_equal(as_int, data):
            raise UnsupportedFormatError(f"{path}: non-integral values cannot be read as {kind.value}")
        data = as_int
    return VolumeGrid(data=data, spacing=tuple(spacing), origin=tuple(origin), kind=kind)


def _infer_kind(data: np.ndarray) -> Kind:
    if data.dtype.kind == "f":
        return Kind.INTENSITY
    if ((data == 0) | (data == 1)).all():
        return Kind.MASK
    if data.min() >= 0:
        return Kind.LABELS
    return Kind.INTENSITY


def save_volume(volume: VolumeGrid, path) -> None:
    """Write a grid as single-file NIfTI-1 (gzipped when the name ends in .gz).

    Masks are stored as uint8, instance labels as int16 (raising
    :class:`LabelRangeError` past 32767), intensities as float32.
    """
    path = Path(path)
    code = _CODE_FOR_KIND[volume.kind]
    dtype = _DTYPE_CODES[code]
    data = volume.data
    if volume.kind is Kind.LABELS and data.max() > np.iinfo(np.int16).max:
        raise LabelRangeError(f"{int(data.max())} labels exceed the int16 on-disk range")
    out = data.astype(dtype, copy=False)

    header = bytearray(HEADER_SIZE)
    struct.pack_into("<i", header, 0, HEADER_SIZE)
    struct.pack_into("<8h", header, 40, 3, *volume.dims, 1, 1, 1, 1)
    struct.pack_into("<h", header, 70, code)
    struct.pack_into("<h", header, 72, _BITPIX[code])
    struct.pack_into("<8f", header, 76, 1.0, *volume.spacing, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", header, 108, float(HEADER_SIZE + 4))
    struct.pack_into("<2f", header, 112, 1.0, 0.0)  # scl_slope, scl_inter
    struct.pack_into("<2h", header, 252, 0, 1)  # qform_code, sform_code
    sx, sy, sz = volume.spacing
    ox, oy, oz = volume.origin
    struct.pack_into("<4f", header, 280, sx, 0.0, 0.0, ox)
    struct.pack_into("<4f", header, 296, 0.0, sy, 0.0, oy)
    struct.pack_into("<4f", header, 312, 0.0, 0.0, sz, oz)
    header[344:348] = MAGIC_SINGLE

    payload = bytes(header) + b"\x00\x00\x00\x00" + out.tobytes(order="F")
    if path.suffix == ".gz":
        # mtime and embedded name pinned so identical volumes produce identical bytes
        with open(path, "wb") as raw, gzip.GzipFile(filename="", fileobj=raw, mode="wb", mtime=0) as fh:
            fh.write(payload)
    else:
        path.write_bytes(payload)
