"""Just enough NIfTI-1 reading to validate model outputs.

The full evaluation toolkit has its own reader; this module exists so the
adapter can check alignment and binariness of arbitrary model outputs
without importing anything beyond numpy. Scope: single-file .nii / .nii.gz,
little-endian, datatypes uint8 / int16 / float32.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass

import numpy as np

HEADER_SIZE = 348
MAGIC = b"n+1\x00"
DTYPES = {2: "<u1", 4: "<i2", 16: "<f4"}


class NiftiLiteError(Exception):
    """Raised for files this reader cannot interpret."""


@dataclass(frozen=True)
class HeaderInfo:
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    datatype: int
    scl_slope: float
    scl_inter: float
    vox_offset: int


def read_blob(path) -> bytes:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:2] == b"\x1f\x8b":
        blob = gzip.decompress(blob)
    return blob


def parse_header(blob: bytes) -> HeaderInfo:
    if len(blob) < HEADER_SIZE:
        raise NiftiLiteError(f"file too short for a header ({len(blob)} bytes)")
    (sizeof_hdr,) = struct.unpack_from("<i", blob, 0)
    if sizeof_hdr != HEADER_SIZE:
        raise NiftiLiteError("not a little-endian NIfTI-1 header")
    if blob[344:348] != MAGIC:
        raise NiftiLiteError(f"unsupported magic {blob[344:348]!r}")
    dim = struct.unpack_from("<8h", blob, 40)
    if not 1 <= dim[0] <= 7:
        raise NiftiLiteError(f"bad ndim {dim[0]}")
    # trailing dims beyond the third must be absent or singleton
    if any(d not in (0, 1) for d in dim[4 : 1 + dim[0]]):
        raise NiftiLiteError(f"not a 3D volume: dim={dim[: 1 + dim[0]]}")
    dims = tuple(int(d) if i < dim[0] else 1 for i, d in enumerate(dim[1:4]))
    if any(d < 1 for d in dims):
        raise NiftiLiteError(f"bad dims {dims}")
    (datatype,) = struct.unpack_from("<h", blob, 70)
    if datatype not in DTYPES:
        raise NiftiLiteError(f"unsupported datatype {datatype}")
    pixdim = struct.unpack_from("<8f", blob, 76)
    (vox_offset,) = struct.unpack_from("<f", blob, 108)
    scl_slope, scl_inter = struct.unpack_from("<2f", blob, 112)
    offset = int(vox_offset) if vox_offset >= HEADER_SIZE else HEADER_SIZE + 4
    return HeaderInfo(
        dims=dims,
        spacing=tuple(abs(float(p)) for p in pixdim[1:4]),
        datatype=int(datatype),
        scl_slope=float(scl_slope),
        scl_inter=float(scl_inter),
        vox_offset=offset,
    )


def read_header(path) -> HeaderInfo:
    return parse_header(read_blob(path))


def load_flat(path) -> tuple[HeaderInfo, np.ndarray]:
    """Header plus raw voxel values as a flat array (no scaling applied)."""
    blob = read_blob(path)
    info = parse_header(blob)
    count = int(np.prod(info.dims))
    nbytes = count * np.dtype(DTYPES[info.datatype]).itemsize
    if len(blob) < info.vox_offset + nbytes:
        raise NiftiLiteError(f"voxel data truncated ({len(blob) - info.vox_offset} < {nbytes} bytes)")
    data = np.frombuffer(blob, dtype=DTYPES[info.datatype], count=count, offset=info.vox_offset)
    return info, data
