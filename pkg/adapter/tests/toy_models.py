"""Stand-in segmentation "models" driven entirely by the file interface.

Usage: toy_models.py MODE[:PATTERN] INPUT_CT OUTPUT_MASK

MODE selects the behavior; with ``:PATTERN`` the behavior applies only when
PATTERN occurs in the input path and every other input is handled as
``identity``. Modes:

  identity    binarize the ground-truth instance labels next to the CT
              (``*_ct.nii.gz`` -> ``*_instances.nii.gz``), a perfect model
  labels      copy the instance labels verbatim (non-binary for >1 lesion)
  empty       all-zero mask with correct geometry
  transposed  correct data but header dims rotated, i.e. misaligned
  garbage     output that is not a NIfTI file at all
  fail        exit nonzero without writing anything

Writes are gzip with pinned mtime and name so repeated runs are
byte-identical.
"""

import gzip
import struct
import sys
from pathlib import Path

import numpy as np

DTYPES = {2: "<u1", 4: "<i2", 16: "<f4"}


def read_gz(path: Path) -> bytes:
    blob = path.read_bytes()
    return gzip.decompress(blob) if blob[:2] == b"\x1f\x8b" else blob


def write_gz(path: Path, blob: bytes) -> None:
    import io

    raw = io.BytesIO()
    with gzip.GzipFile(filename="", fileobj=raw, mode="wb", mtime=0) as gz:
        gz.write(blob)
    path.write_bytes(raw.getvalue())


def binarized_mask_blob(gt_blob: bytes) -> bytes:
    header = bytearray(gt_blob[:352])
    (datatype,) = struct.unpack_from("<h", header, 70)
    values = np.frombuffer(gt_blob, dtype=DTYPES[datatype], offset=352)
    struct.pack_into("<h", header, 70, 2)  # uint8
    struct.pack_into("<h", header, 72, 8)  # bitpix
    struct.pack_into("<2f", header, 112, 1.0, 0.0)  # no intensity scaling
    return bytes(header) + (values != 0).astype("<u1").tobytes()


def main() -> int:
    mode_spec, ct_path, out_path = sys.argv[1], Path(sys.argv[2]), Path(sys.argv[3])
    mode, _, pattern = mode_spec.partition(":")
    if pattern and pattern not in str(ct_path):
        mode = "identity"

    if mode == "fail":
        print("synthetic model failure", file=sys.stderr)
        return 3

    gt_blob = read_gz(Path(str(ct_path).replace("_ct.nii.gz", "_instances.nii.gz")))

    if mode == "identity":
        write_gz(out_path, binarized_mask_blob(gt_blob))
    elif mode == "labels":
        write_gz(out_path, gt_blob)
    elif mode == "empty":
        blob = bytearray(binarized_mask_blob(gt_blob))
        blob[352:] = bytes(len(blob) - 352)
        write_gz(out_path, bytes(blob))
    elif mode == "transposed":
        blob = bytearray(binarized_mask_blob(gt_blob))
        d1, d2, d3 = struct.unpack_from("<3h", blob, 42)
        struct.pack_into("<3h", blob, 42, d2, d3, d1)
        write_gz(out_path, bytes(blob))
    elif mode == "garbage":
        write_gz(out_path, b"these bytes are not a volume")
    else:
        print(f"unknown mode {mode!r}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
