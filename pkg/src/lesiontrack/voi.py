"""Fixed-size VOI extraction around a world coordinate, plus the controlled
displacement schedule used by the robustness sweep.

A VOI keeps the world frame of its source volume: the crop's grid origin is
set so that any point has the same world coordinates inside and outside the
VOI. Downstream geometry (component centroids, centre distances) therefore
never needs frame conversions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDirectionError
from .volume import Kind, VolumeGrid

DEFAULT_VOI_SHAPE = (256, 256, 128)
DEFAULT_MAGNITUDES_MM = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0)


@dataclass(frozen=True)
class VoiSpec:
    """Crop shape in voxels and the fill value for out-of-grid intensities."""

    shape: tuple[int, int, int] = DEFAULT_VOI_SHAPE
    pad_value: float = 0.0

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        if len(shape) != 3 or min(shape) < 1:
            raise ValueError(f"VOI shape must be 3 positive integers, got {self.shape}")
        object.__setattr__(self, "shape", shape)

    @property
    def center_index(self) -> tuple[int, int, int]:
        return tuple(s // 2 for s in self.shape)


@dataclass(frozen=True)
class Voi:
    """A crop plus the geometry linking it back to its source volume."""

    data: VolumeGrid
    source_offset: tuple[int, int, int]  # source index mapped to VOI index (0,0,0)
    center_world: tuple[float, float, float]  # the point the VOI was centred on
    has_source_overlap: bool

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.dims


def extract_voi(src: VolumeGrid, center, spec: VoiSpec) -> Voi:
    """Crop a fixed-shape VOI centred on a world point.

    The source voxel nearest ``center`` lands on VOI index ``shape // 2``;
    regions outside the source grid are filled with ``spec.pad_value`` for
    intensity volumes and 0 for masks/labels. Fully out-of-grid centres
    yield an all-padding VOI flagged ``has_source_overlap=False``.
    """
    center = tuple(float(c) for c in center)
    nearest = src.world_to_voxel_nearest(center)
    start = tuple(int(n) - s // 2 for n, s in zip(nearest, spec.shape))

    pad = spec.pad_value if src.kind is Kind.INTENSITY else 0
    out = np.full(spec.shape, pad, dtype=src.data.dtype)

    src_lo = [max(0, st) for st in start]
    src_hi = [min(dim, st + sh) for st, sh, dim in zip(start, spec.shape, src.dims)]
    overlap = all(lo < hi for lo, hi in zip(src_lo, src_hi))
    if overlap:
        dst_lo = [lo - st for lo, st in zip(src_lo, start)]
        dst_hi = [hi - st for hi, st in zip(src_hi, start)]
        out[dst_lo[0] : dst_hi[0], dst_lo[1] : dst_hi[1], dst_lo[2] : dst_hi[2]] = src.data[
            src_lo[0] : src_hi[0], src_lo[1] : src_hi[1], src_lo[2] : src_hi[2]
        ]

    origin = tuple(o + st * sp for o, st, sp in zip(src.origin, start, src.spacing))
    grid = VolumeGrid(data=out, spacing=src.spacing, origin=origin, kind=src.kind)
    return Voi(data=grid, source_offset=start, center_world=center, has_source_overlap=overlap)


def voi_center_world(voi: Voi) -> np.ndarray:
    """World mm of the VOI's centre voxel (index ``shape // 2``)."""
    return voi.data.voxel_to_world([s // 2 for s in voi.shape])


def displacement_schedule(true_centroid, volume_center, magnitudes_mm) -> list[np.ndarray]:
    """Points shifted from ``true_centroid`` toward ``volume_center``.

    One point per magnitude; magnitude 0 returns the centroid bit-exact.
    Raises :class:`DegenerateDirectionError` when the two inputs coincide,
    since no direction exists; callers supply a fallback axis explicitly.
    """
    tc = np.asarray(true_centroid, dtype=float)
    vc = np.asarray(volume_center, dtype=float)
    mags = [float(m) for m in magnitudes_mm]
    if any(m < 0 or not np.isfinite(m) for m in mags):
        raise ValueError(f"magnitudes must be non-negative and finite, got {magnitudes_mm}")
    direction = vc - tc
    norm = float(np.linalg.norm(direction))
    if norm == 0.0 and any(m > 0 for m in mags):
        raise DegenerateDirectionError("centroid coincides with the volume centre; no shift direction")
    unit = direction / norm if norm > 0 else direction
    return [tc.copy() if m == 0.0 else tc + m * unit for m in mags]
