"""Volumetric data model and world<->voxel coordinate transforms.

A :class:`VolumeGrid` is an axis-aligned 3D raster: ``data[x, y, z]`` with
per-axis spacing in millimetres and a world-space origin at the centre of
voxel ``(0, 0, 0)``. All centroids and distances in this package are world
millimetres, so anisotropic spacing (e.g. 3 mm slices) is carried through
every geometric computation rather than resampled away.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidMaskError


class Kind(enum.Enum):
    """What the voxel values mean."""

    INTENSITY = "intensity"
    MASK = "mask"
    LABELS = "labels"


@dataclass(frozen=True)
class VolumeGrid:
    """Dense 3D volume with voxel spacing (mm) and world origin.

    ``data`` is indexed ``[x, y, z]``; the serialized layout is x-fastest,
    matching the on-disk order of the file format. Instances are treated as
    immutable: the constructor sets the array read-only so grids can be
    shared freely across threads.
    """

    data: np.ndarray
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    kind: Kind = Kind.INTENSITY

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ValueError(f"expected 3D data, got ndim={arr.ndim}")
        if min(arr.shape) < 1:
            raise ValueError(f"all dims must be >= 1, got {arr.shape}")
        sp = tuple(float(s) for s in self.spacing)
        if len(sp) != 3 or any(not np.isfinite(s) or s <= 0 for s in sp):
            raise ValueError(f"spacing must be 3 positive finite reals, got {self.spacing}")
        og = tuple(float(o) for o in self.origin)
        if len(og) != 3 or any(not np.isfinite(o) for o in og):
            raise ValueError(f"origin must be 3 finite reals, got {self.origin}")
        if self.kind is Kind.MASK:
            if not ((arr == 0) | (arr == 1)).all():
                raise InvalidMaskError("mask volumes must contain only {0, 1}")
            arr = arr.astype(np.uint8)
        elif self.kind is Kind.LABELS:
            if arr.dtype.kind not in "iu" or arr.min() < 0:
                raise InvalidMaskError("label volumes must hold non-negative integers")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "spacing", sp)
        object.__setattr__(self, "origin", og)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]

    def voxel_to_world(self, index) -> np.ndarray:
        """World mm of a voxel centre. Index may lie outside the grid."""
        return np.asarray(self.origin, dtype=float) + np.asarray(index, dtype=float) * np.asarray(
            self.spacing, dtype=float
        )

    def world_to_voxel_nearest(self, point) -> tuple[int, int, int]:
        """Nearest voxel index to a world point, half-away-from-zero rounding.

        The result may lie outside ``[0, dims)``; callers that need in-grid
        indices must clamp or pad themselves.
        """
        t = (np.asarray(point, dtype=float) - np.asarray(self.origin, dtype=float)) / np.asarray(
            self.spacing, dtype=float
        )
        idx = np.copysign(np.floor(np.abs(t) + 0.5), t)
        return tuple(int(i) for i in idx)

    def contains_index(self, index) -> bool:
        return all(0 <= int(i) < n for i, n in zip(index, self.dims))

    def center_world(self) -> np.ndarray:
        """World mm of the geometric centre of the volume's bounding box."""
        extent = (np.asarray(self.dims, dtype=float) - 1.0) * np.asarray(self.spacing, dtype=float)
        return np.asarray(self.origin, dtype=float) + extent / 2.0

    def with_data(self, data: np.ndarray, kind: Kind | None = None) -> "VolumeGrid":
        """New grid on the same geometry."""
        return VolumeGrid(data=data, spacing=self.spacing, origin=self.origin, kind=kind or self.kind)

    def same_grid_as(self, other: "VolumeGrid", tol: float = 1e-5) -> bool:
        return self.dims == other.dims and all(
            abs(a - b) <= tol for a, b in zip(self.spacing, other.spacing)
        )


def as_binary_mask(grid: VolumeGrid) -> VolumeGrid:
    """Reinterpret any volume as a binary mask (nonzero -> 1)."""
    if grid.kind is Kind.MASK:
        return grid
    return grid.with_data((grid.data != 0).astype(np.uint8), kind=Kind.MASK)
