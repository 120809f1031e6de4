"""Ellipsoid rasterisation and RNG stream derivation helpers."""

from __future__ import annotations

import hashlib

import numpy as np


def rng_stream(seed: int, *key_parts) -> np.random.Generator:
    """Generator for a named substream of a global seed.

    The stream depends only on (seed, key parts), never on call order, so
    work items can run under any scheduling or worker count and still draw
    identical values.
    """
    text = "\x1f".join(str(p) for p in key_parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=16).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *words]))


def random_rotation_matrix(rng: np.random.Generator) -> np.ndarray:
    """Uniform random 3D rotation via a normalised quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def rasterize_ellipsoid(
    shape: tuple[int, int, int],
    spacing,
    origin,
    center_mm,
    radii_mm,
    rotation: np.ndarray | None = None,
) -> np.ndarray:
    """Boolean voxel mask of a (possibly rotated) ellipsoid in world mm.

    Only the bounding box of the ellipsoid is evaluated, so rasterising
    small lesions into large volumes stays cheap.
    """
    spacing = np.asarray(spacing, dtype=float)
    origin = np.asarray(origin, dtype=float)
    center = np.asarray(center_mm, dtype=float)
    radii = np.asarray(radii_mm, dtype=float)
    if np.any(radii <= 0):
        raise ValueError(f"ellipsoid radii must be positive, got {radii_mm}")

    out = np.zeros(shape, dtype=bool)
    reach = float(radii.max())
    lo_idx = np.floor((center - reach - origin) / spacing).astype(int)
    hi_idx = np.ceil((center + reach - origin) / spacing).astype(int) + 1
    lo = np.maximum(lo_idx, 0)
    hi = np.minimum(hi_idx, np.asarray(shape))
    if np.any(lo >= hi):
        return out

    ax = [origin[a] + np.arange(lo[a], hi[a]) * spacing[a] - center[a] for a in range(3)]
    dx, dy, dz = np.meshgrid(*ax, indexing="ij")
    pts = np.stack([dx, dy, dz], axis=-1)
    if rotation is not None:
        pts = pts @ rotation  # world offsets into the ellipsoid's own frame
    inside = ((pts / radii) ** 2).sum(axis=-1) <= 1.0
    out[lo[0] : hi[0], lo[1] : hi[1], lo[2] : hi[2]] = inside
    return out
