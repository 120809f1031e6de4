"""Independent reference implementations used to cross-check the package.

Everything here is written for obviousness, not speed: breadth-first flood
fill for connectivity, per-voxel Python loops for overlap counting, and
direct enumeration of sign patterns for the signed-rank test. Production
code must agree with these on shared inputs.
"""

from __future__ import annotations

import itertools
import math
from collections import deque

import numpy as np


def neighbor_offsets(connectivity: int) -> list[tuple[int, int, int]]:
    offsets = []
    for dx, dy, dz in itertools.product((-1, 0, 1), repeat=3):
        if (dx, dy, dz) == (0, 0, 0):
            continue
        order = abs(dx) + abs(dy) + abs(dz)
        if connectivity == 6 and order > 1:
            continue
        if connectivity == 18 and order > 2:
            continue
        offsets.append((dx, dy, dz))
    return offsets


def flood_fill_label(mask: np.ndarray, connectivity: int) -> np.ndarray:
    """Label connected components by BFS, ids in x-fastest raster order."""
    mask = np.asarray(mask) != 0
    labels = np.zeros(mask.shape, dtype=np.int32)
    offsets = neighbor_offsets(connectivity)
    nx, ny, nz = mask.shape
    nxt = 0
    # x fastest: iterate z, then y, then x innermost? x-fastest raster means
    # linear index = x + nx*(y + ny*z), so x varies quickest.
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                if not mask[x, y, z] or labels[x, y, z]:
                    continue
                nxt += 1
                queue = deque([(x, y, z)])
                labels[x, y, z] = nxt
                while queue:
                    cx, cy, cz = queue.popleft()
                    for dx, dy, dz in offsets:
                        px, py, pz = cx + dx, cy + dy, cz + dz
                        if 0 <= px < nx and 0 <= py < ny and 0 <= pz < nz:
                            if mask[px, py, pz] and not labels[px, py, pz]:
                                labels[px, py, pz] = nxt
                                queue.append((px, py, pz))
    return labels


def dice_scan(a: np.ndarray, b: np.ndarray) -> float:
    """Dice by explicit per-voxel iteration."""
    a = np.asarray(a)
    b = np.asarray(b)
    inter = 0
    na = 0
    nb = 0
    for idx in np.ndindex(a.shape):
        av = a[idx] != 0
        bv = b[idx] != 0
        na += av
        nb += bv
        inter += av and bv
    if na + nb == 0:
        raise ZeroDivisionError("both masks empty")
    return 2.0 * inter / (na + nb)


def overlap_scan(pred_labels: np.ndarray, gt_labels: np.ndarray) -> dict[tuple[int, int], int]:
    """(pred, gt) shared-voxel counts by explicit iteration; pred>0 rows only."""
    out: dict[tuple[int, int], int] = {}
    for idx in np.ndindex(pred_labels.shape):
        p = int(pred_labels[idx])
        if p == 0:
            continue
        g = int(gt_labels[idx])
        out[(p, g)] = out.get((p, g), 0) + 1
    return out


def midranks(values) -> list[float]:
    """Average ranks for ties, 1-based."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def wilcoxon_enumerate(differences) -> tuple[float, float]:
    """Exact two-sided signed-rank test by enumerating all 2^n sign patterns.

    Zero differences are dropped, |d| midranked. Returns (W = min(W+, W-),
    p = P(W+ <= min(w, total-w)) + P(W+ >= total - min(w, total-w)), capped
    at 1).
    """
    d = [x for x in differences if x != 0]
    n = len(d)
    if n == 0:
        raise ValueError("all differences zero")
    ranks = midranks([abs(x) for x in d])
    w_plus = sum(r for r, x in zip(ranks, d) if x > 0)
    w_minus = sum(r for r, x in zip(ranks, d) if x < 0)
    w = min(w_plus, w_minus)
    total = sum(ranks)
    lo = min(w_plus, total - w_plus)
    favourable = 0
    for bits in itertools.product((0, 1), repeat=n):
        stat = sum(r for r, b in zip(ranks, bits) if b)
        if stat <= lo + 1e-9 or stat >= total - lo - 1e-9:
            favourable += 1
    return w, min(1.0, favourable / 2**n)


def wilcoxon_enumerate_large(differences, chunk_bits: int = 20) -> tuple[float, float]:
    """Same enumeration, vectorized in chunks so n around 25 stays feasible."""
    d = np.asarray([x for x in differences if x != 0], dtype=float)
    n = d.size
    ranks = np.asarray(midranks(np.abs(d).tolist()), dtype=float)
    w_plus = float(ranks[d > 0].sum())
    total = float(ranks.sum())
    w = min(w_plus, total - w_plus)
    lo = w
    favourable = 0
    n_patterns = 1 << n
    chunk = 1 << min(chunk_bits, n)
    codes = np.arange(chunk, dtype=np.uint64)
    bit_cols = np.arange(n, dtype=np.uint64)
    for start in range(0, n_patterns, chunk):
        block = codes[: min(chunk, n_patterns - start)] + np.uint64(start)
        bits = (block[:, None] >> bit_cols[None, :]) & np.uint64(1)
        stats = bits.astype(float) @ ranks
        favourable += int(np.count_nonzero((stats <= lo + 1e-9) | (stats >= total - lo - 1e-9)))
    return w, min(1.0, favourable / n_patterns)


def mixture_cdf(x: float, prob_inlier: float, sigma: float, tail_scale: float) -> float:
    """CDF of the registration-error magnitude mixture.

    With probability ``prob_inlier`` the magnitude is |N(0, sigma)| (folded
    normal, CDF erf(x / (sigma sqrt(2)))), otherwise Exponential(tail_scale).
    """
    if x <= 0:
        return 0.0
    folded = math.erf(x / (sigma * math.sqrt(2.0))) if sigma > 0 else 1.0
    expo = 1.0 - math.exp(-x / tail_scale) if tail_scale > 0 else 1.0
    return prob_inlier * folded + (1.0 - prob_inlier) * expo
