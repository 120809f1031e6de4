"""Evaluation metrics: Dice overlap, registration error, fixed-width
histograms, and a paired Wilcoxon signed-rank test.

The signed-rank test drops zero differences, midranks ties, and reports the
two-sided p for W = min(W+, W-). Up to n = 20 the p-value is exact over all
2^n sign patterns (computed by convolution over the rank multiset, which is
equivalent to full enumeration); past that it switches to the normal
approximation with tie and continuity corrections.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import DegenerateTestError, ShapeMismatchError, UndefinedDiceError
from .volume import VolumeGrid

EXACT_WILCOXON_MAX_N = 20


def dice(a: VolumeGrid, b: VolumeGrid) -> float:
    """Dice coefficient 2|A∩B| / (|A| + |B|) between two binary masks.

    Raises :class:`UndefinedDiceError` when both masks are empty; an empty
    prediction against an empty truth is a true-negative situation, not a
    perfect (or failed) overlap, and must not enter Dice distributions.
    """
    if a.dims != b.dims or not a.same_grid_as(b):
        raise ShapeMismatchError(f"dice requires identical grids, got {a.dims} vs {b.dims}")
    av = a.data != 0
    bv = b.data != 0
    total = int(av.sum()) + int(bv.sum())
    if total == 0:
        raise UndefinedDiceError("both masks are empty; Dice is undefined")
    inter = int(np.logical_and(av, bv).sum())
    return 2.0 * inter / total


def registration_error(propagated, gt_centroid) -> float:
    """Euclidean distance in mm between a propagated and a true centroid."""
    p = np.asarray(propagated, dtype=float)
    g = np.asarray(gt_centroid, dtype=float)
    return float(np.linalg.norm(p - g))


@dataclass(frozen=True)
class Histogram:
    """Counts over half-open bins [k*w, (k+1)*w)."""

    bin_edges: np.ndarray  # len(counts) + 1 edges
    counts: np.ndarray
    bin_width: float


def histogram(values: Sequence[float], bin_width: float) -> Histogram:
    """Fixed-width histogram with half-open bins; empty input gives no bins."""
    if bin_width <= 0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    vals = np.asarray(list(values), dtype=float)
    if vals.size == 0:
        return Histogram(np.array([0.0]), np.zeros(0, dtype=np.int64), float(bin_width))
    idx = np.floor(vals / bin_width).astype(np.int64)
    lo, hi = int(idx.min()), int(idx.max())
    counts = np.bincount(idx - lo, minlength=hi - lo + 1).astype(np.int64)
    edges = np.arange(lo, hi + 2, dtype=float) * bin_width
    return Histogram(edges, counts, float(bin_width))


@dataclass(frozen=True)
class PairedSample:
    """One lesion measured at both timepoints."""

    key: str
    baseline_value: float
    followup_value: float


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # W = min(W+, W-)
    p_value: float  # two-sided
    n_used: int  # pairs remaining after zero-difference removal
    method: str  # "exact" or "normal"


def wilcoxon_signed_rank(pairs: Sequence[PairedSample]) -> WilcoxonResult:
    """Two-sided paired signed-rank test on followup minus baseline."""
    diffs = [p.followup_value - p.baseline_value for p in pairs]
    return wilcoxon_from_differences(diffs)


def wilcoxon_from_differences(differences: Sequence[float]) -> WilcoxonResult:
    d = np.asarray(list(differences), dtype=float)
    if not np.all(np.isfinite(d)):
        raise ValueError("differences must be finite")
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        raise DegenerateTestError("every paired difference is zero")

    ranks = stats.rankdata(np.abs(d))  # midranks for ties
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)

    if n <= EXACT_WILCOXON_MAX_N:
        p = _exact_two_sided_p(ranks, w_plus)
        method = "exact"
    else:
        p = _normal_two_sided_p(d, ranks, w)
        method = "normal"
    return WilcoxonResult(statistic=w, p_value=p, n_used=int(n), method=method)


def _exact_two_sided_p(ranks: np.ndarray, w_plus: float) -> float:
    # doubled ranks are integers even with midrank ties
    r2 = np.rint(2 * ranks).astype(np.int64)
    total = int(r2.sum())  # = n(n+1)
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in r2:
        counts[r:] = counts[r:] + counts[: total + 1 - r]
    w2 = int(np.rint(2 * w_plus))
    w2_min = min(w2, total - w2)
    n_patterns = 1 << len(ranks)
    favourable = int(counts[: w2_min + 1].sum()) + int(counts[total - w2_min :].sum())
    return min(1.0, favourable / n_patterns)


def _normal_two_sided_p(d: np.ndarray, ranks: np.ndarray, w: float) -> float:
    n = d.size
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    var -= float(((tie_counts**3 - tie_counts) / 48.0).sum())
    if var <= 0:
        raise DegenerateTestError("zero variance after tie correction")
    z = (w - mean + 0.5) / np.sqrt(var)  # continuity correction toward the mean
    return float(min(1.0, 2.0 * stats.norm.cdf(z)))
