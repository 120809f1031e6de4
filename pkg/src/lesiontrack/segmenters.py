"""Pluggable segmenters.

Two built-ins cover the evaluation use cases:

* :class:`ExternalSegmenter` replays precomputed full-volume prediction
  masks (e.g. from a real model) by cropping them through the exact same
  transform as the intensity VOI, so prediction and input stay voxel-aligned.
* :class:`SyntheticSegmenter` is an executable caricature of a centre-biased
  single-lesion model: ground-truth instances are detected with a
  probability that is 1 near the VOI centre, decays linearly across a
  transition band, and plateaus at a floor further out. Detected instances
  can be roughened by random boundary dilation/erosion whose amplitude grows
  as the instance sits further off-centre, and false structures can be
  hallucinated near the centre. All randomness comes from named substreams,
  so outputs are bit-identical for a given (seed, case, timepoint, lesion,
  shift) no matter how the work is scheduled.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np
from scipy import ndimage

from .errors import MissingPredictionError, ShapeMismatchError
from .geometry import rasterize_ellipsoid, rng_stream
from .nifti import load_volume
from .voi import Voi, VoiSpec, extract_voi, voi_center_world
from .volume import Kind, VolumeGrid


@dataclass(frozen=True)
class SegmentationRequest:
    """Everything a segmenter may need for one VOI."""

    voi: Voi
    source_ct: VolumeGrid
    gt_instances: VolumeGrid  # full-volume instance labels, aligned to source_ct
    case_id: str
    timepoint: str
    lesion_id: str = ""
    epsilon_mm: float | None = None


class Segmenter(Protocol):
    name: str

    def fingerprint(self) -> str: ...

    def segment(self, request: SegmentationRequest) -> VolumeGrid: ...


class PredictionStore:
    """Directory of `<case_id>_<timepoint>.nii.gz` full-volume binary masks."""

    def __init__(self, root):
        self.root = Path(root)
        self._cache: dict[tuple[str, str], VolumeGrid] = {}
        self._lock = threading.Lock()

    def path_for(self, case_id: str, timepoint: str) -> Path:
        return self.root / f"{case_id}_{timepoint}.nii.gz"

    def load(self, case_id: str, timepoint: str) -> VolumeGrid:
        key = (case_id, timepoint)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        path = self.path_for(case_id, timepoint)
        if not path.exists():
            alt = path.with_suffix("")  # allow plain .nii
            if alt.exists():
                path = alt
            else:
                raise MissingPredictionError(f"no prediction for {case_id}/{timepoint} under {self.root}")
        mask = load_volume(path, kind=Kind.MASK)
        with self._lock:
            self._cache[key] = mask
        return mask


class ExternalSegmenter:
    """Serves stored predictions through the VOI transform."""

    name = "external"

    def __init__(self, store: PredictionStore):
        self.store = store

    def fingerprint(self) -> str:
        return f"external(dir={self.store.root})"

    def segment(self, request: SegmentationRequest) -> VolumeGrid:
        return segment_external(
            request.voi, self.store, request.case_id, request.timepoint, source_ct=request.source_ct
        )


def segment_external(
    voi: Voi, store: PredictionStore, case_id: str, timepoint: str, source_ct: VolumeGrid | None = None
) -> VolumeGrid:
    """Crop the stored full-volume prediction exactly like the intensity VOI."""
    prediction = store.load(case_id, timepoint)
    if source_ct is not None and not prediction.same_grid_as(source_ct):
        raise ShapeMismatchError(
            f"prediction {prediction.dims}@{prediction.spacing} does not match "
            f"CT {source_ct.dims}@{source_ct.spacing} for {case_id}/{timepoint}"
        )
    spec = VoiSpec(shape=voi.shape, pad_value=0.0)
    return extract_voi(prediction, voi.center_world, spec).data


@dataclass(frozen=True)
class CenterBiasParams:
    """Behavioural knobs of the synthetic centre-biased segmenter."""

    detect_radius_mm: float = 20.0
    transition_band_mm: float = 5.0
    detect_floor_prob: float = 0.0
    boundary_noise_mm: float = 0.0
    hallucination_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.detect_radius_mm < 0 or self.transition_band_mm < 0 or self.boundary_noise_mm < 0:
            raise ValueError("radii and noise amplitudes must be >= 0")
        for p in (self.detect_floor_prob, self.hallucination_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probabilities must lie in [0, 1], got {p}")


def detection_probability(distance_mm: float, params: CenterBiasParams) -> float:
    """Plateau at 1 inside the radius, linear decay over the band, floor beyond."""
    r, band, floor = params.detect_radius_mm, params.transition_band_mm, params.detect_floor_prob
    if distance_mm <= r:
        return 1.0
    if band > 0 and distance_mm <= r + band:
        frac = (distance_mm - r) / band
        return 1.0 + (floor - 1.0) * frac
    return floor


class SyntheticSegmenter:
    name = "synthetic"

    def __init__(self, params: CenterBiasParams):
        self.params = params

    def fingerprint(self) -> str:
        p = self.params
        return (
            f"synthetic(radius={p.detect_radius_mm},band={p.transition_band_mm},"
            f"floor={p.detect_floor_prob},noise={p.boundary_noise_mm},"
            f"halluc={p.hallucination_prob},seed={p.seed})"
        )

    def segment(self, request: SegmentationRequest) -> VolumeGrid:
        spec = VoiSpec(shape=request.voi.shape)
        gt_in_voi = extract_voi(request.gt_instances, request.voi.center_world, spec).data
        key = (request.case_id, request.timepoint, request.lesion_id, request.epsilon_mm)
        return segment_synthetic(request.voi, gt_in_voi, self.params, stream_key=key)


def segment_synthetic(
    voi: Voi,
    gt_instances_in_voi: VolumeGrid,
    params: CenterBiasParams,
    stream_key: tuple = (),
) -> VolumeGrid:
    """Centre-biased synthetic segmentation of the GT instances in a VOI.

    With zero boundary noise and zero hallucination probability, the output
    is exactly the union of the GT instances that pass the detection draw.
    """
    if gt_instances_in_voi.dims != voi.shape or not gt_instances_in_voi.same_grid_as(voi.data):
        raise ShapeMismatchError(
            f"GT instance crop {gt_instances_in_voi.dims} does not match VOI {voi.shape}"
        )
    rng = rng_stream(params.seed, "synthetic-segmenter", *stream_key)
    c_voi = voi_center_world(voi)
    gt = gt_instances_in_voi.data
    spacing = np.asarray(gt_instances_in_voi.spacing, dtype=float)

    out = np.zeros(voi.shape, dtype=np.uint8)
    for label in _instance_labels(gt):
        inst = gt == label
        centroid = _mask_centroid(inst, gt_instances_in_voi)
        d = float(np.linalg.norm(centroid - c_voi))
        if rng.random() >= detection_probability(d, params):
            continue
        if params.boundary_noise_mm > 0:
            inst = _roughen(inst, d, params, spacing, rng)
        out |= inst.astype(np.uint8)

    if params.hallucination_prob > 0 and rng.random() < params.hallucination_prob:
        radii = rng.uniform(2.0, 6.0, size=3)
        offset = rng.uniform(-8.0, 8.0, size=3)
        blob = rasterize_ellipsoid(
            voi.shape, spacing, gt_instances_in_voi.origin, np.asarray(c_voi) + offset, radii
        )
        out |= blob.astype(np.uint8)

    return gt_instances_in_voi.with_data(out, kind=Kind.MASK)


def _instance_labels(gt: np.ndarray) -> list[int]:
    labels = np.unique(gt)
    return [int(v) for v in labels if v != 0]


def _mask_centroid(mask: np.ndarray, grid: VolumeGrid) -> np.ndarray:
    idx = np.argwhere(mask)
    mean_idx = idx.mean(axis=0)
    return grid.voxel_to_world(mean_idx)


def _roughen(
    inst: np.ndarray, center_distance_mm: float, params: CenterBiasParams, spacing: np.ndarray, rng
) -> np.ndarray:
    """Random boundary perturbation, stronger for off-centre instances.

    Amplitude is drawn from U(0, noise * q) with q = min(d / radius, 1), so
    perfectly centred instances come back untouched and quality degrades as
    the centre-bias assumption is stressed. Positive amplitudes dilate,
    negative ones erode, each in true millimetres via the Euclidean
    distance transform (anisotropic spacing respected).
    """
    r = params.detect_radius_mm
    q = 1.0 if r <= 0 else min(center_distance_mm / r, 1.0)
    amp = float(rng.uniform(0.0, params.boundary_noise_mm * q))
    mode = int(rng.integers(0, 2))  # 0 erode, 1 dilate
    if amp <= 0.0:
        return inst

    # work on the padded bounding box only; EDT there matches the full array
    idx = np.argwhere(inst)
    pad = np.ceil(amp / spacing).astype(int) + 1
    lo = np.maximum(idx.min(axis=0) - pad, 0)
    hi = np.minimum(idx.max(axis=0) + pad + 1, inst.shape)
    box = (slice(lo[0], hi[0]), slice(lo[1], hi[1]), slice(lo[2], hi[2]))
    sub = inst[box]
    out = np.zeros_like(inst)
    if mode == 1:
        dt_out = ndimage.distance_transform_edt(~sub, sampling=spacing)
        out[box] = sub | (dt_out <= amp)
    else:
        dt_in = ndimage.distance_transform_edt(sub, sampling=spacing)
        out[box] = dt_in > amp
    return out
