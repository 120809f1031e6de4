"""Synthetic longitudinal case generator.

Each case is a baseline/follow-up pair of CT-like volumes with instance
masks and a manifest of lesion centroids. Lesions are ellipsoids in the
soft-tissue HU range on a noisy background; every lesion is assigned one
transition (stable, grow, shrink, resolve, new, merge, split) and the
follow-up volume realises it with instance labels that preserve identity:
a merged structure keeps the larger parent's label, a split's larger child
keeps the parent label while the smaller child gets a fresh id.

Propagated centroids simulate a registration step: the true follow-up
centroid (baseline centroid for resolved lesions) plus an error vector with
isotropic direction and a two-part magnitude mixture, a Gaussian core with
an exponential tail. True centroids recorded in the manifest are recomputed
from the painted masks, so they match the written data exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import PlacementError
from .geometry import random_rotation_matrix, rasterize_ellipsoid, rng_stream
from .labeling import instance_centroids
from .manifest import LesionRecord, save_manifest
from .nifti import save_volume
from .volume import Kind, VolumeGrid

_MAX_PLACEMENT_TRIES = 400


@dataclass(frozen=True)
class RegErrorModel:
    """Gaussian-core / exponential-tail mixture for propagation error (mm)."""

    prob_inlier: float = 0.7
    inlier_sigma_mm: float = 3.0
    tail_scale_mm: float = 12.0

    def __post_init__(self):
        if not 0.0 <= self.prob_inlier <= 1.0:
            raise ValueError(f"prob_inlier must lie in [0, 1], got {self.prob_inlier}")
        if self.inlier_sigma_mm < 0 or self.tail_scale_mm < 0:
            raise ValueError("error scales must be >= 0")


DEFAULT_TRANSITION_MIX = {
    "stable": 0.40,
    "grow": 0.15,
    "shrink": 0.15,
    "resolve": 0.10,
    "new": 0.10,
    "merge": 0.05,
    "split": 0.05,
}


@dataclass(frozen=True)
class PhantomConfig:
    volume_dims: tuple[int, int, int] = (96, 96, 48)
    spacing: tuple[float, float, float] = (1.0, 1.0, 3.0)
    lesion_count_range: tuple[int, int] = (2, 4)
    lesion_radii_range_mm: tuple[float, float] = (4.0, 10.0)
    transition_mix: dict = field(default_factory=lambda: dict(DEFAULT_TRANSITION_MIX))
    reg_error: RegErrorModel = field(default_factory=RegErrorModel)
    missing_propagation_fraction: float = 0.0
    min_separation_mm: float = 40.0
    background_hu: tuple[float, float] = (-50.0, 20.0)  # mean, sd
    lesion_hu_range: tuple[float, float] = (40.0, 80.0)
    seed: int = 0

    def __post_init__(self):
        total = sum(self.transition_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"transition_mix must sum to 1, got {total}")
        unknown = set(self.transition_mix) - set(DEFAULT_TRANSITION_MIX)
        if unknown:
            raise ValueError(f"unknown transitions in mix: {sorted(unknown)}")
        lo, hi = self.lesion_count_range
        if lo < 0 or hi < lo:
            raise ValueError(f"bad lesion_count_range {self.lesion_count_range}")
        rlo, rhi = self.lesion_radii_range_mm
        if rlo <= 0 or rhi < rlo:
            raise ValueError(f"bad lesion_radii_range_mm {self.lesion_radii_range_mm}")
        if not 0.0 <= self.missing_propagation_fraction <= 1.0:
            raise ValueError("missing_propagation_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class CaseBundle:
    case_id: str
    baseline_ct: VolumeGrid
    baseline_instances: VolumeGrid
    followup_ct: VolumeGrid
    followup_instances: VolumeGrid
    records: list[LesionRecord]


@dataclass
class _Lesion:
    """Layout of one instance across the two timepoints (None = absent)."""

    lesion_id: int
    transition: str
    hu: float
    base_center: np.ndarray | None = None
    base_radii: np.ndarray | None = None
    base_rotation: np.ndarray | None = None
    follow_center: np.ndarray | None = None
    follow_radii: np.ndarray | None = None
    follow_rotation: np.ndarray | None = None
    partner: "_Lesion | None" = None  # set on a merge survivor
    parent_id: int | None = None  # set on the extra split child


def sample_error_magnitude(rng: np.random.Generator, model: RegErrorModel) -> float:
    """One registration-error magnitude from the mixture."""
    if rng.random() < model.prob_inlier:
        return float(abs(rng.normal(0.0, model.inlier_sigma_mm)))
    return float(rng.exponential(model.tail_scale_mm))


def _error_vector(rng: np.random.Generator, model: RegErrorModel) -> np.ndarray:
    mag = sample_error_magnitude(rng, model)
    return _unit(rng) * mag


def _unit(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    n = np.linalg.norm(v)
    while n == 0.0:
        v = rng.normal(size=3)
        n = np.linalg.norm(v)
    return v / n


def generate_case(cfg: PhantomConfig, case_id: str) -> CaseBundle:
    """Build one longitudinal case; deterministic in (cfg.seed, case_id)."""
    rng = rng_stream(cfg.seed, "phantom-case", case_id)
    lesions = _layout_lesions(cfg, rng, case_id)

    dims, spacing = cfg.volume_dims, cfg.spacing
    base_inst = np.zeros(dims, dtype=np.int32)
    follow_inst = np.zeros(dims, dtype=np.int32)

    for les in lesions:
        if les.base_center is not None:
            _paint(base_inst, les.base_center, les.base_radii, les.base_rotation, les.lesion_id, cfg)
    for les in lesions:
        if les.transition == "merge" and les.partner is not None:
            _paint_merged(follow_inst, les, cfg)
        elif les.follow_center is not None:
            _paint(follow_inst, les.follow_center, les.follow_radii, les.follow_rotation, les.lesion_id, cfg)

    base_centroids = instance_centroids(base_inst, spacing)
    follow_centroids = instance_centroids(follow_inst, spacing)

    records: list[LesionRecord] = []
    err_rng = rng_stream(cfg.seed, "phantom-regerror", case_id)
    for les in sorted(lesions, key=lambda l: l.lesion_id):
        baseline_c = base_centroids.get(les.lesion_id)
        if les.transition == "merge" and les.partner is None:
            survivor = next(l for l in lesions if l.partner is les)
            followup_c = follow_centroids.get(survivor.lesion_id)
        else:
            followup_c = follow_centroids.get(les.lesion_id)

        propagated = None
        if baseline_c is not None:
            anchor = followup_c if followup_c is not None else baseline_c
            vec = _error_vector(err_rng, cfg.reg_error)
            dropped = (
                followup_c is not None
                and cfg.missing_propagation_fraction > 0
                and err_rng.random() < cfg.missing_propagation_fraction
            )
            propagated = None if dropped else tuple(float(v) for v in np.asarray(anchor) + vec)

        records.append(
            LesionRecord(
                case_id=case_id,
                lesion_id=les.lesion_id,
                baseline_centroid_mm=baseline_c,
                followup_centroid_mm=followup_c,
                propagated_centroid_mm=propagated,
                transition=les.transition,
                parent_lesion_id=les.parent_id,
            )
        )

    noise_rng = rng_stream(cfg.seed, "phantom-noise", case_id)
    hu_by_label = {l.lesion_id: l.hu for l in lesions}
    base_ct = _paint_ct(base_inst, hu_by_label, cfg, noise_rng)
    follow_ct = _paint_ct(follow_inst, hu_by_label, cfg, noise_rng)

    def grid(data, kind):
        return VolumeGrid(data=data, spacing=spacing, origin=(0.0, 0.0, 0.0), kind=kind)

    return CaseBundle(
        case_id=case_id,
        baseline_ct=grid(base_ct, Kind.INTENSITY),
        baseline_instances=grid(base_inst, Kind.LABELS),
        followup_ct=grid(follow_ct, Kind.INTENSITY),
        followup_instances=grid(follow_inst, Kind.LABELS),
        records=records,
    )


def _layout_lesions(cfg: PhantomConfig, rng: np.random.Generator, case_id: str) -> list[_Lesion]:
    lo, hi = cfg.lesion_count_range
    n = int(rng.integers(lo, hi + 1))
    names = sorted(cfg.transition_mix)
    probs = np.array([cfg.transition_mix[k] for k in names])
    transitions = [str(rng.choice(names, p=probs)) for _ in range(n)]

    # merges need a partner; demote the odd one out
    merge_idx = [i for i, t in enumerate(transitions) if t == "merge"]
    if len(merge_idx) % 2 == 1:
        transitions[merge_idx.pop()] = "stable"

    rlo, rhi = cfg.lesion_radii_range_mm
    lesions: list[_Lesion] = []
    next_id = 1
    for transition in transitions:
        if transition in ("merge", "split"):
            r = float(rng.uniform(rlo, rhi))
            radii = np.array([r, r, r])
            rot = None  # spheres keep merge/split geometry tractable
        else:
            base = rng.uniform(rlo, rhi)
            ratios = rng.uniform(1.0, 3.0, size=3)
            radii = np.clip(base * ratios / ratios.max(), rlo * 0.5, rhi)
            rot = random_rotation_matrix(rng)
        margin = float(radii.max()) * (2.4 if transition in ("split", "grow", "merge") else 1.2) + 4.0
        center = _place(cfg, rng, [l for l in lesions if l.base_center is not None], margin, case_id)
        les = _Lesion(
            lesion_id=next_id,
            transition=transition,
            hu=float(rng.uniform(*cfg.lesion_hu_range)),
            base_center=center,
            base_radii=radii,
            base_rotation=rot,
        )
        if transition == "stable":
            les.follow_center, les.follow_radii, les.follow_rotation = center, radii, rot
        elif transition == "grow":
            les.follow_center, les.follow_rotation = center, rot
            les.follow_radii = radii * float(rng.uniform(1.2, 1.6))
        elif transition == "shrink":
            les.follow_center, les.follow_rotation = center, rot
            les.follow_radii = radii * float(rng.uniform(0.55, 0.85))
        elif transition in ("merge", "split"):
            les.follow_center, les.follow_radii, les.follow_rotation = center, radii, rot
        # resolve: absent at follow-up
        lesions.append(les)
        next_id += 1

    # new lesions exist only at follow-up
    for les in list(lesions):
        if les.transition == "new":
            les.follow_center, les.follow_radii, les.follow_rotation = (
                les.base_center,
                les.base_radii,
                les.base_rotation,
            )
            les.base_center = les.base_radii = les.base_rotation = None

    _pair_merges(cfg, rng, lesions, case_id)
    _split_children(cfg, rng, lesions, case_id)
    return lesions


def _pair_merges(cfg, rng, lesions: list[_Lesion], case_id: str) -> None:
    merge_lesions = [l for l in lesions if l.transition == "merge"]
    for a, b in zip(merge_lesions[0::2], merge_lesions[1::2]):
        survivor, absorbed = (a, b) if a.base_radii.max() >= b.base_radii.max() else (b, a)
        r_sum = float(survivor.base_radii.max() + absorbed.base_radii.max())
        for _ in range(_MAX_PLACEMENT_TRIES):
            gap = float(rng.uniform(4.0, 8.0))
            center = survivor.base_center + _unit(rng) * (r_sum + gap)
            center = _clamp_inside(cfg, center, float(absorbed.base_radii.max()) * 1.6 + 4.0)
            dist = float(np.linalg.norm(center - survivor.base_center))
            others_ok = all(
                l is survivor
                or l is absorbed
                or l.base_center is None
                or np.linalg.norm(center - l.base_center) >= cfg.min_separation_mm
                for l in lesions
            )
            if dist >= r_sum + 2.0 and others_ok:
                absorbed.base_center = center
                absorbed.follow_center = None  # painted through the survivor
                absorbed.follow_radii = absorbed.follow_rotation = None
                survivor.partner = absorbed
                break
        else:
            raise PlacementError(f"{case_id}: could not place a merge partner")


def _split_children(cfg, rng, lesions: list[_Lesion], case_id: str) -> None:
    for les in list(lesions):
        if les.transition != "split":
            continue
        parent_r = float(les.base_radii.max())
        r1 = parent_r * float(rng.uniform(0.5, 0.65))
        r2 = parent_r * float(rng.uniform(0.45, 0.6))
        for _ in range(_MAX_PLACEMENT_TRIES):
            direction = _unit(rng)
            gap = 3.0
            c1 = _clamp_inside(cfg, les.base_center + direction * (r1 + gap / 2), r1 + 2.0)
            c2 = _clamp_inside(cfg, les.base_center - direction * (r2 + gap / 2), r2 + 2.0)
            if np.linalg.norm(c1 - c2) >= r1 + r2 + 2.0:
                break
        else:
            raise PlacementError(f"{case_id}: could not separate split children")
        les.follow_center, les.follow_radii, les.follow_rotation = c1, np.array([r1] * 3), None
        child = _Lesion(
            lesion_id=max(l.lesion_id for l in lesions) + 1,
            transition="split",
            hu=les.hu,
            follow_center=c2,
            follow_radii=np.array([r2] * 3),
            parent_id=les.lesion_id,
        )
        lesions.append(child)


def _bounds_mm(cfg: PhantomConfig) -> np.ndarray:
    return (np.asarray(cfg.volume_dims) - 1) * np.asarray(cfg.spacing)


def _clamp_inside(cfg: PhantomConfig, center: np.ndarray, margin_mm: float) -> np.ndarray:
    hi = _bounds_mm(cfg)
    return np.clip(center, margin_mm, hi - margin_mm)


def _place(cfg, rng, existing: list[_Lesion], margin_mm: float, case_id: str) -> np.ndarray:
    hi = _bounds_mm(cfg)
    if np.any(hi - 2 * margin_mm <= 0):
        raise PlacementError(f"{case_id}: volume too small for margin {margin_mm:.1f} mm")
    for _ in range(_MAX_PLACEMENT_TRIES):
        center = rng.uniform(margin_mm, hi - margin_mm)
        if all(np.linalg.norm(center - l.base_center) >= cfg.min_separation_mm for l in existing):
            return center
    raise PlacementError(
        f"{case_id}: could not place a lesion with separation {cfg.min_separation_mm} mm "
        f"after {_MAX_PLACEMENT_TRIES} tries"
    )


def _paint(inst: np.ndarray, center, radii, rotation, label: int, cfg: PhantomConfig) -> None:
    mask = rasterize_ellipsoid(inst.shape, cfg.spacing, (0, 0, 0), center, radii, rotation)
    inst[mask] = label


def _paint_merged(inst: np.ndarray, survivor: _Lesion, cfg: PhantomConfig) -> None:
    """Grow both partners until they meet; the union carries the survivor id."""
    absorbed = survivor.partner
    dist = float(np.linalg.norm(survivor.base_center - absorbed.base_center))
    scale = max(1.1 * dist / float(survivor.base_radii.max() + absorbed.base_radii.max()), 1.05)
    _paint(inst, survivor.base_center, survivor.base_radii * scale, None, survivor.lesion_id, cfg)
    _paint(inst, absorbed.base_center, absorbed.base_radii * scale, None, survivor.lesion_id, cfg)


def _paint_ct(inst: np.ndarray, hu_by_label: dict[int, float], cfg: PhantomConfig, rng) -> np.ndarray:
    mean, sd = cfg.background_hu
    ct = rng.normal(mean, sd, size=inst.shape).astype(np.float32)
    for label in np.unique(inst):
        if label == 0:
            continue
        sel = inst == label
        ct[sel] = hu_by_label[int(label)] + rng.normal(0.0, 3.0, size=int(sel.sum())).astype(np.float32)
    return ct


def generate_dataset(cfg: PhantomConfig, n_cases: int, out_dir) -> Path:
    """Write ``n_cases`` cases plus the master manifest; returns the manifest path.

    Existing case directories are refused rather than overwritten.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    all_records: list[LesionRecord] = []
    for i in range(n_cases):
        case_id = f"case_{i:04d}"
        case_dir = out / case_id
        if case_dir.exists():
            raise FileExistsError(f"refusing to overwrite existing case directory {case_dir}")
        bundle = generate_case(cfg, case_id)
        case_dir.mkdir()
        save_volume(bundle.baseline_ct, case_dir / "baseline_ct.nii.gz")
        save_volume(bundle.baseline_instances, case_dir / "baseline_instances.nii.gz")
        save_volume(bundle.followup_ct, case_dir / "followup_ct.nii.gz")
        save_volume(bundle.followup_instances, case_dir / "followup_instances.nii.gz")
        all_records.extend(bundle.records)
    manifest_path = out / "manifest.json"
    save_manifest(all_records, manifest_path)
    return manifest_path
