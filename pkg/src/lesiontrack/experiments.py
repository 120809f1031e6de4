"""Experiment harnesses.

Two protocols share the per-VOI pipeline (extract, segment, label, select,
classify):

* :func:`run_longitudinal_eval` walks every tracked lesion in a case
  manifest at both timepoints. Baseline VOIs are centred on the baseline
  centroids; follow-up VOIs on the propagated centroids when available,
  falling back to the true follow-up centroid (flagged ``best_case``).
* :func:`run_displacement_sweep` takes the top-k lesions by Dice from a
  previous run and re-segments each one with the VOI centre shifted by
  controlled magnitudes toward the volume centre.

Both are deterministic for a fixed (config, seed) regardless of worker
count: cases are independent work items with identity-keyed RNG streams,
and aggregation is an ordered reduction over sorted case/lesion keys.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .correspondence import OutcomeRecord, classify_outcome, select_component
from .errors import (
    DegenerateDirectionError,
    DegenerateTestError,
    InvalidInputError,
    LesionTrackError,
    TopKUnsatisfiableError,
)
from .labeling import instance_centroids, label_components, overlap_matrix
from .manifest import LesionRecord, load_manifest
from .metrics import (
    PairedSample,
    WilcoxonResult,
    registration_error,
    wilcoxon_signed_rank,
)
from .nifti import load_volume
from .segmenters import (
    CenterBiasParams,
    ExternalSegmenter,
    PredictionStore,
    SegmentationRequest,
    Segmenter,
    SyntheticSegmenter,
)
from .voi import DEFAULT_MAGNITUDES_MM, VoiSpec, displacement_schedule, extract_voi, voi_center_world
from .volume import Kind

TIMEPOINTS = ("baseline", "followup")


@dataclass(frozen=True)
class SegmenterSpec:
    """Picklable description of which segmenter an experiment uses."""

    kind: str = "synthetic"  # "synthetic" | "external"
    params: CenterBiasParams = field(default_factory=CenterBiasParams)
    prediction_dir: str | None = None

    def __post_init__(self):
        if self.kind not in ("synthetic", "external"):
            raise ValueError(f"segmenter kind must be synthetic or external, got {self.kind!r}")
        if self.kind == "external" and not self.prediction_dir:
            raise ValueError("external segmenter needs prediction_dir")


def build_segmenter(spec: SegmenterSpec) -> Segmenter:
    if spec.kind == "synthetic":
        return SyntheticSegmenter(spec.params)
    return ExternalSegmenter(PredictionStore(spec.prediction_dir))


@dataclass(frozen=True)
class ExperimentConfig:
    manifest_path: str
    output_dir: str
    data_root: str | None = None  # default: directory containing the manifest
    segmenter: SegmenterSpec = field(default_factory=SegmenterSpec)
    voi: VoiSpec = field(default_factory=VoiSpec)
    connectivity: int = 26
    magnitudes_mm: tuple[float, ...] = DEFAULT_MAGNITUDES_MM
    top_k: int = 30
    rank_timepoint: str = "baseline"  # which timepoint's Dice ranks sweep lesions
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")
        mags = tuple(float(m) for m in self.magnitudes_mm)
        if not mags or mags[0] != 0.0 or list(mags) != sorted(mags):
            raise ValueError(f"magnitudes_mm must be ascending and start at 0, got {self.magnitudes_mm}")
        object.__setattr__(self, "magnitudes_mm", mags)
        if self.rank_timepoint not in TIMEPOINTS:
            raise ValueError(f"rank_timepoint must be one of {TIMEPOINTS}, got {self.rank_timepoint!r}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    @property
    def resolved_data_root(self) -> Path:
        if self.data_root is not None:
            return Path(self.data_root)
        return Path(self.manifest_path).parent


def case_volume_path(data_root: Path, case_id: str, timepoint: str, what: str) -> Path:
    """`<data_root>/<case_id>/<timepoint>_<what>.nii.gz`, e.g. baseline_ct."""
    return Path(data_root) / case_id / f"{timepoint}_{what}.nii.gz"


@dataclass(frozen=True)
class CaseFailure:
    case_id: str
    detail: str


@dataclass
class EvalSummary:
    """Aggregated output of the longitudinal evaluation."""

    records: list[OutcomeRecord]
    reg_errors_mm: list[float]  # one per lesion with propagated + true follow-up centroid
    dice_by_timepoint: dict[str, list[float]]  # Correct outcomes only
    outcome_counts: dict[str, dict[str, int]]  # timepoint -> outcome -> count
    paired: list[PairedSample]  # lesions Correct at both timepoints
    excluded_pairs: int  # tracked lesions that did not pair
    wilcoxon: WilcoxonResult | None
    wilcoxon_degenerate: str | None
    case_failures: list[CaseFailure]


@dataclass
class SweepSummary:
    """Aggregated output of the displacement sweep."""

    records: list[OutcomeRecord]
    selected: list[tuple[str, str, float]]  # (case_id, lesion_id, ranking dice)
    epsilon_mm: list[float]
    outcome_counts_by_eps: dict[float, dict[str, int]]
    mean_dice_by_eps: dict[float, float | None]  # over Correct rows; None if none
    degenerate_direction_fallbacks: int
    case_failures: list[CaseFailure]


def run_longitudinal_eval(cfg: ExperimentConfig) -> EvalSummary:
    """Evaluate every tracked lesion at baseline and follow-up.

    A lesion is tracked when the manifest gives it a baseline centroid;
    lesions that only appear at follow-up (new, split offspring) are left
    in the ground truth as distractors but get no VOI of their own.
    Failures are isolated per case: one unreadable volume voids that case's
    rows, not the run.
    """
    manifest = load_manifest(cfg.manifest_path)
    by_case: dict[str, list[LesionRecord]] = {}
    for rec in manifest:
        by_case.setdefault(rec.case_id, []).append(rec)

    payloads = [(cfg, case_id, sorted(recs, key=lambda r: r.lesion_id)) for case_id, recs in sorted(by_case.items())]
    results = _map_cases(_eval_case, payloads, cfg.workers)

    records: list[OutcomeRecord] = []
    reg_errors: list[float] = []
    failures: list[CaseFailure] = []
    for case_id, recs, errs, failure in results:
        if failure is not None:
            failures.append(CaseFailure(case_id, failure))
            continue
        records.extend(recs)
        reg_errors.extend(errs)

    dice_by_tp = {tp: [r.dice for r in records if r.timepoint == tp and r.outcome == "Correct"] for tp in TIMEPOINTS}
    counts = {tp: _outcome_counts([r for r in records if r.timepoint == tp]) for tp in TIMEPOINTS}

    paired, excluded = _pair_correct(records)
    wilcoxon = None
    degenerate = None
    if len(paired) == 0:
        degenerate = "no lesion was Correct at both timepoints"
    else:
        try:
            wilcoxon = wilcoxon_signed_rank(paired)
        except DegenerateTestError as exc:
            degenerate = str(exc)

    return EvalSummary(
        records=records,
        reg_errors_mm=reg_errors,
        dice_by_timepoint=dice_by_tp,
        outcome_counts=counts,
        paired=paired,
        excluded_pairs=excluded,
        wilcoxon=wilcoxon,
        wilcoxon_degenerate=degenerate,
        case_failures=failures,
    )


def _eval_case(payload) -> tuple[str, list[OutcomeRecord], list[float], str | None]:
    cfg, case_id, lesion_records = payload
    try:
        segmenter = build_segmenter(cfg.segmenter)
        root = cfg.resolved_data_root
        vols = {
            tp: {
                "ct": load_volume(case_volume_path(root, case_id, tp, "ct"), kind=Kind.INTENSITY),
                "gt": load_volume(case_volume_path(root, case_id, tp, "instances"), kind=Kind.LABELS),
            }
            for tp in TIMEPOINTS
        }
        gt_centroids = {
            tp: instance_centroids(vols[tp]["gt"].data, vols[tp]["gt"].spacing, vols[tp]["gt"].origin)
            for tp in TIMEPOINTS
        }

        out: list[OutcomeRecord] = []
        reg_errors: list[float] = []
        for rec in lesion_records:
            if not rec.is_tracked:
                continue
            if rec.propagated_centroid_mm is not None and rec.followup_centroid_mm is not None:
                reg_errors.append(registration_error(rec.propagated_centroid_mm, rec.followup_centroid_mm))
            for tp in TIMEPOINTS:
                out.append(_one_voi_outcome(cfg, segmenter, vols[tp], gt_centroids[tp], rec, tp))
        return case_id, out, reg_errors, None
    except (LesionTrackError, OSError) as exc:
        return case_id, [], [], f"{type(exc).__name__}: {exc}"


def _one_voi_outcome(cfg, segmenter, vols, gt_cents, rec: LesionRecord, timepoint: str) -> OutcomeRecord:
    if timepoint == "baseline":
        center = rec.baseline_centroid_mm
        true_centroid = rec.baseline_centroid_mm
        lesion_present = True
        best_case = False
        merged = False
    else:
        true_centroid = rec.followup_centroid_mm
        lesion_present = true_centroid is not None
        if rec.propagated_centroid_mm is not None:
            center, best_case = rec.propagated_centroid_mm, False
        elif true_centroid is not None:
            center, best_case = true_centroid, True
        else:  # resolved lesion whose propagation also went missing
            center, best_case = rec.baseline_centroid_mm, False
        merged = rec.transition == "merge"
    return _classify_voi(
        cfg,
        segmenter,
        vols,
        gt_cents,
        center=center,
        true_centroid=true_centroid,
        lesion_present=lesion_present,
        case_id=rec.case_id,
        lesion_id=str(rec.lesion_id),
        timepoint=timepoint,
        epsilon_mm=None,
        best_case=best_case,
        merged=merged,
    )


def _classify_voi(
    cfg,
    segmenter,
    vols,
    gt_cents,
    *,
    center,
    true_centroid,
    lesion_present,
    case_id,
    lesion_id,
    timepoint,
    epsilon_mm,
    best_case,
    merged,
) -> OutcomeRecord:
    """One pass of the shared VOI pipeline: extract, segment, label, classify."""
    voi = extract_voi(vols["ct"], center, cfg.voi)
    request = SegmentationRequest(
        voi=voi,
        source_ct=vols["ct"],
        gt_instances=vols["gt"],
        case_id=case_id,
        timepoint=timepoint,
        lesion_id=lesion_id,
        epsilon_mm=epsilon_mm,
    )
    pred_mask = segmenter.segment(request)
    components = label_components(pred_mask, cfg.connectivity)
    gt_voi = extract_voi(vols["gt"], center, cfg.voi).data
    overlaps = overlap_matrix(components, gt_voi)
    selection = select_component(components, voi_center_world(voi))
    expected = _expected_label(gt_cents, true_centroid)
    return classify_outcome(
        selection,
        expected,
        gt_voi,
        overlaps,
        lesion_present,
        pred_components=components,
        case_id=case_id,
        lesion_id=lesion_id,
        timepoint=timepoint,
        epsilon_mm=epsilon_mm,
        best_case=best_case,
        merged=merged,
    )


def _expected_label(gt_cents: dict[int, tuple], reference) -> int | None:
    """GT instance whose centroid sits nearest the manifest centroid.

    Manifest centroids are measured from the same masks, so the nearest
    instance is the lesion itself; going through geometry rather than
    trusting id equality keeps merged structures (which carry the surviving
    partner's id) on the right label.
    """
    if reference is None or not gt_cents:
        return None
    ref = np.asarray(reference, dtype=float)
    best = min(gt_cents.items(), key=lambda kv: (float(np.linalg.norm(np.asarray(kv[1]) - ref)), kv[0]))
    return int(best[0])


def _pair_correct(records: list[OutcomeRecord]) -> tuple[list[PairedSample], int]:
    by_lesion: dict[tuple[str, str], dict[str, OutcomeRecord]] = {}
    for r in records:
        by_lesion.setdefault((r.case_id, r.lesion_id), {})[r.timepoint] = r
    paired: list[PairedSample] = []
    excluded = 0
    for (case_id, lesion_id), tps in sorted(by_lesion.items()):
        b, f = tps.get("baseline"), tps.get("followup")
        if b is not None and f is not None and b.outcome == "Correct" and f.outcome == "Correct":
            paired.append(
                PairedSample(key=f"{case_id}/{lesion_id}", baseline_value=b.dice, followup_value=f.dice)
            )
        else:
            excluded += 1
    return paired, excluded


def _outcome_counts(records: list[OutcomeRecord]) -> dict[str, int]:
    counts = {"Correct": 0, "TrueNegative": 0, "IncorrectAssignment": 0, "FalseNegative": 0}
    for r in records:
        counts[r.outcome] += 1
    return counts


def run_displacement_sweep(cfg: ExperimentConfig, baseline_records: list[OutcomeRecord]) -> SweepSummary:
    """Re-segment the top-k Correct lesions under controlled VOI shifts.

    Lesions are ranked by Dice at ``cfg.rank_timepoint`` (ties broken by
    case/lesion key); each is segmented once per magnitude with the VOI
    centre moved from the true centroid toward the volume's geometric
    centre. A centroid exactly at the volume centre has no shift direction;
    those lesions fall back to the +x axis and are counted.
    """
    selected = rank_top_lesions(baseline_records, cfg.top_k, cfg.rank_timepoint)
    manifest = {(r.case_id, str(r.lesion_id)): r for r in load_manifest(cfg.manifest_path)}

    chosen: dict[str, list[tuple[LesionRecord, float]]] = {}
    for case_id, lesion_id, rank_dice in selected:
        rec = manifest.get((case_id, lesion_id))
        if rec is None:
            raise InvalidInputError(f"ranked lesion {case_id}/{lesion_id} is not in the manifest")
        centroid = rec.baseline_centroid_mm if cfg.rank_timepoint == "baseline" else rec.followup_centroid_mm
        if centroid is None:
            raise InvalidInputError(
                f"ranked lesion {case_id}/{lesion_id} has no {cfg.rank_timepoint} centroid in the manifest"
            )
        chosen.setdefault(case_id, []).append((rec, rank_dice))

    payloads = [
        (cfg, case_id, sorted(items, key=lambda it: it[0].lesion_id)) for case_id, items in sorted(chosen.items())
    ]
    results = _map_cases(_sweep_case, payloads, cfg.workers)

    records: list[OutcomeRecord] = []
    failures: list[CaseFailure] = []
    fallbacks = 0
    for case_id, recs, n_fallback, failure in results:
        if failure is not None:
            failures.append(CaseFailure(case_id, failure))
            continue
        records.extend(recs)
        fallbacks += n_fallback

    eps = [float(m) for m in cfg.magnitudes_mm]
    counts_by_eps = {e: _outcome_counts([r for r in records if r.epsilon_mm == e]) for e in eps}
    mean_dice = {}
    for e in eps:
        dices = [r.dice for r in records if r.epsilon_mm == e and r.outcome == "Correct"]
        mean_dice[e] = float(np.mean(dices)) if dices else None

    return SweepSummary(
        records=records,
        selected=selected,
        epsilon_mm=eps,
        outcome_counts_by_eps=counts_by_eps,
        mean_dice_by_eps=mean_dice,
        degenerate_direction_fallbacks=fallbacks,
        case_failures=failures,
    )


def rank_top_lesions(records: list[OutcomeRecord], top_k: int, rank_timepoint: str) -> list[tuple[str, str, float]]:
    """Top-k (case_id, lesion_id, dice) by Dice among Correct outcomes."""
    usable = [
        r
        for r in records
        if r.timepoint == rank_timepoint and r.outcome == "Correct" and r.dice is not None and r.epsilon_mm is None
    ]
    if len(usable) < top_k:
        raise TopKUnsatisfiableError(requested=top_k, achievable=len(usable))
    ranked = sorted(usable, key=lambda r: (-r.dice, r.case_id, _lesion_sort_key(r.lesion_id)))
    return [(r.case_id, r.lesion_id, r.dice) for r in ranked[:top_k]]


def _lesion_sort_key(lesion_id: str):
    return (0, int(lesion_id)) if lesion_id.isdigit() else (1, lesion_id)


def _sweep_case(payload) -> tuple[str, list[OutcomeRecord], int, str | None]:
    cfg, case_id, items = payload
    try:
        segmenter = build_segmenter(cfg.segmenter)
        root = cfg.resolved_data_root
        tp = cfg.rank_timepoint
        vols = {
            "ct": load_volume(case_volume_path(root, case_id, tp, "ct"), kind=Kind.INTENSITY),
            "gt": load_volume(case_volume_path(root, case_id, tp, "instances"), kind=Kind.LABELS),
        }
        gt_cents = instance_centroids(vols["gt"].data, vols["gt"].spacing, vols["gt"].origin)
        volume_center = vols["ct"].center_world()

        out: list[OutcomeRecord] = []
        fallbacks = 0
        for rec, _rank_dice in items:
            centroid = rec.baseline_centroid_mm if tp == "baseline" else rec.followup_centroid_mm
            try:
                centers = displacement_schedule(centroid, volume_center, cfg.magnitudes_mm)
            except DegenerateDirectionError:
                fallbacks += 1
                axis_target = np.asarray(centroid, dtype=float) + np.array([1.0, 0.0, 0.0])
                centers = displacement_schedule(centroid, axis_target, cfg.magnitudes_mm)
            for eps, center in zip(cfg.magnitudes_mm, centers):
                out.append(
                    _classify_voi(
                        cfg,
                        segmenter,
                        vols,
                        gt_cents,
                        center=tuple(float(c) for c in center),
                        true_centroid=centroid,
                        lesion_present=True,
                        case_id=case_id,
                        lesion_id=str(rec.lesion_id),
                        timepoint=tp,
                        epsilon_mm=float(eps),
                        best_case=False,
                        merged=False,
                    )
                )
        return case_id, out, fallbacks, None
    except (LesionTrackError, OSError) as exc:
        return case_id, [], 0, f"{type(exc).__name__}: {exc}"


def _map_cases(fn, payloads, workers: int):
    """Ordered map over case payloads, serial or process-parallel.

    ``executor.map`` preserves input order, and every payload carries its
    own RNG identity, so the aggregate is worker-count invariant.
    """
    if workers <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, payloads))
