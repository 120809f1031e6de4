"""Centre-proximity component selection and outcome classification.

Each segmented VOI is reduced to a single tracked outcome: the component
whose centroid lies closest to the VOI centre is taken as the lesion's
segmentation, and the result is classified as Correct, TrueNegative,
IncorrectAssignment, or FalseNegative depending on whether that component
actually covers the expected ground-truth instance. "Covers" means the
expected instance is the component's majority overlap among GT instances,
with at least one shared voxel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, UndefinedDiceError
from .labeling import LabeledComponents
from .metrics import dice
from .volume import Kind, VolumeGrid

OUTCOMES = ("Correct", "TrueNegative", "IncorrectAssignment", "FalseNegative")


@dataclass(frozen=True)
class Selection:
    component: int
    distance_mm: float


@dataclass(frozen=True)
class OutcomeRecord:
    """Evaluation result for one (case, lesion, timepoint, shift) cell."""

    case_id: str
    lesion_id: str
    timepoint: str  # "baseline" | "followup"
    epsilon_mm: float | None
    outcome: str
    dice: float | None  # set iff outcome == "Correct"
    center_distance_mm: float | None
    chosen_component: int | None
    matched_gt_label: int | None
    best_case: bool = False  # follow-up centred on the true centroid (no propagation)
    merged: bool = False

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise InvalidInputError(f"unknown outcome {self.outcome!r}")
        if (self.dice is not None) != (self.outcome == "Correct"):
            raise InvalidInputError("dice must be set exactly for Correct outcomes")


def select_component(lc: LabeledComponents, c_voi) -> Selection | None:
    """Component whose centroid is nearest the VOI centre; None if no components.

    Exact distance ties go to the smallest component id, which is stable
    because ids follow first-encounter raster order.
    """
    if lc.count == 0:
        return None
    d = np.linalg.norm(lc.centroids_mm - np.asarray(c_voi, dtype=float), axis=1)
    best = int(np.argmin(d))  # argmin returns the first minimum -> lowest id wins ties
    return Selection(component=best + 1, distance_mm=float(d[best]))


def classify_outcome(
    selection: Selection | None,
    expected_gt_label: int | None,
    gt_instances_in_voi: VolumeGrid,
    overlaps: dict[tuple[int, int], int],
    lesion_present: bool,
    *,
    pred_components: LabeledComponents | None = None,
    case_id: str = "",
    lesion_id: str = "",
    timepoint: str = "baseline",
    epsilon_mm: float | None = None,
    best_case: bool = False,
    merged: bool = False,
) -> OutcomeRecord:
    """Classify one segmented VOI against its expected lesion.

    ``lesion_present`` states whether the tracked lesion still exists at
    this timepoint (from the manifest, not from the crop). ``overlaps`` is
    the component/GT-instance table for this VOI. For Correct outcomes the
    Dice of the chosen component against the expected instance is attached.
    """
    common = dict(
        case_id=case_id,
        lesion_id=lesion_id,
        timepoint=timepoint,
        epsilon_mm=epsilon_mm,
        best_case=best_case,
        merged=merged,
    )
    if selection is None:
        outcome = "FalseNegative" if lesion_present else "TrueNegative"
        return OutcomeRecord(
            outcome=outcome,
            dice=None,
            center_distance_mm=None,
            chosen_component=None,
            matched_gt_label=None,
            **common,
        )

    row = {g: v for (p, g), v in overlaps.items() if p == selection.component and g > 0}
    if pred_components is not None and not 1 <= selection.component <= pred_components.count:
        raise InvalidInputError(f"selection references unknown component {selection.component}")

    matched = None
    if row:
        top = max(row.values())
        matched = min(g for g, v in row.items() if v == top)  # deterministic on ties

    is_correct = (
        lesion_present
        and expected_gt_label is not None
        and matched is not None
        and row.get(expected_gt_label, 0) == max(row.values())
        and row.get(expected_gt_label, 0) > 0
    )
    if is_correct:
        pred_mask = _component_mask(pred_components, selection.component, gt_instances_in_voi)
        gt_mask = gt_instances_in_voi.with_data(
            (gt_instances_in_voi.data == expected_gt_label).astype(np.uint8), kind=Kind.MASK
        )
        try:
            score = dice(pred_mask, gt_mask)
        except UndefinedDiceError as exc:  # cannot happen: overlap > 0 implies both nonempty
            raise InvalidInputError("positive overlap but empty masks") from exc
        return OutcomeRecord(
            outcome="Correct",
            dice=score,
            center_distance_mm=selection.distance_mm,
            chosen_component=selection.component,
            matched_gt_label=expected_gt_label,
            **common,
        )

    return OutcomeRecord(
        outcome="IncorrectAssignment",
        dice=None,
        center_distance_mm=selection.distance_mm,
        chosen_component=selection.component,
        matched_gt_label=matched,
        **common,
    )


def _component_mask(lc: LabeledComponents | None, component: int, like: VolumeGrid) -> VolumeGrid:
    if lc is None:
        raise InvalidInputError("classify_outcome needs pred_components to compute Dice")
    return like.with_data((lc.labels.data == component).astype(np.uint8), kind=Kind.MASK)
