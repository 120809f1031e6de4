"""Case manifest: one row per lesion, linking centroids across timepoints.

The master manifest is a JSON list of rows. ``baseline_centroid_mm`` is
null for structures that only exist at follow-up (new lesions, extra split
children); such rows are scenery for the tracker, not tracked entities.
``parent_lesion_id`` links split children to the lesion they came from.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import CorruptFileError, InvalidInputError

TRANSITIONS = ("stable", "grow", "shrink", "resolve", "new", "merge", "split")

Point = tuple[float, float, float]


@dataclass(frozen=True)
class LesionRecord:
    case_id: str
    lesion_id: int
    baseline_centroid_mm: Point | None
    followup_centroid_mm: Point | None
    propagated_centroid_mm: Point | None
    transition: str
    parent_lesion_id: int | None = None

    def __post_init__(self):
        if self.transition not in TRANSITIONS:
            raise InvalidInputError(f"unknown transition {self.transition!r}")

    @property
    def is_tracked(self) -> bool:
        """True when this lesion exists at baseline and can be followed."""
        return self.baseline_centroid_mm is not None


def _point(value) -> Point | None:
    if value is None:
        return None
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise CorruptFileError(f"centroid must have 3 coordinates, got {value!r}")
    return tuple(float(v) for v in value)


def load_manifest(path) -> list[LesionRecord]:
    """Parse a manifest file; any structural problem raises CorruptFileError."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            rows = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorruptFileError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(rows, list):
        raise CorruptFileError(f"{path}: manifest must be a JSON list of rows")
    records = []
    for i, row in enumerate(rows):
        try:
            records.append(
                LesionRecord(
                    case_id=str(row["case_id"]),
                    lesion_id=int(row["lesion_id"]),
                    baseline_centroid_mm=_point(row.get("baseline_centroid_mm")),
                    followup_centroid_mm=_point(row.get("followup_centroid_mm")),
                    propagated_centroid_mm=_point(row.get("propagated_centroid_mm")),
                    transition=str(row["transition"]),
                    parent_lesion_id=(None if row.get("parent_lesion_id") is None else int(row["parent_lesion_id"])),
                )
            )
        except (KeyError, TypeError, ValueError, InvalidInputError) as exc:
            raise CorruptFileError(f"{path}: row {i}: {exc}") from exc
    return records


def save_manifest(records, path) -> None:
    rows = []
    for rec in records:
        row = asdict(rec)
        for key in ("baseline_centroid_mm", "followup_centroid_mm", "propagated_centroid_mm"):
            if row[key] is not None:
                row[key] = [float(v) for v in row[key]]
        rows.append(row)
    Path(path).write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
