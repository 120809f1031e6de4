"""Result emission: the outcomes CSV, figure-data JSON files, and run metadata.

Output is plot *data*, not rendered plots, so no graphics stack is pulled
in. Every figure file embeds a deterministic metadata block (config
fingerprint, segmenter identity, seed, tool version); wall-clock timestamps
live only in ``run_metadata.json`` so that repeated runs with the same
config and seed produce byte-identical CSV and figure files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .correspondence import OUTCOMES, OutcomeRecord
from .errors import CorruptFileError, IoError
from .experiments import EvalSummary, ExperimentConfig, SweepSummary, build_segmenter
from .metrics import histogram

CSV_HEADER = (
    "case_id",
    "lesion_id",
    "timepoint",
    "epsilon_mm",
    "outcome",
    "dice",
    "center_distance_mm",
    "chosen_component",
    "matched_gt_label",
    "best_case",
    "merged",
)

REG_ERROR_BIN_MM = 1.0


@dataclass(frozen=True)
class RunMetadata:
    config_fingerprint: str
    segmenter: str
    connectivity: int
    pad_value: float
    seed: int
    tool_version: str
    timestamp: str  # ISO 8601 UTC; excluded from the fingerprint

    def deterministic_block(self) -> dict:
        block = asdict(self)
        del block["timestamp"]
        return block


def build_run_metadata(cfg: ExperimentConfig) -> RunMetadata:
    return RunMetadata(
        config_fingerprint=config_fingerprint(cfg),
        segmenter=build_segmenter(cfg.segmenter).fingerprint(),
        connectivity=cfg.connectivity,
        pad_value=float(cfg.voi.pad_value),
        seed=cfg.seed,
        tool_version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )


def config_fingerprint(cfg: ExperimentConfig) -> str:
    """Hash of the experiment identity.

    Worker count and output location change where and how fast results are
    produced, never what they are, so they stay out of the fingerprint;
    runs that differ only in those fields must emit identical bytes.
    """
    canon = asdict(cfg)
    del canon["workers"]
    del canon["output_dir"]
    text = json.dumps(canon, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def write_outcomes_csv(records: list[OutcomeRecord], path) -> None:
    """One row per record under the fixed header; null becomes an empty field."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for r in records:
                writer.writerow(
                    (
                        r.case_id,
                        r.lesion_id,
                        r.timepoint,
                        _fmt_float(r.epsilon_mm),
                        r.outcome,
                        _fmt_float(r.dice),
                        _fmt_float(r.center_distance_mm),
                        _fmt_int(r.chosen_component),
                        _fmt_int(r.matched_gt_label),
                        _fmt_bool(r.best_case),
                        _fmt_bool(r.merged),
                    )
                )
    except OSError as exc:
        raise IoError(f"could not write {path}: {exc}") from exc


def read_outcomes_csv(path) -> list[OutcomeRecord]:
    """Parse a file written by :func:`write_outcomes_csv` back into records."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = tuple(next(reader))
            except StopIteration:
                raise CorruptFileError(f"{path}: empty outcomes file") from None
            if header != CSV_HEADER:
                raise CorruptFileError(f"{path}: unexpected header {header}")
            records = []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(CSV_HEADER):
                    raise CorruptFileError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
                records.append(
                    OutcomeRecord(
                        case_id=row[0],
                        lesion_id=row[1],
                        timepoint=row[2],
                        epsilon_mm=_parse_float(row[3]),
                        outcome=row[4],
                        dice=_parse_float(row[5]),
                        center_distance_mm=_parse_float(row[6]),
                        chosen_component=_parse_int(row[7]),
                        matched_gt_label=_parse_int(row[8]),
                        best_case=_parse_bool(row[9], path, lineno),
                        merged=_parse_bool(row[10], path, lineno),
                    )
                )
            return records
    except OSError as exc:
        raise IoError(f"could not read {path}: {exc}") from exc


def _fmt_float(v) -> str:
    return "" if v is None else repr(float(v))


def _fmt_int(v) -> str:
    return "" if v is None else str(int(v))


def _fmt_bool(v: bool) -> str:
    return "true" if v else "false"


def _parse_float(s: str) -> float | None:
    return None if s == "" else float(s)


def _parse_int(s: str) -> int | None:
    return None if s == "" else int(s)


def _parse_bool(s: str, path, lineno) -> bool:
    if s == "true":
        return True
    if s == "false":
        return False
    raise CorruptFileError(f"{path}:{lineno}: expected true/false, got {s!r}")


def write_eval_outputs(cfg: ExperimentConfig, summary: EvalSummary, out_dir=None) -> Path:
    """Write the longitudinal-evaluation artifact set; returns the directory."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    md = build_run_metadata(cfg)
    block = md.deterministic_block()

    write_outcomes_csv(summary.records, out / "outcomes.csv")

    hist = histogram(summary.reg_errors_mm, REG_ERROR_BIN_MM)
    _write_json(
        out / "fig_reg_error_hist.json",
        {
            "figure": "registration_error_histogram",
            "metadata": block,
            "unit_x": "mm",
            "bin_width_mm": REG_ERROR_BIN_MM,
            "bin_edges_mm": hist.bin_edges,
            "counts": hist.counts,
            "n_samples": len(summary.reg_errors_mm),
        },
    )

    wil = None
    if summary.wilcoxon is not None:
        wil = {
            "statistic": summary.wilcoxon.statistic,
            "p_value": summary.wilcoxon.p_value,
            "n_used": summary.wilcoxon.n_used,
            "method": summary.wilcoxon.method,
        }
    _write_json(
        out / "fig_dice_by_timepoint.json",
        {
            "figure": "dice_by_timepoint",
            "metadata": block,
            "dice_correct": summary.dice_by_timepoint,
            "paired": {
                "keys": [p.key for p in summary.paired],
                "baseline": [p.baseline_value for p in summary.paired],
                "followup": [p.followup_value for p in summary.paired],
            },
            "excluded_pairs": summary.excluded_pairs,
            "wilcoxon": wil,
            "wilcoxon_degenerate": summary.wilcoxon_degenerate,
        },
    )

    for tp in ("baseline", "followup"):
        counts = summary.outcome_counts[tp]
        n = sum(counts.values())
        _write_json(
            out / f"fig_outcomes_{tp}.json",
            {
                "figure": "outcome_proportions",
                "metadata": block,
                "timepoint": tp,
                "n": n,
                "counts": {o: counts[o] for o in OUTCOMES},
                "proportions": {o: (counts[o] / n if n else 0.0) for o in OUTCOMES},
            },
        )

    _write_json(
        out / "run_metadata.json",
        {
            **asdict(md),
            "experiment": "longitudinal_eval",
            "n_records": len(summary.records),
            "case_failures": [{"case_id": f.case_id, "detail": f.detail} for f in summary.case_failures],
            "excluded_pairs": summary.excluded_pairs,
        },
    )
    return out


def write_sweep_outputs(cfg: ExperimentConfig, summary: SweepSummary, out_dir=None) -> Path:
    """Write the displacement-sweep artifact set; returns the directory."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    md = build_run_metadata(cfg)
    block = md.deterministic_block()

    write_outcomes_csv(summary.records, out / "outcomes.csv")

    eps = summary.epsilon_mm
    points = [
        {"case_id": r.case_id, "lesion_id": r.lesion_id, "epsilon_mm": r.epsilon_mm, "dice": r.dice}
        for r in summary.records
        if r.outcome == "Correct"
    ]
    _write_json(
        out / "fig_sweep_dice.json",
        {
            "figure": "sweep_dice_vs_displacement",
            "metadata": block,
            "epsilon_mm": eps,
            "mean_dice": [summary.mean_dice_by_eps[e] for e in eps],
            "points": points,
        },
    )

    rows_counts = []
    rows_props = []
    n_per_eps = []
    for e in eps:
        counts = summary.outcome_counts_by_eps[e]
        n = sum(counts.values())
        n_per_eps.append(n)
        rows_counts.append({o: counts[o] for o in OUTCOMES})
        rows_props.append({o: (counts[o] / n if n else 0.0) for o in OUTCOMES})
    _write_json(
        out / "fig_sweep_outcomes.json",
        {
            "figure": "sweep_outcomes_vs_displacement",
            "metadata": block,
            "epsilon_mm": eps,
            "n_per_epsilon": n_per_eps,
            "counts": rows_counts,
            "proportions": rows_props,
        },
    )

    _write_json(
        out / "run_metadata.json",
        {
            **asdict(md),
            "experiment": "displacement_sweep",
            "n_records": len(summary.records),
            "selected_lesions": [
                {"case_id": c, "lesion_id": l, "rank_dice": d} for c, l, d in summary.selected
            ],
            "degenerate_direction_fallbacks": summary.degenerate_direction_fallbacks,
            "case_failures": [{"case_id": f.case_id, "detail": f.detail} for f in summary.case_failures],
        },
    )
    return out


def _write_json(path, payload) -> None:
    try:
        text = json.dumps(_plain(payload), sort_keys=True, indent=2)
        Path(path).write_text(text + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"could not write {path}: {exc}") from exc


def _plain(obj):
    """Recursively convert numpy scalars/arrays so json sees builtin types."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj
