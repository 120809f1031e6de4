"""Batch model inference over a longitudinal case manifest.

For every (case, timepoint) pair the configured command template is run on
the timepoint's CT; the produced mask is validated (readable, dims and
spacing equal to the CT, values binary) and, if sound, moved into the
prediction store as ``<case_id>_<timepoint>.nii.gz``. Every pair gets an
entry in ``inference_manifest.json``; failures never reach the store and
never abort the batch. Input volumes are only ever read.
"""

from __future__ import annotations

import json
import shlex
import shutil
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .nifti_lite import NiftiLiteError, load_flat, read_header

MANIFEST_NAME = "inference_manifest.json"
SPACING_TOL_MM = 1e-3

STATUS_OK = "ok"
STATUS_MISSING_INPUT = "MissingInput"
STATUS_PROCESS_FAILURE = "ModelProcessFailure"
STATUS_MISSING_OUTPUT = "MissingOutput"
STATUS_UNREADABLE = "UnreadableOutput"
STATUS_SHAPE_MISMATCH = "ShapeMismatch"
STATUS_NON_BINARY = "NonBinaryOutput"


class AdapterError(Exception):
    """The batch could not be set up at all (unusable manifest or paths)."""


@dataclass(frozen=True)
class AdapterConfig:
    manifest_path: str
    model_invocation: str  # command template with {input} and {output}
    output_dir: str
    data_root: str | None = None  # default: directory containing the manifest
    timepoints: tuple[str, ...] = ("baseline", "followup")
    max_parallel: int = 1

    def __post_init__(self):
        for placeholder in ("{input}", "{output}"):
            if placeholder not in self.model_invocation:
                raise ValueError(f"model_invocation must contain {placeholder}")
        if not self.timepoints:
            raise ValueError("timepoints must not be empty")
        if self.max_parallel < 1:
            raise ValueError(f"max_parallel must be >= 1, got {self.max_parallel}")

    @property
    def resolved_data_root(self) -> Path:
        if self.data_root is not None:
            return Path(self.data_root)
        return Path(self.manifest_path).resolve().parent


@dataclass(frozen=True)
class InferenceEntry:
    case_id: str
    timepoint: str
    status: str
    detail: str = ""


@dataclass(frozen=True)
class BatchResult:
    store_dir: Path
    entries: tuple[InferenceEntry, ...] = field(default_factory=tuple)

    @property
    def failures(self) -> tuple[InferenceEntry, ...]:
        return tuple(e for e in self.entries if e.status != STATUS_OK)


def case_ids_from_manifest(path) -> list[str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            rows = json.load(fh)
    except OSError as exc:
        raise AdapterError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise AdapterError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(rows, list):
        raise AdapterError(f"manifest {path} must be a JSON list of lesion rows")
    ids = []
    for i, row in enumerate(rows):
        if not isinstance(row, dict) or "case_id" not in row:
            raise AdapterError(f"manifest {path}: row {i} has no case_id")
        ids.append(str(row["case_id"]))
    return sorted(set(ids))


def run_inference_batch(cfg: AdapterConfig) -> BatchResult:
    cases = case_ids_from_manifest(cfg.manifest_path)
    if not cases:
        raise AdapterError(f"manifest {cfg.manifest_path} lists no cases")
    data_root = cfg.resolved_data_root
    store = Path(cfg.output_dir)
    store.mkdir(parents=True, exist_ok=True)
    staging = store / "_staging"
    staging.mkdir(exist_ok=True)

    jobs = [(case, tp) for case in cases for tp in cfg.timepoints]
    try:
        if cfg.max_parallel == 1:
            entries = [_run_one(cfg, data_root, store, staging, case, tp) for case, tp in jobs]
        else:
            with ThreadPoolExecutor(max_workers=cfg.max_parallel) as pool:
                entries = list(pool.map(lambda j: _run_one(cfg, data_root, store, staging, *j), jobs))
    finally:
        shutil.rmtree(staging, ignore_errors=True)

    order = {tp: i for i, tp in enumerate(cfg.timepoints)}
    entries.sort(key=lambda e: (e.case_id, order[e.timepoint]))
    manifest_path = store / MANIFEST_NAME
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump([asdict(e) for e in entries], fh, indent=2, sort_keys=True)
        fh.write("\n")
    return BatchResult(store_dir=store, entries=tuple(entries))


def _run_one(cfg: AdapterConfig, data_root: Path, store: Path, staging: Path, case_id: str, timepoint: str) -> InferenceEntry:
    def entry(status, detail=""):
        return InferenceEntry(case_id=case_id, timepoint=timepoint, status=status, detail=detail)

    ct_path = data_root / case_id / f"{timepoint}_ct.nii.gz"
    if not ct_path.is_file():
        return entry(STATUS_MISSING_INPUT, f"no CT at {ct_path}")
    try:
        ct_info = read_header(ct_path)
    except (NiftiLiteError, OSError) as exc:
        return entry(STATUS_MISSING_INPUT, f"CT unreadable: {exc}")

    staged = staging / f"{case_id}_{timepoint}.nii.gz"
    command = shlex.split(cfg.model_invocation.format(input=str(ct_path), output=str(staged)))
    try:
        proc = subprocess.run(command, capture_output=True, text=True)
    except OSError as exc:
        return entry(STATUS_PROCESS_FAILURE, f"could not launch model: {exc}")
    if proc.returncode != 0:
        tail = proc.stderr.strip().splitlines()[-1:] or proc.stdout.strip().splitlines()[-1:]
        return entry(STATUS_PROCESS_FAILURE, f"exit {proc.returncode}" + (f": {tail[0]}" if tail else ""))
    if not staged.is_file():
        return entry(STATUS_MISSING_OUTPUT, f"model did not write {staged.name}")

    try:
        info, values = load_flat(staged)
    except (NiftiLiteError, OSError) as exc:
        return entry(STATUS_UNREADABLE, str(exc))
    if info.dims != ct_info.dims:
        return entry(STATUS_SHAPE_MISMATCH, f"dims {info.dims} != CT dims {ct_info.dims}")
    if any(abs(a - b) > SPACING_TOL_MM for a, b in zip(info.spacing, ct_info.spacing)):
        return entry(STATUS_SHAPE_MISMATCH, f"spacing {info.spacing} != CT spacing {ct_info.spacing}")
    # slope 0 means "no scaling" by convention; anything else must be identity
    if (info.scl_slope not in (0.0, 1.0)) or info.scl_inter != 0.0:
        return entry(STATUS_NON_BINARY, f"intensity scaling {info.scl_slope}/{info.scl_inter} on a mask")
    bad = values[(values != 0) & (values != 1)]
    if bad.size:
        return entry(STATUS_NON_BINARY, f"{bad.size} voxels outside {{0, 1}}, e.g. {bad[0]}")

    final = store / staged.name
    staged.replace(final)
    return entry(STATUS_OK, f"{int(np.count_nonzero(values))} foreground voxels")
