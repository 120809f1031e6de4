"""Config file loading (TOML or JSON) into the run dataclasses.

Unknown keys are rejected rather than ignored so typos fail loudly; every
validation problem is surfaced as :class:`ConfigError` with the offending
key in the message.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .experiments import ExperimentConfig, SegmenterSpec
from .phantom import DEFAULT_TRANSITION_MIX, PhantomConfig, RegErrorModel
from .segmenters import CenterBiasParams
from .voi import VoiSpec


def load_raw_config(path) -> dict:
    p = Path(path)
    try:
        blob = p.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    suffix = p.suffix.lower()
    try:
        if suffix == ".toml":
            return tomllib.loads(blob.decode("utf-8"))
        if suffix == ".json":
            return json.loads(blob.decode("utf-8"))
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config {p}: {exc}") from exc
    raise ConfigError(f"config must be .toml or .json, got {p.suffix!r}")


def phantom_run_from_file(path, *, seed_override: int | None = None) -> tuple[PhantomConfig, int]:
    """Parse a generator config; returns (PhantomConfig, n_cases)."""
    raw = load_raw_config(path)
    _expect_keys(raw, {"phantom", "dataset"}, where="top level")
    ph = dict(raw.get("phantom", {}))
    ds = dict(raw.get("dataset", {}))

    _expect_keys(ds, {"n_cases"}, where="[dataset]")
    n_cases = ds.get("n_cases")
    if not isinstance(n_cases, int) or n_cases < 1:
        raise ConfigError(f"[dataset].n_cases must be a positive integer, got {n_cases!r}")

    allowed = {
        "volume_dims",
        "spacing",
        "lesion_count_range",
        "lesion_radii_range_mm",
        "transition_mix",
        "reg_error",
        "missing_propagation_fraction",
        "min_separation_mm",
        "background_hu",
        "lesion_hu_range",
        "seed",
    }
    _expect_keys(ph, allowed, where="[phantom]")

    kwargs = {}
    for key in ("volume_dims",):
        if key in ph:
            kwargs[key] = _int_triple(ph[key], key)
    for key in ("spacing", "background_hu", "lesion_hu_range"):
        if key in ph:
            kwargs[key] = _float_tuple(ph[key], key, 3 if key == "spacing" else 2)
    for key in ("lesion_count_range",):
        if key in ph:
            pair = _float_tuple(ph[key], key, 2)
            kwargs[key] = (int(pair[0]), int(pair[1]))
    for key in ("lesion_radii_range_mm",):
        if key in ph:
            kwargs[key] = _float_tuple(ph[key], key, 2)
    for key in ("missing_propagation_fraction", "min_separation_mm"):
        if key in ph:
            kwargs[key] = _real(ph[key], key)
    if "seed" in ph:
        kwargs["seed"] = _int(ph["seed"], "seed")
    if "transition_mix" in ph:
        mix = ph["transition_mix"]
        if not isinstance(mix, dict):
            raise ConfigError("[phantom].transition_mix must be a table of transition -> weight")
        full = {k: 0.0 for k in DEFAULT_TRANSITION_MIX}
        _expect_keys(mix, set(full), where="[phantom.transition_mix]")
        full.update({k: _real(v, f"transition_mix.{k}") for k, v in mix.items()})
        kwargs["transition_mix"] = full
    if "reg_error" in ph:
        re_tbl = ph["reg_error"]
        _expect_keys(re_tbl, {"prob_inlier", "inlier_sigma_mm", "tail_scale_mm"}, where="[phantom.reg_error]")
        kwargs["reg_error"] = _build(RegErrorModel, {k: _real(v, k) for k, v in re_tbl.items()})
    if seed_override is not None:
        kwargs["seed"] = int(seed_override)

    return _build(PhantomConfig, kwargs), n_cases


def experiment_config_from_file(
    path, *, seed_override: int | None = None, workers_override: int | None = None
) -> ExperimentConfig:
    raw = load_raw_config(path)
    _expect_keys(raw, {"experiment"}, where="top level")
    exp = dict(raw.get("experiment", {}))
    allowed = {
        "manifest_path",
        "data_root",
        "output_dir",
        "connectivity",
        "magnitudes_mm",
        "top_k",
        "rank_timepoint",
        "seed",
        "workers",
        "voi",
        "segmenter",
    }
    _expect_keys(exp, allowed, where="[experiment]")
    for key in ("manifest_path", "output_dir"):
        if key not in exp:
            raise ConfigError(f"[experiment].{key} is required")

    base = Path(path).resolve().parent

    def _resolve(p) -> str:
        q = Path(str(p))
        return str(q if q.is_absolute() else base / q)

    kwargs: dict = {
        "manifest_path": _resolve(exp["manifest_path"]),
        "output_dir": _resolve(exp["output_dir"]),
    }
    if "data_root" in exp:
        kwargs["data_root"] = _resolve(exp["data_root"])
    if "connectivity" in exp:
        kwargs["connectivity"] = _int(exp["connectivity"], "connectivity")
    if "magnitudes_mm" in exp:
        mags = exp["magnitudes_mm"]
        if not isinstance(mags, list) or not mags:
            raise ConfigError("[experiment].magnitudes_mm must be a non-empty list")
        kwargs["magnitudes_mm"] = tuple(_real(m, "magnitudes_mm") for m in mags)
    if "top_k" in exp:
        kwargs["top_k"] = _int(exp["top_k"], "top_k")
    if "rank_timepoint" in exp:
        kwargs["rank_timepoint"] = str(exp["rank_timepoint"])
    seed = _int(exp.get("seed", 0), "seed")
    if seed_override is not None:
        seed = int(seed_override)
    kwargs["seed"] = seed
    if "workers" in exp:
        kwargs["workers"] = _int(exp["workers"], "workers")
    if workers_override is not None:
        kwargs["workers"] = int(workers_override)

    if "voi" in exp:
        voi_tbl = exp["voi"]
        _expect_keys(voi_tbl, {"shape", "pad_value"}, where="[experiment.voi]")
        voi_kwargs = {}
        if "shape" in voi_tbl:
            voi_kwargs["shape"] = _int_triple(voi_tbl["shape"], "voi.shape")
        if "pad_value" in voi_tbl:
            voi_kwargs["pad_value"] = _real(voi_tbl["pad_value"], "voi.pad_value")
        kwargs["voi"] = _build(VoiSpec, voi_kwargs)

    seg_tbl = dict(exp.get("segmenter", {}))
    kind = str(seg_tbl.pop("kind", "synthetic"))
    if kind == "synthetic":
        allowed_seg = {
            "detect_radius_mm",
            "transition_band_mm",
            "detect_floor_prob",
            "boundary_noise_mm",
            "hallucination_prob",
            "seed",
        }
        _expect_keys(seg_tbl, allowed_seg, where="[experiment.segmenter]")
        params_kwargs = {k: _real(v, k) for k, v in seg_tbl.items() if k != "seed"}
        # the segmenter follows the experiment seed unless pinned separately
        params_kwargs["seed"] = _int(seg_tbl["seed"], "segmenter.seed") if "seed" in seg_tbl else seed
        spec = SegmenterSpec(kind="synthetic", params=_build(CenterBiasParams, params_kwargs))
    elif kind == "external":
        _expect_keys(seg_tbl, {"prediction_dir"}, where="[experiment.segmenter]")
        if "prediction_dir" not in seg_tbl:
            raise ConfigError("[experiment.segmenter].prediction_dir is required for kind external")
        spec = SegmenterSpec(kind="external", prediction_dir=_resolve(seg_tbl["prediction_dir"]))
    else:
        raise ConfigError(f"[experiment.segmenter].kind must be synthetic or external, got {kind!r}")
    kwargs["segmenter"] = spec

    return _build(ExperimentConfig, kwargs)


def _build(cls, kwargs):
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _expect_keys(table, allowed: set, *, where: str) -> None:
    if not isinstance(table, dict):
        raise ConfigError(f"{where} must be a table")
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _real(v, key) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    return float(v)


def _int(v, key) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    return v


def _int_triple(v, key) -> tuple[int, int, int]:
    if not isinstance(v, list) or len(v) != 3 or not all(isinstance(x, int) for x in v):
        raise ConfigError(f"{key} must be a list of 3 integers, got {v!r}")
    return (v[0], v[1], v[2])


def _float_tuple(v, key, n) -> tuple:
    if not isinstance(v, list) or len(v) != n:
        raise ConfigError(f"{key} must be a list of {n} numbers, got {v!r}")
    return tuple(_real(x, key) for x in v)
