"""Command-line front end: ``lesionadapter --config adapter.toml``.

The config is a TOML (or JSON) file with one ``[adapter]`` table mirroring
AdapterConfig. Exit codes: 0 batch completed (failures are reported in the
inference manifest, not the exit code), 2 config problem, 3 setup problem.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .adapter import STATUS_OK, AdapterConfig, AdapterError, run_inference_batch

ALLOWED_KEYS = {"manifest_path", "data_root", "model_invocation", "output_dir", "timepoints", "max_parallel"}


class ConfigError(Exception):
    pass


def load_config(path) -> AdapterConfig:
    p = Path(path)
    try:
        blob = p.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        if p.suffix.lower() == ".toml":
            raw = tomllib.loads(blob.decode("utf-8"))
        elif p.suffix.lower() == ".json":
            raw = json.loads(blob.decode("utf-8"))
        else:
            raise ConfigError(f"config must be .toml or .json, got {p.suffix!r}")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config {p}: {exc}") from exc

    table = raw.get("adapter")
    if not isinstance(table, dict):
        raise ConfigError("config needs an [adapter] table")
    unknown = set(table) - ALLOWED_KEYS
    if unknown:
        raise ConfigError(f"unknown keys in [adapter]: {sorted(unknown)}")
    for key in ("manifest_path", "model_invocation", "output_dir"):
        if key not in table:
            raise ConfigError(f"[adapter].{key} is required")

    base = p.resolve().parent

    def _resolve(value) -> str:
        q = Path(str(value))
        return str(q if q.is_absolute() else base / q)

    kwargs = {
        "manifest_path": _resolve(table["manifest_path"]),
        "model_invocation": str(table["model_invocation"]),
        "output_dir": _resolve(table["output_dir"]),
    }
    if "data_root" in table:
        kwargs["data_root"] = _resolve(table["data_root"])
    if "timepoints" in table:
        tps = table["timepoints"]
        if not isinstance(tps, list) or not all(isinstance(t, str) for t in tps):
            raise ConfigError("[adapter].timepoints must be a list of strings")
        kwargs["timepoints"] = tuple(tps)
    if "max_parallel" in table:
        mp = table["max_parallel"]
        if isinstance(mp, bool) or not isinstance(mp, int):
            raise ConfigError(f"[adapter].max_parallel must be an integer, got {mp!r}")
        kwargs["max_parallel"] = mp
    try:
        return AdapterConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="lesionadapter", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="TOML/JSON adapter config")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        result = run_inference_batch(cfg)
    except AdapterError as exc:
        print(f"setup error: {exc}", file=sys.stderr)
        return 3
    ok = sum(1 for e in result.entries if e.status == STATUS_OK)
    print(f"stored {ok}/{len(result.entries)} predictions under {result.store_dir}")
    for failure in result.failures:
        print(f"  {failure.case_id}/{failure.timepoint}: {failure.status} ({failure.detail})", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
