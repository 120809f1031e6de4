"""Shared fixtures: a small real dataset produced by the evaluation
toolkit's CLI, and a prediction store built from it with the identity
model. Everything crosses package boundaries via subprocesses and files
only."""

import csv
import hashlib
import subprocess
import sys
from pathlib import Path

import pytest

from lesionadapter import AdapterConfig, run_inference_batch

TOY = Path(__file__).resolve().parent / "toy_models.py"

PHANTOM_TOML = """
[phantom]
volume_dims = [64, 64, 32]
spacing = [1.0, 1.0, 3.0]
lesion_count_range = [1, 2]
lesion_radii_range_mm = [4.0, 8.0]
min_separation_mm = 25.0
seed = 77

[phantom.transition_mix]
stable = 1.0

[phantom.reg_error]
prob_inlier = 1.0
inlier_sigma_mm = 0.0
tail_scale_mm = 1.0

[dataset]
n_cases = 5
"""

EXPERIMENT_TOML = """
[experiment]
manifest_path = "{manifest}"
output_dir = "{out}"
seed = 0

[experiment.voi]
shape = [48, 48, 24]

[experiment.segmenter]
kind = "external"
prediction_dir = "{store}"
"""


def model_command(mode: str) -> str:
    return f"{sys.executable} {TOY} {mode} {{input}} {{output}}"


def run_cli(*args: str) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "lesiontrack.cli", *args], capture_output=True, text=True
    )


def hash_tree(root: Path) -> dict[str, str]:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@pytest.fixture(scope="session")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("dataset")
    cfg = root / "phantom.toml"
    cfg.write_text(PHANTOM_TOML)
    data = root / "data"
    proc = run_cli("gen-phantom", "--config", str(cfg), "--out", str(data))
    assert proc.returncode == 0, proc.stderr
    manifest = data / "manifest.json"
    assert manifest.is_file()
    return {"data": data, "manifest": manifest, "input_hashes": hash_tree(data)}


@pytest.fixture(scope="session")
def identity_store(dataset, tmp_path_factory):
    store = tmp_path_factory.mktemp("store") / "preds"
    cfg = AdapterConfig(
        manifest_path=str(dataset["manifest"]),
        model_invocation=model_command("identity"),
        output_dir=str(store),
    )
    return run_inference_batch(cfg)


def run_external_eval(dataset, store_dir: Path, out_dir: Path) -> list[dict]:
    cfg_path = out_dir.parent / f"{out_dir.name}.toml"
    cfg_path.write_text(
        EXPERIMENT_TOML.format(manifest=dataset["manifest"], out=out_dir, store=store_dir)
    )
    proc = run_cli("eval", "--config", str(cfg_path))
    assert proc.returncode == 0, proc.stderr
    with open(out_dir / "outcomes.csv", newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
