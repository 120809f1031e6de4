"""End-to-end acceptance suite.

Each test covers one contract-level requirement and prints a single
``[acceptance] <name>: PASS`` / ``FAIL`` line (visible with ``pytest -s``
or in captured output). The checks pair the production code with the
independent oracles in ``oracles.py``; nothing here shares code with the
implementation under test.
"""

import itertools
import statistics
import time
from contextlib import contextmanager

import numpy as np
import pytest

from lesiontrack.experiments import (
    ExperimentConfig,
    SegmenterSpec,
    run_displacement_sweep,
    run_longitudinal_eval,
)
from lesiontrack.labeling import label_components, overlap_matrix
from lesiontrack.manifest import load_manifest
from lesiontrack.metrics import dice, wilcoxon_from_differences
from lesiontrack.nifti import load_volume, save_volume
from lesiontrack.phantom import PhantomConfig, RegErrorModel, generate_dataset
from lesiontrack.report import write_eval_outputs, write_sweep_outputs
from lesiontrack.segmenters import CenterBiasParams
from lesiontrack.voi import DEFAULT_MAGNITUDES_MM, VoiSpec, displacement_schedule
from lesiontrack.volume import Kind

from conftest import as_mask
from oracles import dice_scan, flood_fill_label, overlap_scan, wilcoxon_enumerate, wilcoxon_enumerate_large


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"[acceptance] {name}: FAIL")
        raise
    print(f"[acceptance] {name}: PASS")


ALL_STABLE = {
    "stable": 1.0, "grow": 0.0, "shrink": 0.0, "resolve": 0.0,
    "new": 0.0, "merge": 0.0, "split": 0.0,
}
NO_REG_ERROR = RegErrorModel(prob_inlier=1.0, inlier_sigma_mm=0.0, tail_scale_mm=1.0)


def test_component_labeling_matches_flood_fill_oracle():
    with criterion("connected components vs flood-fill oracle"):
        rng = np.random.default_rng(42)
        t0 = time.time()
        for connectivity in (6, 18, 26):
            for i in range(100):
                density = (0.15, 0.35, 0.55)[i % 3]
                mask = rng.random((20, 20, 20)) < density
                got = label_components(as_mask(mask), connectivity)
                want = flood_fill_label(mask, connectivity)
                # first-encounter numbering makes label arrays comparable directly
                assert np.array_equal(got.labels.data, want)
                assert got.count == want.max()
        assert time.time() - t0 < 10.0


def test_dice_and_overlap_match_per_voxel_scan():
    with criterion("dice and overlap vs per-voxel scan oracle"):
        rng = np.random.default_rng(43)
        for _ in range(100):
            shape = tuple(rng.integers(6, 14, size=3))
            a = rng.random(shape) < 0.4
            b = rng.random(shape) < 0.4
            ga, gb = as_mask(a), as_mask(b)
            assert dice(ga, gb) == dice_scan(a, b)
            pred = label_components(ga, 26)
            gt = label_components(gb, 26)
            assert overlap_matrix(pred, gt.labels) == overlap_scan(pred.labels.data, gt.labels.data)


def test_signed_rank_p_values_match_enumeration():
    with criterion("signed-rank test vs enumeration oracle"):
        rng = np.random.default_rng(44)
        for n in range(3, 11):
            mags = np.sort(rng.uniform(0.5, 9.5, size=n))
            if n in (6, 8):
                mags[1] = mags[0]  # tied magnitudes exercise midranks
            for signs in itertools.product((1.0, -1.0), repeat=n):
                d = mags * np.asarray(signs)
                got = wilcoxon_from_differences(d)
                w_ref, p_ref = wilcoxon_enumerate(d)
                assert got.method == "exact"
                assert got.statistic == w_ref
                assert abs(got.p_value - p_ref) < 1e-12

        d25 = rng.normal(0.4, 1.0, size=25)
        got = wilcoxon_from_differences(d25)
        w_ref, p_ref = wilcoxon_enumerate_large(d25)
        assert got.method == "normal"
        assert got.statistic == w_ref
        assert abs(got.p_value - p_ref) < 0.01

        # worked example: five positive differences, W- = 0
        small = wilcoxon_from_differences([1.0, 2.0, 3.0, 4.0, 5.0])
        assert small.statistic == 0.0
        assert small.p_value == pytest.approx(0.0625, abs=1e-12)


def test_displacement_schedule_geometry():
    with criterion("displacement schedule geometry"):
        assert DEFAULT_MAGNITUDES_MM == (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0)
        rng = np.random.default_rng(45)
        for _ in range(1000):
            centroid = rng.uniform(-400.0, 400.0, size=3)
            volume_center = rng.uniform(-400.0, 400.0, size=3)
            direction = volume_center - centroid
            direction = direction / np.linalg.norm(direction)
            points = displacement_schedule(centroid, volume_center, DEFAULT_MAGNITUDES_MM)
            assert len(points) == len(DEFAULT_MAGNITUDES_MM)
            for eps, shifted in zip(DEFAULT_MAGNITUDES_MM, points):
                assert abs(np.linalg.norm(shifted - centroid) - eps) < 1e-9
                assert np.allclose(shifted, centroid + eps * direction, atol=1e-9)


def test_sweep_reproduces_center_bias_failure_shape(tmp_path):
    with criterion("displacement sweep qualitative shape"):
        t0 = time.time()
        pcfg = PhantomConfig(
            volume_dims=(96, 96, 96),
            spacing=(1.0, 1.0, 1.0),
            lesion_count_range=(1, 1),
            transition_mix=ALL_STABLE,
            reg_error=NO_REG_ERROR,
            seed=2024,
        )
        manifest = generate_dataset(pcfg, 30, tmp_path / "data")
        cfg = ExperimentConfig(
            manifest_path=str(manifest),
            output_dir=str(tmp_path / "out"),
            segmenter=SegmenterSpec(kind="synthetic", params=CenterBiasParams(seed=7)),
            # large enough that no lesion is ever clipped, even at 50 mm shift
            voi=VoiSpec(shape=(128, 128, 128)),
            top_k=30,
            seed=7,
        )
        base = run_longitudinal_eval(cfg)
        assert len(base.records) >= 2 * 30
        sweep = run_displacement_sweep(cfg, base.records)
        assert len(sweep.selected) == 30

        def correct_fraction(eps):
            counts = sweep.outcome_counts_by_eps[eps]
            return counts["Correct"] / sum(counts.values())

        assert correct_fraction(0.0) == 1.0
        for eps in (0.0, 5.0, 10.0, 15.0):
            assert sweep.mean_dice_by_eps[eps] >= 0.95
        for eps in (30.0, 35.0, 40.0, 45.0, 50.0):
            counts = sweep.outcome_counts_by_eps[eps]
            assert counts["FalseNegative"] == sum(counts.values())
        assert correct_fraction(25.0) < 0.5
        assert time.time() - t0 < 120.0


@pytest.fixture(scope="module")
def cascade_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cascade")
    pcfg = PhantomConfig(
        lesion_count_range=(2, 3),
        min_separation_mm=30.0,
        transition_mix=ALL_STABLE,
        reg_error=RegErrorModel(prob_inlier=0.7, inlier_sigma_mm=3.0, tail_scale_mm=12.0),
        seed=314,
    )
    return generate_dataset(pcfg, 25, root / "data")


def _cascade_config(manifest, out_dir, workers=1):
    return ExperimentConfig(
        manifest_path=str(manifest),
        output_dir=str(out_dir),
        segmenter=SegmenterSpec(kind="synthetic", params=CenterBiasParams(boundary_noise_mm=8.0, seed=11)),
        voi=VoiSpec(shape=(64, 64, 32)),
        top_k=12,
        seed=11,
        workers=workers,
    )


def test_registration_errors_degrade_followup_dice(cascade_dataset, tmp_path):
    with criterion("registration-error cascade direction"):
        tracked = [r for r in load_manifest(cascade_dataset) if r.is_tracked]
        assert len(tracked) >= 50
        summary = run_longitudinal_eval(_cascade_config(cascade_dataset, tmp_path / "out"))
        baseline = summary.dice_by_timepoint["baseline"]
        followup = summary.dice_by_timepoint["followup"]
        assert statistics.mean(followup) < statistics.mean(baseline)
        assert summary.wilcoxon is not None
        assert summary.wilcoxon.p_value < 0.05


def test_outputs_identical_across_worker_counts(cascade_dataset, tmp_path):
    with criterion("byte-identical outputs across worker counts"):
        results = {}
        for workers in (1, 3):
            out = tmp_path / f"w{workers}"
            cfg = _cascade_config(cascade_dataset, out, workers=workers)
            evaluation = run_longitudinal_eval(cfg)
            write_eval_outputs(cfg, evaluation)
            sweep = run_displacement_sweep(cfg, evaluation.records)
            sweep_out = out / "sweep"
            sweep_cfg = _cascade_config(cascade_dataset, sweep_out, workers=workers)
            write_sweep_outputs(sweep_cfg, sweep)
            blobs = {}
            for part, d in (("eval", out), ("sweep", sweep_out)):
                for p in sorted(d.glob("*")):
                    if p.name == "run_metadata.json" or p.is_dir():
                        continue  # metadata carries a wall-clock timestamp
                    blobs[f"{part}/{p.name}"] = p.read_bytes()
            results[workers] = blobs
        assert set(results[1]) == set(results[3])
        assert any(name.endswith("outcomes.csv") for name in results[1])
        assert any(name.startswith("sweep/fig_") for name in results[1])
        for name in results[1]:
            assert results[1][name] == results[3][name], f"{name} differs between worker counts"


def test_volume_round_trip_preserves_masks(tmp_path):
    with criterion("volume save/load round trip"):
        rng = np.random.default_rng(46)
        spacings = [(1.0, 1.0, 3.0), (0.7, 0.9, 2.5), (1.0, 1.0, 1.0), (2.0, 2.0, 2.0)]
        for i in range(50):
            shape = tuple(rng.integers(5, 33, size=3))
            spacing = spacings[i % len(spacings)]
            origin = tuple(rng.uniform(-100.0, 100.0, size=3))
            mask = as_mask(rng.random(shape) < 0.3, spacing=spacing, origin=origin)
            path = tmp_path / f"m{i}.nii.gz"
            save_volume(mask, path)
            back = load_volume(path, kind=Kind.MASK)
            assert np.array_equal(back.data, mask.data)
            assert back.data.dtype == mask.data.dtype
            assert np.allclose(back.spacing, spacing, atol=1e-5)
            assert np.allclose(back.origin, origin, atol=1e-4)
            assert back.kind is Kind.MASK
