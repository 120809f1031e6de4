import numpy as np
import pytest

from lesiontrack.errors import PlacementError
from lesiontrack.labeling import instance_centroids, label_components
from lesiontrack.manifest import load_manifest
from lesiontrack.nifti import load_volume
from lesiontrack.phantom import (
    DEFAULT_TRANSITION_MIX,
    PhantomConfig,
    RegErrorModel,
    generate_case,
    generate_dataset,
    sample_error_magnitude,
)
from lesiontrack.volume import Kind, VolumeGrid

from oracles import mixture_cdf


def _only(transition, **kw):
    mix = {k: 0.0 for k in DEFAULT_TRANSITION_MIX}
    mix[transition] = 1.0
    return PhantomConfig(transition_mix=mix, **kw)


def test_case_generation_is_deterministic():
    cfg = PhantomConfig(seed=5)
    a = generate_case(cfg, "case_0000")
    b = generate_case(cfg, "case_0000")
    assert np.array_equal(a.baseline_ct.data, b.baseline_ct.data)
    assert np.array_equal(a.followup_instances.data, b.followup_instances.data)
    assert a.records == b.records
    c = generate_case(cfg, "case_0001")
    assert not np.array_equal(a.baseline_ct.data, c.baseline_ct.data)


def test_stable_lesions_unchanged_across_timepoints():
    cfg = _only("stable", seed=1, lesion_count_range=(2, 2), min_separation_mm=30.0)
    b = generate_case(cfg, "c")
    assert np.array_equal(b.baseline_instances.data, b.followup_instances.data)
    for r in b.records:
        assert r.baseline_centroid_mm == r.followup_centroid_mm


def test_resolved_lesions_vanish_but_keep_propagation():
    cfg = _only("resolve", seed=2, lesion_count_range=(2, 2), min_separation_mm=30.0)
    b = generate_case(cfg, "c")
    assert b.followup_instances.data.sum() == 0
    for r in b.records:
        assert r.followup_centroid_mm is None
        assert r.propagated_centroid_mm is not None  # propagation of a resolved lesion still exists


def test_new_lesions_absent_at_baseline():
    cfg = _only("new", seed=3, lesion_count_range=(2, 2), min_separation_mm=30.0)
    b = generate_case(cfg, "c")
    assert b.baseline_instances.data.sum() == 0
    assert b.followup_instances.data.sum() > 0
    for r in b.records:
        assert r.baseline_centroid_mm is None and not r.is_tracked


def test_grow_and_shrink_change_volume_in_the_right_direction():
    for transition, cmp in (("grow", np.greater), ("shrink", np.less)):
        cfg = _only(transition, seed=4, lesion_count_range=(1, 1))
        b = generate_case(cfg, "c")
        vb = int((b.baseline_instances.data == 1).sum())
        vf = int((b.followup_instances.data == 1).sum())
        assert cmp(vf, vb), (transition, vb, vf)


def test_merge_partners_united_under_survivor_id():
    cfg = _only("merge", seed=6, lesion_count_range=(2, 2), volume_dims=(120, 120, 60))
    b = generate_case(cfg, "c")
    base_ids = set(np.unique(b.baseline_instances.data)) - {0}
    follow_ids = set(np.unique(b.followup_instances.data)) - {0}
    assert base_ids == {1, 2}
    assert len(follow_ids) == 1 and follow_ids <= base_ids
    merged_mask = VolumeGrid(
        data=(b.followup_instances.data > 0).astype(np.uint8),
        spacing=cfg.spacing,
        origin=(0, 0, 0),
        kind=Kind.MASK,
    )
    assert label_components(merged_mask, 26).count == 1
    # both rows agree on the merged centroid
    cents = {r.lesion_id: r.followup_centroid_mm for r in b.records}
    assert cents[1] == cents[2]


def test_split_produces_two_components_larger_keeps_id():
    cfg = _only("split", seed=7, lesion_count_range=(1, 1), volume_dims=(120, 120, 60))
    b = generate_case(cfg, "c")
    fi = b.followup_instances.data
    assert set(np.unique(fi)) == {0, 1, 2}
    assert (fi == 1).sum() > (fi == 2).sum()
    child = [r for r in b.records if r.parent_lesion_id is not None]
    assert len(child) == 1
    assert child[0].parent_lesion_id == 1
    assert not child[0].is_tracked


def test_manifest_centroids_match_painted_masks():
    cfg = PhantomConfig(seed=8, lesion_count_range=(2, 3), min_separation_mm=34.0)
    b = generate_case(cfg, "c")
    base = instance_centroids(b.baseline_instances.data, cfg.spacing)
    follow = instance_centroids(b.followup_instances.data, cfg.spacing)
    for r in b.records:
        if r.baseline_centroid_mm is not None:
            assert np.allclose(r.baseline_centroid_mm, base[r.lesion_id])
        if r.followup_centroid_mm is not None and r.transition != "merge":
            assert np.allclose(r.followup_centroid_mm, follow[r.lesion_id])


def test_lesion_separation_honored_at_baseline():
    cfg = PhantomConfig(seed=9, lesion_count_range=(3, 3), min_separation_mm=34.0)
    b = generate_case(cfg, "c")
    pts = [r.baseline_centroid_mm for r in b.records if r.baseline_centroid_mm is not None and r.transition != "merge"]
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            assert np.linalg.norm(np.subtract(pts[i], pts[j])) > 20.0  # painted centroids stay well apart


def test_propagated_equals_truth_plus_error_magnitude_zero():
    cfg = PhantomConfig(
        seed=10,
        reg_error=RegErrorModel(prob_inlier=1.0, inlier_sigma_mm=0.0, tail_scale_mm=1.0),
        lesion_count_range=(2, 2),
        min_separation_mm=30.0,
        transition_mix={**{k: 0.0 for k in DEFAULT_TRANSITION_MIX}, "stable": 1.0},
    )
    b = generate_case(cfg, "c")
    for r in b.records:
        assert np.allclose(r.propagated_centroid_mm, r.followup_centroid_mm, atol=1e-9)


def test_missing_propagation_fraction_one_drops_all_with_followup():
    cfg = _only("stable", seed=11, lesion_count_range=(2, 2), min_separation_mm=30.0, missing_propagation_fraction=1.0)
    b = generate_case(cfg, "c")
    for r in b.records:
        assert r.propagated_centroid_mm is None


def test_error_magnitudes_follow_the_mixture():
    model = RegErrorModel(prob_inlier=0.7, inlier_sigma_mm=3.0, tail_scale_mm=12.0)
    rng = np.random.default_rng(12)
    samples = np.array([sample_error_magnitude(rng, model) for _ in range(4000)])
    assert np.all(samples >= 0)
    for x in (1.0, 3.0, 6.0, 10.0, 20.0, 40.0):
        want = mixture_cdf(x, 0.7, 3.0, 12.0)
        got = float(np.mean(samples <= x))
        assert got == pytest.approx(want, abs=0.03), x
    # long tail: mass beyond 10 mm clearly present
    assert float(np.mean(samples > 10.0)) > 0.05


def test_ct_contrast_between_lesion_and_background():
    cfg = _only("stable", seed=13, lesion_count_range=(1, 1))
    b = generate_case(cfg, "c")
    inside = b.baseline_ct.data[b.baseline_instances.data == 1]
    outside = b.baseline_ct.data[b.baseline_instances.data == 0]
    assert inside.mean() > 35.0
    assert outside.mean() < 0.0


def test_impossible_placement_raises():
    cfg = PhantomConfig(volume_dims=(20, 20, 10), lesion_count_range=(3, 3), min_separation_mm=100.0)
    with pytest.raises(PlacementError):
        generate_case(cfg, "c")


def test_generate_dataset_layout(tmp_path):
    cfg = PhantomConfig(seed=14, lesion_count_range=(2, 2), min_separation_mm=30.0)
    manifest_path = generate_dataset(cfg, 2, tmp_path / "data")
    assert manifest_path == tmp_path / "data" / "manifest.json"
    records = load_manifest(manifest_path)
    assert {r.case_id for r in records} == {"case_0000", "case_0001"}
    for case in ("case_0000", "case_0001"):
        for name in ("baseline_ct", "baseline_instances", "followup_ct", "followup_instances"):
            v = load_volume(tmp_path / "data" / case / f"{name}.nii.gz")
            assert v.dims == cfg.volume_dims
    with pytest.raises(FileExistsError):
        generate_dataset(cfg, 1, tmp_path / "data")


def test_config_validation():
    with pytest.raises(ValueError):
        PhantomConfig(transition_mix={"stable": 0.5})  # does not sum to 1
    with pytest.raises(ValueError):
        PhantomConfig(lesion_radii_range_mm=(5.0, 4.0))
    with pytest.raises(ValueError):
        RegErrorModel(prob_inlier=1.2)
