import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lesiontrack.errors import InvalidMaskError
from lesiontrack.volume import Kind, VolumeGrid

from conftest import as_intensity, as_labels, as_mask


def test_masks_accept_only_zero_one():
    as_mask(np.zeros((2, 2, 2)))
    with pytest.raises(InvalidMaskError):
        as_mask(np.full((2, 2, 2), 2))


def test_mask_data_is_uint8():
    v = as_mask(np.ones((2, 2, 2), dtype=np.int64))
    assert v.data.dtype == np.uint8


def test_labels_reject_negative_values():
    with pytest.raises(InvalidMaskError):
        as_labels(np.full((2, 2, 2), -1))


def test_data_is_read_only():
    v = as_intensity(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        v.data[0, 0, 0] = 1.0


def test_voxel_to_world_uses_origin_and_spacing():
    v = as_intensity(np.zeros((4, 4, 4)), spacing=(1.0, 2.0, 3.0), origin=(10.0, 20.0, 30.0))
    assert np.allclose(v.voxel_to_world((0, 0, 0)), (10.0, 20.0, 30.0))
    assert np.allclose(v.voxel_to_world((1, 1, 1)), (11.0, 22.0, 33.0))


def test_world_to_voxel_rounds_half_away_from_zero():
    v = as_intensity(np.zeros((10, 10, 10)))
    assert v.world_to_voxel_nearest((2.5, 2.4, 2.6)) == (3, 2, 3)
    w = as_intensity(np.zeros((4, 4, 4)), origin=(-5.0, -5.0, -5.0))
    # world -2.5 is voxel offset 2.5 from origin -5 -> rounds to 3
    assert w.world_to_voxel_nearest((-2.5, -2.5, -2.5)) == (3, 3, 3)


@given(
    st.tuples(st.integers(0, 7), st.integers(0, 7), st.integers(0, 7)),
    st.tuples(
        st.floats(0.25, 5.0, allow_nan=False),
        st.floats(0.25, 5.0, allow_nan=False),
        st.floats(0.25, 5.0, allow_nan=False),
    ),
    st.tuples(
        st.floats(-100, 100, allow_nan=False),
        st.floats(-100, 100, allow_nan=False),
        st.floats(-100, 100, allow_nan=False),
    ),
)
def test_world_voxel_round_trip(idx, spacing, origin):
    v = VolumeGrid(
        data=np.zeros((8, 8, 8), dtype=np.float32), spacing=spacing, origin=origin, kind=Kind.INTENSITY
    )
    assert v.world_to_voxel_nearest(v.voxel_to_world(idx)) == idx


def test_contains_index():
    v = as_intensity(np.zeros((3, 4, 5)))
    assert v.contains_index((0, 0, 0))
    assert v.contains_index((2, 3, 4))
    assert not v.contains_index((3, 0, 0))
    assert not v.contains_index((0, -1, 0))


def test_center_world_is_geometric_center_of_voxel_box():
    v = as_intensity(np.zeros((5, 5, 5)), spacing=(2.0, 2.0, 2.0), origin=(0.0, 0.0, 0.0))
    # box spans voxel centres 0..8 mm per axis -> centre at 4
    assert np.allclose(v.center_world(), (4.0, 4.0, 4.0))


def test_same_grid_tolerance():
    a = as_intensity(np.zeros((2, 2, 2)), spacing=(1.0, 1.0, 1.0))
    b = as_intensity(np.zeros((2, 2, 2)), spacing=(1.0 + 1e-7, 1.0, 1.0))
    c = as_intensity(np.zeros((2, 2, 2)), spacing=(1.5, 1.0, 1.0))
    assert a.same_grid_as(b)
    assert not a.same_grid_as(c)


def test_with_data_keeps_geometry():
    a = as_intensity(np.zeros((2, 2, 2)), spacing=(1.0, 2.0, 3.0), origin=(4.0, 5.0, 6.0))
    b = a.with_data(np.ones((2, 2, 2), dtype=np.uint8), kind=Kind.MASK)
    assert b.spacing == a.spacing and b.origin == a.origin and b.kind is Kind.MASK
