import sys
from pathlib import Path

import numpy as np
import pytest

# make tests/oracles.py importable regardless of invocation directory
sys.path.insert(0, str(Path(__file__).parent))

from lesiontrack.volume import Kind, VolumeGrid


def as_mask(arr, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)) -> VolumeGrid:
    return VolumeGrid(data=np.asarray(arr, dtype=np.uint8), spacing=spacing, origin=origin, kind=Kind.MASK)


def as_labels(arr, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)) -> VolumeGrid:
    return VolumeGrid(data=np.asarray(arr, dtype=np.int32), spacing=spacing, origin=origin, kind=Kind.LABELS)


def as_intensity(arr, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)) -> VolumeGrid:
    return VolumeGrid(
        data=np.asarray(arr, dtype=np.float32), spacing=spacing, origin=origin, kind=Kind.INTENSITY
    )


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """A tiny but complete on-disk phantom dataset shared across tests."""
    from lesiontrack.phantom import PhantomConfig, generate_dataset

    root = tmp_path_factory.mktemp("dataset")
    cfg = PhantomConfig(seed=123, lesion_count_range=(2, 3), min_separation_mm=34.0)
    manifest = generate_dataset(cfg, 4, root / "data")
    return {"config": cfg, "manifest": manifest, "root": root / "data"}
