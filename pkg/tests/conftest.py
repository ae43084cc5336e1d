import numpy as np
import pytest

from brainrg.phantom import make_phantom
from brainrg.volume import AtlasLabelMap, BinaryMask, Volume


@pytest.fixture(scope="session")
def phantom32():
    return make_phantom(32, seed=0)


@pytest.fixture(scope="session")
def phantom16():
    return make_phantom(16, seed=1)


def mask_from(dims, voxels) -> BinaryMask:
    bits = np.zeros(dims, dtype=bool)
    for v in voxels:
        bits[v] = True
    return BinaryMask(bits)


def block_atlas(dims, blocks, names=None) -> AtlasLabelMap:
    """Atlas from {label: (slice_x, slice_y, slice_z)}."""
    labels = np.zeros(dims, dtype=np.uint16)
    for label, sl in blocks.items():
        labels[sl] = label
    names = names or {l: f"structure {l}" for l in blocks}
    return AtlasLabelMap(labels, names)


def constant_volume(dims, value=100.0) -> Volume:
    return Volume(np.full(dims, value, dtype=np.float32))
