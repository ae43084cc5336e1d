import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from brainrg.errors import DimsMismatch, UnknownLabel
from brainrg.volume import (
    AtlasLabelMap,
    BinaryMask,
    FeatureGrid,
    Volume,
    brain_mask,
    check_dims,
    linear_index,
    structure_mask,
    unravel,
)


def test_structure_mask_identity():
    atlas = AtlasLabelMap(np.full((2, 2, 2), 3), {3: "pons"})
    assert structure_mask(atlas, 3) == BinaryMask.full((2, 2, 2))


def test_structure_mask_unknown_label():
    atlas = AtlasLabelMap(np.full((2, 2, 2), 3), {3: "pons"})
    with pytest.raises(UnknownLabel):
        structure_mask(atlas, 7)
    with pytest.raises(UnknownLabel):
        structure_mask(atlas, 0)


def test_structure_mask_octant():
    labels = np.full((4, 4, 4), 2)
    labels[:2, :2, :2] = 1
    atlas = AtlasLabelMap(labels, {1: "a", 2: "b"})
    m = structure_mask(atlas, 1)
    assert m.popcount() == 8
    assert m.bits[:2, :2, :2].all()
    assert not (m.bits & ~(labels == 1)).any()


def test_brain_mask_cases():
    zeros = AtlasLabelMap(np.zeros((3, 3, 3)), {})
    assert not brain_mask(zeros).any()
    full = AtlasLabelMap(np.ones((3, 3, 3)), {1: "x"})
    assert brain_mask(full).popcount() == 27
    half = np.zeros((4, 4, 4), dtype=int)
    half[:, :, 2:] = 5
    atlas = AtlasLabelMap(half, {5: "x"})
    assert brain_mask(atlas).popcount() == sum(1 for v in half.ravel() if v != 0)


@settings(max_examples=50, deadline=None)
@given(arrays(np.uint16, (5, 4, 3), elements=st.integers(0, 4)))
def test_structure_masks_partition_brain(labels):
    atlas = AtlasLabelMap(labels, {i: f"s{i}" for i in range(1, 5)})
    masks = [structure_mask(atlas, l) for l in atlas.present_labels()]
    union = np.zeros(labels.shape, dtype=bool)
    for m in masks:
        assert not (union & m.bits).any()
        union |= m.bits
    assert np.array_equal(union, brain_mask(atlas).bits)


def test_linear_index_is_x_fastest():
    dims = (3, 4, 5)
    assert linear_index(1, 0, 0, dims) == 1
    assert linear_index(0, 1, 0, dims) == 3
    assert linear_index(0, 0, 1, dims) == 12
    assert unravel(linear_index(2, 3, 4, dims), dims) == (2, 3, 4)
    m = BinaryMask(np.zeros(dims, dtype=bool))
    bits = np.zeros(dims, dtype=bool)
    bits[2, 1, 3] = True
    assert list(BinaryMask(bits).linear_indices()) == [linear_index(2, 1, 3, dims)]
    assert m.linear_indices().size == 0


def test_volume_rejects_non_finite_and_bad_spacing():
    with pytest.raises(ValueError):
        Volume(np.array([[[np.nan]]]))
    with pytest.raises(ValueError):
        Volume(np.zeros((1, 1, 1)), (1.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        Volume(np.zeros((0, 1, 1)))


def test_atlas_requires_names_for_present_labels():
    with pytest.raises(ValueError):
        AtlasLabelMap(np.ones((2, 2, 2)), {})


def test_types_are_immutable():
    v = Volume(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        v.data[0, 0, 0] = 1.0
    src = np.zeros((2, 2, 2), dtype=bool)
    m = BinaryMask(src)
    src[0, 0, 0] = True
    assert not m.any()


def test_name_lookup_case_insensitive():
    atlas = AtlasLabelMap(np.ones((1, 1, 1)), {1: "Left Thalamus"})
    assert atlas.label_of("left THALAMUS") == 1
    with pytest.raises(UnknownLabel):
        atlas.label_of("pons")


def test_check_dims():
    with pytest.raises(DimsMismatch):
        check_dims(BinaryMask.empty((2, 2, 2)), BinaryMask.empty((2, 2, 3)))


def test_feature_grid_shape():
    f = FeatureGrid(np.zeros((2, 3, 4, 5)))
    assert f.dims == (2, 3, 4) and f.channels == 5
    with pytest.raises(ValueError):
        FeatureGrid(np.zeros((2, 3, 4)))
