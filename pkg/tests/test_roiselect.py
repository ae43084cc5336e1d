import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from brainrg.errors import DimsMismatch, EmptyPromptError, NonIntegerDownsample, UnknownLabel
from brainrg.roiselect import global_prompt, mask_prompt_features, prompt_from_structures, regional_prompts
from brainrg.volume import AtlasLabelMap, BinaryMask, FeatureGrid, brain_mask, structure_mask

from . import oracles
from .conftest import block_atlas, mask_from


@pytest.fixture
def atlas8():
    return block_atlas(
        (8, 8, 8),
        {2: np.s_[0:4, :, :], 5: np.s_[4:8, 0:4, :], 4: np.s_[4:8, 4:8, 0:4]},
    )


def test_empty_anomaly(atlas8):
    assert regional_prompts(BinaryMask.empty((8, 8, 8)), atlas8) == []


def test_blob_inside_one_structure(atlas8):
    blob = mask_from((8, 8, 8), [(5, 5, 1), (6, 5, 1), (6, 6, 2)])
    (p,) = regional_prompts(blob, atlas8)
    assert p.structure_labels == {4}
    assert p.mask == structure_mask(atlas8, 4)
    assert not p.is_global and p.component_index == 0


def test_blob_straddling_two_structures(atlas8):
    blob = mask_from((8, 8, 8), [(3, 1, 1), (4, 1, 1)])
    (p,) = regional_prompts(blob, atlas8)
    assert p.structure_labels == {2, 5}
    assert p.mask == structure_mask(atlas8, 2) | structure_mask(atlas8, 5)


def test_background_only_component_keeps_its_voxels():
    atlas = block_atlas((6, 6, 6), {1: np.s_[0:2, :, :]})
    blob = mask_from((6, 6, 6), [(5, 5, 5), (4, 5, 5)])
    (p,) = regional_prompts(blob, atlas)
    assert p.structure_labels == frozenset()
    assert p.mask == blob


def test_two_lesions_one_structure_not_deduplicated(atlas8):
    blobs = mask_from((8, 8, 8), [(0, 0, 0), (0, 0, 1), (3, 7, 7)])
    prompts = regional_prompts(blobs, atlas8)
    assert [p.component_index for p in prompts] == [0, 1]
    assert prompts[0].mask == prompts[1].mask


def test_dims_mismatch(atlas8):
    with pytest.raises(DimsMismatch):
        regional_prompts(BinaryMask.empty((4, 4, 4)), atlas8)


@pytest.mark.parametrize("dims", [(2, 2, 2), (1, 1, 1), (3, 1, 4)])
def test_global_prompt(dims):
    p = global_prompt(dims)
    assert p.is_global and p.structure_labels == frozenset()
    assert p.mask.popcount() == int(np.prod(dims))
    assert p.mask == ~BinaryMask.empty(dims)


def test_prompt_from_structures(atlas8):
    with pytest.raises(EmptyPromptError):
        prompt_from_structures(atlas8, [])
    with pytest.raises(UnknownLabel):
        prompt_from_structures(atlas8, [9])
    assert prompt_from_structures(atlas8, atlas8.present_labels()).mask == brain_mask(atlas8)
    p = prompt_from_structures(atlas8, {2, 4})
    assert p.mask.popcount() == structure_mask(atlas8, 2).popcount() + structure_mask(atlas8, 4).popcount()


def test_mask_features_all_true_and_all_false():
    f = FeatureGrid(np.random.default_rng(0).normal(size=(2, 2, 2, 3)))
    out = mask_prompt_features(f, BinaryMask.full((4, 4, 4)))
    assert out.channels == 6
    assert np.array_equal(out.data[..., :3], f.data) and np.array_equal(out.data[..., 3:], f.data)
    out = mask_prompt_features(f, BinaryMask.empty((4, 4, 4)))
    assert np.array_equal(out.data[..., :3], f.data) and not out.data[..., 3:].any()


def test_mask_features_any_true_downsample():
    f = FeatureGrid(np.ones((2, 2, 2, 1)))
    out = mask_prompt_features(f, mask_from((4, 4, 4), [(3, 0, 2)]))
    local = out.data[..., 1]
    assert local.sum() == 1.0 and local[1, 0, 1] == 1.0


def test_mask_features_anisotropic_factor():
    f = FeatureGrid(np.ones((2, 1, 3, 2)))
    out = mask_prompt_features(f, mask_from((4, 5, 3), [(0, 4, 2)]))
    assert out.data[..., 2:].sum() == 2.0 and out.data[0, 0, 2, 2] == 1.0


def test_mask_features_non_integer_factor():
    with pytest.raises(NonIntegerDownsample):
        mask_prompt_features(FeatureGrid(np.ones((3, 3, 3, 1))), BinaryMask.full((4, 4, 4)))


@settings(max_examples=40, deadline=None)
@given(
    arrays(np.bool_, (7, 6, 5), elements=st.booleans()),
    arrays(np.uint16, (7, 6, 5), elements=st.integers(0, 4)),
    st.sampled_from([6, 26]),
)
def test_prompts_match_bruteforce(anomaly, labels, connectivity):
    atlas = AtlasLabelMap(labels, {i: f"s{i}" for i in range(1, 5)})
    got = regional_prompts(BinaryMask(anomaly), atlas, connectivity)
    expected = oracles.regional_prompts(anomaly, labels, connectivity)
    assert len(got) == len(expected)
    for p, (comp, touched, mask) in zip(got, expected):
        assert set(p.structure_labels) == touched
        assert np.array_equal(p.mask.bits, mask)
        # every anomalous voxel on tissue is covered by its prompt
        on_tissue = {v for v in comp if labels[v] != 0}
        assert all(p.mask.bits[v] for v in on_tissue)
        # prompt masks hold whole structures only
        for l in atlas.present_labels():
            inter = p.mask.bits & (labels == l)
            assert not inter.any() or np.array_equal(inter, labels == l) or not touched
