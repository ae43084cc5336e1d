"""Regional mask prompts from anomaly components and atlas structures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from brainrg.errors import EmptyPromptError, NonIntegerDownsample
from brainrg.morphology import connected_components
from brainrg.volume import AtlasLabelMap, BinaryMask, FeatureGrid, check_dims, structure_mask


@dataclass(frozen=True, eq=False)
class RegionalPrompt:
    component_index: int
    structure_labels: frozenset[int]
    mask: BinaryMask
    is_global: bool = False

    def __eq__(self, other):
        if not isinstance(other, RegionalPrompt):
            return NotImplemented
        return (
            self.component_index == other.component_index
            and self.structure_labels == other.structure_labels
            and self.is_global == other.is_global
            and self.mask == other.mask
        )

    def sorted_labels(self) -> list[int]:
        return sorted(self.structure_labels)


def _union_of(atlas: AtlasLabelMap, labels) -> BinaryMask:
    return BinaryMask(np.isin(atlas.labels, list(labels)), atlas.spacing)


def regional_prompts(anomaly: BinaryMask, atlas: AtlasLabelMap, connectivity: int = 26) -> list[RegionalPrompt]:
    """One prompt per anomaly component: the union of every structure it touches.

    A component lying entirely on background keeps its own voxels as the
    prompt mask, with an empty label set.
    """
    check_dims(anomaly, atlas)
    prompts = []
    for i, comp in enumerate(connected_components(anomaly, connectivity)):
        touched = frozenset(int(l) for l in np.unique(atlas.labels[comp.bits]) if l != 0)
        mask = _union_of(atlas, touched) if touched else comp
        prompts.append(RegionalPrompt(i, touched, mask))
    return prompts


def global_prompt(dims, spacing=(1.0, 1.0, 1.0)) -> RegionalPrompt:
    return RegionalPrompt(0, frozenset(), BinaryMask.full(tuple(dims), spacing), is_global=True)


def prompt_from_structures(atlas: AtlasLabelMap, labels) -> RegionalPrompt:
    labels = frozenset(int(l) for l in labels)
    if not labels:
        raise EmptyPromptError("a structure prompt must name at least one structure")
    for label in sorted(labels):
        structure_mask(atlas, label)  # raises UnknownLabel
    return RegionalPrompt(0, labels, _union_of(atlas, labels))


def downsample_any(mask: BinaryMask, dims) -> np.ndarray:
    """Block-reduce a mask: a cell is true iff any of its source voxels is."""
    factors = []
    for n, m in zip(mask.dims, dims):
        if m < 1 or n % m:
            raise NonIntegerDownsample(f"mask dims {mask.dims} are not a multiple of {tuple(dims)}")
        factors.append(n // m)
    kx, ky, kz = factors
    h, w, d = dims
    return mask.bits.reshape(h, kx, w, ky, d, kz).any(axis=(1, 3, 5))


def mask_prompt_features(features: FeatureGrid, mask: BinaryMask) -> FeatureGrid:
    """Concatenate global features with their prompt-masked copy along channels."""
    cells = downsample_any(mask, features.dims)
    local = features.data * cells[..., None]
    return FeatureGrid(np.concatenate([features.data, local], axis=-1))
