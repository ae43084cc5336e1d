"""Volumetric toolkit for grounded brain-MRI report generation.

Covers synthetic lesion generation, atlas-driven ROI prompts, segmentation
and report-text metrics, template-based report assembly and a small binary
volume format (VVL1).
"""

from brainrg.errors import BrainRGError
from brainrg.volume import AtlasLabelMap, BinaryMask, FeatureGrid, Volume, brain_mask, structure_mask

__all__ = [
    "AtlasLabelMap",
    "BinaryMask",
    "BrainRGError",
    "FeatureGrid",
    "Volume",
    "brain_mask",
    "structure_mask",
]

__version__ = "0.1.0"
