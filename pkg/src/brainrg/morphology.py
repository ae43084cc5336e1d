"""Binary 3D morphology and connected-component labeling.

Voxels outside the grid count as false for both dilation and erosion unless
``border_value=True`` is passed. The complement of a mask implicitly covers
the exterior, so erosion/dilation duality reads
``erode(m) == ~dilate(~m, border_value=True)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from brainrg.volume import BinaryMask


@dataclass(frozen=True)
class StructuringElement:
    kind: str = "face6"
    radius: int = 1

    def __post_init__(self):
        if self.kind not in ("face6", "full26", "ball"):
            raise ValueError(f"unknown structuring element kind {self.kind!r}")
        if self.kind == "ball" and self.radius < 1:
            raise ValueError("ball radius must be >= 1")

    @classmethod
    def ball(cls, radius: int) -> StructuringElement:
        return cls("ball", int(radius))

    def footprint(self) -> np.ndarray:
        if self.kind == "face6":
            return ndimage.generate_binary_structure(3, 1)
        if self.kind == "full26":
            return ndimage.generate_binary_structure(3, 3)
        r = self.radius
        ax = np.arange(-r, r + 1)
        x, y, z = np.meshgrid(ax, ax, ax, indexing="ij")
        return x * x + y * y + z * z <= r * r


FACE6 = StructuringElement("face6")
FULL26 = StructuringElement("full26")
# ball(1) has the same footprint as face6; it is the edge-detection default.
EDGE_SE = StructuringElement.ball(1)


def _padded(bits: np.ndarray, r: int, value: bool) -> np.ndarray:
    return np.pad(bits, r, constant_values=value)


def dilate(mask: BinaryMask, se: StructuringElement = EDGE_SE, border_value: bool = False) -> BinaryMask:
    fp = se.footprint()
    if border_value:
        r = fp.shape[0] // 2
        grown = ndimage.binary_dilation(_padded(mask.bits, r, True), structure=fp)
        return BinaryMask(grown[r:-r, r:-r, r:-r], mask.spacing)
    out = ndimage.binary_dilation(mask.bits, structure=fp, border_value=0)
    return BinaryMask(out, mask.spacing)


def erode(mask: BinaryMask, se: StructuringElement = EDGE_SE, border_value: bool = False) -> BinaryMask:
    out = ndimage.binary_erosion(mask.bits, structure=se.footprint(), border_value=int(border_value))
    return BinaryMask(out, mask.spacing)


def morphological_gradient(mask: BinaryMask, se: StructuringElement = EDGE_SE) -> BinaryMask:
    """Edge band: ``dilate(mask) & ~erode(mask)``."""
    return BinaryMask(dilate(mask, se).bits & ~erode(mask, se).bits, mask.spacing)


def _connectivity_structure(connectivity: int) -> np.ndarray:
    if connectivity == 6:
        return ndimage.generate_binary_structure(3, 1)
    if connectivity == 26:
        return ndimage.generate_binary_structure(3, 3)
    raise ValueError(f"connectivity must be 6 or 26, got {connectivity}")


def connected_components(mask: BinaryMask, connectivity: int = 26) -> list[BinaryMask]:
    """Split a mask into connected components.

    Ordered by voxel count (descending), ties broken by the smallest
    canonical linear index of any member voxel.
    """
    labelled, n = ndimage.label(mask.bits, structure=_connectivity_structure(connectivity))
    if n == 0:
        return []
    flat = labelled.ravel(order="F")
    members = np.flatnonzero(flat)
    ids = flat[members]
    sizes = np.bincount(ids, minlength=n + 1)
    first = np.full(n + 1, flat.size, dtype=np.int64)
    # members is ascending, so the minimum index per id is its first hit
    np.minimum.at(first, ids, members)
    order = sorted(range(1, n + 1), key=lambda i: (-sizes[i], first[i]))
    return [BinaryMask(labelled == i, mask.spacing) for i in order]
