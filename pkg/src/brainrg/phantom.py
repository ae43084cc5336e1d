"""Toy brain phantom: an ellipsoidal 'brain' split into named structures."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from brainrg.volume import AtlasLabelMap, Volume

STRUCTURE_NAMES = {
    1: "left frontal lobe",
    2: "right frontal lobe",
    3: "left parietal lobe",
    4: "right parietal lobe",
    5: "left thalamus",
    6: "right thalamus",
    7: "brainstem",
    8: "cerebellum",
}


def make_phantom(n: int = 32, seed: int = 0, spacing=(1.0, 1.0, 1.0)) -> tuple[Volume, AtlasLabelMap]:
    """Return a (volume, atlas) pair on an ``n``-cube grid.

    Each structure has its own base intensity plus smooth noise, so every
    structure has a nondegenerate intensity range.
    """
    if n < 8:
        raise ValueError("phantom needs n >= 8")
    rng = np.random.default_rng(seed)
    c = (n - 1) / 2.0
    x, y, z = np.meshgrid(*(np.arange(n) - c,) * 3, indexing="ij")
    r = 0.45 * n
    brain = (x / r) ** 2 + (y / (0.9 * r)) ** 2 + (z / (0.85 * r)) ** 2 <= 1.0

    labels = np.zeros((n, n, n), dtype=np.uint16)
    left = x < 0
    upper = z >= 0
    front = y >= 0
    labels[brain & upper & front & left] = 1
    labels[brain & upper & front & ~left] = 2
    labels[brain & upper & ~front & left] = 3
    labels[brain & upper & ~front & ~left] = 4
    deep = brain & ~upper & (np.abs(y) < 0.35 * r)
    labels[deep & left] = 5
    labels[deep & ~left] = 6
    labels[brain & ~upper & ~deep & front] = 7
    labels[brain & ~upper & ~deep & ~front] = 8

    base = np.zeros((n, n, n))
    for label in range(1, 9):
        base[labels == label] = 300.0 + 40.0 * label
    texture = ndimage.gaussian_filter(rng.standard_normal((n, n, n)), 1.5) * 60.0
    data = np.where(brain, base + texture, 0.0) + rng.normal(0.0, 2.0, (n, n, n))
    present = {int(l): STRUCTURE_NAMES[int(l)] for l in np.unique(labels) if l}
    return Volume(data, spacing), AtlasLabelMap(labels, present, spacing)
