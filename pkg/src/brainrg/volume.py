"""Dense 3D grid types.

Every grid is a numpy array of shape ``(nx, ny, nz)`` indexed ``[x, y, z]``.
The canonical linear index is ``x + nx * (y + ny * z)``, i.e. Fortran order
on that shape; :func:`linear_index` and ``ravel(order="F")`` agree on it.
Arrays are copied on construction and marked read-only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from brainrg.errors import DimsMismatch, UnknownLabel

Dims = tuple[int, int, int]
Spacing = tuple[float, float, float]

UNIT_SPACING: Spacing = (1.0, 1.0, 1.0)


def _frozen(arr: np.ndarray, dtype) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _check_grid(arr: np.ndarray) -> None:
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise ValueError(f"expected a non-empty 3D grid, got shape {arr.shape}")


def _check_spacing(spacing) -> Spacing:
    sp = tuple(float(s) for s in spacing)
    if len(sp) != 3 or not all(np.isfinite(s) and s > 0 for s in sp):
        raise ValueError(f"spacing must be three positive finite values, got {spacing!r}")
    return sp  # type: ignore[return-value]


def linear_index(x: int, y: int, z: int, dims: Dims) -> int:
    nx, ny, _ = dims
    return x + nx * (y + ny * z)


def unravel(index: int, dims: Dims) -> tuple[int, int, int]:
    x, y, z = np.unravel_index(index, dims, order="F")
    return int(x), int(y), int(z)


@dataclass(frozen=True, eq=False)
class Volume:
    """Scalar intensity grid (float32) with voxel spacing in mm."""

    data: np.ndarray
    spacing: Spacing = UNIT_SPACING

    def __post_init__(self):
        data = _frozen(self.data, np.float32)
        _check_grid(data)
        if not np.all(np.isfinite(data)):
            raise ValueError("volume intensities must be finite")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", _check_spacing(self.spacing))

    @property
    def dims(self) -> Dims:
        return self.data.shape  # type: ignore[return-value]

    def __eq__(self, other):
        if not isinstance(other, Volume):
            return NotImplemented
        return self.spacing == other.spacing and np.array_equal(self.data, other.data)

    def with_data(self, data: np.ndarray) -> Volume:
        return Volume(data, self.spacing)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Boolean grid. Spacing is carried so masks alone can feed distance metrics."""

    bits: np.ndarray
    spacing: Spacing = UNIT_SPACING

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.dtype != np.bool_ and not np.isin(bits, (0, 1)).all():
            raise ValueError("mask values must be 0/1 or boolean")
        bits = _frozen(bits, np.bool_)
        _check_grid(bits)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "spacing", _check_spacing(self.spacing))

    @classmethod
    def empty(cls, dims: Dims, spacing: Spacing = UNIT_SPACING) -> BinaryMask:
        return cls(np.zeros(dims, dtype=bool), spacing)

    @classmethod
    def full(cls, dims: Dims, spacing: Spacing = UNIT_SPACING) -> BinaryMask:
        return cls(np.ones(dims, dtype=bool), spacing)

    @property
    def dims(self) -> Dims:
        return self.bits.shape  # type: ignore[return-value]

    def popcount(self) -> int:
        return int(np.count_nonzero(self.bits))

    def any(self) -> bool:
        return bool(self.bits.any())

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __and__(self, other: BinaryMask) -> BinaryMask:
        check_dims(self, other)
        return BinaryMask(self.bits & other.bits, self.spacing)

    def __or__(self, other: BinaryMask) -> BinaryMask:
        check_dims(self, other)
        return BinaryMask(self.bits | other.bits, self.spacing)

    def __sub__(self, other: BinaryMask) -> BinaryMask:
        check_dims(self, other)
        return BinaryMask(self.bits & ~other.bits, self.spacing)

    def __invert__(self) -> BinaryMask:
        return BinaryMask(~self.bits, self.spacing)

    def linear_indices(self) -> np.ndarray:
        """Canonical linear indices of the true voxels, ascending."""
        return np.flatnonzero(self.bits.ravel(order="F"))


@dataclass(frozen=True, eq=False)
class AtlasLabelMap:
    """Structure labels (uint16, 0 = background) plus id -> name table."""

    labels: np.ndarray
    label_names: Mapping[int, str] = field(default_factory=dict)
    spacing: Spacing = UNIT_SPACING

    def __post_init__(self):
        raw = np.asarray(self.labels)
        if raw.size and (raw.min() < 0 or raw.max() > np.iinfo(np.uint16).max):
            raise ValueError("labels must fit in uint16")
        labels = _frozen(raw, np.uint16)
        _check_grid(labels)
        names = {int(k): str(v) for k, v in dict(self.label_names).items()}
        missing = [int(l) for l in np.unique(labels) if l != 0 and int(l) not in names]
        if missing:
            raise ValueError(f"labels without names: {missing}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "label_names", names)
        object.__setattr__(self, "spacing", _check_spacing(self.spacing))

    @property
    def dims(self) -> Dims:
        return self.labels.shape  # type: ignore[return-value]

    def present_labels(self) -> list[int]:
        """Nonzero labels occurring in the grid, ascending."""
        return [int(l) for l in np.unique(self.labels) if l != 0]

    def name_of(self, label: int) -> str:
        try:
            return self.label_names[int(label)]
        except KeyError:
            raise UnknownLabel(f"unknown structure label {label}") from None

    def label_of(self, name: str) -> int:
        """Case-insensitive reverse lookup of a structure name."""
        key = name.strip().lower()
        for label, nm in sorted(self.label_names.items()):
            if nm.lower() == key:
                return label
        raise UnknownLabel(f"unknown structure name {name!r}")

    def __eq__(self, other):
        if not isinstance(other, AtlasLabelMap):
            return NotImplemented
        return (
            self.spacing == other.spacing
            and dict(self.label_names) == dict(other.label_names)
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True, eq=False)
class FeatureGrid:
    """Per-voxel feature vectors, array shape ``(h, w, d, channels)``."""

    data: np.ndarray

    def __post_init__(self):
        data = _frozen(self.data, np.float64)
        if data.ndim != 4 or min(data.shape) < 1:
            raise ValueError(f"expected (h, w, d, channels), got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("feature values must be finite")
        object.__setattr__(self, "data", data)

    @property
    def dims(self) -> Dims:
        return self.data.shape[:3]  # type: ignore[return-value]

    @property
    def channels(self) -> int:
        return self.data.shape[3]


def check_dims(*grids) -> None:
    dims = {g.dims for g in grids}
    if len(dims) > 1:
        raise DimsMismatch(f"grid dims differ: {sorted(dims)}")


def structure_mask(atlas: AtlasLabelMap, label: int) -> BinaryMask:
    if label == 0 or int(label) not in atlas.label_names:
        raise UnknownLabel(f"unknown structure label {label}")
    return BinaryMask(atlas.labels == label, atlas.spacing)


def brain_mask(atlas: AtlasLabelMap) -> BinaryMask:
    return BinaryMask(atlas.labels != 0, atlas.spacing)
