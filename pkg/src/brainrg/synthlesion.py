"""Signal-aware synthetic lesion generation.

One lesion is produced in four steps: pick a host structure and a center
voxel on its edge band or interior, build an initial shape (ellipsoid or a
rescaled atlas structure), warp it with a smooth random displacement field,
then blend an abnormal intensity into the scan with a Gaussian falloff
around the center. Intensity statistics are always taken from the
pre-synthesis scan, so lesions compose sequentially and a recipe list
replays bit-exactly.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np
from scipy import ndimage

from brainrg.errors import (
    CenterOutsideLesion,
    ConfigError,
    DeformationCollapse,
    DegenerateInterval,
    EmptyAtlas,
    EmptyRegion,
    EmptyShape,
    SynthesisFailed,
)
from brainrg.morphology import EDGE_SE, erode
from brainrg.volume import AtlasLabelMap, BinaryMask, Volume, brain_mask, check_dims, structure_mask, unravel

log = logging.getLogger(__name__)

HYPER = "hyper"
HYPO = "hypo"
EDGE = "edge"
INTERIOR = "interior"

MAX_PLACEMENT_ATTEMPTS = 10
MAX_DEFORM_ATTEMPTS = 5
VOLUME_RATIO_BAND = (0.25, 4.0)
EPSILON_HALVINGS = 3


@dataclass(frozen=True)
class IntensityStats:
    avg: float
    min: float
    max: float


@dataclass(frozen=True)
class ShapeInit:
    """Initial lesion shape: an ellipsoid or a rescaled atlas structure."""

    kind: str
    axes: tuple[int, int, int] = (1, 1, 1)
    label: int = 0
    extent: Optional[tuple[int, int, int]] = None

    def __post_init__(self):
        if self.kind not in ("ellipsoid", "structure"):
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.kind == "ellipsoid" and min(self.axes) < 1:
            raise ValueError("ellipsoid semi-axes must be >= 1 voxel")
        if self.kind == "structure" and self.extent is None:
            raise ValueError("structure shapes need a target extent")

    @classmethod
    def ellipsoid(cls, a: int, b: int, c: int) -> ShapeInit:
        return cls("ellipsoid", axes=(int(a), int(b), int(c)))

    @classmethod
    def structure(cls, label: int, extent) -> ShapeInit:
        return cls("structure", label=int(label), extent=tuple(int(e) for e in extent))

    def target_extent(self) -> tuple[int, int, int]:
        if self.extent is not None:
            return self.extent
        return tuple(2 * a + 1 for a in self.axes)  # type: ignore[return-value]

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "ellipsoid":
            return {"kind": "ellipsoid", "axes": list(self.axes)}
        return {"kind": "structure", "label": self.label, "extent": list(self.extent)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ShapeInit:
        if d["kind"] == "ellipsoid":
            return cls.ellipsoid(*d["axes"])
        return cls.structure(d["label"], d["extent"])


@dataclass(frozen=True)
class LesionRecipe:
    structure_label: int
    placement: str
    center: tuple[int, int, int]
    shape_init: ShapeInit
    alpha: float
    sigma_e: float
    polarity: str
    epsilon: float
    sigma_b: float
    seed: int

    def __post_init__(self):
        if self.placement not in (EDGE, INTERIOR):
            raise ValueError(f"placement must be edge or interior, got {self.placement!r}")
        if self.polarity not in (HYPER, HYPO):
            raise ValueError(f"polarity must be hyper or hypo, got {self.polarity!r}")
        if self.alpha < 0 or self.sigma_e <= 0 or self.sigma_b <= 0 or self.epsilon < 0:
            raise ValueError("need alpha >= 0, sigma_e > 0, sigma_b > 0, epsilon >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {
            "structure_label": self.structure_label,
            "placement": self.placement,
            "center": list(self.center),
            "shape_init": self.shape_init.to_dict(),
            "elastic": {"alpha": self.alpha, "sigma_e": self.sigma_e},
            "polarity": self.polarity,
            "epsilon": self.epsilon,
            "sigma_b": self.sigma_b,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> LesionRecipe:
        return cls(
            structure_label=int(d["structure_label"]),
            placement=d["placement"],
            center=tuple(int(c) for c in d["center"]),
            shape_init=ShapeInit.from_dict(d["shape_init"]),
            alpha=float(d["elastic"]["alpha"]),
            sigma_e=float(d["elastic"]["sigma_e"]),
            polarity=d["polarity"],
            epsilon=float(d["epsilon"]),
            sigma_b=float(d["sigma_b"]),
            seed=int(d["seed"]),
        )


_NULLABLE = ("epsilon", "sigma_b")


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings.

    ``epsilon`` and ``sigma_b`` may be None, in which case they are derived
    per lesion: epsilon = 0.1 * (max - min) of the host region, sigma_b =
    half the radius of the sphere with the lesion's voxel count.
    """

    lesion_count_range: tuple[int, int] = (1, 3)
    polarity_probability_hyper: float = 0.5
    edge_probability: float = 0.3
    ellipsoid_axis_range: tuple[int, int] = (2, 5)
    elastic_alpha: float = 2.0
    elastic_sigma: float = 2.0
    epsilon: Optional[float] = None
    sigma_b: Optional[float] = None
    shape_init_structure_probability: float = 0.3

    def __post_init__(self):
        lo, hi = self.lesion_count_range
        if not 0 <= lo <= hi:
            raise ConfigError(f"lesion_count_range must satisfy 0 <= lo <= hi, got {(lo, hi)}")
        alo, ahi = self.ellipsoid_axis_range
        if not 1 <= alo <= ahi:
            raise ConfigError(f"ellipsoid_axis_range must satisfy 1 <= lo <= hi, got {(alo, ahi)}")
        for name in ("polarity_probability_hyper", "edge_probability", "shape_init_structure_probability"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {p}")
        if self.elastic_alpha < 0 or self.elastic_sigma <= 0:
            raise ConfigError("elastic_alpha must be >= 0 and elastic_sigma > 0")
        if self.epsilon is not None and self.epsilon < 0:
            raise ConfigError("epsilon must be >= 0")
        if self.sigma_b is not None and self.sigma_b <= 0:
            raise ConfigError("sigma_b must be > 0")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> SynthConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        kwargs = dict(d)
        try:
            for key in ("lesion_count_range", "ellipsoid_axis_range"):
                if key in kwargs:
                    if not isinstance(kwargs[key], (list, tuple)) or len(kwargs[key]) != 2:
                        raise ConfigError(f"{key} must be a [lo, hi] pair")
                    lo, hi = kwargs[key]
                    if not all(isinstance(v, int) and not isinstance(v, bool) for v in (lo, hi)):
                        raise ConfigError(f"{key} must hold two integers")
                    kwargs[key] = (lo, hi)
            for key, value in kwargs.items():
                if key.endswith("_range") or (value is None and key in _NULLABLE):
                    continue
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"{key} must be a number, got {value!r}")
                kwargs[key] = float(value)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> SynthConfig:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["lesion_count_range"] = list(self.lesion_count_range)
        d["ellipsoid_axis_range"] = list(self.ellipsoid_axis_range)
        return d


@dataclass(frozen=True)
class Location:
    structure_label: int
    placement: str
    center: tuple[int, int, int]


@dataclass(frozen=True)
class LesionStep:
    """Outcome of applying one recipe."""

    volume: Volume
    mask: BinaryMask
    intensity: float
    stats: IntensityStats


@dataclass(frozen=True)
class SynthResult:
    volume: Volume
    mask: BinaryMask
    recipes: list[LesionRecipe] = field(default_factory=list)


# --- location -------------------------------------------------------------


def placement_bands(atlas: AtlasLabelMap, label: int) -> tuple[BinaryMask, BinaryMask]:
    """(edge band, interior) of one structure, both inside the structure.

    The edge band is the part of the morphological gradient lying in the
    structure, which is the structure minus its erosion.
    """
    region = structure_mask(atlas, label)
    interior = erode(region, EDGE_SE)
    return region - interior, interior


def select_location(atlas: AtlasLabelMap, edge_probability: float, rng: np.random.Generator) -> Location:
    labels = atlas.present_labels()
    if not labels:
        raise EmptyAtlas("atlas has no nonzero labels")
    label = labels[int(rng.integers(len(labels)))]
    placement = EDGE if rng.random() < edge_probability else INTERIOR
    edge, interior = placement_bands(atlas, label)
    band = edge if placement == EDGE else interior
    if not band.any():
        log.debug("structure %d has an empty %s band, using the whole structure", label, placement)
        band = edge | interior
    candidates = band.linear_indices()
    center = unravel(int(candidates[int(rng.integers(len(candidates)))]), atlas.dims)
    return Location(label, placement, center)


# --- shape ----------------------------------------------------------------


def _ellipsoid(axes, extent) -> np.ndarray:
    grids = np.meshgrid(*(np.arange(e) - (e - 1) / 2.0 for e in extent), indexing="ij")
    acc = sum((g / a) ** 2 for g, a in zip(grids, axes))
    return acc <= 1.0


def _rescale_nearest(arr: np.ndarray, extent) -> np.ndarray:
    idx = [
        np.minimum((np.floor((np.arange(t) + 0.5) * s / t)).astype(int), s - 1)
        for s, t in zip(arr.shape, extent)
    ]
    return arr[np.ix_(*idx)]


def init_shape(source: ShapeInit, atlas: AtlasLabelMap, target_extent=None) -> BinaryMask:
    extent = tuple(int(e) for e in (target_extent or source.target_extent()))
    if len(extent) != 3 or min(extent) < 1:
        raise ValueError(f"bad target extent {extent}")
    if source.kind == "ellipsoid":
        if any(2 * a + 1 > e for a, e in zip(source.axes, extent)):
            raise ValueError(f"semi-axes {source.axes} do not fit in extent {extent}")
        bits = _ellipsoid(source.axes, extent)
    else:
        region = structure_mask(atlas, source.label).bits
        if not region.any():
            raise EmptyShape(f"structure {source.label} has no voxels")
        nz = np.nonzero(region)
        crop = region[tuple(slice(i.min(), i.max() + 1) for i in nz)]
        bits = _rescale_nearest(crop, extent)
    if not bits.any():
        raise EmptyShape("initial shape has no voxels")
    return BinaryMask(bits)


def elastic_deform(shape: BinaryMask, alpha: float, sigma_e: float, rng: np.random.Generator) -> BinaryMask:
    """Warp a mask by a smoothed random displacement field (nearest neighbour).

    The field is white noise per axis, Gaussian-smoothed with std sigma_e
    and scaled so its largest displacement magnitude equals alpha.
    """
    if alpha < 0 or sigma_e <= 0:
        raise ValueError("need alpha >= 0 and sigma_e > 0")
    if alpha == 0:
        return shape
    n = shape.popcount()
    lo, hi = VOLUME_RATIO_BAND[0] * n, VOLUME_RATIO_BAND[1] * n
    src = shape.bits.astype(np.uint8)
    base = np.indices(shape.dims, dtype=np.float64)
    for attempt in range(MAX_DEFORM_ATTEMPTS):
        disp = np.stack([ndimage.gaussian_filter(rng.standard_normal(shape.dims), sigma_e) for _ in range(3)])
        peak = np.sqrt((disp**2).sum(axis=0)).max()
        if peak > 0:
            disp *= alpha / peak
        warped = ndimage.map_coordinates(src, base + disp, order=0, mode="constant", cval=0) > 0
        count = int(np.count_nonzero(warped))
        if lo <= count <= hi:
            return BinaryMask(warped, shape.spacing)
        log.debug("elastic attempt %d gave %d voxels (input %d), retrying", attempt, count, n)
    raise DeformationCollapse(f"{MAX_DEFORM_ATTEMPTS} deformations fell outside the volume-ratio band")


def place_shape(shape: BinaryMask, center, dims) -> np.ndarray:
    """Paste a shape into a ``dims`` grid so its box center lands on ``center``."""
    out = np.zeros(dims, dtype=bool)
    src, dst = [], []
    for c, s, n in zip(center, shape.dims, dims):
        start = c - (s - 1) // 2
        a, b = max(start, 0), min(start + s, n)
        if a >= b:
            return out
        dst.append(slice(a, b))
        src.append(slice(a - start, b - start))
    out[tuple(dst)] = shape.bits[tuple(src)]
    return out


def lesion_mask(recipe: LesionRecipe, atlas: AtlasLabelMap, rng: np.random.Generator) -> BinaryMask:
    """Shape, deform, translate and clip one lesion to the brain.

    The center voxel is always kept so the blend has its peak in the lesion.
    """
    shape = init_shape(recipe.shape_init, atlas)
    if recipe.alpha > 0:
        shape = BinaryMask(np.pad(shape.bits, int(math.ceil(recipe.alpha)) + 1))
    shape = elastic_deform(shape, recipe.alpha, recipe.sigma_e, rng)
    bits = place_shape(shape, recipe.center, atlas.dims) & brain_mask(atlas).bits
    bits[recipe.center] = True
    return BinaryMask(bits, atlas.spacing)


# --- intensity ------------------------------------------------------------


def intensity_stats(volume: Volume, region: BinaryMask) -> IntensityStats:
    check_dims(volume, region)
    values = volume.data[region.bits].astype(np.float64)
    if values.size == 0:
        raise EmptyRegion("region has no voxels")
    lo, hi = float(values.min()), float(values.max())
    avg = min(max(float(values.mean()), lo), hi)
    return IntensityStats(avg=avg, min=lo, max=hi)


def intensity_interval(stats: IntensityStats, polarity: str, epsilon: float) -> tuple[float, float]:
    if polarity == HYPER:
        lo, hi = stats.avg + epsilon, stats.max
    elif polarity == HYPO:
        lo, hi = stats.min, stats.avg - epsilon
    else:
        raise ValueError(f"polarity must be hyper or hypo, got {polarity!r}")
    if not lo < hi:
        raise DegenerateInterval(f"{polarity} interval [{lo}, {hi}] is empty")
    return lo, hi


def sample_intensity(stats: IntensityStats, polarity: str, epsilon: float, rng: np.random.Generator) -> float:
    lo, hi = intensity_interval(stats, polarity, epsilon)
    return float(rng.uniform(lo, hi))


def inpaint_lesion(volume: Volume, lesion: BinaryMask, center, intensity: float, sigma_b: float) -> Volume:
    """Convex Gaussian blend toward ``intensity``, weight 1 at the center."""
    check_dims(volume, lesion)
    center = tuple(int(c) for c in center)
    if sigma_b <= 0:
        raise ValueError("sigma_b must be > 0")
    if not all(0 <= c < n for c, n in zip(center, volume.dims)) or not lesion.bits[center]:
        raise CenterOutsideLesion(f"center {center} is not a lesion voxel")
    coords = np.nonzero(lesion.bits)
    d2 = sum((np.asarray(ax, dtype=np.float64) - c) ** 2 for ax, c in zip(coords, center))
    w = np.exp(-d2 / (2.0 * sigma_b * sigma_b))
    data = np.array(volume.data, dtype=np.float32)
    orig = data[coords].astype(np.float64)
    data[coords] = ((1.0 - w) * orig + w * intensity).astype(np.float32)
    return volume.with_data(data)


# --- composition ----------------------------------------------------------


def default_epsilon(stats: IntensityStats) -> float:
    return 0.1 * (stats.max - stats.min)


def default_sigma_b(voxel_count: int) -> float:
    return 0.5 * (3.0 * voxel_count / (4.0 * math.pi)) ** (1.0 / 3.0)


def apply_recipe(volume: Volume, original: Volume, atlas: AtlasLabelMap, recipe: LesionRecipe) -> LesionStep:
    """Add one lesion to ``volume``; statistics come from ``original``."""
    rng = np.random.default_rng(recipe.seed)
    mask = lesion_mask(recipe, atlas, rng)
    stats = intensity_stats(original, mask)
    value = sample_intensity(stats, recipe.polarity, recipe.epsilon, rng)
    out = inpaint_lesion(volume, mask, recipe.center, value, recipe.sigma_b)
    return LesionStep(out, mask, value, stats)


def replay(original: Volume, atlas: AtlasLabelMap, recipes: list[LesionRecipe]) -> SynthResult:
    current = original
    union = np.zeros(atlas.dims, dtype=bool)
    for recipe in recipes:
        step = apply_recipe(current, original, atlas, recipe)
        current = step.volume
        union |= step.mask.bits
    return SynthResult(current, BinaryMask(union, original.spacing), list(recipes))


def _intensity_plans(polarity: str, epsilon: float, allowed: tuple[str, ...]):
    """Fallback order for degenerate intervals: flip polarity, then halve epsilon."""
    order = [polarity] + [p for p in allowed if p != polarity]
    for h in range(EPSILON_HALVINGS + 1):
        for p in order:
            yield p, epsilon / (2**h)


def _draw_recipe(atlas: AtlasLabelMap, config: SynthConfig, rng: np.random.Generator) -> LesionRecipe:
    seed = int(rng.integers(2**63))
    loc = select_location(atlas, config.edge_probability, rng)
    lo, hi = config.ellipsoid_axis_range
    axes = tuple(int(a) for a in rng.integers(lo, hi + 1, size=3))
    if rng.random() < config.shape_init_structure_probability:
        labels = atlas.present_labels()
        source = ShapeInit.structure(labels[int(rng.integers(len(labels)))], tuple(2 * a + 1 for a in axes))
    else:
        source = ShapeInit.ellipsoid(*axes)
    polarity = HYPER if rng.random() < config.polarity_probability_hyper else HYPO
    # epsilon/sigma_b are placeholders until the lesion footprint is known
    return LesionRecipe(
        structure_label=loc.structure_label,
        placement=loc.placement,
        center=loc.center,
        shape_init=source,
        alpha=config.elastic_alpha,
        sigma_e=config.elastic_sigma,
        polarity=polarity,
        epsilon=0.0,
        sigma_b=1.0,
        seed=seed,
    )


def _finalize(recipe: LesionRecipe, original: Volume, atlas: AtlasLabelMap, config: SynthConfig):
    """Fix epsilon, sigma_b and polarity for a drawn recipe, or return None."""
    try:
        mask = lesion_mask(recipe, atlas, np.random.default_rng(recipe.seed))
    except (DeformationCollapse, EmptyShape) as exc:
        log.debug("lesion shape rejected: %s", exc)
        return None
    stats = intensity_stats(original, mask)
    epsilon = config.epsilon if config.epsilon is not None else default_epsilon(stats)
    sigma_b = config.sigma_b if config.sigma_b is not None else default_sigma_b(mask.popcount())
    p = config.polarity_probability_hyper
    allowed = tuple(pol for pol, prob in ((HYPER, p), (HYPO, 1.0 - p)) if prob > 0)
    for polarity, eps in _intensity_plans(recipe.polarity, epsilon, allowed):
        try:
            intensity_interval(stats, polarity, eps)
        except DegenerateInterval:
            continue
        return replace(recipe, polarity=polarity, epsilon=eps, sigma_b=sigma_b)
    log.debug("no usable intensity interval at %s, picking a new location", recipe.center)
    return None


def synthesize(volume: Volume, atlas: AtlasLabelMap, config: SynthConfig, seed: int) -> SynthResult:
    """Insert a random number of lesions; returns (volume, anomaly mask, recipes)."""
    check_dims(volume, atlas)
    if not atlas.present_labels():
        raise EmptyAtlas("atlas has no nonzero labels")
    rng = np.random.default_rng(seed)
    lo, hi = config.lesion_count_range
    count = int(rng.integers(lo, hi + 1))
    recipes: list[LesionRecipe] = []
    for i in range(count):
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            recipe = _finalize(_draw_recipe(atlas, config, rng), volume, atlas, config)
            if recipe is not None:
                recipes.append(recipe)
                break
        else:
            raise SynthesisFailed(f"lesion {i} could not be placed after {MAX_PLACEMENT_ATTEMPTS} attempts")
    return replay(volume, atlas, recipes)


def recipes_to_json(recipes: list[LesionRecipe]) -> str:
    return json.dumps([r.to_dict() for r in recipes], indent=2)


def recipes_from_json(text: str) -> list[LesionRecipe]:
    return [LesionRecipe.from_dict(d) for d in json.loads(text)]
