"""Segmentation overlap/boundary metrics and the Dice + cross-entropy loss."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from brainrg.errors import ClassCountMismatch, EmptyMask
from brainrg.volume import AtlasLabelMap, BinaryMask, check_dims

SMOOTH = 1e-6


@dataclass(frozen=True)
class SegScore:
    dsc: float
    pre: Optional[float]
    se: Optional[float]
    hd: Optional[float]
    both_empty: bool = False


def _counts(p: BinaryMask, g: BinaryMask) -> tuple[int, int, int]:
    check_dims(p, g)
    inter = int(np.count_nonzero(p.bits & g.bits))
    return inter, p.popcount(), g.popcount()


def dsc(p: BinaryMask, g: BinaryMask) -> float:
    """2|P&G| / (|P|+|G|); 1.0 when both masks are empty."""
    inter, np_, ng = _counts(p, g)
    if np_ + ng == 0:
        return 1.0
    return 2.0 * inter / (np_ + ng)


def precision(p: BinaryMask, g: BinaryMask) -> Optional[float]:
    """|P&G| / |P|, or None for an empty prediction."""
    inter, np_, _ = _counts(p, g)
    return inter / np_ if np_ else None


def sensitivity(p: BinaryMask, g: BinaryMask) -> Optional[float]:
    """|P&G| / |G|, or None for an empty ground truth."""
    inter, _, ng = _counts(p, g)
    return inter / ng if ng else None


def _points(mask: BinaryMask, spacing) -> np.ndarray:
    return np.argwhere(mask.bits).astype(np.float64) * np.asarray(spacing, dtype=np.float64)


def _directed(src: np.ndarray, dst: np.ndarray) -> float:
    tree = cKDTree(dst)
    approx, _ = tree.query(src)
    worst = 0.0
    # re-evaluate every near-tie with the plain Euclidean formula so the
    # result does not depend on the tree's internal arithmetic
    for point, d in zip(src, approx):
        if d < worst * (1 - 1e-9):
            continue
        idx = tree.query_ball_point(point, d * (1 + 1e-9) + 1e-12)
        exact = min(math.sqrt(float(((point - dst[j]) ** 2).sum())) for j in idx)
        worst = max(worst, exact)
    return worst


def hausdorff(p: BinaryMask, g: BinaryMask, spacing=None, mode: str = "directed") -> float:
    """Hausdorff distance in mm; ``directed`` is max over P of the distance to G."""
    check_dims(p, g)
    if not p.any() or not g.any():
        raise EmptyMask("hausdorff distance needs two nonempty masks")
    spacing = g.spacing if spacing is None else spacing
    pp, gg = _points(p, spacing), _points(g, spacing)
    if mode == "directed":
        return _directed(pp, gg)
    if mode == "symmetric":
        return max(_directed(pp, gg), _directed(gg, pp))
    raise ValueError(f"mode must be 'directed' or 'symmetric', got {mode!r}")


def score(p: BinaryMask, g: BinaryMask, spacing=None, hd_mode: str = "directed") -> SegScore:
    both_empty = not p.any() and not g.any()
    hd = hausdorff(p, g, spacing, hd_mode) if p.any() and g.any() else None
    return SegScore(dsc(p, g), precision(p, g), sensitivity(p, g), hd, both_empty)


def dice_ce_loss(pred: np.ndarray, target, lambda1: float = 1.0, lambda2: float = 1.0) -> float:
    """Soft Dice loss plus mean binary cross-entropy.

    ``pred`` holds foreground probabilities in [0, 1]; ``target`` is a
    BinaryMask or a 0/1 array of the same shape.
    """
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("loss weights must be non-negative")
    pred = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target.bits if isinstance(target, BinaryMask) else target, dtype=np.float64)
    if pred.shape != t.shape:
        raise ValueError(f"prediction shape {pred.shape} != target shape {t.shape}")
    if pred.size == 0 or pred.min() < 0 or pred.max() > 1:
        raise ValueError("probabilities must lie in [0, 1]")
    dice = 1.0 - (2.0 * (pred * t).sum() + SMOOTH) / (pred.sum() + t.sum() + SMOOTH)
    # log arguments capped at 1 so the smoothing never makes the CE negative
    ce = -np.mean(t * np.log(np.minimum(pred + SMOOTH, 1.0)) + (1.0 - t) * np.log(np.minimum(1.0 - pred + SMOOTH, 1.0)))
    return float(lambda1 * dice + lambda2 * ce)


def structure_loss(
    pred_per_class: Sequence[np.ndarray], target: AtlasLabelMap, lambda1: float = 1.0, lambda2: float = 1.0
) -> float:
    """Class-averaged dice_ce_loss; class i predicts the i-th present label."""
    labels = target.present_labels()
    if not labels:
        raise ClassCountMismatch("target has no structure classes")
    if len(pred_per_class) != len(labels):
        raise ClassCountMismatch(f"{len(pred_per_class)} predictions for {len(labels)} classes")
    losses = [dice_ce_loss(p, target.labels == l, lambda1, lambda2) for p, l in zip(pred_per_class, labels)]
    return float(sum(losses) / len(losses))
