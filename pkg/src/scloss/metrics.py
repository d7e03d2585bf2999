"""Saliency evaluation metrics: MAE, adaptive and max F-measure, PR sweep.

Conventions follow the de facto SOD evaluation toolchain: beta^2 = 0.3,
adaptive threshold = min(2 * mean(pred), 1) with inclusive binarization,
and a 256-point threshold sweep t/255 for t = 0..255. The adaptive
threshold itself is added to the sweep so f_max >= f_adp holds exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import grid

BETA_SQ = 0.3

__all__ = [
    "MetricReport",
    "mae",
    "adaptive_threshold",
    "f_measure",
    "f_adp",
    "f_max",
    "evaluate",
]


@dataclass(frozen=True)
class MetricReport:
    mae: float
    f_adp: float
    f_max: float
    adaptive_threshold: float
    pr_curve: Tuple[Tuple[float, float], ...]


def _check_pair(pred, gt):
    pred = grid.check_probability_map(pred)
    gt = grid.check_label_map(gt, num_classes=2)
    grid.check_same_shape(pred, gt)
    return pred, gt


def mae(pred, gt):
    """Mean absolute error between a probability map and a binary mask."""
    pred, gt = _check_pair(pred, gt)
    return float(np.abs(pred - gt).mean())


def adaptive_threshold(pred):
    """Twice the mean prediction, capped at 1."""
    pred = grid.check_probability_map(pred)
    return min(2.0 * float(pred.mean()), 1.0)


def f_measure(pred_binary, gt, beta_sq=BETA_SQ):
    """F-measure of a binary prediction; 0 for the degenerate cases."""
    pred_binary = grid.check_label_map(pred_binary, num_classes=2)
    gt = grid.check_label_map(gt, num_classes=2)
    grid.check_same_shape(pred_binary, gt)
    tp = float(np.sum((pred_binary == 1) & (gt == 1)))
    pred_pos = float(pred_binary.sum())
    gt_pos = float(gt.sum())
    if pred_pos == 0 or gt_pos == 0:
        return 0.0
    precision = tp / pred_pos
    recall = tp / gt_pos
    denom = beta_sq * precision + recall
    if denom == 0:
        return 0.0
    return (1.0 + beta_sq) * precision * recall / denom


def f_adp(pred, gt):
    """F-measure after inclusive binarization at the adaptive threshold."""
    pred, gt = _check_pair(pred, gt)
    tau = adaptive_threshold(pred)
    return f_measure((pred >= tau).astype(np.int64), gt)


def f_max(pred, gt):
    """Best F over the 256-point sweep (plus the adaptive threshold).

    Returns (f_max, pr_curve) where pr_curve holds the 256 grid
    (precision, recall) pairs. Ties resolve to the lowest threshold,
    which does not affect the maximum value.
    """
    pred, gt = _check_pair(pred, gt)
    sweep = [t / 255.0 for t in range(256)]
    curve = []
    best = 0.0
    gt_pos = float(gt.sum())
    for tau in sweep + [adaptive_threshold(pred)]:
        binary = pred >= tau
        tp = float(np.sum(binary & (gt == 1)))
        pred_pos = float(binary.sum())
        precision = tp / pred_pos if pred_pos > 0 else 0.0
        recall = tp / gt_pos if gt_pos > 0 else 0.0
        if len(curve) < 256:
            curve.append((precision, recall))
        f = f_measure(binary.astype(np.int64), gt)
        if f > best:
            best = f
    return best, tuple(curve)


def evaluate(pred, gt):
    """All metrics in one report."""
    best, curve = f_max(pred, gt)
    return MetricReport(
        mae=mae(pred, gt),
        f_adp=f_adp(pred, gt),
        f_max=best,
        adaptive_threshold=adaptive_threshold(pred),
        pr_curve=curve,
    )
