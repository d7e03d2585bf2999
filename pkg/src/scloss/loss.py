"""Forward evaluation of the spatial coherence loss.

The per-pixel, per-level loss is a mean over the level-k ring of

    single(p_i, n_i) / (mutual(p_i, p_j, m_ij) + alpha * f(p_i, p_j)),

with m_ij = n_i * n_j in binary mode. Levels are combined with the
configured weights and the image total is the mean or sum of the
per-pixel map. The attention map is the same aggregation with the
numerator replaced by 1.
"""

from __future__ import annotations

import math

import numpy as np

from . import grid
from .config import LossBreakdown, SCLossConfig
from .errors import ConfigError, DegenerateGeometryError, SCLossError

__all__ = [
    "single_response",
    "mutual_response",
    "pairwise_regularizer",
    "pixel_level_loss",
    "pixel_loss",
    "image_loss",
    "attention_map",
    "bce_loss_map",
    "combine_addon",
    "multiclass_image_loss",
]


# ---------------------------------------------------------------------------
# scalar kernels


def single_response(kind, p, n, epsilon=1e-7):
    """Per-pixel response term for one prediction/label pair."""
    if not (epsilon <= p <= 1.0 - epsilon):
        raise SCLossError(f"p={p} is not clamped to [{epsilon}, {1.0 - epsilon}]")
    if kind == "bce":
        if n not in (0, 1):
            raise SCLossError(f"bce needs a binary label, got {n}")
        return -(n * math.log(p) + (1 - n) * math.log(1.0 - p))
    if kind == "mse":
        if n not in (0, 1):
            raise SCLossError(f"mse needs a binary label, got {n}")
        return (p - n) ** 2
    if kind == "l1":
        if n not in (0, 1):
            raise SCLossError(f"l1 needs a binary label, got {n}")
        return abs(p - n)
    raise ConfigError(f"unknown single-response kind {kind!r}")


def mutual_response(p_i, p_j, m, epsilon=1e-7):
    """Joint response of an adjacent pair; m = 1 for a same-foreground pair."""
    for p in (p_i, p_j):
        if not (epsilon <= p <= 1.0 - epsilon):
            raise SCLossError(f"p={p} is not clamped")
    if m not in (0, 1):
        raise SCLossError(f"pair indicator must be 0 or 1, got {m}")
    q = p_i * p_j
    if not (0.0 < q < 1.0):
        raise SCLossError(f"joint probability q={q} outside (0, 1)")
    return -(m * math.log(q) + (1 - m) * math.log1p(-q))


def pairwise_regularizer(kind, p_i, p_j, epsilon=1e-7):
    """Bounded positive pair term added to the mutual response."""
    for p in (p_i, p_j):
        if not (epsilon <= p <= 1.0 - epsilon):
            raise SCLossError(f"p={p} is not clamped")
    if kind == "gaussian":
        return math.exp(-p_i * p_j)
    if kind == "distance":
        return math.exp((p_i - p_j) ** 2)
    if kind == "constant":
        return 1.0
    raise ConfigError(f"unknown regularizer kind {kind!r}")


# ---------------------------------------------------------------------------
# elementwise maps used by the vectorized engine


def _single_map(kind, p, n):
    """Elementwise single-response and its derivative wrt p."""
    n = n.astype(np.float64)
    if kind == "bce":
        s = -(n * np.log(p) + (1.0 - n) * np.log1p(-p))
        ds = -n / p + (1.0 - n) / (1.0 - p)
    elif kind == "mse":
        s = (p - n) ** 2
        ds = 2.0 * (p - n)
    elif kind == "l1":
        s = np.abs(p - n)
        ds = np.sign(p - n)
    else:
        raise ConfigError(f"unknown single-response kind {kind!r}")
    return s, ds


def _pair_terms(kind, alpha, pc, pn, m):
    """Denominator D = mutual + alpha*f for center/neighbor slices."""
    q = pc * pn
    mutual = -(m * np.log(q) + (1.0 - m) * np.log1p(-q))
    if kind == "gaussian":
        f = np.exp(-q)
    elif kind == "distance":
        f = np.exp((pc - pn) ** 2)
    elif kind == "constant":
        f = 1.0
    else:
        raise ConfigError(f"unknown regularizer kind {kind!r}")
    return mutual + alpha * f


def _offset_slices(shape, dr, dc):
    """Aligned (center, neighbor) slice pairs for a ring offset."""
    h, w = shape
    r0, r1 = max(0, -dr), h - max(0, dr)
    c0, c1 = max(0, -dc), w - max(0, dc)
    center = (slice(r0, r1), slice(c0, c1))
    neighbor = (slice(r0 + dr, r1 + dr), slice(c0 + dc, c1 + dc))
    return center, neighbor


def _neighbor_counts(shape, k):
    """In-bounds ring size per pixel at level k."""
    counts = np.zeros(shape, dtype=np.float64)
    ones = np.ones(shape, dtype=np.float64)
    for dr, dc in grid.ring_offsets(k):
        center, neighbor = _offset_slices(shape, dr, dc)
        counts[center] += ones[neighbor]
    return counts


def _active_levels(cfg):
    return [
        (k, w) for k, w in zip(range(1, cfg.k_max + 1), cfg.level_weights) if w != 0.0
    ]


def _level_weight_means(p, m_map, cfg, shape):
    """Per level: mean over the ring of 1/D, for every pixel.

    ``p`` may carry leading batch axes; ``m_map`` is a function mapping a
    (center, neighbor) slice pair to the m indicator array.
    """
    out = []
    for k, w in _active_levels(cfg):
        counts = _neighbor_counts(shape, k)
        if counts.min() < 1.0:
            raise DegenerateGeometryError(
                f"level {k} has pixels with no in-bounds neighbors on a "
                f"{shape[0]}x{shape[1]} grid"
            )
        acc = np.zeros(p.shape, dtype=np.float64)
        for dr, dc in grid.ring_offsets(k):
            center, neighbor = _offset_slices(shape, dr, dc)
            m = m_map(center, neighbor)
            d = _pair_terms(
                cfg.regularizer,
                cfg.alpha,
                p[..., center[0], center[1]],
                p[..., neighbor[0], neighbor[1]],
                m,
            )
            acc[..., center[0], center[1]] += 1.0 / d
        out.append((k, w, acc / counts))
    return out


def _reduce(map_, reduction):
    if reduction == "mean":
        return map_.mean(axis=(-2, -1))
    return map_.sum(axis=(-2, -1))


def _binary_inputs(pred, labels, cfg):
    pred = grid.check_probability_map(pred)
    labels = grid.check_label_map(labels, num_classes=2)
    grid.check_same_shape(pred, labels)
    if pred.shape[0] * pred.shape[1] < 2:
        raise DegenerateGeometryError("loss needs at least two pixels")
    p = grid.clamp_probabilities(pred, cfg.epsilon)
    return p, labels


def _breakdown(s, p, m_map, cfg, shape):
    attention = np.zeros(p.shape, dtype=np.float64)
    per_level = []
    for k, w, mean_inv_d in _level_weight_means(p, m_map, cfg, shape):
        attention += w * mean_inv_d
        per_level.append(float(_reduce(w * s * mean_inv_d, cfg.reduction)))
    loss_map = s * attention
    total = float(_reduce(loss_map, cfg.reduction))
    return LossBreakdown(
        total=total,
        loss_map=loss_map,
        attention_map=attention,
        per_level_totals=tuple(per_level),
        reduction=cfg.reduction,
    )


# ---------------------------------------------------------------------------
# public operations


def pixel_level_loss(pos, k, pred, labels, cfg=None):
    """Level-k loss at one pixel, averaged over its in-bounds ring."""
    cfg = (cfg or SCLossConfig()).validated()
    pred = grid.check_probability_map(pred)
    labels = grid.check_label_map(labels, num_classes=2)
    grid.check_same_shape(pred, labels)
    if not (1 <= k <= cfg.k_max):
        raise SCLossError(f"level k={k} outside 1..{cfg.k_max}")
    r, c = grid.check_pos(pos, pred.shape)
    p = grid.clamp_probabilities(pred, cfg.epsilon)
    ring = grid.ring_neighbors((r, c), k, pred.shape)
    if not ring:
        raise DegenerateGeometryError(
            f"pixel {(r, c)} has no level-{k} neighbors on a "
            f"{pred.shape[0]}x{pred.shape[1]} grid"
        )
    s = single_response(cfg.single_response, p[r, c], int(labels[r, c]), cfg.epsilon)
    acc = 0.0
    for nr, nc in ring:
        m = int(labels[r, c]) * int(labels[nr, nc])
        d = mutual_response(p[r, c], p[nr, nc], m, cfg.epsilon)
        d += cfg.alpha * pairwise_regularizer(
            cfg.regularizer, p[r, c], p[nr, nc], cfg.epsilon
        )
        acc += s / d
    return acc / len(ring)


def pixel_loss(pos, pred, labels, cfg=None):
    """Level-weighted loss at one pixel; levels with weight 0 are skipped."""
    cfg = (cfg or SCLossConfig()).validated()
    return sum(
        w * pixel_level_loss(pos, k, pred, labels, cfg) for k, w in _active_levels(cfg)
    )


def image_loss(pred, labels, cfg=None):
    """Loss breakdown over the whole image (vectorized over ring offsets)."""
    cfg = (cfg or SCLossConfig()).validated()
    if cfg.single_response == "cross_entropy":
        raise ConfigError(
            "cross_entropy single response requires multiclass_image_loss"
        )
    p, labels = _binary_inputs(pred, labels, cfg)
    s, _ = _single_map(cfg.single_response, p, labels)
    nf = labels.astype(np.float64)

    def m_map(center, neighbor):
        return nf[center] * nf[neighbor]

    return _breakdown(s, p, m_map, cfg, p.shape)


def batch_totals(preds, labels, cfg=None):
    """Reduced totals for a stack of probability maps sharing one label map.

    ``preds`` has shape (..., H, W); values must already lie in [0, 1].
    Used by the finite-difference oracle, which needs many forward
    evaluations of slightly perturbed inputs.
    """
    cfg = (cfg or SCLossConfig()).validated()
    preds = np.asarray(preds, dtype=np.float64)
    labels = grid.check_label_map(labels, num_classes=2)
    if preds.shape[-2:] != labels.shape:
        raise SCLossError(
            f"batch shape {preds.shape} does not end in {labels.shape}"
        )
    p = np.clip(preds, cfg.epsilon, 1.0 - cfg.epsilon)
    s, _ = _single_map(cfg.single_response, p, labels)
    nf = labels.astype(np.float64)

    def m_map(center, neighbor):
        return nf[center] * nf[neighbor]

    loss_map = np.zeros(p.shape, dtype=np.float64)
    for k, w, mean_inv_d in _level_weight_means(p, m_map, cfg, labels.shape):
        loss_map += w * s * mean_inv_d
    return _reduce(loss_map, cfg.reduction)


def attention_map(pred, labels, cfg=None):
    """Aggregated per-pixel weight map (the loss with numerator set to 1)."""
    return image_loss(pred, labels, cfg).attention_map


def bce_loss_map(pred, labels, cfg=None):
    """Per-pixel single-response map alone, for side-by-side comparison."""
    cfg = (cfg or SCLossConfig()).validated()
    kind = cfg.single_response
    if kind == "cross_entropy":
        raise ConfigError("use multiclass_image_loss for cross_entropy")
    p, labels = _binary_inputs(pred, labels, cfg)
    s, _ = _single_map(kind, p, labels)
    return s


def combine_addon(base_loss, sc_total, cfg=None):
    """Additive hook: base loss plus the weighted coherence total."""
    cfg = (cfg or SCLossConfig()).validated()
    if not np.isfinite(base_loss):
        raise SCLossError(f"base loss must be finite, got {base_loss}")
    return float(base_loss) + cfg.addon_weight * float(sc_total)


def multiclass_image_loss(probs, labels, cfg=None):
    """Loss breakdown for per-pixel class distributions.

    ``probs`` has shape (H, W, C) with each pixel's vector summing to 1.
    The single response is the cross entropy of the true class; a pair is
    mutually positive when the two true labels agree, and both the joint
    probability and the regularizer are built from the true-class
    probabilities.
    """
    cfg = (cfg or SCLossConfig()).validated()
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 3 or probs.shape[-1] < 2:
        raise SCLossError(
            f"class probabilities must be (H, W, C>=2), got {probs.shape}"
        )
    if not np.all(np.isfinite(probs)) or probs.min() < 0:
        raise SCLossError("class probabilities must be finite and >= 0")
    sums = probs.sum(axis=-1)
    if np.abs(sums - 1.0).max() > 1e-6:
        raise SCLossError("class probability vectors must sum to 1 within 1e-6")
    num_classes = probs.shape[-1]
    labels = grid.check_label_map(labels, num_classes=num_classes)
    if probs.shape[:2] != labels.shape:
        raise SCLossError(
            f"probs shape {probs.shape[:2]} does not match labels {labels.shape}"
        )
    true_p = np.take_along_axis(probs, labels[..., None], axis=-1)[..., 0]
    p = np.clip(true_p, cfg.epsilon, 1.0 - cfg.epsilon)
    s = -np.log(p)

    def m_map(center, neighbor):
        return (labels[center] == labels[neighbor]).astype(np.float64)

    return _breakdown(s, p, m_map, cfg, p.shape)
