"""Analytic gradient of the loss wrt probabilities (and logits), plus a
central finite-difference oracle and a batched gradient checker.

Each pair term t = S(p_i, n_i) / D(p_i, p_j) contributes via the quotient
rule to the gradient at both its center and its neighbor:

    dt/dp_i = (S' * D - S * dD/dp_i) / D^2
    dt/dp_j = -S * dD/dp_j / D^2

with D = mutual + alpha * f differentiated through q = p_i * p_j. Pixels
sitting on the clamp boundary [eps, 1-eps] are treated as saturated: their
gradient is defined as 0 through the clamp.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import grid
from .config import SCLossConfig
from .errors import ConfigError, DegenerateGeometryError, SCLossError
from .loss import (
    _active_levels,
    _neighbor_counts,
    _offset_slices,
    _single_map,
    batch_totals,
)

__all__ = [
    "GradReport",
    "grad_wrt_probs",
    "grad_wrt_logits",
    "finite_diff_grad",
    "grad_check",
]


@dataclass(frozen=True)
class GradReport:
    """Outcome of an analytic-vs-finite-difference comparison run."""

    max_rel_error: float
    max_abs_error: float
    worst_pixel: Tuple[int, int]
    trials: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def _pair_gradients(kind, alpha, pc, pn, m):
    """D and its partials wrt the center and neighbor probabilities."""
    q = pc * pn
    mutual = -(m * np.log(q) + (1.0 - m) * np.log1p(-q))
    dm_dq = -m / q + (1.0 - m) / (1.0 - q)
    if kind == "gaussian":
        f = np.exp(-q)
        df_dpc = -f * pn
        df_dpn = -f * pc
    elif kind == "distance":
        f = np.exp((pc - pn) ** 2)
        g = 2.0 * (pc - pn) * f
        df_dpc = g
        df_dpn = -g
    elif kind == "constant":
        f = np.ones_like(q)
        df_dpc = np.zeros_like(q)
        df_dpn = np.zeros_like(q)
    else:
        raise ConfigError(f"unknown regularizer kind {kind!r}")
    d = mutual + alpha * f
    dd_dpc = dm_dq * pn + alpha * df_dpc
    dd_dpn = dm_dq * pc + alpha * df_dpn
    return d, dd_dpc, dd_dpn


def grad_wrt_probs(pred, labels, cfg=None):
    """Gradient of the reduced total wrt every pixel's probability."""
    cfg = (cfg or SCLossConfig()).validated()
    if cfg.single_response == "cross_entropy":
        raise ConfigError("gradients are defined for the binary single responses")
    pred = grid.check_probability_map(pred)
    labels = grid.check_label_map(labels, num_classes=2)
    grid.check_same_shape(pred, labels)
    p = grid.clamp_probabilities(pred, cfg.epsilon)
    s, ds = _single_map(cfg.single_response, p, labels)
    nf = labels.astype(np.float64)
    shape = p.shape

    gradient = np.zeros(shape, dtype=np.float64)
    for k, w in _active_levels(cfg):
        counts = _neighbor_counts(shape, k)
        if counts.min() < 1.0:
            raise DegenerateGeometryError(
                f"level {k} has pixels with no in-bounds neighbors on a "
                f"{shape[0]}x{shape[1]} grid"
            )
        for dr, dc in grid.ring_offsets(k):
            center, neighbor = _offset_slices(shape, dr, dc)
            pc, pn = p[center], p[neighbor]
            m = nf[center] * nf[neighbor]
            d, dd_dpc, dd_dpn = _pair_gradients(cfg.regularizer, cfg.alpha, pc, pn, m)
            coef = w / (counts[center] * d * d)
            gradient[center] += coef * (ds[center] * d - s[center] * dd_dpc)
            gradient[neighbor] += coef * (-s[center] * dd_dpn)

    if cfg.reduction == "mean":
        gradient /= p.size
    saturated = (p <= cfg.epsilon) | (p >= 1.0 - cfg.epsilon)
    gradient[saturated] = 0.0
    return gradient


def grad_wrt_logits(logits, labels, cfg=None):
    """Gradient through the sigmoid link p = 1 / (1 + exp(-z))."""
    cfg = (cfg or SCLossConfig()).validated()
    z = grid.check_finite_field(logits, "logits")
    with np.errstate(over="ignore"):
        p = 1.0 / (1.0 + np.exp(-z))
    grad_p = grad_wrt_probs(np.clip(p, cfg.epsilon, 1.0 - cfg.epsilon), labels, cfg)
    return grad_p * p * (1.0 - p)


def finite_diff_grad(pred, labels, cfg=None, step=1e-4):
    """Central-difference gradient, using only the forward path.

    Perturbed values are re-clamped; a warning is emitted when a
    perturbation lands on the clamp boundary (accuracy degrades to a
    one-sided difference there).
    """
    cfg = (cfg or SCLossConfig()).validated()
    if not (1e-6 <= step <= 1e-3):
        raise SCLossError(f"step must lie in [1e-6, 1e-3], got {step}")
    pred = grid.check_probability_map(pred)
    labels = grid.check_label_map(labels, num_classes=2)
    grid.check_same_shape(pred, labels)
    p = grid.clamp_probabilities(pred, cfg.epsilon)
    lo, hi = cfg.epsilon, 1.0 - cfg.epsilon
    if np.any(p - step < lo) or np.any(p + step > hi):
        warnings.warn(
            "finite-difference perturbation hits the clamp boundary; "
            "the estimate degrades to a one-sided difference there",
            stacklevel=2,
        )
    n = p.size
    flat = p.reshape(-1)
    batch = np.broadcast_to(flat, (2 * n, n)).copy()
    idx = np.arange(n)
    batch[idx, idx] = np.clip(flat + step, lo, hi)
    batch[idx + n, idx] = np.clip(flat - step, lo, hi)
    totals = batch_totals(batch.reshape(2 * n, *p.shape), labels, cfg)
    return ((totals[:n] - totals[n:]) / (2.0 * step)).reshape(p.shape)


def grad_check(
    seed=1,
    dims=(8, 8),
    cfg=None,
    trials=100,
    step=1e-4,
    tolerance=1e-4,
    value_range=(0.15, 0.85),
):
    """Compare analytic and finite-difference gradients on random instances.

    Relative error per pixel is |a - f| / max(|a|, |f|, 1e-8). Failure is
    reported in the returned GradReport, never raised. Probabilities are
    drawn inside ``value_range`` so perturbations stay clear of the clamp
    boundary and of the log singularities near 0 and 1, where the third
    derivative makes a step-1e-4 central difference visibly truncated.
    """
    cfg = (cfg or SCLossConfig()).validated()
    if trials < 1:
        raise SCLossError(f"trials must be >= 1, got {trials}")
    h, w = grid.check_dims(dims)
    rng = np.random.default_rng(seed)
    lo, hi = value_range
    max_rel = 0.0
    max_abs = 0.0
    worst = (0, 0)
    for _ in range(trials):
        pred = rng.uniform(lo, hi, size=(h, w))
        labels = (rng.uniform(size=(h, w)) < 0.5).astype(np.int64)
        analytic = grad_wrt_probs(pred, labels, cfg)
        numeric = finite_diff_grad(pred, labels, cfg, step)
        abs_err = np.abs(analytic - numeric)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
        rel = abs_err / denom
        max_abs = max(max_abs, float(abs_err.max()))
        if float(rel.max()) > max_rel:
            max_rel = float(rel.max())
            worst = tuple(int(v) for v in np.unravel_index(rel.argmax(), rel.shape))
    return GradReport(
        max_rel_error=max_rel,
        max_abs_error=max_abs,
        worst_pixel=worst,
        trials=trials,
        tolerance=tolerance,
    )
