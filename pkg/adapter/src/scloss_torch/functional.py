"""Forward and backward ops exposed to torch training pipelines.

Both source modes compute, per image, the mean/sum over pixels of

    single(p_i, n_i) * sum_k w_k * mean_ring_k( 1 / (mutual + alpha * f) )

after clamping probabilities to [eps, 1 - eps]. Pixels whose raw
prediction is saturated (<= eps or >= 1 - eps) receive gradient exactly 0.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np
import torch

from .config import AdapterConfig, AdapterConfigError

__all__ = ["sc_loss_forward", "sc_loss_backward", "SpatialCoherenceLoss"]


def _check_inputs(pred: torch.Tensor, labels: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor, bool]:
    """Promote (H, W) inputs to a batch of one; validate values and shapes."""
    squeezed = False
    if pred.dim() == 2:
        pred = pred.unsqueeze(0)
        squeezed = True
    if labels.dim() == 2:
        labels = labels.unsqueeze(0)
    if pred.dim() != 3 or labels.dim() != 3:
        raise ValueError(
            f"expected B x H x W tensors, got pred {tuple(pred.shape)} "
            f"and labels {tuple(labels.shape)}"
        )
    if pred.shape != labels.shape:
        raise ValueError(
            f"pred shape {tuple(pred.shape)} != labels shape {tuple(labels.shape)}"
        )
    if pred.shape[-2] < 2 and pred.shape[-1] < 2:
        raise ValueError("loss needs at least two pixels per image")
    if not torch.isfinite(pred).all():
        raise ValueError("predictions must be finite")
    if pred.min() < 0 or pred.max() > 1:
        raise ValueError("predictions must lie in [0, 1]")
    uniq = torch.unique(labels)
    if not ((uniq == 0) | (uniq == 1)).all():
        raise ValueError("labels must be binary (0 or 1)")
    return pred, labels, squeezed


def _ring_offsets(k: int):
    return [
        (dr, dc)
        for dr in range(-k, k + 1)
        for dc in range(-k, k + 1)
        if max(abs(dr), abs(dc)) == k
    ]


def _offset_slices(h: int, w: int, dr: int, dc: int):
    r0, r1 = max(0, -dr), h - max(0, dr)
    c0, c1 = max(0, -dc), w - max(0, dc)
    center = (slice(r0, r1), slice(c0, c1))
    neighbor = (slice(r0 + dr, r1 + dr), slice(c0 + dc, c1 + dc))
    return center, neighbor


def _pad_to_full(values: torch.Tensor, h: int, w: int, center) -> torch.Tensor:
    rows, cols = center
    pad = (cols.start, w - cols.stop, rows.start, h - rows.stop)
    return torch.nn.functional.pad(values, pad)


def _single_map(kind: str, p: torch.Tensor, n: torch.Tensor) -> torch.Tensor:
    if kind == "bce":
        return -(n * torch.log(p) + (1.0 - n) * torch.log1p(-p))
    if kind == "mse":
        return (p - n) ** 2
    if kind == "l1":
        return torch.abs(p - n)
    raise AdapterConfigError(f"unsupported single-response kind {kind!r}")


def _pure_loss_map(p: torch.Tensor, labels: torch.Tensor, cfg: AdapterConfig) -> torch.Tensor:
    """Per-pixel loss map in torch ops; differentiable in ``p``."""
    b, h, w = p.shape
    n = labels.to(p.dtype)
    s = _single_map(cfg.single_response, p, n)
    attention = torch.zeros_like(p)
    ones = torch.ones((h, w), dtype=p.dtype, device=p.device)
    for k, weight in zip(range(1, cfg.k_max + 1), cfg.level_weights):
        if weight == 0.0:
            continue
        counts = torch.zeros((h, w), dtype=p.dtype, device=p.device)
        acc = torch.zeros_like(p)
        for dr, dc in _ring_offsets(k):
            center, neighbor = _offset_slices(h, w, dr, dc)
            counts += _pad_to_full(ones[neighbor], h, w, center)
            pc = p[:, center[0], center[1]]
            pn = p[:, neighbor[0], neighbor[1]]
            m = n[:, center[0], center[1]] * n[:, neighbor[0], neighbor[1]]
            q = pc * pn
            mutual = -(m * torch.log(q) + (1.0 - m) * torch.log1p(-q))
            if cfg.regularizer == "gaussian":
                f = torch.exp(-q)
            elif cfg.regularizer == "distance":
                f = torch.exp((pc - pn) ** 2)
            elif cfg.regularizer == "constant":
                f = torch.ones_like(q)
            else:
                raise AdapterConfigError(
                    f"unsupported regularizer kind {cfg.regularizer!r}"
                )
            acc = acc + _pad_to_full(1.0 / (mutual + cfg.alpha * f), h, w, center)
        if counts.min() < 1.0:
            raise ValueError(
                f"level {k} has pixels with no in-bounds neighbors on a "
                f"{h}x{w} grid"
            )
        attention = attention + weight * acc / counts
    return s * attention


def _reduce(loss_map: torch.Tensor, reduction: str) -> torch.Tensor:
    if reduction == "mean":
        return loss_map.mean(dim=(-2, -1))
    return loss_map.sum(dim=(-2, -1))


def _pure_totals(pred: torch.Tensor, labels: torch.Tensor, cfg: AdapterConfig) -> torch.Tensor:
    p = pred.clamp(cfg.epsilon, 1.0 - cfg.epsilon)
    return _reduce(_pure_loss_map(p, labels, cfg), cfg.reduction)


class _NativeLoss(torch.autograd.Function):
    """Binding to the core package's numerical engine."""

    @staticmethod
    def forward(ctx, pred, labels, cfg):
        from scloss import grad_wrt_probs, image_loss

        core_cfg = cfg.core()
        pred_np = pred.detach().cpu().numpy().astype("float64")
        labels_np = labels.detach().cpu().numpy().astype("int64")
        totals = []
        grads = []
        for img, lab in zip(pred_np, labels_np):
            totals.append(image_loss(img, lab, core_cfg).total)
            grads.append(grad_wrt_probs(img, lab, core_cfg))
        ctx.save_for_backward(torch.from_numpy(np.stack(grads)).to(pred))
        return torch.tensor(totals, dtype=pred.dtype, device=pred.device)

    @staticmethod
    def backward(ctx, grad_output):
        (grads,) = ctx.saved_tensors
        return grad_output[:, None, None] * grads, None, None


def sc_loss_forward(
    pred: torch.Tensor, labels: torch.Tensor, cfg: AdapterConfig = None
) -> torch.Tensor:
    """Per-image loss totals, shape (B,); differentiable w.r.t. ``pred``."""
    cfg = (cfg or AdapterConfig()).validated()
    pred, labels, squeezed = _check_inputs(pred, labels)
    if cfg.mode == "native-binding":
        totals = _NativeLoss.apply(pred, labels, cfg)
    else:
        totals = _pure_totals(pred, labels, cfg)
    return totals[0] if squeezed else totals


def sc_loss_backward(
    pred: torch.Tensor, labels: torch.Tensor, cfg: AdapterConfig = None
) -> torch.Tensor:
    """Gradient of each image's total w.r.t. its prediction, shape (B, H, W)."""
    cfg = (cfg or AdapterConfig()).validated()
    pred, labels, squeezed = _check_inputs(pred, labels)
    if cfg.mode == "native-binding":
        from scloss import grad_wrt_probs

        core_cfg = cfg.core()
        pred_np = pred.detach().cpu().numpy().astype("float64")
        labels_np = labels.detach().cpu().numpy().astype("int64")
        grads = np.stack(
            [grad_wrt_probs(img, lab, core_cfg) for img, lab in zip(pred_np, labels_np)]
        )
        out = torch.from_numpy(grads).to(dtype=pred.dtype, device=pred.device)
    else:
        leaf = pred.detach().clone().requires_grad_(True)
        totals = _pure_totals(leaf, labels, cfg)
        (out,) = torch.autograd.grad(totals.sum(), leaf)
        saturated = (pred <= cfg.epsilon) | (pred >= 1.0 - cfg.epsilon)
        out = out.masked_fill(saturated, 0.0)
    return out[0] if squeezed else out


class SpatialCoherenceLoss(torch.nn.Module):
    """Loss module: mean over the batch of per-image totals."""

    def __init__(self, cfg: AdapterConfig = None, **kwargs):
        super().__init__()
        self.cfg = (cfg or AdapterConfig(**kwargs)).validated()

    def forward(self, pred: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
        totals = sc_loss_forward(pred, labels, self.cfg)
        return totals.mean() if totals.dim() else totals

    def extra_repr(self) -> str:
        return (
            f"k_max={self.cfg.k_max}, single_response={self.cfg.single_response}, "
            f"regularizer={self.cfg.regularizer}, mode={self.cfg.mode}"
        )
