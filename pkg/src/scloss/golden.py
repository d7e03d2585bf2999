"""Self-contained golden test vectors for cross-implementation parity.

Inputs are generated by a fixed 64-bit linear congruential generator,

    state <- state * 6364136223846793005 + 1442695040888963407  (mod 2^64)

with each draw taking the high 53 bits of the new state as the mantissa
fraction (state >> 11) / 2^53. Starting from state = seed, the first
height*width draws fill the prediction grid row-major; the next
height*width draws produce labels (1 where the draw is >= 0.5). Any
implementation of this generator reproduces the identical inputs, and the
embedded expected outputs make the file self-checking.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import SCLossConfig
from .gradient import grad_wrt_probs
from .loss import image_loss

LCG_MULT = 6364136223846793005
LCG_INC = 1442695040888963407
MASK64 = (1 << 64) - 1

__all__ = ["lcg_stream", "make_golden_vector", "write_golden_vector", "load_golden_vector"]


def lcg_stream(seed, count):
    """First ``count`` doubles in [0, 1) of the documented LCG stream."""
    state = seed & MASK64
    out = np.empty(count, dtype=np.float64)
    for i in range(count):
        state = (state * LCG_MULT + LCG_INC) & MASK64
        out[i] = (state >> 11) / float(1 << 53)
    return out


def golden_inputs(seed, dims):
    h, w = dims
    draws = lcg_stream(seed, 2 * h * w)
    pred = draws[: h * w].reshape(h, w)
    labels = (draws[h * w :].reshape(h, w) >= 0.5).astype(np.int64)
    return pred, labels


def make_golden_vector(seed, dims, cfg=None):
    """Compute the full golden record as a plain JSON-ready dict."""
    cfg = (cfg or SCLossConfig()).validated()
    h, w = int(dims[0]), int(dims[1])
    pred, labels = golden_inputs(seed, (h, w))
    breakdown = image_loss(pred, labels, cfg)
    gradient = grad_wrt_probs(pred, labels, cfg)
    return {
        "seed": int(seed),
        "height": h,
        "width": w,
        "config": {
            "k_max": cfg.k_max,
            "alpha": cfg.alpha,
            "single_response": cfg.single_response,
            "regularizer": cfg.regularizer,
            "epsilon": cfg.epsilon,
            "reduction": cfg.reduction,
            "level_weights": list(cfg.level_weights),
            "addon_weight": cfg.addon_weight,
        },
        "pred": pred.reshape(-1).tolist(),
        "labels": labels.reshape(-1).tolist(),
        "expected_total": breakdown.total,
        "expected_loss_map": breakdown.loss_map.reshape(-1).tolist(),
        "expected_attention_map": breakdown.attention_map.reshape(-1).tolist(),
        "expected_gradient": gradient.reshape(-1).tolist(),
    }


def write_golden_vector(path, seed, dims, cfg=None):
    """Serialize a golden vector as JSON; byte-identical for equal inputs.

    Floats use Python's shortest round-trip representation (up to 17
    significant digits), so embedded values re-read bit-exactly.
    """
    record = make_golden_vector(seed, dims, cfg)
    Path(path).write_text(json.dumps(record, indent=1) + "\n")


def load_golden_vector(path):
    record = json.loads(Path(path).read_text())
    h, w = record["height"], record["width"]
    record["pred"] = np.array(record["pred"], dtype=np.float64).reshape(h, w)
    record["labels"] = np.array(record["labels"], dtype=np.int64).reshape(h, w)
    for key in ("expected_loss_map", "expected_attention_map", "expected_gradient"):
        record[key] = np.array(record[key], dtype=np.float64).reshape(h, w)
    return record
