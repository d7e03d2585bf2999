"""Golden-vector verification: the cross-implementation parity contract.

A golden vector is a self-contained JSON file with LCG-generated inputs, a
loss config, and the producing implementation's expected total, maps, and
gradient. ``verify_golden`` recomputes the forward total and the backward
gradient here and compares at (1e-10, 1e-8) relative tolerance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np
import torch

from .config import AdapterConfig
from .functional import sc_loss_backward, sc_loss_forward

FORWARD_RTOL = 1e-10
BACKWARD_RTOL = 1e-8

__all__ = ["GoldenReport", "load_vector", "verify_golden"]

_REQUIRED_KEYS = (
    "seed",
    "height",
    "width",
    "config",
    "pred",
    "labels",
    "expected_total",
    "expected_gradient",
)


@dataclass(frozen=True)
class GoldenReport:
    path: str
    passed: bool
    max_forward_rel: float
    max_backward_rel: float
    failed_fields: Tuple[str, ...]
    forward_rtol: float = FORWARD_RTOL
    backward_rtol: float = BACKWARD_RTOL


def load_vector(path):
    try:
        record = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: malformed golden vector JSON: {exc}") from exc
    missing = [key for key in _REQUIRED_KEYS if key not in record]
    if missing:
        raise ValueError(f"{path}: golden vector missing fields {missing}")
    h, w = record["height"], record["width"]
    if len(record["pred"]) != h * w or len(record["labels"]) != h * w:
        raise ValueError(f"{path}: input arrays do not match {h}x{w}")
    return record


def _rel(actual: np.ndarray, expected: np.ndarray) -> float:
    expected = np.asarray(expected, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    denom = np.maximum(np.abs(expected), 1e-8)
    return float((np.abs(actual - expected) / denom).max())


def verify_golden(path, mode: str = "pure-reference") -> GoldenReport:
    """Recompute forward/backward on a vector's embedded inputs."""
    record = load_vector(path)
    h, w = record["height"], record["width"]
    cfg = AdapterConfig.from_dict(record["config"], mode=mode)
    pred = torch.tensor(record["pred"], dtype=torch.float64).reshape(1, h, w)
    labels = torch.tensor(record["labels"], dtype=torch.int64).reshape(1, h, w)

    total = float(sc_loss_forward(pred, labels, cfg)[0])
    gradient = sc_loss_backward(pred, labels, cfg)[0].numpy()

    forward_rel = _rel(total, record["expected_total"])
    backward_rel = _rel(gradient, np.reshape(record["expected_gradient"], (h, w)))

    failed = []
    if forward_rel > FORWARD_RTOL:
        failed.append("expected_total")
    if backward_rel > BACKWARD_RTOL:
        failed.append("expected_gradient")
    return GoldenReport(
        path=str(path),
        passed=not failed,
        max_forward_rel=forward_rel,
        max_backward_rel=backward_rel,
        failed_fields=tuple(failed),
    )
