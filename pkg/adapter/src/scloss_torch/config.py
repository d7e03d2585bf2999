"""Adapter configuration: the core loss hyperparameters plus a source mode."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

SINGLE_RESPONSES = ("bce", "mse", "l1", "cross_entropy")
REGULARIZERS = ("gaussian", "distance", "constant")
REDUCTIONS = ("mean", "sum")
MODES = ("native-binding", "pure-reference")


class AdapterConfigError(ValueError):
    """Invalid adapter configuration."""


def default_level_weights(k_max: int) -> Tuple[float, ...]:
    """Halving weights (1/2)^(k-1) for levels k = 1..k_max."""
    return tuple(0.5 ** (k - 1) for k in range(1, k_max + 1))


@dataclass(frozen=True)
class AdapterConfig:
    """Mirror of the core loss config, with a source-mode selector.

    mode = "native-binding" evaluates through the core package's numerical
    engine; "pure-reference" reimplements the same formulas in torch ops.
    Both modes are interchangeable and pass the same parity suite.
    """

    k_max: int = 2
    alpha: float = 1.0
    single_response: str = "bce"
    regularizer: str = "gaussian"
    epsilon: float = 1e-7
    reduction: str = "mean"
    level_weights: Optional[Tuple[float, ...]] = None
    addon_weight: float = 1.0
    mode: str = "pure-reference"

    def validated(self) -> "AdapterConfig":
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise AdapterConfigError(
                f"k_max must be a positive integer, got {self.k_max}"
            )
        if not (self.alpha > 0):
            raise AdapterConfigError(f"alpha must be > 0, got {self.alpha}")
        if self.single_response not in SINGLE_RESPONSES:
            raise AdapterConfigError(
                f"single_response must be one of {SINGLE_RESPONSES}, "
                f"got {self.single_response!r}"
            )
        if self.regularizer not in REGULARIZERS:
            raise AdapterConfigError(
                f"regularizer must be one of {REGULARIZERS}, "
                f"got {self.regularizer!r}"
            )
        if not (0.0 < self.epsilon < 0.5):
            raise AdapterConfigError(
                f"epsilon must lie in (0, 0.5), got {self.epsilon}"
            )
        if self.reduction not in REDUCTIONS:
            raise AdapterConfigError(
                f"reduction must be one of {REDUCTIONS}, got {self.reduction!r}"
            )
        if self.mode not in MODES:
            raise AdapterConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        weights = self.level_weights
        if weights is None:
            weights = default_level_weights(int(self.k_max))
        weights = tuple(float(w) for w in weights)
        if len(weights) != self.k_max:
            raise AdapterConfigError(
                f"level_weights must have exactly k_max={self.k_max} entries, "
                f"got {len(weights)}"
            )
        if any(w < 0 or not math.isfinite(w) for w in weights):
            raise AdapterConfigError(
                f"level_weights must be finite and >= 0, got {weights}"
            )
        if not math.isfinite(self.addon_weight):
            raise AdapterConfigError(
                f"addon_weight must be finite, got {self.addon_weight}"
            )
        return replace(self, k_max=int(self.k_max), level_weights=weights)

    @classmethod
    def from_dict(cls, doc: dict, mode: str = "pure-reference") -> "AdapterConfig":
        """Build from a golden-vector ``config`` table."""
        weights = doc.get("level_weights")
        return cls(
            k_max=doc.get("k_max", 2),
            alpha=doc.get("alpha", 1.0),
            single_response=doc.get("single_response", "bce"),
            regularizer=doc.get("regularizer", "gaussian"),
            epsilon=doc.get("epsilon", 1e-7),
            reduction=doc.get("reduction", "mean"),
            level_weights=tuple(weights) if weights is not None else None,
            addon_weight=doc.get("addon_weight", 1.0),
            mode=mode,
        ).validated()

    def core(self):
        """The equivalent core-package config (native-binding mode)."""
        from scloss import SCLossConfig

        return SCLossConfig(
            k_max=self.k_max,
            alpha=self.alpha,
            single_response=self.single_response,
            regularizer=self.regularizer,
            epsilon=self.epsilon,
            reduction=self.reduction,
            level_weights=self.level_weights,
            addon_weight=self.addon_weight,
        ).validated()
