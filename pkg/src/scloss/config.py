"""Loss configuration and result containers."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError

SINGLE_RESPONSES = ("bce", "mse", "l1", "cross_entropy")
REGULARIZERS = ("gaussian", "distance", "constant")
REDUCTIONS = ("mean", "sum")


def default_level_weights(k_max):
    """Halving weights (1/2)^(k-1) for levels k = 1..k_max."""
    return tuple(0.5 ** (k - 1) for k in range(1, k_max + 1))


@dataclass(frozen=True)
class SCLossConfig:
    """Hyperparameters of the spatial coherence loss.

    level_weights defaults to (1/2)^(k-1); a weight of exactly 0 removes that
    level from both the loss and its gradient.
    """

    k_max: int = 2
    alpha: float = 1.0
    single_response: str = "bce"
    regularizer: str = "gaussian"
    epsilon: float = 1e-7
    reduction: str = "mean"
    level_weights: Optional[Tuple[float, ...]] = None
    addon_weight: float = 1.0

    def validated(self) -> "SCLossConfig":
        """Return a copy with defaults filled in, raising ConfigError if invalid."""
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise ConfigError(f"k_max must be a positive integer, got {self.k_max}")
        if not (self.alpha > 0):
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if self.single_response not in SINGLE_RESPONSES:
            raise ConfigError(
                f"single_response must be one of {SINGLE_RESPONSES}, "
                f"got {self.single_response!r}"
            )
        if self.regularizer not in REGULARIZERS:
            raise ConfigError(
                f"regularizer must be one of {REGULARIZERS}, got {self.regularizer!r}"
            )
        if not (0.0 < self.epsilon < 0.5):
            raise ConfigError(f"epsilon must lie in (0, 0.5), got {self.epsilon}")
        if self.reduction not in REDUCTIONS:
            raise ConfigError(
                f"reduction must be one of {REDUCTIONS}, got {self.reduction!r}"
            )
        weights = self.level_weights
        if weights is None:
            weights = default_level_weights(int(self.k_max))
        weights = tuple(float(w) for w in weights)
        if len(weights) != self.k_max:
            raise ConfigError(
                f"level_weights must have exactly k_max={self.k_max} entries, "
                f"got {len(weights)}"
            )
        if any(w < 0 or not np.isfinite(w) for w in weights):
            raise ConfigError(f"level_weights must be finite and >= 0, got {weights}")
        if not np.isfinite(self.addon_weight):
            raise ConfigError(f"addon_weight must be finite, got {self.addon_weight}")
        return replace(self, k_max=int(self.k_max), level_weights=weights)


@dataclass(frozen=True)
class LossBreakdown:
    """Reduced loss value together with its per-pixel maps."""

    total: float
    loss_map: np.ndarray
    attention_map: np.ndarray
    per_level_totals: Tuple[float, ...]
    reduction: str

    @property
    def shape(self):
        return self.loss_map.shape
