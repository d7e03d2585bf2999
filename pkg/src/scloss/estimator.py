"""Estimator-style front end with sklearn parameter conventions.

The loss has no fitted state; the class exists so it composes with
pipelines and grid searches that expect get_params / set_params, and so a
single configured object carries every evaluation surface (loss, maps,
gradients, additive hook).
"""

from __future__ import annotations

import inspect

from . import gradient as _gradient
from . import loss as _loss
from .config import SCLossConfig


class SpatialCoherenceLoss:
    """Configured spatial coherence loss over 2-D probability grids.

    Parameters mirror SCLossConfig; they are stored verbatim at
    construction and validated on first use, matching the sklearn
    estimator contract.
    """

    def __init__(
        self,
        k_max=2,
        alpha=1.0,
        single_response="bce",
        regularizer="gaussian",
        epsilon=1e-7,
        reduction="mean",
        level_weights=None,
        addon_weight=1.0,
    ):
        self.k_max = k_max
        self.alpha = alpha
        self.single_response = single_response
        self.regularizer = regularizer
        self.epsilon = epsilon
        self.reduction = reduction
        self.level_weights = level_weights
        self.addon_weight = addon_weight

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [name for name in sig.parameters if name != "self"]

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(
                    f"invalid parameter {name!r} for {type(self).__name__}"
                )
            setattr(self, name, value)
        return self

    def config(self) -> SCLossConfig:
        """Validated immutable configuration built from current parameters."""
        weights = self.level_weights
        if weights is not None:
            weights = tuple(weights)
        return SCLossConfig(
            k_max=self.k_max,
            alpha=self.alpha,
            single_response=self.single_response,
            regularizer=self.regularizer,
            epsilon=self.epsilon,
            reduction=self.reduction,
            level_weights=weights,
            addon_weight=self.addon_weight,
        ).validated()

    def evaluate(self, pred, labels):
        """Full LossBreakdown (total, loss map, attention map, per-level)."""
        return _loss.image_loss(pred, labels, self.config())

    def __call__(self, pred, labels):
        return self.evaluate(pred, labels).total

    def evaluate_multiclass(self, probs, labels):
        return _loss.multiclass_image_loss(probs, labels, self.config())

    def attention(self, pred, labels):
        return _loss.attention_map(pred, labels, self.config())

    def single_response_map(self, pred, labels):
        return _loss.bce_loss_map(pred, labels, self.config())

    def gradient(self, pred, labels):
        return _gradient.grad_wrt_probs(pred, labels, self.config())

    def gradient_wrt_logits(self, logits, labels):
        return _gradient.grad_wrt_logits(logits, labels, self.config())

    def combine(self, base_loss, sc_total):
        return _loss.combine_addon(base_loss, sc_total, self.config())
