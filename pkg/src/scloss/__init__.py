"""Spatial coherence loss toolkit.

A per-pixel loss for dense binary (and multi-class) prediction that divides
a single-pixel response by a mutual-response-plus-regularization term over
ring neighborhoods, with analytic gradients, a finite-difference oracle, a
synthetic hard-region descent simulator, and saliency metrics.
"""

from .config import LossBreakdown, SCLossConfig, default_level_weights
from .errors import (
    ConfigError,
    DegenerateGeometryError,
    DimensionMismatchError,
    DivergenceError,
    SCLossError,
)
from .estimator import SpatialCoherenceLoss
from .gradient import GradReport, finite_diff_grad, grad_check, grad_wrt_logits, grad_wrt_probs
from .grid import clamp_probabilities, ring_neighbors
from .loss import (
    attention_map,
    bce_loss_map,
    combine_addon,
    image_loss,
    multiclass_image_loss,
    mutual_response,
    pairwise_regularizer,
    pixel_level_loss,
    pixel_loss,
    single_response,
)
from .metrics import MetricReport, adaptive_threshold, f_adp, f_max, f_measure, mae
from .simulate import (
    BoundaryFirstReport,
    Scene,
    SceneSpec,
    ShapeSpec,
    SimConfig,
    Trajectory,
    assert_boundary_first,
    build_scene,
    region_masks,
    run_descent,
    scene_from_toml,
)

__version__ = "0.1.0"

__all__ = [
    "SCLossConfig",
    "LossBreakdown",
    "SpatialCoherenceLoss",
    "default_level_weights",
    "clamp_probabilities",
    "ring_neighbors",
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
    "GradReport",
    "grad_wrt_probs",
    "grad_wrt_logits",
    "finite_diff_grad",
    "grad_check",
    "MetricReport",
    "mae",
    "adaptive_threshold",
    "f_measure",
    "f_adp",
    "f_max",
    "ShapeSpec",
    "SceneSpec",
    "Scene",
    "SimConfig",
    "Trajectory",
    "BoundaryFirstReport",
    "scene_from_toml",
    "build_scene",
    "region_masks",
    "run_descent",
    "assert_boundary_first",
    "SCLossError",
    "ConfigError",
    "DimensionMismatchError",
    "DegenerateGeometryError",
    "DivergenceError",
]
