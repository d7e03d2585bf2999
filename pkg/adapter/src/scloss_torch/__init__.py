"""PyTorch adapter for the spatial coherence loss toolkit."""

from .config import AdapterConfig, AdapterConfigError, default_level_weights
from .functional import SpatialCoherenceLoss, sc_loss_backward, sc_loss_forward
from .golden import GoldenReport, load_vector, verify_golden

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig",
    "AdapterConfigError",
    "default_level_weights",
    "SpatialCoherenceLoss",
    "sc_loss_forward",
    "sc_loss_backward",
    "GoldenReport",
    "load_vector",
    "verify_golden",
    "__version__",
]
