"""Exception types shared across the package."""


class SCLossError(ValueError):
    """Base class for all validation and numerical errors raised here."""


class ConfigError(SCLossError):
    """Invalid loss or simulation configuration."""


class DimensionMismatchError(SCLossError):
    """Prediction and label grids have different shapes."""


class DegenerateGeometryError(SCLossError):
    """A pixel has no in-bounds neighbors at a level with nonzero weight."""


class DivergenceError(RuntimeError):
    """Logit-field descent exceeded the divergence guard."""
