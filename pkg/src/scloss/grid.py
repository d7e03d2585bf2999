"""Image-grid primitives: validation helpers, probability clamping, ring neighborhoods.

Grids are plain 2-D numpy arrays (row-major, float64 for probabilities and
field values, integer for labels). Positions are (row, col) tuples and
dimensions are (height, width) tuples.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, SCLossError

__all__ = [
    "check_dims",
    "check_pos",
    "check_probability_map",
    "check_label_map",
    "check_finite_field",
    "clamp_probabilities",
    "ring_offsets",
    "ring_neighbors",
]


def check_dims(dims):
    """Validate an (height, width) pair and return it as ints."""
    try:
        h, w = dims
    except (TypeError, ValueError):
        raise SCLossError(f"dims must be a (height, width) pair, got {dims!r}")
    h, w = int(h), int(w)
    if h < 1 or w < 1:
        raise SCLossError(f"dims must be positive, got {(h, w)}")
    return h, w


def check_pos(pos, dims):
    """Validate a (row, col) position against grid dimensions."""
    h, w = check_dims(dims)
    r, c = int(pos[0]), int(pos[1])
    if not (0 <= r < h and 0 <= c < w):
        raise SCLossError(f"position {(r, c)} out of bounds for {h}x{w} grid")
    return r, c


def check_probability_map(values, clamped_epsilon=None):
    """Validate a probability grid; returns a float64 array.

    With ``clamped_epsilon`` set, values must already lie in
    [epsilon, 1 - epsilon]; otherwise they must lie in [0, 1].
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise SCLossError(f"probability map must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SCLossError("probability map contains non-finite values")
    if clamped_epsilon is not None:
        lo, hi = clamped_epsilon, 1.0 - clamped_epsilon
    else:
        lo, hi = 0.0, 1.0
    if arr.size and (arr.min() < lo or arr.max() > hi):
        raise SCLossError(
            f"probability values outside [{lo}, {hi}]: "
            f"min={arr.min()}, max={arr.max()}"
        )
    return arr


def check_label_map(values, num_classes=2):
    """Validate an integer label grid with labels in [0, num_classes)."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise SCLossError(f"label map must be 2-D, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(np.asarray(arr, dtype=np.float64))
        if not np.array_equal(rounded, arr):
            raise SCLossError("label map values must be integers")
        arr = rounded.astype(np.int64)
    else:
        arr = arr.astype(np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
        raise SCLossError(
            f"labels must lie in [0, {num_classes - 1}], "
            f"got min={arr.min()}, max={arr.max()}"
        )
    return arr


def check_finite_field(values, name="field"):
    """Validate a real-valued grid is finite everywhere."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise SCLossError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SCLossError(f"{name} contains non-finite values")
    return arr


def check_same_shape(a, b):
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"grid shapes differ: {a.shape} vs {b.shape}"
        )


def clamp_probabilities(values, epsilon=1e-7):
    """Clip probabilities into [epsilon, 1 - epsilon].

    Values already inside the interval are returned unchanged, so the
    operation is exactly idempotent.
    """
    if not (0.0 < epsilon < 0.5):
        raise SCLossError(f"epsilon must lie in (0, 0.5), got {epsilon}")
    arr = check_probability_map(values)
    return np.clip(arr, epsilon, 1.0 - epsilon)


def ring_offsets(k):
    """(dr, dc) offsets at Chebyshev distance exactly k, in row-major order."""
    k = int(k)
    if k < 1:
        raise SCLossError(f"adjacency level must be >= 1, got {k}")
    offsets = []
    for dr in range(-k, k + 1):
        for dc in range(-k, k + 1):
            if max(abs(dr), abs(dc)) == k:
                offsets.append((dr, dc))
    return offsets


def ring_neighbors(pos, k, dims):
    """In-bounds pixels at Chebyshev distance exactly k from ``pos``.

    This is the boundary ring of the (2k+1) x (2k+1) patch centered at the
    pixel; an interior pixel has 8k of them. Order is the row-major scan of
    the ring.
    """
    h, w = check_dims(dims)
    r, c = check_pos(pos, dims)
    out = []
    for dr, dc in ring_offsets(k):
        nr, nc = r + dr, c + dc
        if 0 <= nr < h and 0 <= nc < w:
            out.append((nr, nc))
    return out
