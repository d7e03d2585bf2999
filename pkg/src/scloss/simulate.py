"""Deterministic logit-field gradient descent on synthetic scenes.

A scene is a binary label field plus a per-pixel difficulty field in
[0, 1). Descent starts from logits z = 0 (p = 0.5) and updates

    z <- z - lr * (1 - difficulty) * dL/dz,

so difficulty attenuates how fast a pixel can learn, standing in for the
hard regions a capacity-limited model produces. Everything is a pure
function of (scene spec, sim config); trajectories are bitwise
reproducible.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import grid
from .config import SCLossConfig
from .errors import DivergenceError, SCLossError
from .gradient import grad_wrt_logits
from .loss import _single_map, image_loss

DIVERGENCE_LIMIT = 50.0

__all__ = [
    "ShapeSpec",
    "SceneSpec",
    "Scene",
    "SimConfig",
    "Snapshot",
    "Trajectory",
    "BoundaryFirstReport",
    "scene_from_toml",
    "build_scene",
    "region_masks",
    "run_descent",
    "assert_boundary_first",
]


@dataclass(frozen=True)
class ShapeSpec:
    """One rasterization primitive. Geometry keys depend on kind:

    disk: cx, cy, r;  rect: x0, y0, x1, y1 (inclusive);  ring: cx, cy,
    r_in, r_out. cx/x* are columns, cy/y* are rows.
    """

    kind: str
    geometry: Dict[str, float]
    label: int
    difficulty: float


@dataclass(frozen=True)
class SceneSpec:
    dims: Tuple[int, int]
    shapes: Tuple[ShapeSpec, ...]


@dataclass(frozen=True)
class Scene:
    labels: np.ndarray
    difficulty: np.ndarray


@dataclass(frozen=True)
class SimConfig:
    steps: int = 2000
    learning_rate: float = 0.5
    snapshot_every: int = 100
    seed: int = 0
    loss: Optional[SCLossConfig] = None
    baseline: str = "scloss"
    hard_threshold: float = 0.5

    def validated(self) -> "SimConfig":
        if self.steps < 1:
            raise SCLossError(f"steps must be >= 1, got {self.steps}")
        if self.snapshot_every < 1:
            raise SCLossError(
                f"snapshot_every must be >= 1, got {self.snapshot_every}"
            )
        if self.learning_rate < 0:
            raise SCLossError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.baseline not in ("scloss", "single_response_only"):
            raise SCLossError(f"unknown baseline mode {self.baseline!r}")
        loss = self.loss
        if loss is None:
            # Per-pixel descent: the summed loss keeps the step size
            # independent of image area.
            loss = SCLossConfig(reduction="sum")
        loss = loss.validated()
        return SimConfig(
            steps=int(self.steps),
            learning_rate=float(self.learning_rate),
            snapshot_every=int(self.snapshot_every),
            seed=int(self.seed),
            loss=loss,
            baseline=self.baseline,
            hard_threshold=float(self.hard_threshold),
        )


@dataclass(frozen=True)
class Snapshot:
    step: int
    prediction: np.ndarray
    attention: np.ndarray
    stats: Dict[str, float]


@dataclass(frozen=True)
class Trajectory:
    snapshots: Tuple[Snapshot, ...]
    final: Dict[str, float]
    labels: np.ndarray
    difficulty: np.ndarray


# ---------------------------------------------------------------------------
# scene construction


def scene_from_toml(text: str) -> SceneSpec:
    """Parse a scene document: a [scene] table plus repeated [[shape]]."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SCLossError(f"malformed scene TOML: {exc}") from exc
    try:
        scene = doc["scene"]
        dims = (int(scene["height"]), int(scene["width"]))
    except KeyError as exc:
        raise SCLossError(f"scene TOML missing key: {exc}") from exc
    shapes = []
    geometry_keys = {
        "disk": ("cx", "cy", "r"),
        "rect": ("x0", "y0", "x1", "y1"),
        "ring": ("cx", "cy", "r_in", "r_out"),
    }
    for raw in doc.get("shape", []):
        kind = raw.get("kind")
        if kind not in geometry_keys:
            raise SCLossError(f"unknown shape kind {kind!r}")
        try:
            geometry = {key: float(raw[key]) for key in geometry_keys[kind]}
            shapes.append(
                ShapeSpec(
                    kind=kind,
                    geometry=geometry,
                    label=int(raw["label"]),
                    difficulty=float(raw["difficulty"]),
                )
            )
        except KeyError as exc:
            raise SCLossError(f"shape table missing key: {exc}") from exc
    return SceneSpec(dims=dims, shapes=tuple(shapes))


def _shape_mask(shape: ShapeSpec, dims) -> np.ndarray:
    h, w = dims
    rows, cols = np.mgrid[0:h, 0:w]
    g = shape.geometry
    if shape.kind == "disk":
        dist_sq = (rows - g["cy"]) ** 2 + (cols - g["cx"]) ** 2
        return dist_sq <= g["r"] ** 2
    if shape.kind == "rect":
        return (
            (rows >= g["y0"]) & (rows <= g["y1"]) & (cols >= g["x0"]) & (cols <= g["x1"])
        )
    if shape.kind == "ring":
        dist_sq = (rows - g["cy"]) ** 2 + (cols - g["cx"]) ** 2
        return (dist_sq >= g["r_in"] ** 2) & (dist_sq <= g["r_out"] ** 2)
    raise SCLossError(f"unknown shape kind {shape.kind!r}")


def build_scene(spec: SceneSpec) -> Scene:
    """Rasterize shapes in order; later shapes overwrite earlier ones.

    Boundaries are inclusive (a pixel belongs to a disk iff its center
    distance is <= r). An empty shape list yields the all-background scene.
    """
    dims = grid.check_dims(spec.dims)
    labels = np.zeros(dims, dtype=np.int64)
    difficulty = np.zeros(dims, dtype=np.float64)
    for shape in spec.shapes:
        if shape.label not in (0, 1):
            raise SCLossError(f"shape label must be 0 or 1, got {shape.label}")
        if not (0.0 <= shape.difficulty < 1.0):
            raise SCLossError(
                f"shape difficulty must lie in [0, 1), got {shape.difficulty}"
            )
        mask = _shape_mask(shape, dims)
        if not mask.any():
            raise SCLossError(
                f"{shape.kind} shape does not intersect the {dims[0]}x{dims[1]} image"
            )
        labels[mask] = shape.label
        difficulty[mask] = shape.difficulty
    return Scene(labels=labels, difficulty=difficulty)


def region_masks(scene: Scene, hard_threshold: float = 0.5):
    """Boundary and core masks of the hard region {difficulty >= threshold}.

    Boundary pixels have at least one in-bounds level-1 neighbor outside
    the hard region. The core is the hard region eroded by three pixel
    layers (3 passes of a 3x3 erosion); a region thinner than 7 pixels has
    an empty core, which is reported with a warning by callers that need
    one.
    """
    if not (0.0 < hard_threshold):
        raise SCLossError(f"hard_threshold must be > 0, got {hard_threshold}")
    hard = scene.difficulty >= hard_threshold
    if not hard.any():
        raise SCLossError("hard region is empty at this threshold")

    h, w = hard.shape

    def erode(mask):
        # Pad with True: only in-bounds complement pixels erode the region,
        # matching the in-bounds border policy used everywhere else.
        padded = np.pad(mask, 1, constant_values=True)
        out = mask.copy()
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                out &= padded[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]
        return out

    boundary = hard & ~erode(hard)
    core = erode(erode(erode(hard)))
    return boundary, core


# ---------------------------------------------------------------------------
# descent


def _sigmoid(z):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def _baseline_grad(z, labels, cfg):
    p_raw = _sigmoid(z)
    p = np.clip(p_raw, cfg.epsilon, 1.0 - cfg.epsilon)
    _, ds = _single_map(cfg.single_response, p, labels)
    g = ds * p_raw * (1.0 - p_raw)
    if cfg.reduction == "mean":
        g = g / p.size
    saturated = (p_raw <= cfg.epsilon) | (p_raw >= 1.0 - cfg.epsilon)
    g[saturated] = 0.0
    return g


def _baseline_total(p, labels, cfg):
    s, _ = _single_map(cfg.single_response, p, labels)
    return float(s.mean() if cfg.reduction == "mean" else s.sum())


def _region_mean(values, mask):
    return float(values[mask].mean()) if mask.any() else float("nan")


def run_descent(scene: Scene, cfg: SimConfig) -> Trajectory:
    """Run the descent and record snapshots (including the initial state)."""
    cfg = cfg.validated()
    labels = scene.labels
    difficulty = scene.difficulty
    loss_cfg = cfg.loss
    rate = cfg.learning_rate * (1.0 - difficulty)

    hard = difficulty >= cfg.hard_threshold
    easy = ~hard
    if hard.any():
        boundary, core = region_masks(scene, cfg.hard_threshold)
    else:
        boundary = np.zeros_like(hard)
        core = np.zeros_like(hard)

    def observe(step, z):
        p = np.clip(_sigmoid(z), loss_cfg.epsilon, 1.0 - loss_cfg.epsilon)
        if cfg.baseline == "scloss":
            breakdown = image_loss(p, labels, loss_cfg)
            total = breakdown.total
            attention = breakdown.attention_map
        else:
            total = _baseline_total(p, labels, loss_cfg)
            attention = np.ones_like(p)
        err = np.abs(p - labels)
        stats = {
            "total_loss": total,
            "easy_mae": _region_mean(err, easy),
            "hard_mae": _region_mean(err, hard),
            "boundary_attention_mean": _region_mean(attention, boundary),
            "core_attention_mean": _region_mean(attention, core),
        }
        return Snapshot(step=step, prediction=p, attention=attention, stats=stats)

    z = np.zeros_like(difficulty)
    snapshots = [observe(0, z)]
    for step in range(1, cfg.steps + 1):
        if cfg.baseline == "scloss":
            g = grad_wrt_logits(z, labels, loss_cfg)
        else:
            g = _baseline_grad(z, labels, loss_cfg)
        z = z - rate * g
        if np.abs(z).max() > DIVERGENCE_LIMIT:
            raise DivergenceError(
                f"|logit| exceeded {DIVERGENCE_LIMIT} at step {step}; "
                "the descent diverged"
            )
        if step % cfg.snapshot_every == 0 or step == cfg.steps:
            snapshots.append(observe(step, z))

    last = snapshots[-1]
    final = {
        "steps": float(cfg.steps),
        "final_loss": last.stats["total_loss"],
        "final_mae": float(np.abs(last.prediction - labels).mean()),
        "final_easy_mae": last.stats["easy_mae"],
        "final_hard_mae": last.stats["hard_mae"],
    }
    return Trajectory(
        snapshots=tuple(snapshots),
        final=final,
        labels=labels,
        difficulty=difficulty,
    )


# ---------------------------------------------------------------------------
# boundary-first analysis


@dataclass(frozen=True)
class BoundaryFirstReport:
    status: str  # "pass" | "fail" | "inconclusive"
    mid_training_steps: Tuple[int, ...]
    attention_ordering_holds: bool
    boundary_median_crossing: float
    core_median_crossing: float
    detail: str


def _median_crossing(snapshots: Sequence[Snapshot], mask) -> float:
    """Median over the mask of the first snapshot step with p > 0.5."""
    steps = np.array([s.step for s in snapshots], dtype=np.float64)
    stack = np.stack([s.prediction for s in snapshots])
    crossed = stack > 0.5
    first = np.full(mask.shape, np.inf)
    any_crossed = crossed.any(axis=0)
    idx = crossed.argmax(axis=0)
    first[any_crossed] = steps[idx[any_crossed]]
    return float(np.median(first[mask]))


def assert_boundary_first(traj: Trajectory, boundary, core) -> BoundaryFirstReport:
    """Check that hard regions are learned boundary-first.

    Mid-training snapshots are those where the easy region is learned
    (easy MAE < 0.1) while the foreground-labeled core still sits below
    p = 0.5 on average. In every such snapshot the boundary's mean
    attention must exceed the core's, and the median p > 0.5 crossing step
    of the boundary must not come later than the core's.
    """
    if len(traj.snapshots) < 3:
        raise SCLossError("need at least 3 snapshots to assess ordering")
    if not boundary.any() or not core.any():
        return BoundaryFirstReport(
            status="inconclusive",
            mid_training_steps=(),
            attention_ordering_holds=False,
            boundary_median_crossing=float("nan"),
            core_median_crossing=float("nan"),
            detail="empty boundary or core mask",
        )
    fg_core = core & (traj.labels == 1)
    if not fg_core.any():
        return BoundaryFirstReport(
            status="inconclusive",
            mid_training_steps=(),
            attention_ordering_holds=False,
            boundary_median_crossing=float("nan"),
            core_median_crossing=float("nan"),
            detail="core has no foreground-labeled pixels",
        )

    window = [
        snap
        for snap in traj.snapshots
        if snap.stats["easy_mae"] < 0.1
        and float(snap.prediction[fg_core].mean()) < 0.5
    ]
    boundary_median = _median_crossing(traj.snapshots, boundary)
    core_median = _median_crossing(traj.snapshots, core)
    if not window:
        return BoundaryFirstReport(
            status="inconclusive",
            mid_training_steps=(),
            attention_ordering_holds=False,
            boundary_median_crossing=boundary_median,
            core_median_crossing=core_median,
            detail=(
                "no snapshot has the easy region learned while the core "
                "mean prediction is still below 0.5"
            ),
        )
    ordering = all(
        snap.stats["boundary_attention_mean"] > snap.stats["core_attention_mean"]
        for snap in window
    )
    crossing_ok = boundary_median <= core_median
    status = "pass" if (ordering and crossing_ok) else "fail"
    return BoundaryFirstReport(
        status=status,
        mid_training_steps=tuple(s.step for s in window),
        attention_ordering_holds=ordering,
        boundary_median_crossing=boundary_median,
        core_median_crossing=core_median,
        detail="" if status == "pass" else "see attention/crossing fields",
    )
