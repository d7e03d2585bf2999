"""Command-line front end.

Subcommands: eval | compare | gradcheck | simulate | metrics | golden.
Exit codes: 0 success/pass, 1 check failed, 2 I/O or input error,
3 config error, 4 numerical divergence.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from .config import SCLossConfig
from .errors import ConfigError, DivergenceError, SCLossError
from .golden import write_golden_vector
from .gradient import grad_check
from .imageio import (
    load_loss_config,
    read_probability_image,
    write_pgm,
    write_raw_field,
)
from .loss import bce_loss_map, image_loss
from .simulate import (
    SimConfig,
    assert_boundary_first,
    build_scene,
    region_masks,
    run_descent,
    scene_from_toml,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_CONFIG = 3
EXIT_DIVERGED = 4


def _load_pair(pred_path, gt_path, soft_threshold):
    pred = read_probability_image(pred_path)
    gt_soft = read_probability_image(gt_path)
    if pred.shape != gt_soft.shape:
        raise SCLossError(
            f"image sizes differ: {pred_path} is {pred.shape}, "
            f"{gt_path} is {gt_soft.shape}"
        )
    if soft_threshold is None:
        exact = np.isin(gt_soft, (0.0, 1.0))
        if not exact.all():
            raise SCLossError(
                f"{gt_path}: ground truth is not binary (values other than "
                "0 and max found); pass --soft-gt-threshold to binarize"
            )
        gt = (gt_soft > 0.5).astype(np.int64)
    else:
        gt = (gt_soft > soft_threshold).astype(np.int64)
    return pred, gt


def _load_config(path):
    if path is None:
        return SCLossConfig().validated()
    return load_loss_config(path)


def _normalized_u8(field):
    lo, hi = float(field.min()), float(field.max())
    span = hi - lo
    if span == 0:
        scaled = np.zeros_like(field)
    else:
        scaled = (field - lo) / span
    return np.rint(scaled * 255).astype(np.int64), lo, hi


def _emit_field(path, field, raw):
    if raw:
        write_raw_field(path, field)
        return None
    values, lo, hi = _normalized_u8(field)
    write_pgm(path, values)
    return {"min": lo, "max": hi}


def cmd_eval(args):
    cfg = _load_config(args.config)
    pred, gt = _load_pair(args.pred, args.gt, args.soft_gt_threshold)
    breakdown = image_loss(pred, gt, cfg)
    if args.loss_map:
        _emit_field(args.loss_map, breakdown.loss_map, args.raw)
    if args.attention_map:
        _emit_field(args.attention_map, breakdown.attention_map, args.raw)
    print(
        json.dumps(
            {
                "total": breakdown.total,
                "per_level_totals": list(breakdown.per_level_totals),
                "reduction": breakdown.reduction,
                "config": dataclasses.asdict(cfg),
            },
            indent=1,
        )
    )
    return EXIT_OK


def cmd_compare(args):
    cfg = _load_config(args.config)
    pred, gt = _load_pair(args.pred, args.gt, args.soft_gt_threshold)
    breakdown = image_loss(pred, gt, cfg)
    bce = bce_loss_map(pred, gt, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sidecar = {}
    for name, field in (
        ("bce_map", bce),
        ("scloss_map", breakdown.loss_map),
        ("attention_map", breakdown.attention_map),
    ):
        values, lo, hi = _normalized_u8(field)
        write_pgm(out / f"{name}.pgm", values)
        sidecar[name] = {"min": lo, "max": hi}
    (out / "scales.json").write_text(json.dumps(sidecar, indent=1) + "\n")
    return EXIT_OK


def cmd_gradcheck(args):
    cfg = _load_config(args.config)
    dims = _parse_size(args.size)
    report = grad_check(
        seed=args.seed,
        dims=dims,
        cfg=cfg,
        trials=args.trials,
        step=args.step,
        tolerance=args.tol,
    )
    print(
        json.dumps(
            {
                "max_rel_error": report.max_rel_error,
                "max_abs_error": report.max_abs_error,
                "worst_pixel": list(report.worst_pixel),
                "trials": report.trials,
                "tolerance": report.tolerance,
                "pass": report.passed,
            },
            indent=1,
        )
    )
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_simulate(args):
    spec = scene_from_toml(Path(args.scene).read_text())
    scene = build_scene(spec)
    cfg = SimConfig(
        steps=args.steps,
        learning_rate=args.lr,
        snapshot_every=args.snapshot_every,
        seed=args.seed,
        loss=_load_config(args.config) if args.config else None,
        baseline=args.baseline,
        hard_threshold=args.hard_threshold,
    )
    traj = run_descent(scene, cfg)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    attention_stack = np.stack([s.attention for s in traj.snapshots])
    att_lo, att_hi = float(attention_stack.min()), float(attention_stack.max())
    span = att_hi - att_lo
    for snap in traj.snapshots:
        write_pgm(
            out / f"pred_{snap.step:06d}.pgm",
            np.rint(snap.prediction * 255).astype(np.int64),
        )
        if span == 0:
            norm = np.zeros_like(snap.attention)
        else:
            norm = (snap.attention - att_lo) / span
        write_pgm(
            out / f"attention_{snap.step:06d}.pgm",
            np.rint(norm * 255).astype(np.int64),
        )
    with open(out / "log.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "step",
                "total_loss",
                "easy_mae",
                "hard_mae",
                "boundary_attention_mean",
                "core_attention_mean",
            ]
        )
        for snap in traj.snapshots:
            writer.writerow(
                [
                    snap.step,
                    repr(snap.stats["total_loss"]),
                    repr(snap.stats["easy_mae"]),
                    repr(snap.stats["hard_mae"]),
                    repr(snap.stats["boundary_attention_mean"]),
                    repr(snap.stats["core_attention_mean"]),
                ]
            )

    hard_any = bool((scene.difficulty >= cfg.hard_threshold).any())
    if hard_any:
        boundary, core = region_masks(scene, cfg.hard_threshold)
    else:
        boundary = core = np.zeros_like(scene.labels, dtype=bool)
    report = assert_boundary_first(traj, boundary, core)

    def finite_or_none(value):
        return value if np.isfinite(value) else None

    (out / "boundary_first.json").write_text(
        json.dumps(
            {
                "status": report.status,
                "boundary_first": report.status == "pass",
                "mid_training_steps": list(report.mid_training_steps),
                "attention_ordering_holds": report.attention_ordering_holds,
                "boundary_median_crossing": finite_or_none(
                    report.boundary_median_crossing
                ),
                "core_median_crossing": finite_or_none(report.core_median_crossing),
                "detail": report.detail,
            },
            indent=1,
        )
        + "\n"
    )
    if report.status == "pass":
        return EXIT_OK
    if report.status == "inconclusive":
        return EXIT_CHECK_FAILED if args.strict else EXIT_OK
    return EXIT_CHECK_FAILED


def cmd_metrics(args):
    pred, gt = _load_pair(args.pred, args.gt, args.soft_gt_threshold)
    report = metrics_mod.evaluate(pred, gt)
    print(
        json.dumps(
            {
                "mae": report.mae,
                "f_adp": report.f_adp,
                "f_max": report.f_max,
                "adaptive_threshold": report.adaptive_threshold,
            },
            indent=1,
        )
    )
    return EXIT_OK


def cmd_golden(args):
    cfg = _load_config(args.config)
    dims = _parse_size(args.size)
    write_golden_vector(args.out, args.seed, dims, cfg)
    return EXIT_OK


def _parse_size(text):
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise SCLossError(f"size must look like 8x8, got {text!r}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="scloss",
        description="Spatial coherence loss toolkit: evaluation, gradients, "
        "simulation, metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_pair(p):
        p.add_argument("--pred", required=True, help="prediction image (.pgm/.png)")
        p.add_argument("--gt", required=True, help="ground-truth image (.pgm/.png)")
        p.add_argument(
            "--soft-gt-threshold",
            type=float,
            default=None,
            help="binarize non-exact ground truth at this probability",
        )

    p = sub.add_parser("eval", help="evaluate the loss on an image pair")
    add_pair(p)
    p.add_argument("--config", help="loss config TOML (defaults: K=2, alpha=1, bce, gaussian, mean)")
    p.add_argument("--loss-map", help="write the per-pixel loss map here")
    p.add_argument("--attention-map", help="write the attention map here")
    p.add_argument(
        "--raw",
        action="store_true",
        help="emit maps in the SCF1 raw float64 format instead of PGM",
    )
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser(
        "compare", help="write side-by-side single-response / coherence-loss maps"
    )
    add_pair(p)
    p.add_argument("--config")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference gradients")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--size", default="8x8")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--config")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("simulate", help="logit-field descent on a scene TOML")
    p.add_argument("--scene", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--snapshot-every", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--baseline",
        choices=("scloss", "single_response_only"),
        default="scloss",
    )
    p.add_argument("--hard-threshold", type=float, default=0.5)
    p.add_argument("--config", help="loss config TOML for the descent")
    p.add_argument(
        "--strict",
        action="store_true",
        help="treat an inconclusive boundary-first report as a failure",
    )
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("metrics", help="MAE and F-measures for an image pair")
    add_pair(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("golden", help="write a self-contained golden vector")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--size", default="8x8")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_golden)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (SCLossError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
