"""Command line entry point: ``augment``, ``validate``, ``score`` and ``render-one``.

Exit codes: 0 success, 1 per-frame failures, 2 fatal error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import kitti_io
from .camera import parse_calibration
from .errors import MalformedInput, VirtualDepthError
from .evaluation import DIFFICULTIES, evaluate
from .pipeline import (
    CALIB_DIR,
    CALIB_KEY,
    DEPTH_DIR,
    IMAGE_DIR,
    LABEL_DIR,
    AugmentConfig,
    augment,
    frame_paths,
    load_sample,
    synthesize,
)

EXIT_OK, EXIT_PARTIAL, EXIT_FATAL = 0, 1, 2
ANGLE_SLACK = 0.005  # half a unit of the default 2-decimal label precision

log = logging.getLogger("virtualdepth")


def load_config(path, overrides: dict | None = None) -> AugmentConfig:
    path = Path(path)
    raw = yaml.safe_load(path.read_text()) or {}
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a mapping")
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key in ("input_root", "output_root", "split"):
        if raw.get(key) is not None:
            p = Path(raw[key])
            raw[key] = p if p.is_absolute() else path.parent / p
    return AugmentConfig(**raw)


# -- validate -------------------------------------------------------------------


def label_problems(lab) -> list[str]:
    if lab.is_dontcare:
        return [] if lab.bbox[0] < lab.bbox[2] and lab.bbox[1] < lab.bbox[3] else ["degenerate DontCare box"]
    issues = []
    left, top, right, bottom = lab.bbox
    if not (left < right and top < bottom):
        issues.append(f"bad 2D box {lab.bbox}")
    if min(lab.dims) <= 0:
        issues.append(f"non-positive dims {lab.dims}")
    for name in ("alpha", "rotation_y"):
        a = getattr(lab, name)
        if not (-math.pi - ANGLE_SLACK <= a < math.pi + ANGLE_SLACK):
            issues.append(f"{name} {a} outside [-pi, pi)")
    if lab.occlusion not in (0, 1, 2, 3):
        issues.append(f"occlusion {lab.occlusion} not in 0..3")
    if not 0.0 <= lab.truncation <= 1.0:
        issues.append(f"truncation {lab.truncation} outside [0, 1]")
    return issues


def validate(root, split=None) -> dict[str, list[str]]:
    """Map frame id -> list of problems; frames without problems are omitted."""
    root = Path(root)
    if split is not None:
        frames = [s.strip() for s in Path(split).read_text().splitlines() if s.strip()]
    else:
        frames = sorted({p.stem for d in (IMAGE_DIR, DEPTH_DIR, CALIB_DIR, LABEL_DIR) for p in (root / d).glob("*.*")})
    report = {}
    for fid in frames:
        issues = []
        paths = frame_paths(root, fid)
        for key, p in paths.items():
            if not p.exists():
                issues.append(f"missing {key}: {p.relative_to(root).as_posix()}")
        size_rgb = size_depth = None
        if paths["image"].exists():
            try:
                size_rgb = kitti_io.load_rgb(paths["image"]).shape[1::-1]
            except VirtualDepthError as exc:
                issues.append(f"image: {exc}")
        if paths["depth"].exists():
            try:
                size_depth = kitti_io.load_depth(paths["depth"]).shape[::-1]
            except VirtualDepthError as exc:
                issues.append(f"depth: {exc}")
        if size_rgb and size_depth and size_rgb != size_depth:
            issues.append(f"size mismatch: image {size_rgb[0]}x{size_rgb[1]}, depth {size_depth[0]}x{size_depth[1]}")
        if paths["calib"].exists():
            try:
                parse_calibration(paths["calib"].read_text(), CALIB_KEY)
            except VirtualDepthError as exc:
                issues.append(f"calib: {exc}")
        if paths["label"].exists():
            try:
                for i, lab in enumerate(kitti_io.read_labels(paths["label"])):
                    issues += [f"label {i}: {msg}" for msg in label_problems(lab)]
            except VirtualDepthError as exc:
                issues.append(f"label: {exc}")
        if issues:
            report[fid] = issues
    return report


# -- score ----------------------------------------------------------------------


def load_label_dir(path, frames):
    out = []
    for fid in frames:
        p = Path(path) / f"{fid}.txt"
        try:
            out.append(kitti_io.read_labels(p) if p.exists() else [])
        except VirtualDepthError as exc:
            raise MalformedInput(f"{p}: {exc}") from exc
    return out


def score(gt_dir, det_dir, category="Car", thresholds=None, mode=40):
    gt_dir, det_dir = Path(gt_dir), Path(det_dir)
    if not gt_dir.is_dir():
        raise MalformedInput(f"ground-truth directory {gt_dir} does not exist")
    frames = sorted(p.stem for p in gt_dir.glob("*.txt"))
    gts = load_label_dir(gt_dir, frames)
    dets = load_label_dir(det_dir, frames) if det_dir.is_dir() else [[] for _ in frames]
    for frame in dets:
        for d in frame:
            if d.score is None:
                raise MalformedInput("detections need the 16th score field")
    return evaluate(dets, gts, category, thresholds, mode)


def format_table(table, mode) -> str:
    metrics = sorted({m for m, _ in table}, key=["2d", "bev", "3d"].index)
    lines = [f"AP{mode:<6}" + "".join(f"{lvl:>10}" for lvl in DIFFICULTIES)]
    for m in metrics:
        lines.append(f"{m:<8}" + "".join(f"{table[(m, lvl)]:>10.2f}" for lvl in DIFFICULTIES))
    return "\n".join(lines)


# -- commands -------------------------------------------------------------------


def cmd_augment(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed, "workers": args.workers})
    manifest = augment(cfg)
    for err in manifest["errors"]:
        log.warning("frame %s: %s", err["frame"], err["error"])
    return EXIT_PARTIAL if manifest["errors"] else EXIT_OK


def cmd_validate(args) -> int:
    root = Path(args.root)
    if not root.is_dir():
        print(f"{root}: not a directory", file=sys.stderr)
        return EXIT_FATAL
    report = validate(root, args.split)
    for fid, issues in report.items():
        for msg in issues:
            print(f"{fid}: {msg}")
    return EXIT_PARTIAL if report else EXIT_OK


def cmd_score(args) -> int:
    thresholds = {m: t for m, t in zip(args.metrics, args.iou)} if len(args.iou) > 1 else {
        m: args.iou[0] for m in args.metrics
    }
    table = score(args.gt, args.det, args.category, thresholds, args.mode)
    print(format_table(table, args.mode))
    return EXIT_OK


def cmd_render_one(args) -> int:
    overrides = {"seed": args.seed}
    cfg = load_config(args.config, overrides)
    sample = load_sample(cfg.input_root, args.frame)
    syn = synthesize(sample, args.dz, cfg.inpainter())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{args.frame}_dz{args.dz:+.2f}"
    kitti_io.save_rgb(syn.rgb, out / f"{stem}_rgb.png")
    kitti_io.save_rgb(syn.render.rgb, out / f"{stem}_raw.png")
    kitti_io.save_depth(np.minimum(syn.render.render_depth, kitti_io.MAX_DEPTH), out / f"{stem}_depth.png")
    kitti_io.save_mask(syn.render.hole_mask, out / f"{stem}_holes.png")
    kitti_io.save_mask(syn.render.fg_mask, out / f"{stem}_fg.png")
    kitti_io.write_labels(syn.labels, out / f"{stem}_label.txt", cfg.label_decimals)
    print(f"wrote {stem}_* to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="virtualdepth", description="Virtual-depth augmentation for KITTI-style data")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="synthesise displaced frames for a split")
    p.add_argument("config", help="YAML config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("validate", help="check a dataset tree")
    p.add_argument("root")
    p.add_argument("--split", help="file listing frame ids")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("score", help="AP of a detection directory against ground truth")
    p.add_argument("gt", help="ground-truth label directory")
    p.add_argument("det", help="detection label directory (16-field lines)")
    p.add_argument("--category", default="Car")
    p.add_argument("--metrics", nargs="+", default=["2d", "bev", "3d"], choices=["2d", "bev", "3d"])
    p.add_argument("--iou", nargs="+", type=float, default=[0.7], help="one threshold, or one per metric")
    p.add_argument("--mode", type=int, choices=[11, 40], default=40)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("render-one", help="render a single frame for debugging")
    p.add_argument("config")
    p.add_argument("frame")
    p.add_argument("--dz", type=float, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="render_one")
    p.set_defaults(func=cmd_render_one)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (VirtualDepthError, OSError, ValueError, TypeError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
