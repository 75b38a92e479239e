"""Rotated-box IoU and KITTI-style average precision."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import DegenerateBox
from .geometry import Box3D, bev_corners, clip_convex, iou_2d, polygon_area
from .kitti_io import ObjectLabel

EASY, MODERATE, HARD, NONE = "easy", "moderate", "hard", "none"
DIFFICULTIES = (EASY, MODERATE, HARD)

# (min 2D height px, max occlusion, max truncation)
DIFFICULTY_RULES = {
    EASY: (40.0, 0, 0.15),
    MODERATE: (25.0, 1, 0.30),
    HARD: (25.0, 2, 0.50),
}

# Ground truth of these classes neither counts nor penalises detections of the key class.
NEIGHBOR_CLASSES = {"Car": {"Van"}, "Pedestrian": {"Person_sitting"}}

DONTCARE_IOU = 0.5
_AREA_EPS = 1e-12


def _check(box: Box3D):
    if min(box.dims) <= 0:
        raise DegenerateBox(f"box dims must be positive, got {box.dims}")


def bev_intersection(a: Box3D, b: Box3D) -> float:
    _check(a)
    _check(b)
    inter = polygon_area(clip_convex(bev_corners(a), bev_corners(b)))
    return inter if inter > _AREA_EPS else 0.0


def iou_bev(a: Box3D, b: Box3D) -> float:
    inter = bev_intersection(a, b)
    area_a = a.dims[1] * a.dims[2]
    area_b = b.dims[1] * b.dims[2]
    return float(min(inter / (area_a + area_b - inter), 1.0))


def iou_3d(a: Box3D, b: Box3D) -> float:
    inter_bev = bev_intersection(a, b)
    # y grows downward; a box spans [y - h, y].
    ya0, ya1 = a.location[1] - a.dims[0], a.location[1]
    yb0, yb1 = b.location[1] - b.dims[0], b.location[1]
    overlap = max(0.0, min(ya1, yb1) - max(ya0, yb0))
    inter = inter_bev * overlap
    vol_a = a.dims[0] * a.dims[1] * a.dims[2]
    vol_b = b.dims[0] * b.dims[1] * b.dims[2]
    return float(min(inter / (vol_a + vol_b - inter), 1.0))


METRICS: dict[str, Callable[[ObjectLabel, ObjectLabel], float]] = {
    "2d": lambda d, g: iou_2d(d.bbox, g.bbox),
    "bev": lambda d, g: iou_bev(d.box, g.box),
    "3d": lambda d, g: iou_3d(d.box, g.box),
}


def difficulty(label: ObjectLabel) -> str:
    """Strictest KITTI level the object qualifies for, or ``"none"``."""
    for level in DIFFICULTIES:
        min_h, max_occ, max_trunc = DIFFICULTY_RULES[level]
        if label.height_2d >= min_h and label.occlusion <= max_occ and label.truncation <= max_trunc:
            return level
    return NONE


def _in_level(label: ObjectLabel, level: str | None) -> bool:
    if level is None:
        return True
    d = difficulty(label)
    return d != NONE and DIFFICULTIES.index(d) <= DIFFICULTIES.index(level)


def match_frame(dets, gts, category, iou_fn, iou_thresh, level=None):
    """Greedy score-ordered matching on one frame.

    Returns ``(scores, is_tp, n_gt)`` for the detections that count; ignored
    detections are dropped.
    """
    neighbors = NEIGHBOR_CLASSES.get(category, set())
    counted, ignored_gt, dontcare = [], [], []
    for g in gts:
        if g.is_dontcare:
            dontcare.append(g)
        elif g.category == category and _in_level(g, level):
            counted.append(g)
        elif g.category == category or g.category in neighbors:
            ignored_gt.append(g)
    pool = counted + ignored_gt
    n_counted = len(counted)
    used = [False] * len(pool)
    min_height = DIFFICULTY_RULES[level][0] if level else 0.0

    mine = [d for d in dets if d.category == category]
    mine.sort(key=lambda d: -(d.score if d.score is not None else 0.0))
    scores, is_tp = [], []
    for d in mine:
        best, best_iou = -1, iou_thresh
        for j, g in enumerate(pool):
            if used[j]:
                continue
            iou = iou_fn(d, g)
            if iou >= best_iou and (best < 0 or iou > best_iou):
                best, best_iou = j, iou
        score = d.score if d.score is not None else 0.0
        if best >= 0:
            used[best] = True
            if best < n_counted:
                scores.append(score)
                is_tp.append(True)
            continue
        if any(iou_2d(d.bbox, dc.bbox) > DONTCARE_IOU for dc in dontcare):
            continue
        if d.height_2d < min_height:
            continue
        scores.append(score)
        is_tp.append(False)
    return scores, is_tp, n_counted


def interpolated_ap(scores, is_tp, n_gt: int, mode: int = 40) -> float:
    """AP in percent from pooled detections, sampled at 11 or 40 recall points."""
    if n_gt == 0:
        return 0.0
    if mode == 11:
        points = np.arange(11) / 10
    elif mode == 40:
        points = np.arange(1, 41) / 40
    else:
        raise ValueError(f"mode must be 11 or 40, got {mode}")
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    tp = np.asarray(is_tp, dtype=bool)[order]
    if len(tp) == 0:
        return 0.0
    ctp = np.cumsum(tp)
    cfp = np.cumsum(~tp)
    precision = ctp / (ctp + cfp)
    recall = ctp / n_gt
    # max precision at recall >= r, as a suffix maximum
    best = np.maximum.accumulate(precision[::-1])[::-1]
    values = []
    for r in points:
        idx = np.searchsorted(recall, r, side="left")
        values.append(best[idx] if idx < len(recall) else 0.0)
    return float(100.0 * np.mean(values))


def average_precision(
    dets,
    gts,
    iou_fn: str | Callable = "3d",
    iou_thresh: float = 0.7,
    mode: int = 40,
    category: str = "Car",
    level: str | None = None,
) -> float:
    """AP over frames; ``dets`` and ``gts`` are parallel per-frame label lists."""
    if isinstance(iou_fn, str):
        iou_fn = METRICS[iou_fn]
    if len(dets) != len(gts):
        raise ValueError("dets and gts must list the same frames")
    all_scores, all_tp, n_gt = [], [], 0
    for d, g in zip(dets, gts):
        s, t, n = match_frame(d, g, category, iou_fn, iou_thresh, level)
        all_scores += s
        all_tp += t
        n_gt += n
    return interpolated_ap(all_scores, all_tp, n_gt, mode)


def evaluate(dets, gts, category: str = "Car", thresholds=None, mode: int = 40) -> dict:
    """AP table keyed by ``(metric, level)``."""
    if thresholds is None:
        thresholds = {"2d": 0.7, "bev": 0.7, "3d": 0.7}
    return {
        (metric, level): average_precision(dets, gts, metric, thr, mode, category, level)
        for metric, thr in thresholds.items()
        for level in DIFFICULTIES
    }
