"""2D-3D anchors: box codec, target assignment, hard negative mining and NMS."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import recover_location
from .errors import BehindCamera
from .geometry import iou_2d_matrix, wrap_angle
from .kitti_io import ObjectLabel

__all__ = [
    "Anchor2D3D",
    "BoxPrediction",
    "DecodedBox",
    "decode",
    "encode",
    "wrap_angle",
    "assign_targets",
    "ohnm_select",
    "nms",
    "anchor_priors",
    "anchor_grid",
    "POSITIVE_IOU",
    "IGNORE_IOU",
    "NEGATIVE",
    "IGNORED",
]

NEAR_PLANE = 0.5
POSITIVE_IOU = 0.5
IGNORE_IOU = 0.5
OHNM_RATIO = 3
SCORE_THRESH = 0.75
NMS_IOU = 0.4

NEGATIVE = -1
IGNORED = -2


@dataclass(frozen=True)
class Anchor2D3D:
    w2d: float
    h2d: float
    w3d: float
    h3d: float
    l3d: float
    z: float
    theta: float

    def __post_init__(self):
        if min(self.w2d, self.h2d, self.w3d, self.h3d, self.l3d, self.z) <= 0:
            raise ValueError(f"anchor priors must be positive: {self}")
        if not -math.pi <= self.theta < math.pi:
            raise ValueError(f"anchor angle {self.theta} outside [-pi, pi)")


@dataclass(frozen=True)
class BoxPrediction:
    u2d: float = 0.0
    v2d: float = 0.0
    w2d: float = 0.0
    h2d: float = 0.0
    w3d: float = 0.0
    h3d: float = 0.0
    l3d: float = 0.0
    dz: float = 0.0
    theta: float = 0.0


@dataclass(frozen=True)
class DecodedBox:
    """Decoded detection. ``location`` is the 3D box centre; ``theta`` the observation angle."""

    b2d: tuple[float, float, float, float]  # centre x, centre y, w, h
    dims: tuple[float, float, float]  # h, w, l
    theta: float
    location: tuple[float, float, float]
    score: float = 1.0

    @property
    def xyxy(self) -> tuple[float, float, float, float]:
        cx, cy, w, h = self.b2d
        return (cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)

    def to_label(self, category: str = "Car") -> ObjectLabel:
        """KITTI label with bottom-centre location and ``rotation_y`` derived from the angle."""
        x, y, z = self.location
        h = self.dims[0]
        return ObjectLabel(
            category=category,
            truncation=0.0,
            occlusion=0,
            alpha=self.theta,
            bbox=self.xyxy,
            dims=self.dims,
            location=(x, y + h / 2.0, z),
            rotation_y=wrap_angle(self.theta + math.atan2(x, z)),
            score=self.score,
        )


def decode(anchor: Anchor2D3D, position, pred: BoxPrediction, P, score: float = 1.0) -> DecodedBox:
    """Turn regression outputs at grid ``position = (u, v)`` into a box.

    Sizes decode as ``anchor * exp(pred)`` so a zero prediction returns the
    prior; the angle adds and wraps; depth adds; x and y come from inverting
    the projection at the decoded 2D centre.
    """
    u, v = position
    z = anchor.z + pred.dz
    if z <= NEAR_PLANE:
        raise BehindCamera(f"decoded depth {z:.3f} m is inside the near plane")
    bx = u + anchor.w2d * pred.u2d
    by = v + anchor.h2d * pred.v2d
    bw = anchor.w2d * math.exp(pred.w2d)
    bh = anchor.h2d * math.exp(pred.h2d)
    dims = (anchor.h3d * math.exp(pred.h3d), anchor.w3d * math.exp(pred.w3d), anchor.l3d * math.exp(pred.l3d))
    loc = recover_location(bx, by, z, P)
    return DecodedBox(
        b2d=(bx, by, bw, bh),
        dims=dims,
        theta=wrap_angle(anchor.theta + pred.theta),
        location=(float(loc[0]), float(loc[1]), float(loc[2])),
        score=score,
    )


def encode(anchor: Anchor2D3D, position, target: DecodedBox) -> BoxPrediction:
    u, v = position
    bx, by, bw, bh = target.b2d
    h, w, l = target.dims
    return BoxPrediction(
        u2d=(bx - u) / anchor.w2d,
        v2d=(by - v) / anchor.h2d,
        w2d=math.log(bw / anchor.w2d),
        h2d=math.log(bh / anchor.h2d),
        w3d=math.log(w / anchor.w3d),
        h3d=math.log(h / anchor.h3d),
        l3d=math.log(l / anchor.l3d),
        dz=target.location[2] - anchor.z,
        theta=wrap_angle(target.theta - anchor.theta),
    )


def assign_targets(anchor_boxes, gt_boxes, ignore_boxes=()) -> np.ndarray:
    """Label each anchor with a GT index (positive), ``NEGATIVE`` or ``IGNORED``.

    All boxes are ``(x1, y1, x2, y2)``. Positive iff best IoU >= 0.5 (ties go
    to the lower GT index); otherwise ignored iff IoU > 0.5 with an ignore
    region; otherwise negative.
    """
    anchor_boxes = np.asarray(anchor_boxes, dtype=np.float64).reshape(-1, 4)
    labels = np.full(len(anchor_boxes), NEGATIVE, dtype=np.int64)
    gt = np.asarray(gt_boxes, dtype=np.float64).reshape(-1, 4)
    if len(gt):
        iou = iou_2d_matrix(anchor_boxes, gt)
        best = iou.argmax(axis=1)
        pos = iou[np.arange(len(anchor_boxes)), best] >= POSITIVE_IOU
        labels[pos] = best[pos]
    ign = np.asarray(ignore_boxes, dtype=np.float64).reshape(-1, 4)
    if len(ign):
        hit = (iou_2d_matrix(anchor_boxes, ign) > IGNORE_IOU).any(axis=1)
        labels[(labels == NEGATIVE) & hit] = IGNORED
    return labels


def ohnm_select(losses, labels, ratio: int = OHNM_RATIO) -> np.ndarray:
    """Indices of the hardest negatives, at most ``ratio`` per positive.

    Ties in loss go to the lower index. Positives are not returned; they are
    always kept by the caller.
    """
    losses = np.asarray(losses, dtype=np.float64)
    labels = np.asarray(labels)
    neg = np.flatnonzero(labels == NEGATIVE)
    n_pos = int((labels >= 0).sum())
    k = min(ratio * n_pos, len(neg))
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.argsort(-losses[neg], kind="stable")
    return np.sort(neg[order[:k]])


def nms(boxes, score_thresh: float = SCORE_THRESH, iou_thresh: float = NMS_IOU) -> list[DecodedBox]:
    """Keep boxes scoring above ``score_thresh``, then greedily drop 2D overlaps above ``iou_thresh``."""
    cand = [b for b in boxes if b.score > score_thresh]
    order = sorted(range(len(cand)), key=lambda i: -cand[i].score)
    if not order:
        return []
    xyxy = np.array([cand[i].xyxy for i in order])
    iou = iou_2d_matrix(xyxy, xyxy)
    kept = []
    for j in range(len(order)):
        if all(iou[j, i] <= iou_thresh for i in kept):
            kept.append(j)
    return [cand[order[j]] for j in kept]


def anchor_priors(labels, n_bins: int = 12) -> list[Anchor2D3D]:
    """Depth-binned anchor priors from label statistics.

    Objects are sorted by depth and split into ``n_bins`` equal-count bins;
    each bin contributes one anchor holding the bin means.
    """
    objs = sorted((lab for lab in labels if not lab.is_dontcare), key=lambda lab: lab.location[2])
    if not objs:
        return []
    anchors = []
    for chunk in np.array_split(np.arange(len(objs)), min(n_bins, len(objs))):
        group = [objs[i] for i in chunk]
        bbox = np.array([g.bbox for g in group])
        dims = np.array([g.dims for g in group])
        alpha = np.array([g.alpha for g in group])
        anchors.append(
            Anchor2D3D(
                w2d=float((bbox[:, 2] - bbox[:, 0]).mean()),
                h2d=float((bbox[:, 3] - bbox[:, 1]).mean()),
                h3d=float(dims[:, 0].mean()),
                w3d=float(dims[:, 1].mean()),
                l3d=float(dims[:, 2].mean()),
                z=float(np.mean([g.location[2] for g in group])),
                theta=wrap_angle(math.atan2(np.sin(alpha).mean(), np.cos(alpha).mean())),
            )
        )
    return anchors


def anchor_grid(anchors, feature_shape, stride: int):
    """2D anchor boxes at every feature cell centre.

    Returns ``(boxes, positions, anchor_index)`` with ``boxes`` as
    ``(N, 4)`` ``x1, y1, x2, y2`` in image pixels.
    """
    fh, fw = feature_shape
    cy, cx = np.mgrid[0:fh, 0:fw]
    centres = np.stack([(cx.ravel() + 0.5) * stride, (cy.ravel() + 0.5) * stride], axis=1)
    boxes, positions, index = [], [], []
    for k, a in enumerate(anchors):
        half = np.array([a.w2d / 2.0, a.h2d / 2.0])
        boxes.append(np.concatenate([centres - half, centres + half], axis=1))
        positions.append(centres)
        index.append(np.full(len(centres), k))
    return np.concatenate(boxes), np.concatenate(positions), np.concatenate(index)
