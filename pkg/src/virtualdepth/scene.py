"""Label geometry under a virtual camera displacement, plus the training filters."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import Intrinsics, ProjectionMatrix, as_projection, project
from .errors import BehindCamera, TooClose
from .geometry import Box3D, clip_convex, convex_hull, corners_3d, polygon_area, rect_polygon, wrap_angle
from .kitti_io import ObjectLabel

__all__ = [
    "Box3D",
    "BoxProjection",
    "corners_3d",
    "project_box_2d",
    "shift_label",
    "visibility",
    "visible_fraction",
    "filter_training",
    "filter_rendering",
    "mirror_sample",
    "mirror_projection",
    "observation_angle",
]

NEAR_PLANE = 0.5
MIN_HEIGHT = 16.0
MAX_HEIGHT = 256.0
TRAIN_MIN_VISIBILITY = 0.5
RENDER_MIN_VISIBILITY = 0.6
OCCLUSION_FACTOR = {0: 1.0, 1: 0.5, 2: 0.25, 3: 0.0}


@dataclass(frozen=True)
class BoxProjection:
    """Image-plane footprint of a 3D box.

    ``hull`` is the unclipped convex hull of the eight projected corners (the
    viewport); ``clipped_hull`` is its intersection with the image, and
    ``bbox`` the axis-aligned extent of ``clipped_hull``.
    """

    hull: np.ndarray
    clipped_hull: np.ndarray
    bbox: tuple[float, float, float, float]
    unclipped_bbox: tuple[float, float, float, float]

    @property
    def in_image_fraction(self) -> float:
        total = polygon_area(self.hull)
        return polygon_area(self.clipped_hull) / total if total > 0 else 0.0


def image_polygon(image_size) -> np.ndarray:
    width, height = image_size
    return rect_polygon(0.0, 0.0, width - 1.0, height - 1.0)


def project_box_2d(box: Box3D, P: ProjectionMatrix | Intrinsics, image_size) -> BoxProjection:
    """Project the 8 corners and clip the viewport to ``[0, W-1] x [0, H-1]``."""
    u, v, _ = project(corners_3d(box), P)  # raises BehindCamera
    hull = convex_hull(np.stack([u, v], axis=1))
    clipped = clip_convex(hull, image_polygon(image_size)) if len(hull) >= 3 else hull[:0]
    unclipped = (float(u.min()), float(v.min()), float(u.max()), float(v.max()))
    if len(clipped):
        bbox = (
            float(clipped[:, 0].min()),
            float(clipped[:, 1].min()),
            float(clipped[:, 0].max()),
            float(clipped[:, 1].max()),
        )
    else:
        bbox = (0.0, 0.0, 0.0, 0.0)
    return BoxProjection(hull=hull, clipped_hull=clipped, bbox=bbox, unclipped_bbox=unclipped)


def observation_angle(rotation_y: float, x: float, z: float) -> float:
    return wrap_angle(rotation_y - math.atan2(x, z))


def shift_label(label: ObjectLabel, dz: float, P, image_size) -> ObjectLabel:
    """Move a label ``dz`` meters along the optical axis and redo its 2D geometry.

    ``dz == 0`` returns the label untouched, so annotated 2D boxes survive
    the identity displacement. Raises :class:`TooClose` when any corner of
    the moved box is nearer than ``NEAR_PLANE`` or the box leaves the image.
    """
    if dz == 0 or label.is_dontcare:
        return label
    x, y, z = label.location
    moved = Box3D(label.dims, (x, y, z + dz), label.rotation_y)
    if corners_3d(moved)[:, 2].min() <= NEAR_PLANE:
        raise TooClose(f"box at z={z + dz:.2f} crosses the near plane")
    proj = project_box_2d(moved, P, image_size)
    area = polygon_area(proj.clipped_hull)
    if area <= 0:
        raise TooClose("shifted box falls outside the image")
    return label.with_(
        location=moved.location,
        alpha=observation_angle(label.rotation_y, x, z + dz),
        bbox=proj.bbox,
        truncation=max(0.0, 1.0 - area / polygon_area(proj.hull)),
    )


def visible_fraction(hull: np.ndarray, image_size) -> float:
    total = polygon_area(hull)
    if total <= 0:
        return 0.0
    return polygon_area(clip_convex(hull, image_polygon(image_size))) / total


def visibility(label: ObjectLabel, P, image_size) -> float:
    """In-image share of the projected viewport, discounted by the occlusion level."""
    if label.is_dontcare:
        return 0.0
    factor = OCCLUSION_FACTOR.get(int(label.occlusion), 0.0)
    if factor == 0.0:
        return 0.0
    try:
        proj = project_box_2d(label.box, P, image_size)
    except BehindCamera:
        return 0.0
    return proj.in_image_fraction * factor


def filter_training(labels, P, image_size):
    """Split labels into (kept, ignored); ignored ones become anchor ignore regions."""
    kept, ignored = [], []
    for lab in labels:
        h = lab.height_2d
        if (
            lab.is_dontcare
            or h < MIN_HEIGHT
            or h > MAX_HEIGHT
            or visibility(lab, P, image_size) < TRAIN_MIN_VISIBILITY
        ):
            ignored.append(lab)
        else:
            kept.append(lab)
    return kept, ignored


def filter_rendering(labels, P, image_size):
    """Split objects into (renderable, removable).

    Removable objects are truncated by the image border or poorly visible;
    their depth is erased and their area filled as background. DontCare
    regions belong to neither list.
    """
    renderable, removable = [], []
    for lab in labels:
        if lab.is_dontcare:
            continue
        if lab.truncation > 0 or visibility(lab, P, image_size) < RENDER_MIN_VISIBILITY:
            removable.append(lab)
        else:
            renderable.append(lab)
    return renderable, removable


def mirror_projection(P, width: int) -> ProjectionMatrix:
    """Projection of the horizontally flipped image.

    ``c_x -> (W-1) - c_x`` and ``p14 -> (W-1) p34 - p14``; the latter keeps
    ``u' = (W-1) - u`` exact when ``p34 != 0``.
    """
    m = as_projection(P).matrix.copy()
    m[0, 2] = (width - 1) - m[0, 2]
    m[0, 3] = (width - 1) * m[2, 3] - m[0, 3]
    return ProjectionMatrix(m)


def _mirror_label(lab: ObjectLabel, width: int) -> ObjectLabel:
    left, top, right, bottom = lab.bbox
    bbox = ((width - 1) - right, top, (width - 1) - left, bottom)
    if lab.is_dontcare:
        return lab.with_(bbox=bbox)
    x, y, z = lab.location
    return lab.with_(
        bbox=bbox,
        location=(-x, y, z),
        rotation_y=wrap_angle(math.pi - lab.rotation_y),
        alpha=wrap_angle(math.pi - lab.alpha),
    )


def mirror_sample(rgb, depth, labels, P):
    """Flip a whole sample left-right; applying it twice restores the input."""
    width = rgb.shape[1]
    if depth is not None and depth.shape[:2] != rgb.shape[:2]:
        raise ValueError("rgb and depth sizes differ")
    rgb_m = np.ascontiguousarray(rgb[:, ::-1])
    depth_m = None if depth is None else np.ascontiguousarray(depth[:, ::-1])
    return rgb_m, depth_m, [_mirror_label(lab, width) for lab in labels], mirror_projection(P, width)
