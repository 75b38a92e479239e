"""Oriented 3D boxes and small convex-polygon helpers."""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from .errors import NonFinite


def wrap_angle(theta: float) -> float:
    """Map ``theta`` into ``[-pi, pi)``; values already in range are returned unchanged."""
    theta = float(theta)
    if not math.isfinite(theta):
        raise NonFinite(f"cannot wrap {theta}")
    if -math.pi <= theta < math.pi:
        return theta
    out = theta - 2.0 * math.pi * math.floor((theta + math.pi) / (2.0 * math.pi))
    # floor() can land exactly on the open end after rounding.
    if out >= math.pi:
        out -= 2.0 * math.pi
    if out < -math.pi:
        out = -math.pi
    return out


@dataclass(frozen=True)
class Box3D:
    """KITTI box: ``dims=(h, w, l)``, bottom-center ``location``, yaw about +y.

    At ``rotation_y = 0`` the length runs along camera x and the width along z.
    """

    dims: tuple[float, float, float]
    location: tuple[float, float, float]
    rotation_y: float

    def rotation(self) -> np.ndarray:
        c, s = np.cos(self.rotation_y), np.sin(self.rotation_y)
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])

    def center(self) -> np.ndarray:
        x, y, z = self.location
        return np.array([x, y - self.dims[0] / 2.0, z])


# Corner order: bottom face 0-3 then top face 4-7, same winding.
_UNIT_CORNERS = np.array(
    [
        [0.5, 0.0, 0.5],
        [0.5, 0.0, -0.5],
        [-0.5, 0.0, -0.5],
        [-0.5, 0.0, 0.5],
        [0.5, -1.0, 0.5],
        [0.5, -1.0, -0.5],
        [-0.5, -1.0, -0.5],
        [-0.5, -1.0, 0.5],
    ]
)


def corners_3d(box: Box3D) -> np.ndarray:
    """Return the (8, 3) corners; rows 0-3 lie on the bottom face ``y = location.y``."""
    h, w, l = box.dims
    local = _UNIT_CORNERS * np.array([l, h, w])
    return local @ box.rotation().T + np.asarray(box.location, dtype=np.float64)


def bev_corners(box: Box3D) -> np.ndarray:
    """Counter-clockwise (x, z) footprint of the box, shape (4, 2)."""
    pts = corners_3d(box)[:4][:, [0, 2]]
    return ensure_ccw(pts)


def polygon_area(poly: np.ndarray) -> float:
    """Signed shoelace area; positive for counter-clockwise vertex order."""
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def ensure_ccw(poly: np.ndarray) -> np.ndarray:
    return poly[::-1].copy() if polygon_area(poly) < 0 else poly


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain hull, counter-clockwise, no repeated end point."""
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    if len(pts) < 3:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def clip_convex(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of ``subject`` by convex CCW polygon ``clip``."""
    out = [tuple(p) for p in subject]
    n = len(clip)
    for i in range(n):
        if not out:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        inp, out = out, []

        def side(p):
            return ex * (p[1] - ay) - ey * (p[0] - ax)

        prev = inp[-1]
        s_prev = side(prev)
        for cur in inp:
            s_cur = side(cur)
            if s_cur >= 0:
                if s_prev < 0:
                    out.append(_intersect(prev, cur, s_prev, s_cur))
                out.append(cur)
            elif s_prev >= 0:
                out.append(_intersect(prev, cur, s_prev, s_cur))
            prev, s_prev = cur, s_cur
    return np.array(out, dtype=np.float64).reshape(-1, 2)


def _intersect(p, q, sp, sq):
    t = sp / (sp - sq)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def rect_polygon(left: float, top: float, right: float, bottom: float) -> np.ndarray:
    """Axis-aligned rectangle with positive shoelace area."""
    return np.array([[left, top], [right, top], [right, bottom], [left, bottom]], dtype=np.float64)


def iou_2d(a, b) -> float:
    """IoU of two ``(left, top, right, bottom)`` boxes."""
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return float(inter / union) if union > 0 else 0.0


def iou_2d_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between (N, 4) and (M, 4) ``x1, y1, x2, y2`` arrays."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(union > 0, inter / union, 0.0)
