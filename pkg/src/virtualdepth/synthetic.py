"""Procedural KITTI-format frames: road, facades and parked cars.

Used to build fixtures and demos without the real dataset. Every frame is
ray cast through the same projection model the renderer uses, so labels,
depth and pixels agree exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import ProjectionMatrix
from .geometry import Box3D, polygon_area, wrap_angle
from .kitti_io import ObjectLabel
from .renderer import _pixel_rays, box_surface_depth
from .scene import observation_angle, project_box_2d

# KITTI raw 2011_09_26, camera 2.
KITTI_P2 = ProjectionMatrix(
    [
        [721.5377, 0.0, 609.5593, 44.85728],
        [0.0, 721.5377, 172.854, 0.2163791],
        [0.0, 0.0, 1.0, 0.002745884],
    ]
)

CAMERA_HEIGHT = 1.65
WALL_Z = 60.0


@dataclass
class Frame:
    rgb: np.ndarray
    depth: np.ndarray  # sparse, quantised to 1/256 m
    dense_depth: np.ndarray
    labels: list
    P: ProjectionMatrix


def _hash_noise(a, b, seed):
    """Cheap deterministic value noise in [0, 1)."""
    h = np.sin(a * 12.9898 + b * 78.233 + seed * 37.719) * 43758.5453
    return h - np.floor(h)


def _car_boxes(rng, n_cars):
    boxes = []
    lanes = [-4.0, -0.5, 3.0, 6.5]
    tries = 0
    while len(boxes) < n_cars and tries < 200:
        tries += 1
        x = float(rng.choice(lanes) + rng.uniform(-0.6, 0.6))
        z = float(rng.uniform(7.0, 45.0))
        dims = (float(rng.uniform(1.4, 1.7)), float(rng.uniform(1.6, 1.9)), float(rng.uniform(3.6, 4.6)))
        ry = float(wrap_angle(rng.choice([math.pi / 2, -math.pi / 2, 0.0]) + rng.uniform(-0.25, 0.25)))
        box = Box3D(dims, (x, CAMERA_HEIGHT, z), ry)
        if all(abs(b.location[2] - z) > 6.0 or abs(b.location[0] - x) > 2.8 for b in boxes):
            boxes.append(box)
    return boxes


def make_frame(width=1248, height=384, P=KITTI_P2, n_cars=5, seed=0, lidar_rows=64, lidar_step=3) -> Frame:
    rng = np.random.default_rng(seed)
    m = P.matrix
    vv, uu = np.mgrid[0:height, 0:width].astype(np.float64)
    a, b = _pixel_rays(uu, vv, m)

    depth = np.full((height, width), WALL_Z)
    kind = np.zeros((height, width), dtype=np.int64)  # 0 wall, 1 road, 2+k car k
    with np.errstate(divide="ignore", invalid="ignore"):
        t_road = (CAMERA_HEIGHT - a[..., 1]) / b[..., 1]
    road = (b[..., 1] > 0) & (t_road > 0) & (t_road < depth)
    depth[road] = t_road[road]
    kind[road] = 1

    boxes = _car_boxes(rng, n_cars)
    car_pixels = []
    for k, box in enumerate(boxes):
        patch = box_surface_depth(box, P, (width, height))
        full = np.zeros((height, width))
        ph, pw = patch.depth.shape
        full[patch.v0 : patch.v0 + ph, patch.u0 : patch.u0 + pw] = patch.depth
        car_pixels.append(int((full > 0).sum()))
        nearer = (full > 0) & (full < depth)
        depth[nearer] = full[nearer]
        kind[nearer] = 2 + k

    pts = a + depth[..., None] * b
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    rgb = np.zeros((height, width, 3))

    wall = kind == 0
    block = np.floor(x / 6.0) + 101 * np.floor(y / 4.0)
    base = 0.35 + 0.4 * _hash_noise(block, 0.0, seed)
    window = ((np.mod(x, 2.0) < 1.1) & (np.mod(y, 3.0) < 1.4)).astype(float)
    for c, tint in enumerate((1.0, 0.85, 0.7)):
        rgb[..., c] = np.where(wall, (base * tint - 0.18 * window) * 255, rgb[..., c])

    is_road = kind == 1
    stripe = (np.abs(np.mod(x + 0.25, 3.5) - 0.25) < 0.12) & (np.mod(z, 6.0) < 3.0)
    grain = _hash_noise(np.floor(x * 8), np.floor(z * 8), seed)
    road_val = 90 + 25 * grain + 130 * stripe
    for c in range(3):
        rgb[..., c] = np.where(is_road, road_val, rgb[..., c])

    labels = []
    palette = rng.uniform(40, 230, size=(len(boxes), 3))
    for k, box in enumerate(boxes):
        sel = kind == 2 + k
        local = (pts[sel] - box.center()) @ box.rotation()
        rel = local / (np.array([box.dims[2], box.dims[0], box.dims[1]]) / 2.0)
        face = np.argmax(np.abs(rel), axis=1)
        shade = np.array([0.75, 1.0, 0.9])[face]
        upper = rel[:, 1] < -0.2
        color = palette[k][None, :] * shade[:, None]
        color[upper] *= 0.45
        rgb[sel] = color

        proj = project_box_2d(box, P, (width, height))
        visible = int(sel.sum()) / max(car_pixels[k], 1)
        occlusion = 0 if visible >= 0.8 else 1 if visible >= 0.5 else 2 if visible >= 0.2 else 3

        area = polygon_area(proj.hull)
        trunc = max(0.0, 1.0 - polygon_area(proj.clipped_hull) / area) if area > 0 else 1.0
        labels.append(
            ObjectLabel(
                category="Car",
                truncation=trunc,
                occlusion=occlusion,
                alpha=observation_angle(box.rotation_y, box.location[0], box.location[2]),
                bbox=proj.bbox,
                dims=box.dims,
                location=box.location,
                rotation_y=box.rotation_y,
            )
        )

    rgb = np.clip(np.floor(rgb + 0.5), 0, 255).astype(np.uint8)

    # LiDAR-like sampling: fixed beam rows below the horizon, jittered columns.
    sparse = np.zeros((height, width))
    horizon = int(m[1, 2])
    rows = np.unique(np.linspace(min(max(horizon - 40, 0), height - 1), height - 1, lidar_rows).astype(int))
    for r in rows:
        offset = int(rng.integers(0, lidar_step))
        cols = np.arange(offset, width, lidar_step)
        sparse[r, cols] = depth[r, cols]
    sparse = np.floor(sparse * 256.0 + 0.5) / 256.0
    return Frame(rgb=rgb, depth=sparse, dense_depth=depth, labels=labels, P=P)


def textured_plane(width, height, P, z: float, seed=0):
    """Fronto-parallel plane at depth ``z`` filling the view, with dense depth."""
    m = P.matrix
    vv, uu = np.mgrid[0:height, 0:width].astype(np.float64)
    x = ((uu - m[0, 2]) * z + uu * m[2, 3] - m[0, 3]) / m[0, 0]
    y = ((vv - m[1, 2]) * z + vv * m[2, 3] - m[1, 3]) / m[1, 1]
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0, 2 * np.pi, size=6)
    img = np.zeros((height, width, 3))
    for c in range(3):
        img[..., c] = (
            128
            + 60 * np.sin(2.3 * x + phases[c])
            + 50 * np.cos(1.7 * y + phases[c + 3])
            + 15 * np.sin(5.1 * (x + y))
        )
    rgb = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
    return rgb, np.full((height, width), float(z))
