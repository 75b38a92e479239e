"""
Labels follow the camera
========================

Three small experiments with the label geometry: how 2D boxes scale with
depth, how a horizontal flip rewrites both the labels and the camera, and
why objects near the camera cannot be pulled arbitrarily close.

    python3 demos/02_geometry.py
"""

import math

import numpy as np

from virtualdepth.errors import TooClose
from virtualdepth.geometry import Box3D
from virtualdepth.kitti_io import ObjectLabel
from virtualdepth.scene import mirror_sample, observation_angle, project_box_2d, shift_label
from virtualdepth.synthetic import KITTI_P2

SIZE = (1248, 384)
P = KITTI_P2


def car(x, z, ry=0.3):
    box = Box3D((1.5, 1.6, 4.0), (x, 1.65, z), ry)
    bbox = project_box_2d(box, P, SIZE).bbox
    return ObjectLabel("Car", 0.0, 0, observation_angle(ry, x, z), bbox, box.dims, box.location, ry)


# 2D height against the pinhole prediction (z + p34) / (z + dz + p34).
lab = car(1.0, 15.0)
print("dz     height  predicted ratio  measured ratio")
for dz in (-5.0, 0.0, 5.0, 15.0, 30.0):
    moved = shift_label(lab, dz, P, SIZE)
    predicted = (15.0 + P.p34) / (15.0 + dz + P.p34)
    print(f"{dz:+5.1f}  {moved.height_2d:6.1f}  {predicted:15.3f}  {moved.height_2d / lab.height_2d:14.3f}")
# The measured ratio drifts from the prediction because the box has depth:
# its near face, not its centre, sets the 2D height.

# Mirroring negates x and flips the heading; the camera's p14 is rewritten
# so the same 3D point lands on the mirrored pixel column.
_, _, (m,), Pm = mirror_sample(np.zeros((SIZE[1], SIZE[0], 3), np.uint8), None, [lab], P)
print(f"\nmirror: x {lab.location[0]:+.2f} -> {m.location[0]:+.2f}, ry {lab.rotation_y:+.3f} -> {m.rotation_y:+.3f}")
print(f"        bbox left {lab.bbox[0]:.1f} -> right {m.bbox[2]:.1f} (W - 1 - left = {SIZE[0] - 1 - lab.bbox[0]:.1f})")
print(f"        p14 {P.matrix[0, 3]:.3f} -> {Pm.matrix[0, 3]:.3f}")

# Pulling a car closer than the near plane is refused rather than clamped.
near = car(0.0, 4.0, ry=math.pi / 2)
for dz in (-1.0, -2.0, -3.0):
    try:
        out = shift_label(near, dz, P, SIZE)
        print(f"\ndz={dz:+.1f}: car now at z={out.location[2]:.2f}, bbox height {out.height_2d:.1f}")
    except TooClose as exc:
        print(f"\ndz={dz:+.1f}: dropped ({exc})")
