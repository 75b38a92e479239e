"""Virtual-depth augmentation for monocular 3D detection.

Re-renders KITTI-style frames as if the camera moved along its optical
axis, shifts the 3D labels accordingly, and ships the detection math
(2D-3D anchors, weighted depth loss, rotated IoU and AP) needed to train
on and score the result.
"""

from .camera import Intrinsics, ProjectionMatrix, parse_calibration, project, recover_location, unproject
from .geometry import Box3D, corners_3d, wrap_angle
from .inpaint import InpaintConfig, fill_holes
from .kitti_io import ObjectLabel, load_depth, parse_labels, save_depth, serialize_labels
from .renderer import RenderOutput, render_frame
from .scene import shift_label

__version__ = "0.1.0"
