"""Pinhole camera math for rectified KITTI-style projection matrices.

Points are arrays whose last axis is (x, y, z) in camera coordinates:
x right, y down, z forward, meters. All functions broadcast over leading
axes, so a single point and an (N, 3) cloud go through the same code.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import BehindCamera, MalformedNumber, MissingKey, NonPositiveDepth, NonRectifiedMatrix


@dataclass(frozen=True)
class Intrinsics:
    f_x: float
    f_y: float
    c_x: float
    c_y: float
    p14: float = 0.0
    p24: float = 0.0
    p34: float = 0.0

    def __post_init__(self):
        if not (self.f_x > 0 and self.f_y > 0):
            raise NonRectifiedMatrix(f"focal lengths must be positive, got {self.f_x}, {self.f_y}")

    def to_projection(self) -> ProjectionMatrix:
        return ProjectionMatrix(
            [
                [self.f_x, 0.0, self.c_x, self.p14],
                [0.0, self.f_y, self.c_y, self.p24],
                [0.0, 0.0, 1.0, self.p34],
            ]
        )


class ProjectionMatrix:
    """Immutable 3x4 rectified projection matrix.

    Rectified form means the third row is ``[0, 0, 1, p34]`` and the skew
    terms ``p12``/``p21`` are zero, so the matrix is fully described by an
    :class:`Intrinsics`.
    """

    __slots__ = ("_m",)

    def __init__(self, rows):
        m = np.array(rows, dtype=np.float64).reshape(3, 4)
        if not np.all(np.isfinite(m)):
            raise NonRectifiedMatrix("projection matrix has non-finite entries")
        if m[2, 0] != 0 or m[2, 1] != 0 or m[2, 2] != 1:
            raise NonRectifiedMatrix(f"third row must be [0, 0, 1, p34], got {m[2].tolist()}")
        if m[0, 1] != 0 or m[1, 0] != 0:
            raise NonRectifiedMatrix("skew terms p12/p21 must be zero")
        if not (m[0, 0] > 0 and m[1, 1] > 0):
            raise NonRectifiedMatrix("p11 and p22 must be positive")
        m.setflags(write=False)
        self._m = m

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    @property
    def p34(self) -> float:
        return float(self._m[2, 3])

    def intrinsics(self) -> Intrinsics:
        m = self._m
        return Intrinsics(
            f_x=float(m[0, 0]),
            f_y=float(m[1, 1]),
            c_x=float(m[0, 2]),
            c_y=float(m[1, 2]),
            p14=float(m[0, 3]),
            p24=float(m[1, 3]),
            p34=float(m[2, 3]),
        )

    def __eq__(self, other):
        return isinstance(other, ProjectionMatrix) and np.array_equal(self._m, other._m)

    def __hash__(self):
        return hash(self._m.tobytes())

    def __repr__(self):
        return f"ProjectionMatrix({self._m.tolist()})"


def as_projection(cam: ProjectionMatrix | Intrinsics) -> ProjectionMatrix:
    return cam.to_projection() if isinstance(cam, Intrinsics) else cam


def as_intrinsics(cam: ProjectionMatrix | Intrinsics) -> Intrinsics:
    return cam if isinstance(cam, Intrinsics) else cam.intrinsics()


_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def parse_calibration(text: str, key: str = "P2") -> ProjectionMatrix:
    """Read the ``<key>: v1 ... v12`` line of a KITTI calibration file."""
    for line in text.splitlines():
        name, sep, rest = line.partition(":")
        if not sep or name.strip() != key:
            continue
        fields = rest.split()
        if len(fields) != 12:
            raise MalformedNumber(f"{key}: expected 12 numbers, got {len(fields)}")
        for f in fields:
            if not _NUMBER.match(f):
                raise MalformedNumber(f"{key}: cannot parse {f!r}")
        return ProjectionMatrix(np.array([float(f) for f in fields]).reshape(3, 4))
    raise MissingKey(f"calibration has no {key!r} entry")


def format_calibration(P: ProjectionMatrix, key: str = "P2") -> str:
    values = " ".join(f"{v:.12e}" for v in P.matrix.ravel())
    return f"{key}: {values}\n"


def project(points, P: ProjectionMatrix | Intrinsics):
    """Project camera points to pixels.

    Returns ``(u, v, w)`` where ``w`` is the projective weight used for
    z-buffering. Raises :class:`BehindCamera` if any ``w <= 0``.
    """
    m = as_projection(P).matrix
    pts = np.asarray(points, dtype=np.float64)
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    w = m[2, 2] * z + m[2, 3]
    if np.any(w <= 0):
        raise BehindCamera("point has non-positive projective weight")
    u = (m[0, 0] * x + m[0, 1] * y + m[0, 2] * z + m[0, 3]) / w
    v = (m[1, 0] * x + m[1, 1] * y + m[1, 2] * z + m[1, 3]) / w
    return u, v, w


def recover_location(u, v, z, P: ProjectionMatrix | Intrinsics) -> np.ndarray:
    """Solve ``P [x, y, z, 1]^T = w [u, v, 1]^T`` for x and y at known z."""
    m = as_projection(P).matrix
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    w = z + m[2, 3]
    if np.any(w <= 0):
        raise BehindCamera("requested depth lies behind the camera")
    # Rectified form: the 2x2 system is diagonal.
    x = (u * w - m[0, 2] * z - m[0, 3]) / m[0, 0]
    y = (v * w - m[1, 2] * z - m[1, 3]) / m[1, 1]
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


def unproject(u, v, depth, intr: Intrinsics | ProjectionMatrix) -> np.ndarray:
    """Lift pixels with metric depth to camera points.

    With zero affine terms this is ``((u - c_x) d / f_x, (v - c_y) d / f_y, d)``;
    non-zero ``p14/p24/p34`` are inverted too so that ``project`` recovers
    ``(u, v)`` exactly.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if np.any(depth <= 0):
        raise NonPositiveDepth("unproject needs depth > 0")
    return recover_location(u, v, depth, as_projection(intr))
