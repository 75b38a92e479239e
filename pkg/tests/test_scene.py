import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from oracles import box_corners
from virtualdepth.camera import Intrinsics, project
from virtualdepth.errors import BehindCamera, NonFinite, TooClose
from virtualdepth.geometry import Box3D, corners_3d, wrap_angle
from virtualdepth.kitti_io import ObjectLabel
from virtualdepth.scene import (
    filter_rendering,
    filter_training,
    mirror_projection,
    mirror_sample,
    observation_angle,
    project_box_2d,
    shift_label,
    visibility,
)
from virtualdepth.synthetic import KITTI_P2

SIZE = (1248, 384)
finite = dict(allow_nan=False, allow_infinity=False)


def car(x=0.0, z=20.0, ry=0.0, occlusion=0, dims=(1.5, 1.6, 4.0), y=1.65, P=KITTI_P2, size=SIZE):
    box = Box3D(dims, (x, y, z), ry)
    proj = project_box_2d(box, P, size)
    return ObjectLabel("Car", 0.0, occlusion, observation_angle(ry, x, z), proj.bbox, dims, (x, y, z), ry)


# -- wrap_angle ------------------------------------------------------------------


def test_wrap_examples():
    assert wrap_angle(0.0) == 0.0
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2, abs=1e-15)
    assert wrap_angle(-math.pi - 0.1) == pytest.approx(math.pi - 0.1, abs=1e-15)
    assert wrap_angle(math.pi) == -math.pi
    assert wrap_angle(-math.pi) == -math.pi


def test_wrap_non_finite():
    with pytest.raises(NonFinite):
        wrap_angle(float("nan"))
    with pytest.raises(NonFinite):
        wrap_angle(float("inf"))


@given(st.floats(-1e4, 1e4, **finite))
def test_wrap_range_idempotent_periodic(t):
    w = wrap_angle(t)
    assert -math.pi <= w < math.pi
    assert wrap_angle(w) == w
    assert math.isclose(math.cos(w), math.cos(t), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(t), abs_tol=1e-9)
    assert abs(wrap_angle(t + 2 * math.pi) - w) < 1e-9 or abs(abs(wrap_angle(t + 2 * math.pi) - w) - 2 * math.pi) < 1e-9


# -- corners_3d --------------------------------------------------------------------


def test_axis_aligned_corners():
    c = corners_3d(Box3D((2.0, 2.0, 4.0), (0.0, 1.0, 10.0), 0.0))
    # KITTI: length along x at rotation_y = 0, width along z.
    assert sorted(set(np.round(c[:, 0], 12))) == [-2.0, 2.0]
    assert sorted(set(np.round(c[:, 2], 12))) == [9.0, 11.0]
    assert sorted(set(np.round(c[:, 1], 12))) == [-1.0, 1.0]
    assert np.all(c[:4, 1] == 1.0)  # bottom face first


def test_quarter_turn_swaps_extents():
    c = corners_3d(Box3D((2.0, 2.0, 4.0), (0.0, 1.0, 10.0), math.pi / 2))
    assert sorted(set(np.round(c[:, 0], 12))) == [-1.0, 1.0]
    assert sorted(set(np.round(c[:, 2], 12))) == [8.0, 12.0]


@given(
    st.tuples(st.floats(0.3, 5, **finite), st.floats(0.3, 5, **finite), st.floats(0.3, 12, **finite)),
    st.tuples(st.floats(-20, 20, **finite), st.floats(-3, 3, **finite), st.floats(1, 60, **finite)),
    st.floats(-math.pi, math.pi, exclude_max=True, **finite),
)
def test_edge_lengths_and_oracle(dims, loc, ry):
    c = corners_3d(Box3D(dims, loc, ry))
    h, w, l = dims
    # From every corner the other seven sit at the three edge lengths, the three face diagonals and the space diagonal.
    expected = sorted([h, w, l, math.hypot(h, w), math.hypot(h, l), math.hypot(w, l), math.sqrt(h * h + w * w + l * l)])
    for i in range(8):
        d = sorted(np.linalg.norm(c[j] - c[i]) for j in range(8) if j != i)
        np.testing.assert_allclose(d, expected, atol=1e-9)
    assert np.allclose(c[:4, 1], loc[1]) and np.allclose(c[4:, 1], loc[1] - h)
    oracle = box_corners(dims, loc, ry)
    assert all(np.min(np.linalg.norm(oracle - p, axis=1)) < 1e-9 for p in c)


# -- project_box_2d ----------------------------------------------------------------


def test_on_axis_box_symmetric():
    intr = Intrinsics(700.0, 700.0, 600.0, 180.0)
    proj = project_box_2d(Box3D((2.0, 2.0, 2.0), (0.0, 1.0, 10.0), 0.0), intr, (1200, 360))
    left, top, right, bottom = proj.unclipped_bbox
    assert (left + right) / 2 == pytest.approx(600.0, abs=1e-9)
    assert (top + bottom) / 2 == pytest.approx(180.0, abs=1e-9)


def test_doubling_depth_halves_height():
    intr = Intrinsics(700.0, 700.0, 600.0, 180.0)
    h1 = project_box_2d(Box3D((1.0, 1.0, 1.0), (0.0, 0.5, 40.0), 0.0), intr, (1200, 360)).bbox
    h2 = project_box_2d(Box3D((1.0, 1.0, 1.0), (0.0, 0.5, 80.0), 0.0), intr, (1200, 360)).bbox
    assert (h2[3] - h2[1]) / (h1[3] - h1[1]) == pytest.approx(0.5, rel=0.01)


def test_behind_camera_box():
    with pytest.raises(BehindCamera):
        project_box_2d(Box3D((1.0, 1.0, 1.0), (0.0, 0.5, -10.0), 0.0), KITTI_P2, SIZE)


def test_bbox_is_clipped_hull_extent():
    proj = project_box_2d(Box3D((1.5, 1.6, 4.0), (8.0, 1.65, 8.0), 0.4), KITTI_P2, SIZE)
    left, top, right, bottom = proj.bbox
    assert right == SIZE[0] - 1
    assert proj.unclipped_bbox[2] > right


# -- shift_label --------------------------------------------------------------------


def test_shift_zero_is_identity():
    lab = car(x=1.5, z=20.0, ry=0.3)
    assert shift_label(lab, 0.0, KITTI_P2, SIZE) is lab


def test_shift_hand_example():
    lab = car(x=1.5, z=20.0, ry=0.3)
    out = shift_label(lab, 4.0, KITTI_P2, SIZE)
    assert out.location == (1.5, 1.65, 24.0)
    assert out.alpha == pytest.approx(0.3 - math.atan2(1.5, 24.0), abs=1e-15)
    assert out.rotation_y == 0.3 and out.dims == lab.dims


def test_shift_height_follows_perspective():
    lab = car(x=0.0, z=30.0, dims=(0.5, 0.5, 0.5), y=0.25)
    for dz in (-5.0, 4.0, 10.0):
        out = shift_label(lab, dz, KITTI_P2, SIZE)
        ratio = out.height_2d / lab.height_2d
        expected = (30.0 + KITTI_P2.p34) / (30.0 + dz + KITTI_P2.p34)
        assert ratio == pytest.approx(expected, rel=0.02)


def test_shift_too_close():
    lab = car(x=0.0, z=3.0)  # nearest face at z = 2.2
    assert shift_label(lab, -1.69, KITTI_P2, SIZE).location[2] == pytest.approx(1.31)
    with pytest.raises(TooClose):
        shift_label(lab, -1.7, KITTI_P2, SIZE)


def test_shift_out_of_image():
    lab = car(x=12.0, z=5.5, ry=math.pi / 2)
    with pytest.raises(TooClose):
        shift_label(lab, -4.0, KITTI_P2, SIZE)


@given(
    st.floats(-10, 10, **finite),
    st.floats(8, 50, **finite),
    st.floats(-math.pi, math.pi, exclude_max=True, **finite),
    st.floats(-3, 8, **finite),
)
def test_shift_inverse_and_consistency(x, z, ry, dz):
    lab = car(x=x, z=z, ry=ry)
    assume(lab.bbox[2] - lab.bbox[0] > 1 and lab.bbox[3] - lab.bbox[1] > 1)
    try:
        first = shift_label(lab, 1.0, KITTI_P2, SIZE)  # bbox now comes from projection
        there = shift_label(first, dz, KITTI_P2, SIZE)
    except TooClose:
        return
    back = shift_label(there, -dz, KITTI_P2, SIZE)
    a = np.array([first.truncation, first.alpha, *first.bbox, *first.location, first.rotation_y])
    b = np.array([back.truncation, back.alpha, *back.bbox, *back.location, back.rotation_y])
    assert np.max(np.abs(a - b)) < 1e-9
    assert project_box_2d(there.box, KITTI_P2, SIZE).bbox == there.bbox


# -- visibility and filters -----------------------------------------------------------


def test_visibility_full_and_occluded():
    assert visibility(car(), KITTI_P2, SIZE) == 1.0
    assert visibility(car(occlusion=1), KITTI_P2, SIZE) == 0.5
    assert visibility(car(occlusion=2), KITTI_P2, SIZE) == 0.25
    assert visibility(car(occlusion=3), KITTI_P2, SIZE) == 0.0


def test_visibility_half_outside():
    # Principal point on the left border: an on-axis box straddles it symmetrically.
    intr = Intrinsics(700.0, 700.0, 0.0, 180.0)
    lab = car(x=0.0, z=10.0, y=1.0, dims=(2.0, 2.0, 2.0), P=intr, size=(640, 360))
    assert visibility(lab, intr, (640, 360)) == pytest.approx(0.5, abs=1e-12)


def test_visibility_monotone():
    vis = [visibility(car(x=x, z=12.0), KITTI_P2, SIZE) for x in np.linspace(0, 12, 25)]
    assert all(a >= b - 1e-12 for a, b in zip(vis, vis[1:]))
    assert vis[0] == 1.0 and vis[-1] < 0.5
    for x in (0.0, 6.0, 7.0):
        occl = [visibility(car(x=x, z=12.0, occlusion=o), KITTI_P2, SIZE) for o in range(4)]
        assert occl == sorted(occl, reverse=True)


def test_filter_training_examples():
    kept = car(z=20.0)
    assert 16 <= kept.height_2d <= 256
    tiny = kept.with_(bbox=(600.0, 100.0, 640.0, 115.0))
    hidden = car(z=20.0, occlusion=2)
    dc = kept.with_(category="DontCare")
    k, ign = filter_training([kept, tiny, hidden, dc], KITTI_P2, SIZE)
    assert k == [kept] and ign == [tiny, hidden, dc]


def test_filter_rendering_examples():
    good = car(z=20.0)
    truncated = good.with_(truncation=0.2)
    half = car(z=20.0, occlusion=1)
    k, rem = filter_rendering([good, truncated, half, good.with_(category="DontCare")], KITTI_P2, SIZE)
    assert k == [good] and rem == [truncated, half]


# -- mirroring -------------------------------------------------------------------------


def test_mirror_rotation_zero():
    lab = car(ry=0.0)
    _, _, (m,), _ = mirror_sample(np.zeros((384, 1248, 3), np.uint8), None, [lab], KITTI_P2)
    assert m.rotation_y == -math.pi
    assert m.location[0] == -lab.location[0]


def test_mirror_projection_flips_pixels():
    Pm = mirror_projection(KITTI_P2, 1248)
    rng = np.random.default_rng(3)
    pts = np.column_stack([rng.uniform(-20, 20, 200), rng.uniform(-2, 2, 200), rng.uniform(2, 60, 200)])
    u, v, _ = project(pts, KITTI_P2)
    um, vm, _ = project(pts * [-1, 1, 1], Pm)
    assert np.max(np.abs(um - (1247 - u))) < 1e-9 and np.max(np.abs(vm - v)) < 1e-12


@given(st.floats(-8, 8, **finite), st.floats(6, 50, **finite), st.floats(-math.pi, math.pi, exclude_max=True, **finite))
def test_mirror_bbox_consistent(x, z, ry):
    lab = car(x=x, z=z, ry=ry)
    assume(lab.bbox[2] > lab.bbox[0])  # some part inside the image
    _, _, (m,), Pm = mirror_sample(np.zeros((384, 1248, 3), np.uint8), None, [lab], KITTI_P2)
    got = project_box_2d(m.box, Pm, SIZE).bbox
    assert np.max(np.abs(np.subtract(got, m.bbox))) < 1e-6
    # mirrored alpha equals the alpha recomputed from the mirrored pose
    recomputed = observation_angle(m.rotation_y, m.location[0], m.location[2])
    assert abs(math.remainder(m.alpha - recomputed, 2 * math.pi)) < 1e-9


@given(st.floats(-8, 8, **finite), st.floats(6, 50, **finite), st.floats(-math.pi, math.pi, exclude_max=True, **finite))
def test_mirror_involution(x, z, ry):
    rng = np.random.default_rng(0)
    rgb = rng.integers(0, 256, (384, 1248, 3), dtype=np.uint8)
    depth = rng.uniform(0, 80, (384, 1248))
    labels = [car(x=x, z=z, ry=ry), car().with_(category="DontCare")]
    once = mirror_sample(rgb, depth, labels, KITTI_P2)
    r2, d2, l2, p2 = mirror_sample(*once)
    assert np.array_equal(r2, rgb) and np.array_equal(d2, depth)
    assert p2 == KITTI_P2 or np.max(np.abs(p2.matrix - KITTI_P2.matrix)) < 1e-9
    for a, b in zip(labels, l2):
        fa = np.array([a.alpha, *a.bbox, *a.location, a.rotation_y])
        fb = np.array([b.alpha, *b.bbox, *b.location, b.rotation_y])
        assert np.max(np.abs(fa - fb)) < 1e-9
