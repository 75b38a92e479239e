"""Forward-warping renderer for virtual camera displacements along the optical axis.

Background pixels are carried by the sparse depth map through a 3x3
contextual image; foreground objects are carried by the depth of their
ground-truth box surfaces. Every write goes through a z-buffer keyed on the
projective weight ``w`` with a fixed tie-break, so outputs do not depend on
iteration order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import as_projection
from .errors import BehindCamera, SizeMismatch
from .geometry import Box3D, corners_3d
from .kitti_io import ObjectLabel
from .scene import filter_rendering

# Splats at or in front of this projective weight are discarded.
SPLAT_NEAR = 0.1

OFFSETS = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1)]
CENTER = 4


@dataclass
class ContextualImage:
    """(H, W, 27) colors: channel ``3 * k + c`` is color ``c`` of neighbour ``OFFSETS[k]``."""

    colors: np.ndarray
    valid: np.ndarray  # (H, W, 9)

    @property
    def shape(self):
        return self.colors.shape[:2]

    def offset(self, k: int) -> np.ndarray:
        return self.colors[..., 3 * k : 3 * k + 3]


@dataclass
class RenderOutput:
    rgb: np.ndarray  # (H, W, 3) uint8
    render_depth: np.ndarray  # (H, W) z in the virtual camera, 0 where empty
    zbuffer: np.ndarray  # (H, W) projective weight, inf where empty
    fg_mask: np.ndarray  # (H, W) bool

    @property
    def hole_mask(self) -> np.ndarray:
        return self.render_depth == 0


@dataclass
class Splats:
    """A batch of point writes destined for a z-buffer."""

    dst_u: np.ndarray
    dst_v: np.ndarray
    colors: np.ndarray  # (N, 3) uint8
    w: np.ndarray
    depth: np.ndarray  # z in the virtual camera
    src: np.ndarray  # linear source pixel index, used for tie-breaks
    priority: np.ndarray  # background: 0 for the centre sample, 1 otherwise; foreground: object index

    def __len__(self):
        return len(self.w)

    @classmethod
    def empty(cls) -> Splats:
        i = np.zeros(0, dtype=np.int64)
        f = np.zeros(0, dtype=np.float64)
        return cls(i, i, np.zeros((0, 3), dtype=np.uint8), f, f, i, i)

    @classmethod
    def concat(cls, items) -> Splats:
        items = [s for s in items if len(s)]
        if not items:
            return cls.empty()
        return cls(*(np.concatenate([getattr(s, f) for s in items]) for f in cls.__dataclass_fields__))


@dataclass
class SurfacePatch:
    """Box-surface depth on the pixel window ``[u0, u0 + w) x [v0, v0 + h)``; 0 = ray misses."""

    u0: int
    v0: int
    depth: np.ndarray

    def pixels(self):
        vv, uu = np.nonzero(self.depth > 0)
        return uu + self.u0, vv + self.v0, self.depth[vv, uu]


def unfold_context(rgb: np.ndarray) -> ContextualImage:
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w = rgb.shape[:2]
    padded = np.pad(rgb, ((1, 1), (1, 1), (0, 0)))
    ones = np.pad(np.ones((h, w), dtype=bool), 1)
    colors = np.empty((h, w, 27), dtype=np.uint8)
    valid = np.empty((h, w, 9), dtype=bool)
    for k, (dy, dx) in enumerate(OFFSETS):
        colors[..., 3 * k : 3 * k + 3] = padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        valid[..., k] = ones[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    return ContextualImage(colors, valid)


def reproject_pixels(u, v, z, P, dz):
    """Reproject pixels with depth ``z`` into the camera moved by ``dz``."""
    m = as_projection(P).matrix
    # Pixel ray in the reference camera: X = A + z * B.
    x = ((u - m[0, 2]) * z + u * m[2, 3] - m[0, 3]) / m[0, 0]
    y = ((v - m[1, 2]) * z + v * m[2, 3] - m[1, 3]) / m[1, 1]
    z_new = z + dz
    w = z_new + m[2, 3]
    with np.errstate(divide="ignore", invalid="ignore"):
        u_new = (m[0, 0] * x + m[0, 2] * z_new + m[0, 3]) / w
        v_new = (m[1, 1] * y + m[1, 2] * z_new + m[1, 3]) / w
    return u_new, v_new, w, z_new


def _round(a):
    return np.floor(a + 0.5).astype(np.int64)


def resolve(dest: np.ndarray, *keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pick one winner per destination: the lexicographically smallest ``keys`` tuple.

    Returns ``(unique destinations, index of the winning entry)``.
    """
    order = np.lexsort(tuple(reversed(keys)) + (dest,))
    dest_sorted = dest[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = dest_sorted[1:] != dest_sorted[:-1]
    return dest_sorted[first], order[first]


def _keep(splats: Splats, mask) -> Splats:
    return Splats(*(getattr(splats, f)[mask] for f in Splats.__dataclass_fields__))


def _clip_to_image(splats: Splats, shape) -> Splats:
    h, w = shape
    ok = (
        (splats.w > SPLAT_NEAR)
        & (splats.depth > SPLAT_NEAR)
        & (splats.dst_u >= 0)
        & (splats.dst_u < w)
        & (splats.dst_v >= 0)
        & (splats.dst_v < h)
    )
    return _keep(splats, ok)


def background_splats(ctx: ContextualImage, depth: np.ndarray, P, dz: float) -> Splats:
    h, w = ctx.shape
    if depth.shape != (h, w):
        raise SizeMismatch(f"depth {depth.shape} does not match image {(h, w)}")
    vs, us = np.nonzero(depth > 0)
    z = depth[vs, us].astype(np.float64)
    u_new, v_new, wt, z_new = reproject_pixels(us.astype(np.float64), vs.astype(np.float64), z, P, dz)
    ok = np.isfinite(u_new) & np.isfinite(v_new)
    ru = np.where(ok, _round(np.where(ok, u_new, 0)), -(10**9))
    rv = np.where(ok, _round(np.where(ok, v_new, 0)), -(10**9))
    src = vs.astype(np.int64) * w + us
    parts = []
    for k, (dy, dx) in enumerate(OFFSETS):
        sel = ctx.valid[vs, us, k]
        parts.append(
            Splats(
                dst_u=(ru + dx)[sel],
                dst_v=(rv + dy)[sel],
                colors=ctx.colors[vs[sel], us[sel], 3 * k : 3 * k + 3],
                w=wt[sel],
                depth=z_new[sel],
                src=src[sel],
                priority=np.full(int(sel.sum()), 0 if k == CENTER else 1, dtype=np.int64),
            )
        )
    return _clip_to_image(Splats.concat(parts), (h, w))


def _empty_output(shape) -> RenderOutput:
    h, w = shape
    return RenderOutput(
        rgb=np.zeros((h, w, 3), dtype=np.uint8),
        render_depth=np.zeros((h, w), dtype=np.float64),
        zbuffer=np.full((h, w), np.inf),
        fg_mask=np.zeros((h, w), dtype=bool),
    )


def splat_background(ctx: ContextualImage, depth: np.ndarray, P, dz: float) -> RenderOutput:
    """Render the contextual image into the camera displaced by ``dz``.

    Each valid-depth pixel is moved by its reprojection flow and all nine
    neighbour samples are written at the same relative offset around the
    destination, which densifies the sparse splat pattern.
    """
    out = _empty_output(ctx.shape)
    splats = background_splats(ctx, np.asarray(depth), P, dz)
    if len(splats):
        dest = splats.dst_v * ctx.shape[1] + splats.dst_u
        dest, win = resolve(dest, splats.w, splats.priority, splats.src)
        out.rgb.reshape(-1, 3)[dest] = splats.colors[win]
        out.render_depth.reshape(-1)[dest] = splats.depth[win]
        out.zbuffer.reshape(-1)[dest] = splats.w[win]
    return out


def _pixel_rays(us, vs, m):
    """Rays ``X = A + t B`` (t is camera z) for pixel centres."""
    a = np.stack(
        [(us * m[2, 3] - m[0, 3]) / m[0, 0], (vs * m[2, 3] - m[1, 3]) / m[1, 1], np.zeros_like(us)], axis=-1
    )
    b = np.stack([(us - m[0, 2]) / m[0, 0], (vs - m[1, 2]) / m[1, 1], np.ones_like(us)], axis=-1)
    return a, b


def box_surface_depth(box: Box3D, P, image_size) -> SurfacePatch:
    """Depth of the nearest box face along each pixel ray inside the viewport."""
    m = as_projection(P).matrix
    corners = corners_3d(box)
    cw = corners[:, 2] + m[2, 3]
    if np.any(cw <= 0):
        raise BehindCamera("box is not entirely in front of the camera")
    cu = (m[0, 0] * corners[:, 0] + m[0, 2] * corners[:, 2] + m[0, 3]) / cw
    cv = (m[1, 1] * corners[:, 1] + m[1, 2] * corners[:, 2] + m[1, 3]) / cw
    width, height = image_size
    u0 = max(int(np.ceil(cu.min())), 0)
    u1 = min(int(np.floor(cu.max())), width - 1)
    v0 = max(int(np.ceil(cv.min())), 0)
    v1 = min(int(np.floor(cv.max())), height - 1)
    if u1 < u0 or v1 < v0:
        return SurfacePatch(max(u0, 0), max(v0, 0), np.zeros((0, 0)))
    vv, uu = np.mgrid[v0 : v1 + 1, u0 : u1 + 1].astype(np.float64)
    a, b = _pixel_rays(uu, vv, m)

    # Slab test in the box frame.
    rot = box.rotation()
    center = box.center()
    la = (a - center) @ rot
    lb = b @ rot
    h, w, l = box.dims
    half = np.array([l / 2.0, h / 2.0, w / 2.0])
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-half - la) / lb
        t2 = (half - la) / lb
    parallel = np.abs(lb) < 1e-15
    inside = np.abs(la) <= half
    t_lo = np.where(parallel, np.where(inside, -np.inf, np.inf), np.minimum(t1, t2))
    t_hi = np.where(parallel, np.where(inside, np.inf, -np.inf), np.maximum(t1, t2))
    t_near = t_lo.max(axis=-1)
    t_far = t_hi.min(axis=-1)
    hit = (t_near <= t_far) & (t_near > 0) & (t_near + m[2, 3] > 0)
    return SurfacePatch(u0, v0, np.where(hit, t_near, 0.0))


def warp_foreground(rgb: np.ndarray, label: ObjectLabel, P, dz: float, obj_index: int = 0) -> Splats:
    """Carry the object's viewport pixels along the flow implied by its box surface."""
    h, w = rgb.shape[:2]
    patch = box_surface_depth(label.box, P, (w, h))
    us, vs, z = patch.pixels()
    if len(z) == 0:
        return Splats.empty()
    u_new, v_new, wt, z_new = reproject_pixels(us.astype(np.float64), vs.astype(np.float64), z, P, dz)
    n = len(z)
    splats = Splats(
        dst_u=_round(u_new),
        dst_v=_round(v_new),
        colors=np.asarray(rgb)[vs, us],
        w=wt,
        depth=z_new,
        src=vs.astype(np.int64) * w + us,
        priority=np.full(n, obj_index, dtype=np.int64),
    )
    return _clip_to_image(splats, (h, w))


def remove_objects(depth: np.ndarray, removable) -> np.ndarray:
    """Zero depth over each object's (image-clipped) 2D box."""
    out = np.array(depth, copy=True)
    h, w = out.shape
    for lab in removable:
        left, top, right, bottom = lab.bbox
        u0, u1 = max(int(np.ceil(left)), 0), min(int(np.floor(right)), w - 1)
        v0, v1 = max(int(np.ceil(top)), 0), min(int(np.floor(bottom)), h - 1)
        if u1 >= u0 and v1 >= v0:
            out[v0 : v1 + 1, u0 : u1 + 1] = 0
    return out


def compose(bg: RenderOutput, fg: Splats) -> RenderOutput:
    """Z-test foreground splats against each other and then against the background.

    A foreground splat replaces the background only when its ``w`` is
    strictly smaller; equal-``w`` foreground splats are ordered by source
    pixel, then object index.
    """
    out = RenderOutput(bg.rgb.copy(), bg.render_depth.copy(), bg.zbuffer.copy(), bg.fg_mask.copy())
    if len(fg) == 0:
        return out
    dest = fg.dst_v * bg.rgb.shape[1] + fg.dst_u
    dest, win = resolve(dest, fg.w, fg.src, fg.priority)
    zb = out.zbuffer.reshape(-1)
    wins = fg.w[win] < zb[dest]
    dest, win = dest[wins], win[wins]
    out.rgb.reshape(-1, 3)[dest] = fg.colors[win]
    out.render_depth.reshape(-1)[dest] = fg.depth[win]
    zb[dest] = fg.w[win]
    out.fg_mask.reshape(-1)[dest] = True
    return out


@dataclass
class FrameRender:
    output: RenderOutput
    renderable: list
    removable: list


def render_frame(rgb, depth, labels, P, dz: float) -> FrameRender:
    """Full background + foreground render of one frame, before inpainting."""
    h, w = rgb.shape[:2]
    if depth.shape != (h, w):
        raise SizeMismatch(f"depth {depth.shape} does not match image {(h, w)}")
    renderable, removable = filter_rendering(labels, P, (w, h))
    cleaned = remove_objects(depth, removable)
    bg = splat_background(unfold_context(rgb), cleaned, P, dz)
    fg = Splats.concat(warp_foreground(rgb, lab, P, dz, i) for i, lab in enumerate(renderable))
    return FrameRender(compose(bg, fg), renderable, removable)
