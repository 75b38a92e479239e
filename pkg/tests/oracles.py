"""Reference implementations that share no code with the package.

Each one solves the same problem by a different route: generic matrix
products instead of the rectified shortcuts, triangle meshes instead of
slab tests, pixel counting instead of polygon clipping, plain loops
instead of vectorised masks.
"""

import math

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve


# -- camera ----------------------------------------------------------------


def project_generic(point, m):
    """Full 3x4 multiply, no assumptions about the matrix form."""
    hom = np.asarray(m, dtype=np.float64) @ np.append(np.asarray(point, dtype=np.float64), 1.0)
    return hom[0] / hom[2], hom[1] / hom[2], hom[2]


def recover_generic(u, v, z, m):
    """Solve the two projection equations for (x, y) with a dense 2x2 solve."""
    m = np.asarray(m, dtype=np.float64)
    w = m[2, 0:3] @ [0.0, 0.0, z] + m[2, 3]  # assumes third row has no x/y terms
    a = np.array([[m[0, 0] - u * m[2, 0], m[0, 1] - u * m[2, 1]], [m[1, 0] - v * m[2, 0], m[1, 1] - v * m[2, 1]]])
    rhs = np.array([u * w - m[0, 2] * z - m[0, 3], v * w - m[1, 2] * z - m[1, 3]])
    x, y = np.linalg.solve(a, rhs)
    return np.array([x, y, z])


# -- boxes -----------------------------------------------------------------


def box_corners(dims, location, ry):
    """Corners from an explicit rotation of the local extents, KITTI convention."""
    h, w, l = dims
    x, y, z = location
    out = []
    for sx in (-0.5, 0.5):
        for sy in (0.0, -1.0):
            for sz in (-0.5, 0.5):
                lx, ly, lz = sx * l, sy * h, sz * w
                out.append((x + math.cos(ry) * lx + math.sin(ry) * lz, y + ly, z - math.sin(ry) * lx + math.cos(ry) * lz))
    return np.array(out)


def box_triangles(dims, location, ry):
    """12 triangles (two per face) of the oriented box."""
    c = box_corners(dims, location, ry)
    # index = 4 * ix + 2 * iy + iz with ix, iy, iz in {0, 1}
    faces = [
        (0, 1, 3, 2),  # x = -l/2
        (4, 5, 7, 6),  # x = +l/2
        (0, 1, 5, 4),  # bottom
        (2, 3, 7, 6),  # top
        (0, 2, 6, 4),  # z = -w/2
        (1, 3, 7, 5),  # z = +w/2
    ]
    tris = []
    for a, b, cc, d in faces:
        tris.append((c[a], c[b], c[cc]))
        tris.append((c[a], c[cc], c[d]))
    return np.array(tris)


def moller_trumbore(origin, direction, tri, eps=1e-14):
    """Ray parameter t of the hit with one triangle, or None."""
    v0, v1, v2 = tri
    e1, e2 = v1 - v0, v2 - v0
    p = np.cross(direction, e2)
    det = e1 @ p
    if abs(det) < eps:
        return None
    inv = 1.0 / det
    s = origin - v0
    a = (s @ p) * inv
    if a < 0 or a > 1:
        return None
    q = np.cross(s, e1)
    b = (direction @ q) * inv
    if b < 0 or a + b > 1:
        return None
    return (e2 @ q) * inv


def mesh_depth(u, v, m, triangles):
    """Nearest positive-z hit of the pixel ray with the triangle mesh (0 = miss)."""
    m = np.asarray(m, dtype=np.float64)
    # Ray through the pixel, parameterised by camera z: P [X; 1] = w [u; v; 1].
    origin = np.array([(u * m[2, 3] - m[0, 3]) / m[0, 0], (v * m[2, 3] - m[1, 3]) / m[1, 1], 0.0])
    direction = np.array([(u - m[0, 2]) / m[0, 0], (v - m[1, 2]) / m[1, 1], 1.0])
    best = 0.0
    for tri in triangles:
        t = moller_trumbore(origin, direction, tri)
        if t is not None and t > 0 and (best == 0.0 or t < best):
            best = t
    return best


def footprint(dims, location, ry):
    """BEV rectangle of a box as (x, z) vertices."""
    c = box_corners(dims, location, ry)
    bottom = c[[0, 1, 5, 4]]
    return bottom[:, [0, 2]]


def _row_span(poly, y):
    """[x_lo, x_hi] of a convex polygon on the horizontal line at y, or None."""
    xs = []
    n = len(poly)
    for i in range(n):
        (x0, y0), (x1, y1) = poly[i], poly[(i + 1) % n]
        if (y0 <= y <= y1) or (y1 <= y <= y0):
            if y0 == y1:
                xs += [x0, x1]
            else:
                xs.append(x0 + (y - y0) * (x1 - x0) / (y1 - y0))
    return (min(xs), max(xs)) if xs else None


def _count_centres(lo, hi, x0, dx, n):
    """Number of pixel centres x0 + (j + 0.5) dx, 0 <= j < n, inside [lo, hi]."""
    if lo > hi:
        return 0
    j_lo = max(math.ceil((lo - x0) / dx - 0.5), 0)
    j_hi = min(math.floor((hi - x0) / dx - 0.5), n - 1)
    return max(j_hi - j_lo + 1, 0)


def raster_iou(poly_a, poly_b, resolution=2000):
    """IoU by counting pixel centres of a resolution x resolution grid over both polygons.

    Rows are scanned one at a time; inside each row the covered centres are
    counted from the polygon's span, which is the same count a per-pixel
    point-in-polygon test would give.
    """
    pts = np.vstack([poly_a, poly_b])
    x0, y0 = pts.min(axis=0)
    x1, y1 = pts.max(axis=0)
    dx, dy = (x1 - x0) / resolution, (y1 - y0) / resolution
    na = nb = ni = 0
    for i in range(resolution):
        y = y0 + (i + 0.5) * dy
        sa, sb = _row_span(poly_a, y), _row_span(poly_b, y)
        if sa:
            na += _count_centres(sa[0], sa[1], x0, dx, resolution)
        if sb:
            nb += _count_centres(sb[0], sb[1], x0, dx, resolution)
        if sa and sb:
            ni += _count_centres(max(sa[0], sb[0]), min(sa[1], sb[1]), x0, dx, resolution)
    union = na + nb - ni
    return ni / union if union else 0.0


def voxel_iou_3d(a, b, n=200):
    """3D IoU by counting voxel centres; boxes are (dims, location, ry)."""
    ca, cb = box_corners(*a), box_corners(*b)
    pts = np.vstack([ca, cb])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    axes = [lo[k] + (np.arange(n) + 0.5) * (hi[k] - lo[k]) / n for k in range(3)]
    x, y, z = np.meshgrid(*axes, indexing="ij")

    def inside(box):
        (h, w, l), (bx, by, bz), ry = box
        dxp, dzp = x - bx, z - bz
        lx = math.cos(ry) * dxp - math.sin(ry) * dzp
        lz = math.sin(ry) * dxp + math.cos(ry) * dzp
        return (np.abs(lx) <= l / 2) & (np.abs(lz) <= w / 2) & (y <= by) & (y >= by - h)

    ia, ib = inside(a), inside(b)
    inter = np.count_nonzero(ia & ib)
    union = np.count_nonzero(ia | ib)
    return inter / union if union else 0.0


# -- loss ------------------------------------------------------------------


def scalar_depth_loss(pred, gt, fg, lambda_fg=2.5, lambda_bg=1.0):
    """Plain-loop weighted smooth-L1 (beta = 1)."""
    sum_fg = sum_bg = 0.0
    n_fg = n_bg = 0
    rows, cols = gt.shape
    for i in range(rows):
        for j in range(cols):
            g = float(gt[i, j])
            if g == 0.0:
                continue
            r = abs(float(pred[i, j]) - g)
            loss = 0.5 * r * r if r < 1.0 else r - 0.5
            if fg[i, j]:
                sum_fg += loss
                n_fg += 1
            else:
                sum_bg += loss
                n_bg += 1
    fg_term = sum_fg / n_fg if n_fg else 0.0
    bg_term = sum_bg / n_bg if n_bg else 0.0
    return lambda_fg * fg_term + lambda_bg * bg_term


# -- inpainting -------------------------------------------------------------


def laplace_fill(image, holes):
    """Solve the discrete Laplace equation on hole pixels with known pixels as boundary.

    Neighbours outside the image are replaced by the pixel itself
    (replicated edges), one sparse solve per channel.
    """
    h, w = holes.shape
    idx = -np.ones((h, w), dtype=np.int64)
    ys, xs = np.nonzero(holes)
    idx[ys, xs] = np.arange(len(ys))
    n = len(ys)
    out = image.astype(np.float64).copy()
    rows, cols, vals = [], [], []
    rhs = np.zeros((n, image.shape[2]))
    for k, (y, x) in enumerate(zip(ys, xs)):
        diag = 0.0
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            ny, nx = min(max(ny, 0), h - 1), min(max(nx, 0), w - 1)
            if (ny, nx) == (y, x):
                continue
            diag += 1.0
            if holes[ny, nx]:
                rows.append(k)
                cols.append(idx[ny, nx])
                vals.append(-1.0)
            else:
                rhs[k] += image[ny, nx]
        rows.append(k)
        cols.append(k)
        vals.append(diag)
    a = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    for c in range(image.shape[2]):
        out[ys, xs, c] = spsolve(a, rhs[:, c])
    return out


# -- AP --------------------------------------------------------------------


def pr_trace_ap(ranked_tp, n_gt, recall_points):
    """AP from an explicit precision/recall table, computed by hand-style loops."""
    table = []
    tp = fp = 0
    for hit in ranked_tp:
        tp += hit
        fp += not hit
        table.append((tp / n_gt, tp / (tp + fp)))
    total = 0.0
    for r in recall_points:
        candidates = [p for rec, p in table if rec >= r]
        total += max(candidates) if candidates else 0.0
    return 100.0 * total / len(recall_points)


# -- vectorised variants for the large acceptance sweeps -----------------------


def mesh_depth_many(us, vs, m, triangles):
    """``mesh_depth`` for many pixels at once; loops over triangles, not pixels."""
    m = np.asarray(m, dtype=np.float64)
    us = np.asarray(us, dtype=np.float64)
    vs = np.asarray(vs, dtype=np.float64)
    origin = np.stack([(us * m[2, 3] - m[0, 3]) / m[0, 0], (vs * m[2, 3] - m[1, 3]) / m[1, 1], np.zeros_like(us)], -1)
    direction = np.stack([(us - m[0, 2]) / m[0, 0], (vs - m[1, 2]) / m[1, 1], np.ones_like(us)], -1)
    best = np.full(us.shape, np.inf)
    for v0, v1, v2 in triangles:
        e1, e2 = v1 - v0, v2 - v0
        p = np.cross(direction, e2)
        det = p @ e1
        ok = np.abs(det) > 1e-14
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        s = origin - v0
        a = np.einsum("...k,...k->...", s, p) * inv
        q = np.cross(s, e1)
        b = np.einsum("...k,...k->...", direction, q) * inv
        t = (q @ e2) * inv
        hit = ok & (a >= 0) & (a <= 1) & (b >= 0) & (a + b <= 1) & (t > 0)
        best = np.where(hit & (t < best), t, best)
    return np.where(np.isfinite(best), best, 0.0)


def inside_convex(points, poly):
    """Points (N, 2) inside a convex polygon given in either winding."""
    poly = np.asarray(poly, dtype=np.float64)
    nxt = np.roll(poly, -1, axis=0)
    cross = (nxt[:, 0] - poly[:, 0]) * (points[:, None, 1] - poly[:, 1]) - (nxt[:, 1] - poly[:, 1]) * (
        points[:, None, 0] - poly[:, 0]
    )
    return np.all(cross >= 0, axis=1) | np.all(cross <= 0, axis=1)


def _row_spans(poly, ys):
    lo = np.full(ys.shape, np.inf)
    hi = np.full(ys.shape, -np.inf)
    n = len(poly)
    for i in range(n):
        (x0, y0), (x1, y1) = poly[i], poly[(i + 1) % n]
        if y0 == y1:
            continue
        t = (ys - y0) / (y1 - y0)
        on = (t >= 0) & (t <= 1)
        x = x0 + t * (x1 - x0)
        lo = np.where(on, np.minimum(lo, x), lo)
        hi = np.where(on, np.maximum(hi, x), hi)
    return lo, hi


def _count_many(lo, hi, x0, dx, n):
    j_lo = np.maximum(np.ceil((lo - x0) / dx - 0.5), 0)
    j_hi = np.minimum(np.floor((hi - x0) / dx - 0.5), n - 1)
    valid = np.isfinite(lo) & np.isfinite(hi) & (lo <= hi)
    return np.where(valid, np.maximum(j_hi - j_lo + 1, 0), 0).sum()


def raster_iou_fast(poly_a, poly_b, resolution=2000):
    """Same pixel-centre count as ``raster_iou``, all rows at once."""
    pts = np.vstack([poly_a, poly_b])
    x0, y0 = pts.min(axis=0)
    x1, y1 = pts.max(axis=0)
    dx, dy = (x1 - x0) / resolution, (y1 - y0) / resolution
    ys = y0 + (np.arange(resolution) + 0.5) * dy
    la, ha = _row_spans(np.asarray(poly_a), ys)
    lb, hb = _row_spans(np.asarray(poly_b), ys)
    na = _count_many(la, ha, x0, dx, resolution)
    nb = _count_many(lb, hb, x0, dx, resolution)
    ni = _count_many(np.maximum(la, lb), np.minimum(ha, hb), x0, dx, resolution)
    union = na + nb - ni
    return ni / union if union else 0.0
