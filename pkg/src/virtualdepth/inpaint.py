"""Hole filling for rendered frames.

The default filler is classical: a pull-push pyramid gives every hole a
coarse estimate, then Jacobi iterations of the 4-neighbour average relax
hole pixels towards a harmonic fill. Known pixels are never modified.
Anything with the ``(rgb, holes) -> rgb`` signature can replace it, for
instance :class:`ExternalInpainter`, which hands frames to a separate
program through PNG files.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np
from scipy import ndimage

from .errors import AllPixelsInvalid, InpainterFailed, SizeMismatch


@dataclass(frozen=True)
class InpaintConfig:
    max_iterations: int = 200
    convergence_epsilon: float = 0.5  # 8-bit color units
    pyramid_levels: int = 5

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")


class Inpainter(Protocol):
    def __call__(self, rgb: np.ndarray, holes: np.ndarray) -> np.ndarray: ...


def _pull(values: np.ndarray, weight: np.ndarray):
    """Halve resolution with a validity-weighted 2x2 box filter."""
    h, w = weight.shape
    ph, pw = h + (h & 1), w + (w & 1)
    vals = np.zeros((ph, pw, values.shape[2]))
    wts = np.zeros((ph, pw))
    vals[:h, :w] = values * weight[..., None]
    wts[:h, :w] = weight
    sum_v = vals.reshape(ph // 2, 2, pw // 2, 2, -1).sum(axis=(1, 3))
    sum_w = wts.reshape(ph // 2, 2, pw // 2, 2).sum(axis=(1, 3))
    with np.errstate(invalid="ignore", divide="ignore"):
        coarse = np.where(sum_w[..., None] > 0, sum_v / sum_w[..., None], 0.0)
    return coarse, np.minimum(sum_w, 1.0)


def _nearest_fill(values: np.ndarray, known: np.ndarray) -> np.ndarray:
    _, (iy, ix) = ndimage.distance_transform_edt(~known, return_indices=True)
    return values[iy, ix]


def _relax(values: np.ndarray, free: np.ndarray, cfg: InpaintConfig) -> np.ndarray:
    """Jacobi sweeps of the 4-neighbour mean over ``free`` pixels only."""
    if not free.any():
        return values
    # Work on the bounding window of the free pixels plus a one-pixel ring.
    rows = np.flatnonzero(free.any(axis=1))
    cols = np.flatnonzero(free.any(axis=0))
    r0, r1 = max(rows[0] - 1, 0), min(rows[-1] + 2, free.shape[0])
    c0, c1 = max(cols[0] - 1, 0), min(cols[-1] + 2, free.shape[1])
    cur = values[r0:r1, c0:c1].copy()
    mask = free[r0:r1, c0:c1]
    for _ in range(cfg.max_iterations):
        p = np.pad(cur, ((1, 1), (1, 1), (0, 0)), mode="edge")
        avg = 0.25 * (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:])
        delta = np.abs(avg[mask] - cur[mask]).max()
        cur[mask] = avg[mask]
        if delta < cfg.convergence_epsilon:
            break
    out = values.copy()
    out[r0:r1, c0:c1] = cur
    return out


def pull_push(values: np.ndarray, known: np.ndarray, cfg: InpaintConfig) -> np.ndarray:
    """Fill unknown pixels coarse to fine.

    Each pyramid level is relaxed before it is pushed to the next finer one,
    so low-frequency content is settled where it is cheap to do so.
    """
    pyramid = [(values, known.astype(np.float64))]
    for _ in range(cfg.pyramid_levels - 1):
        v, wt = pyramid[-1]
        if min(wt.shape) <= 1:
            break
        pyramid.append(_pull(v, wt))
    v, wt = pyramid[-1]
    filled = _nearest_fill(v, wt > 0) if np.any(wt <= 0) else v
    filled = _relax(filled, wt <= 0, cfg)
    for v, wt in reversed(pyramid[:-1]):
        h, w = wt.shape
        up = np.repeat(np.repeat(filled, 2, axis=0), 2, axis=1)[:h, :w]
        alpha = wt[..., None]
        filled = _relax(alpha * v + (1.0 - alpha) * up, wt <= 0, cfg)
    return filled


def fill_holes(rgb: np.ndarray, holes: np.ndarray, cfg: InpaintConfig = InpaintConfig()) -> np.ndarray:
    rgb = np.asarray(rgb)
    holes = np.asarray(holes, dtype=bool)
    if holes.shape != rgb.shape[:2]:
        raise SizeMismatch(f"mask {holes.shape} does not match image {rgb.shape[:2]}")
    if not holes.any():
        return rgb.copy()
    known = ~holes
    if not known.any():
        raise AllPixelsInvalid("cannot fill an image with no valid pixels")
    values = rgb.astype(np.float64)
    filled = pull_push(values, known, cfg)
    out = rgb.copy()
    out[holes] = np.clip(np.floor(filled[holes] + 0.5), 0, 255).astype(np.uint8)
    return out


class ClassicalInpainter:
    def __init__(self, cfg: InpaintConfig = InpaintConfig()):
        self.cfg = cfg

    def __call__(self, rgb, holes):
        return fill_holes(rgb, holes, self.cfg)


class ExternalInpainter:
    """Delegate filling to another program.

    ``command`` is a template with ``{image}``, ``{mask}`` and ``{output}``
    placeholders. The program reads an RGB PNG and a mask PNG (white =
    fill) and must write an RGB PNG of the same size. Known pixels of the
    result are reset to the input values.
    """

    def __init__(self, command: str, timeout: float = 60.0, workdir=None):
        self.command = command
        self.timeout = timeout
        self.workdir = workdir

    def __call__(self, rgb, holes):
        from .kitti_io import load_rgb, save_mask, save_rgb

        with tempfile.TemporaryDirectory(dir=self.workdir) as tmp:
            tmp = Path(tmp)
            paths = {"image": tmp / "image.png", "mask": tmp / "mask.png", "output": tmp / "output.png"}
            save_rgb(rgb, paths["image"])
            save_mask(holes, paths["mask"])
            args = [a.format(**{k: str(v) for k, v in paths.items()}) for a in shlex.split(self.command)]
            try:
                proc = subprocess.run(args, capture_output=True, timeout=self.timeout)
            except subprocess.TimeoutExpired as exc:
                raise InpainterFailed(f"inpainter timed out after {self.timeout}s") from exc
            except OSError as exc:
                raise InpainterFailed(f"cannot run inpainter: {exc}") from exc
            if proc.returncode != 0:
                raise InpainterFailed(
                    f"inpainter exited with {proc.returncode}: {proc.stderr.decode(errors='replace')[-500:]}"
                )
            if not paths["output"].exists():
                raise InpainterFailed("inpainter produced no output image")
            result = load_rgb(paths["output"])
        if result.shape != np.shape(rgb):
            raise InpainterFailed(f"inpainter returned shape {result.shape}, expected {np.shape(rgb)}")
        return np.where(np.asarray(holes, dtype=bool)[..., None], result, rgb).astype(np.uint8)
