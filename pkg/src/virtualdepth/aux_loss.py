"""Foreground/background weighted depth loss for the auxiliary depth head."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFinite, SizeMismatch

LAMBDA_FG = 2.5
LAMBDA_BG = 1.0


@dataclass(frozen=True)
class DepthLossBreakdown:
    fg_loss: float
    bg_loss: float
    total: float
    n_fg: int
    n_bg: int


def smooth_l1(residual, beta: float = 1.0):
    r = np.abs(np.asarray(residual, dtype=np.float64))
    if not np.all(np.isfinite(r)):
        raise NonFinite("smooth_l1 needs finite residuals")
    out = np.where(r < beta, 0.5 * r * r / beta, r - 0.5 * beta)
    return float(out) if out.ndim == 0 else out


def box_mask(labels, shape) -> np.ndarray:
    """Union of the labels' 2D boxes (pixel centres inside), DontCare excluded."""
    h, w = shape
    mask = np.zeros((h, w), dtype=bool)
    for lab in labels:
        if lab.is_dontcare:
            continue
        left, top, right, bottom = lab.bbox
        u0, u1 = max(math.ceil(left), 0), min(math.floor(right), w - 1)
        v0, v1 = max(math.ceil(top), 0), min(math.floor(bottom), h - 1)
        if u1 >= u0 and v1 >= v0:
            mask[v0 : v1 + 1, u0 : u1 + 1] = True
    return mask


def weighted_depth_loss(
    pred, gt, fg_mask, lambda_fg: float = LAMBDA_FG, lambda_bg: float = LAMBDA_BG, beta: float = 1.0
) -> DepthLossBreakdown:
    """Mean smooth-L1 over valid foreground and background pixels, weighted per region.

    Pixels where ``gt == 0`` carry no supervision; an empty region adds zero.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    fg_mask = np.asarray(fg_mask, dtype=bool)
    if pred.shape != gt.shape or fg_mask.shape != gt.shape:
        raise SizeMismatch(f"shapes differ: pred {pred.shape}, gt {gt.shape}, mask {fg_mask.shape}")
    valid = gt > 0
    fg = valid & fg_mask
    bg = valid & ~fg_mask
    n_fg, n_bg = int(fg.sum()), int(bg.sum())
    fg_loss = float(smooth_l1(pred[fg] - gt[fg], beta).sum() / n_fg) if n_fg else 0.0
    bg_loss = float(smooth_l1(pred[bg] - gt[bg], beta).sum() / n_bg) if n_bg else 0.0
    return DepthLossBreakdown(fg_loss, bg_loss, lambda_fg * fg_loss + lambda_bg * bg_loss, n_fg, n_bg)
