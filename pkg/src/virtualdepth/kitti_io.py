"""Readers and writers for KITTI-format images, sparse depth and labels."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import CorruptFile, MalformedLine, UnsupportedBitDepth, ValueOutOfRange
from .geometry import Box3D

DEPTH_SCALE = 256.0
MAX_DEPTH = 65535 / DEPTH_SCALE
DONTCARE = "DontCare"


@dataclass(frozen=True)
class ObjectLabel:
    category: str
    truncation: float
    occlusion: int
    alpha: float
    bbox: tuple[float, float, float, float]  # left, top, right, bottom
    dims: tuple[float, float, float]  # h, w, l
    location: tuple[float, float, float]  # bottom center
    rotation_y: float
    score: float | None = None

    @property
    def is_dontcare(self) -> bool:
        return self.category == DONTCARE

    @property
    def box(self) -> Box3D:
        return Box3D(self.dims, self.location, self.rotation_y)

    @property
    def height_2d(self) -> float:
        return self.bbox[3] - self.bbox[1]

    def with_(self, **changes) -> ObjectLabel:
        return replace(self, **changes)


# -- depth -------------------------------------------------------------------


def _open_png(path) -> Image.Image:
    try:
        im = Image.open(path)
        im.load()
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
    return im


def load_depth(path) -> np.ndarray:
    """Load a 16-bit KITTI depth PNG as float64 meters (0 = invalid)."""
    im = _open_png(path)
    if im.mode not in ("I;16", "I;16B", "I"):
        raise UnsupportedBitDepth(f"{path}: expected 16-bit single channel PNG, got mode {im.mode}")
    raw = np.asarray(im)
    if im.mode == "I" and (raw.min() < 0 or raw.max() > 65535):
        raise UnsupportedBitDepth(f"{path}: values exceed 16-bit range")
    return raw.astype(np.float64) / DEPTH_SCALE


def depth_to_raw(depth: np.ndarray) -> np.ndarray:
    depth = np.asarray(depth, dtype=np.float64)
    if not np.all(np.isfinite(depth)) or np.any(depth < 0) or np.any(depth > MAX_DEPTH):
        raise ValueOutOfRange(f"depth must be finite and within [0, {MAX_DEPTH}] m")
    return np.floor(depth * DEPTH_SCALE + 0.5).astype(np.uint16)


def save_depth(depth: np.ndarray, path) -> None:
    Image.fromarray(depth_to_raw(depth)).save(path, format="PNG")


# -- rgb ---------------------------------------------------------------------


def load_rgb(path) -> np.ndarray:
    im = _open_png(path)
    if im.mode != "RGB":
        im = im.convert("RGB")
    return np.asarray(im, dtype=np.uint8).copy()


def save_rgb(rgb: np.ndarray, path) -> None:
    Image.fromarray(np.ascontiguousarray(rgb, dtype=np.uint8), mode="RGB").save(path, format="PNG")


def save_mask(mask: np.ndarray, path) -> None:
    Image.fromarray((np.asarray(mask, dtype=bool) * 255).astype(np.uint8), mode="L").save(path, format="PNG")


def load_mask(path) -> np.ndarray:
    return np.asarray(_open_png(path).convert("L")) > 127


def image_size(path) -> tuple[int, int]:
    """(width, height) without decoding pixel data."""
    try:
        with Image.open(path) as im:
            return im.size
    except (UnidentifiedImageError, OSError) as exc:
        raise CorruptFile(f"{path}: {exc}") from exc


# -- labels ------------------------------------------------------------------


def parse_labels(text: str) -> list[ObjectLabel]:
    labels = []
    for i, line in enumerate(text.splitlines()):
        fields = line.split()
        if not fields:
            continue
        if len(fields) not in (15, 16):
            raise MalformedLine(i, f"expected 15 or 16 fields, got {len(fields)}")
        try:
            nums = [float(f) for f in fields[1:]]
        except ValueError as exc:
            raise MalformedLine(i, str(exc)) from None
        if not all(math.isfinite(n) for n in nums):
            raise MalformedLine(i, "non-finite value")
        labels.append(
            ObjectLabel(
                category=fields[0],
                truncation=nums[0],
                occlusion=int(nums[1]),
                alpha=nums[2],
                bbox=tuple(nums[3:7]),
                dims=tuple(nums[7:10]),
                location=tuple(nums[10:13]),
                rotation_y=nums[13],
                score=nums[14] if len(nums) == 15 else None,
            )
        )
    return labels


def _fmt(value: float, decimals: int) -> str:
    s = f"{value:.{decimals}f}"
    # Avoid "-0.00", which some tools choke on.
    return s[1:] if s.startswith("-") and float(s) == 0 else s


def serialize_labels(labels, decimals: int = 2) -> str:
    """KITTI label text; ``decimals`` applies to every real-valued geometry field."""
    lines = []
    for lab in labels:
        parts = [lab.category, _fmt(lab.truncation, decimals), str(int(lab.occlusion)), _fmt(lab.alpha, decimals)]
        parts += [_fmt(v, decimals) for v in (*lab.bbox, *lab.dims, *lab.location)]
        parts.append(_fmt(lab.rotation_y, decimals))
        if lab.score is not None:
            parts.append(_fmt(lab.score, max(decimals, 4)))
        lines.append(" ".join(parts))
    return "".join(line + "\n" for line in lines)


def read_labels(path) -> list[ObjectLabel]:
    return parse_labels(Path(path).read_text())


def write_labels(labels, path, decimals: int = 2) -> None:
    Path(path).write_text(serialize_labels(labels, decimals))
