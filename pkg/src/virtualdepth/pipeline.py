"""Dataset-level augmentation: sampling, per-frame synthesis, padding and output."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kitti_io
from .camera import ProjectionMatrix, format_calibration, parse_calibration
from .errors import TooClose, VirtualDepthError
from .inpaint import ClassicalInpainter, ExternalInpainter, InpaintConfig
from .renderer import RenderOutput, remove_objects, render_frame, reproject_pixels
from .scene import mirror_sample, shift_label

log = logging.getLogger(__name__)

IMAGE_DIR, DEPTH_DIR, CALIB_DIR, LABEL_DIR = "images", "depth", "calib", "label"
CALIB_KEY = "P2"


@dataclass
class AugmentConfig:
    input_root: Path
    output_root: Path
    split: Path | None = None
    seed: int = 0
    n_pos_samples: int = 2
    pos_range: tuple[float, float] = (0.0, 5.0)
    n_neg_samples: int = 1
    neg_range: tuple[float, float] = (-1.0, 0.0)
    mirror_prob: float = 0.25
    pad_to: tuple[int, int] | None = (384, 1248)  # (height, width)
    workers: int = 1
    label_decimals: int = 6
    inpaint: InpaintConfig = field(default_factory=InpaintConfig)
    external_inpainter: str | None = None

    def __post_init__(self):
        self.input_root = Path(self.input_root)
        self.output_root = Path(self.output_root)
        self.split = Path(self.split) if self.split else None
        self.pos_range = tuple(float(v) for v in self.pos_range)
        self.neg_range = tuple(float(v) for v in self.neg_range)
        if self.pad_to is not None:
            self.pad_to = tuple(int(v) for v in self.pad_to)
        if isinstance(self.inpaint, dict):
            self.inpaint = InpaintConfig(**self.inpaint)
        if not (self.pos_range[0] <= self.pos_range[1] and self.neg_range[0] <= self.neg_range[1]):
            raise ValueError("displacement ranges must be ordered (low, high)")
        if self.n_pos_samples < 0 or self.n_neg_samples < 0 or self.workers < 1:
            raise ValueError("sample counts must be >= 0 and workers >= 1")
        if not 0.0 <= self.mirror_prob <= 1.0:
            raise ValueError("mirror_prob must lie in [0, 1]")

    def inpainter(self):
        if self.external_inpainter:
            return ExternalInpainter(self.external_inpainter)
        return ClassicalInpainter(self.inpaint)

    def public(self) -> dict:
        """Settings that determine outputs, without machine-specific paths."""
        return {
            "seed": self.seed,
            "n_pos_samples": self.n_pos_samples,
            "pos_range": list(self.pos_range),
            "n_neg_samples": self.n_neg_samples,
            "neg_range": list(self.neg_range),
            "mirror_prob": self.mirror_prob,
            "pad_to": list(self.pad_to) if self.pad_to else None,
            "label_decimals": self.label_decimals,
            "inpaint": asdict(self.inpaint),
            "external_inpainter": self.external_inpainter,
        }


@dataclass
class Sample:
    frame_id: str
    rgb: np.ndarray
    depth: np.ndarray
    labels: list
    P: ProjectionMatrix


@dataclass
class Synthesis:
    rgb: np.ndarray
    render: RenderOutput
    labels: list
    dropped: list[int]


# -- sampling ---------------------------------------------------------------


def frame_rng(seed: int, frame_id: str) -> np.random.Generator:
    """Generator that depends only on ``(seed, frame_id)``."""
    digest = hashlib.sha256(frame_id.encode()).digest()
    return np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), int.from_bytes(digest[:8], "little")]))


def sample_displacements(rng: np.random.Generator, cfg: AugmentConfig | None = None) -> list[float]:
    """``n_pos`` draws from ``pos_range`` followed by ``n_neg`` from ``neg_range`` (half-open)."""
    if cfg is None:
        n_pos, pos, n_neg, neg = 2, (0.0, 5.0), 1, (-1.0, 0.0)
    else:
        n_pos, pos, n_neg, neg = cfg.n_pos_samples, cfg.pos_range, cfg.n_neg_samples, cfg.neg_range
    out = [float(rng.uniform(*pos)) for _ in range(n_pos)]
    out += [float(rng.uniform(*neg)) for _ in range(n_neg)]
    return out


# -- per-frame work -----------------------------------------------------------


def frame_paths(root, frame_id: str) -> dict[str, Path]:
    root = Path(root)
    return {
        "image": root / IMAGE_DIR / f"{frame_id}.png",
        "depth": root / DEPTH_DIR / f"{frame_id}.png",
        "calib": root / CALIB_DIR / f"{frame_id}.txt",
        "label": root / LABEL_DIR / f"{frame_id}.txt",
    }


def load_sample(root, frame_id: str) -> Sample:
    paths = frame_paths(root, frame_id)
    rgb = kitti_io.load_rgb(paths["image"])
    depth = kitti_io.load_depth(paths["depth"])
    P = parse_calibration(paths["calib"].read_text(), CALIB_KEY)
    labels = kitti_io.read_labels(paths["label"]) if paths["label"].exists() else []
    return Sample(frame_id, rgb, depth, labels, P)


def _shift_dontcare(lab, dz, depth, P):
    """Move a DontCare region using the median valid depth inside it, or return None."""
    h, w = depth.shape
    left, top, right, bottom = lab.bbox
    u0, u1 = max(int(np.ceil(left)), 0), min(int(np.floor(right)), w - 1)
    v0, v1 = max(int(np.ceil(top)), 0), min(int(np.floor(bottom)), h - 1)
    if u1 < u0 or v1 < v0:
        return None
    region = depth[v0 : v1 + 1, u0 : u1 + 1]
    valid = region[region > 0]
    if valid.size == 0:
        return None
    z = float(np.median(valid))
    if z + dz <= 0.5:
        return None
    us = np.array([left, right], dtype=np.float64)
    vs = np.array([top, bottom], dtype=np.float64)
    nu, nv, _, _ = reproject_pixels(us, vs, np.full(2, z), P, dz)
    nl, nr = max(nu[0], 0.0), min(nu[1], w - 1.0)
    nt, nb = max(nv[0], 0.0), min(nv[1], h - 1.0)
    if nr <= nl or nb <= nt:
        return None
    return lab.with_(bbox=(float(nl), float(nt), float(nr), float(nb)))


def synthesize(sample: Sample, dz: float, inpainter) -> Synthesis:
    """Render, fill and relabel one frame for displacement ``dz``."""
    h, w = sample.rgb.shape[:2]
    frame = render_frame(sample.rgb, sample.depth, sample.labels, sample.P, dz)
    filled = inpainter(frame.output.rgb, frame.output.hole_mask)

    removable = {id(lab) for lab in frame.removable}
    cleaned = remove_objects(sample.depth, frame.removable) if dz != 0 else None
    labels, dropped = [], []
    for i, lab in enumerate(sample.labels):
        if id(lab) in removable:
            dropped.append(i)
            continue
        if lab.is_dontcare:
            moved = lab if dz == 0 else _shift_dontcare(lab, dz, cleaned, sample.P)
            if moved is None:
                dropped.append(i)
            else:
                labels.append(moved)
            continue
        try:
            labels.append(shift_label(lab, dz, sample.P, (w, h)))
        except TooClose:
            dropped.append(i)
    return Synthesis(filled, frame.output, labels, dropped)


def pad(array: np.ndarray, pad_to) -> np.ndarray:
    """Zero-pad at the bottom/right to ``pad_to = (height, width)``."""
    th, tw = pad_to
    h, w = array.shape[:2]
    if h > th or w > tw:
        raise VirtualDepthError(f"image {w}x{h} is larger than the padding target {tw}x{th}")
    widths = [(0, th - h), (0, tw - w)] + [(0, 0)] * (array.ndim - 2)
    return np.pad(array, widths)


def output_id(frame_id: str, k: int) -> str:
    return f"{frame_id}_{k:02d}"


def process_frame(cfg: AugmentConfig, frame_id: str) -> tuple[list[dict], list[dict]]:
    """Write every synthetic sample for one source frame; returns (entries, errors)."""
    entries, errors = [], []
    try:
        sample = load_sample(cfg.input_root, frame_id)
    except (VirtualDepthError, OSError, ValueError) as exc:
        return [], [{"frame": frame_id, "error": f"{type(exc).__name__}: {exc}"}]
    rng = frame_rng(cfg.seed, frame_id)
    dzs = sample_displacements(rng, cfg)
    mirrors = [bool(rng.random() < cfg.mirror_prob) for _ in dzs]
    inpainter = cfg.inpainter()
    for k, (dz, mirrored) in enumerate(zip(dzs, mirrors)):
        oid = output_id(frame_id, k)
        try:
            syn = synthesize(sample, dz, inpainter)
            rgb, depth, labels, P = syn.rgb, syn.render.render_depth, syn.labels, sample.P
            h, w = rgb.shape[:2]
            if cfg.pad_to:
                rgb, depth = pad(rgb, cfg.pad_to), pad(depth, cfg.pad_to)
            if mirrored:
                rgb, depth, labels, P = mirror_sample(rgb, depth, labels, P)
            paths = frame_paths(cfg.output_root, oid)
            kitti_io.save_rgb(rgb, paths["image"])
            kitti_io.save_depth(np.minimum(depth, kitti_io.MAX_DEPTH), paths["depth"])
            paths["calib"].write_text(format_calibration(P, CALIB_KEY))
            kitti_io.write_labels(labels, paths["label"], cfg.label_decimals)
        except (VirtualDepthError, OSError, ValueError) as exc:
            errors.append({"frame": frame_id, "sample": k, "error": f"{type(exc).__name__}: {exc}"})
            continue
        pw = rgb.shape[1]
        content = [pw - w, 0, pw - 1, h - 1] if mirrored else [0, 0, w - 1, h - 1]
        entries.append(
            {
                "id": oid,
                "source_frame": frame_id,
                "sample": k,
                "dz": dz,
                "mirrored": mirrored,
                "seed": cfg.seed,
                "content_box": content,
                "paths": {key: p.relative_to(cfg.output_root).as_posix() for key, p in paths.items()},
                "dropped_objects": syn.dropped,
            }
        )
    return entries, errors


def read_split(cfg: AugmentConfig) -> list[str]:
    if cfg.split:
        return [line.strip() for line in cfg.split.read_text().splitlines() if line.strip()]
    return sorted(p.stem for p in (cfg.input_root / IMAGE_DIR).glob("*.png"))


def _work(args):
    return process_frame(*args)


def augment(cfg: AugmentConfig) -> dict:
    """Run the whole split and write ``manifest.json``; returns the manifest."""
    frames = read_split(cfg)
    for d in (IMAGE_DIR, DEPTH_DIR, CALIB_DIR, LABEL_DIR):
        (cfg.output_root / d).mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, f) for f in frames]
    if cfg.workers > 1 and len(frames) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(frames))) as pool:
            results = list(pool.map(_work, jobs, chunksize=1))
    else:
        results = [_work(j) for j in jobs]
    entries = sorted((e for r in results for e in r[0]), key=lambda e: e["paths"]["image"])
    errors = sorted((e for r in results for e in r[1]), key=lambda e: (e["frame"], e.get("sample", -1)))
    manifest = {
        "version": 1,
        "config": cfg.public(),
        "frames": frames,
        "entries": entries,
        "errors": errors,
    }
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    (cfg.output_root / "manifest.json").write_text(text)
    log.info("wrote %d samples from %d frames (%d errors)", len(entries), len(frames), len(errors))
    return manifest


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
