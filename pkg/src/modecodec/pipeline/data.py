"""Datasets: synthetic moving-object pairs and random crops of real frames.

A frame pair is (previous, current) as float32 (3, H, W) arrays in [0, 1].
The synthetic generator composes a textured static background with rigidly
translating textured rectangles and also emits the ground-truth motion mask
(union of each moving object's old and new footprint).
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = ["SynthSpec", "FramePair", "synth_dataset", "make_crop_dataset",
           "load_manifest", "load_png", "save_png", "DatasetError"]


class DatasetError(ValueError):
    pass


@dataclass
class FramePair:
    prev: np.ndarray            # (3, H, W) float32 in [0, 1]
    cur: np.ndarray
    motion_mask: np.ndarray | None = None   # (H, W) bool, True where content moved

    @property
    def hw(self):
        return self.prev.shape[1], self.prev.shape[2]


@dataclass(frozen=True)
class SynthSpec:
    size: int = 64
    count: int = 256
    n_objects: int = 2
    object_size: tuple = (12, 24)       # min/max side length in px
    velocity: tuple = (2, 6)            # min/max |displacement| per axis, px
    noise: float = 0.0                  # texture roughness added to background
    bg_cells: int = 6                   # background texture lattice density
    object_cells: int = 3
    seed: int = 0


def _texture(rng: np.random.Generator, h: int, w: int, cells: int, noise: float) -> np.ndarray:
    """Smooth colored texture: coarse random lattice upsampled bilinearly."""
    coarse = rng.random((3, cells + 1, cells + 1)).astype(np.float32)
    ys = np.linspace(0, cells, h, dtype=np.float32)
    xs = np.linspace(0, cells, w, dtype=np.float32)
    y0 = np.minimum(ys.astype(np.int64), cells - 1)
    x0 = np.minimum(xs.astype(np.int64), cells - 1)
    fy = (ys - y0)[None, :, None]
    fx = (xs - x0)[None, None, :]
    c00 = coarse[:, y0][:, :, x0]
    c01 = coarse[:, y0][:, :, x0 + 1]
    c10 = coarse[:, y0 + 1][:, :, x0]
    c11 = coarse[:, y0 + 1][:, :, x0 + 1]
    tex = (c00 * (1 - fy) * (1 - fx) + c01 * (1 - fy) * fx
           + c10 * fy * (1 - fx) + c11 * fy * fx)
    if noise > 0:
        tex = tex + rng.normal(0, noise, tex.shape).astype(np.float32)
    return np.clip(tex, 0.0, 1.0)


def _paste(frame: np.ndarray, patch: np.ndarray, top: int, left: int):
    h, w = patch.shape[1:]
    fh, fw = frame.shape[1:]
    y0, x0 = max(top, 0), max(left, 0)
    y1, x1 = min(top + h, fh), min(left + w, fw)
    if y1 <= y0 or x1 <= x0:
        return
    frame[:, y0:y1, x0:x1] = patch[:, y0 - top : y1 - top, x0 - left : x1 - left]


def _footprint(mask: np.ndarray, top: int, left: int, h: int, w: int):
    fh, fw = mask.shape
    y0, x0 = max(top, 0), max(left, 0)
    y1, x1 = min(top + h, fh), min(left + w, fw)
    if y1 > y0 and x1 > x0:
        mask[y0:y1, x0:x1] = True


def synth_dataset(spec: SynthSpec) -> list[FramePair]:
    """Seeded generation is bitwise reproducible for a given spec."""
    rng = np.random.default_rng(spec.seed)
    pairs = []
    for _ in range(spec.count):
        s = spec.size
        bg = _texture(rng, s, s, cells=spec.bg_cells, noise=spec.noise)
        prev = bg.copy()
        cur = bg.copy()
        mask = np.zeros((s, s), dtype=bool)
        for _ in range(spec.n_objects):
            oh = int(rng.integers(spec.object_size[0], spec.object_size[1] + 1))
            ow = int(rng.integers(spec.object_size[0], spec.object_size[1] + 1))
            patch = _texture(rng, oh, ow, cells=spec.object_cells, noise=0.0)
            top = int(rng.integers(0, s - oh + 1))
            left = int(rng.integers(0, s - ow + 1))
            vlo, vhi = spec.velocity
            if vhi == 0:
                dy = dx = 0
            else:
                dy = int(rng.integers(vlo, vhi + 1)) * int(rng.choice([-1, 1]))
                dx = int(rng.integers(vlo, vhi + 1)) * int(rng.choice([-1, 1]))
            _paste(prev, patch, top, left)
            _paste(cur, patch, top + dy, left + dx)
            if dy or dx:
                _footprint(mask, top, left, oh, ow)
                _footprint(mask, top + dy, left + dx, oh, ow)
        pairs.append(FramePair(prev=prev, cur=cur, motion_mask=mask))
    return pairs


# -- PNG helpers ------------------------------------------------------------------

def load_png(path) -> np.ndarray:
    img = Image.open(path).convert("RGB")
    arr = np.asarray(img, dtype=np.float32) / 255.0
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def save_png(path, arr: np.ndarray):
    """(3, H, W) or (H, W) float in [0,1], or uint8, to an 8-bit PNG."""
    a = np.asarray(arr)
    if a.dtype != np.uint8:
        a = np.clip(np.rint(np.clip(a, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)
    if a.ndim == 3:
        a = a.transpose(1, 2, 0)
        Image.fromarray(a, "RGB").save(path)
    else:
        Image.fromarray(a, "L").save(path)


def write_synth_pngs(pairs: list[FramePair], outdir) -> list[str]:
    """seq_NNNN/frame_0.png + frame_1.png (+ mask.png); returns sequence dirs."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    dirs = []
    for i, pair in enumerate(pairs):
        d = outdir / f"seq_{i:04d}"
        d.mkdir(exist_ok=True)
        save_png(d / "frame_0.png", pair.prev)
        save_png(d / "frame_1.png", pair.cur)
        if pair.motion_mask is not None:
            save_png(d / "mask.png", pair.motion_mask.astype(np.float32))
        dirs.append(str(d))
    return dirs


# -- random-crop dataset over directories of consecutive frames ---------------------

def _consecutive_pairs(frame_dir: Path) -> list[tuple]:
    """Adjacent PNGs (sorted) within each directory form raw pairs."""
    pairs = []
    subdirs = [frame_dir] + sorted(p for p in frame_dir.rglob("*") if p.is_dir())
    for d in subdirs:
        frames = sorted(p for p in d.glob("*.png") if not p.stem.startswith("mask"))
        for a, b in zip(frames, frames[1:]):
            pairs.append((a, b))
    if not pairs:
        raise DatasetError(f"no consecutive PNG frame pairs under {frame_dir}")
    return pairs


def make_crop_dataset(frame_dir, crop: int, count: int, seed: int, manifest_path) -> list[str]:
    """Sample seeded random crop positions; write and return manifest lines.

    Each line: <path_prev> <path_cur> <crop_y> <crop_x>. The same position is
    used for both frames of a pair. Frames smaller than the crop are skipped
    with a warning.
    """
    rng = np.random.default_rng(seed)
    raw = _consecutive_pairs(Path(frame_dir))
    usable = []
    for a, b in raw:
        with Image.open(a) as img:
            w, h = img.size
        if h < crop or w < crop:
            warnings.warn(f"skipping {a}: {w}x{h} smaller than crop {crop}")
            continue
        usable.append((a, b, h, w))
    if not usable:
        raise DatasetError(f"no frames of at least {crop}x{crop} under {frame_dir}")
    lines = []
    for _ in range(count):
        a, b, h, w = usable[int(rng.integers(len(usable)))]
        y = int(rng.integers(0, h - crop + 1))
        x = int(rng.integers(0, w - crop + 1))
        lines.append(f"{a} {b} {y} {x}")
    Path(manifest_path).write_text("\n".join(lines) + "\n")
    return lines


def load_manifest(manifest_path, crop: int) -> list[FramePair]:
    pairs = []
    for line in Path(manifest_path).read_text().splitlines():
        if not line.strip():
            continue
        ppath, cpath, y, x = line.split()
        y, x = int(y), int(x)
        prev = load_png(ppath)[:, y : y + crop, x : x + crop]
        cur = load_png(cpath)[:, y : y + crop, x : x + crop]
        pairs.append(FramePair(prev=prev, cur=cur))
    if not pairs:
        raise DatasetError(f"empty manifest {manifest_path}")
    return pairs
