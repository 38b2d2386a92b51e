"""Rare-object cutouts: loading, trimming, sampling and resizing.

Manifest format, one cutout per line (``#`` starts a comment)::

    <relative_path> <category> <h_real_min> <h_real_max>

Heights are real-world object heights in meters. Every cutout is trimmed to
the tight box of its ``alpha > 0`` pixels at load time, so raster height is
the object's height in pixels.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._validation import alpha_tight_box
from .camera import round_half_up
from .imaging import load_rgba

# Typical real heights in meters; used by the fixture generator and as
# documentation, never silently substituted for manifest values.
DEFAULT_HEIGHT_RANGES = {
    "traffic_cone": (0.45, 0.9),
    "traffic_barrel": (0.8, 1.2),
    "warning_triangle": (0.35, 0.5),
}


class BankLoadError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class InstanceCutout:
    pixels: np.ndarray  # float (H, W, 4) in [0, 1], alpha last
    category: str
    h_real_range: tuple
    source_id: str

    def __post_init__(self):
        lo, hi = self.h_real_range
        if not 0 < lo <= hi:
            raise ValueError(f"{self.source_id}: invalid height range {self.h_real_range}")

    @property
    def alpha(self) -> np.ndarray:
        return self.pixels[..., 3]

    @property
    def rgb(self) -> np.ndarray:
        return self.pixels[..., :3]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def with_pixels(self, pixels: np.ndarray) -> "InstanceCutout":
        return replace(self, pixels=pixels)


def trim_to_alpha(pixels: np.ndarray) -> np.ndarray:
    box = alpha_tight_box(pixels[..., 3])
    if box is None:
        raise ValueError("cutout is fully transparent")
    x1, y1, x2, y2 = box
    return pixels[y1:y2, x1:x2]


def make_cutout(pixels, category, h_real_range, source_id="") -> InstanceCutout:
    """Build a trimmed cutout from an ``(H, W, 4)`` float or uint8 array."""
    arr = np.asarray(pixels)
    arr = arr.astype(np.float64) / 255.0 if arr.dtype == np.uint8 else arr.astype(np.float64)
    if arr.ndim != 3 or arr.shape[2] != 4:
        raise ValueError(f"cutout pixels must have shape (H, W, 4), got {arr.shape}")
    return InstanceCutout(np.ascontiguousarray(trim_to_alpha(arr)), category, tuple(map(float, h_real_range)), source_id)


@dataclass(frozen=True, eq=False)
class Bank:
    cutouts: tuple
    index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.cutouts:
            raise BankLoadError("instance bank is empty")
        if not self.index:
            idx = {}
            for i, c in enumerate(self.cutouts):
                idx.setdefault(c.category, []).append(i)
            object.__setattr__(self, "index", {k: tuple(v) for k, v in idx.items()})

    @property
    def categories(self) -> list:
        return sorted(self.index)

    def __len__(self):
        return len(self.cutouts)


def load_bank(mask_dir, manifest_path) -> Bank:
    mask_dir, manifest_path = Path(mask_dir), Path(manifest_path)
    if not manifest_path.exists():
        raise BankLoadError(f"{manifest_path}: manifest not found")
    cutouts = []
    for lineno, raw in enumerate(manifest_path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        where = f"{manifest_path}:{lineno}"
        if len(parts) < 4:
            missing = "height metadata" if len(parts) >= 2 else "category and height metadata"
            raise BankLoadError(f"{where}: {parts[0]}: missing {missing}")
        if len(parts) > 4:
            raise BankLoadError(f"{where}: expected '<path> <category> <h_min> <h_max>'")
        rel, category, lo, hi = parts
        try:
            lo, hi = float(lo), float(hi)
        except ValueError:
            raise BankLoadError(f"{where}: {rel}: heights must be numbers") from None
        if not 0 < lo <= hi:
            raise BankLoadError(f"{where}: {rel}: height range must satisfy 0 < min <= max, got {lo} {hi}")
        path = mask_dir / rel
        try:
            pixels = load_rgba(path)
        except (OSError, ValueError) as exc:
            raise BankLoadError(f"{where}: {rel}: cannot decode image ({exc})") from None
        try:
            pixels = trim_to_alpha(pixels)
        except ValueError:
            raise BankLoadError(f"{where}: {rel}: cutout is fully transparent") from None
        cutouts.append(InstanceCutout(np.ascontiguousarray(pixels), category, (lo, hi), rel))
    if not cutouts:
        raise BankLoadError(f"{manifest_path}: instance bank is empty")
    return Bank(tuple(cutouts))


def sample_cutout(bank: Bank, category: str, rng: np.random.Generator) -> InstanceCutout:
    """Uniformly pick one cutout of ``category``, consuming one draw from ``rng``."""
    try:
        members = bank.index[category]
    except KeyError:
        raise KeyError(f"category {category!r} not in bank (have {', '.join(bank.categories)})") from None
    return bank.cutouts[members[int(rng.integers(len(members)))]]


def _bilinear_weights(n_src: int, n_dst: int) -> np.ndarray:
    """``(n_dst, n_src)`` triangle-filter weights, pixel-center aligned.

    The support widens to the scale factor when shrinking, so every source
    pixel contributes to some output pixel and thin features survive.
    """
    scale = n_src / n_dst
    support = max(scale, 1.0)
    centers = (np.arange(n_dst) + 0.5) * scale - 0.5
    if scale < 1.0:
        centers = np.clip(centers, 0.0, n_src - 1)
    dist = np.abs(np.arange(n_src)[None, :] - centers[:, None]) / support
    w = np.maximum(0.0, 1.0 - dist)
    return w / w.sum(axis=1, keepdims=True)


def resize_rgba(pixels: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    h, w = pixels.shape[:2]
    if (new_h, new_w) == (h, w):
        return pixels.copy()
    wr = _bilinear_weights(h, new_h)
    wc = _bilinear_weights(w, new_w)
    out = np.einsum("ij,jkc,lk->ilc", wr, pixels, wc, optimize=True)
    return np.clip(out, 0.0, 1.0)


def resized_shape(cutout: InstanceCutout, target_height_px: int) -> tuple:
    scale = target_height_px / cutout.height
    return target_height_px, max(1, round_half_up(cutout.width * scale))


def resize_cutout(cutout: InstanceCutout, target_height_px: int) -> InstanceCutout:
    """Bilinear resize of all four channels to ``target_height_px`` rows, keeping aspect ratio.

    Color and alpha go through the same filter (no premultiplication).
    """
    target_height_px = int(target_height_px)
    if target_height_px < 1:
        raise ValueError(f"target height must be >= 1, got {target_height_px}")
    new_h, new_w = resized_shape(cutout, target_height_px)
    out = resize_rgba(cutout.pixels, new_h, new_w)
    return cutout.with_pixels(np.ascontiguousarray(trim_to_alpha(out)))


def flip_cutout(cutout: InstanceCutout) -> InstanceCutout:
    return cutout.with_pixels(np.ascontiguousarray(cutout.pixels[:, ::-1]))
