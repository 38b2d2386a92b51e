"""Local-adaptive HSV transform of cutouts.

The cutout's mean saturation and value are rescaled toward the mean of the
background region it will cover, so a cone pasted into a dim or washed-out
scene picks up matching contrast. Hue is never touched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_box


@dataclass(frozen=True)
class RegionStats:
    mean_s: float
    mean_v: float


@dataclass(frozen=True)
class HsvScale:
    s_scale: float
    v_scale: float


def rgb_to_hsv(rgb) -> np.ndarray:
    """Hexcone RGB -> HSV on ``(..., 3)`` arrays; hue in degrees [0, 360), gray hue is 0."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.shape[-1] != 3:
        raise ValueError(f"expected trailing dimension 3, got shape {rgb.shape}")
    if not np.all(np.isfinite(rgb)) or rgb.min(initial=0.0) < 0.0 or rgb.max(initial=0.0) > 1.0:
        raise ValueError("RGB channels must lie in [0, 1]")
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    safe_v = np.where(v > 0, v, 1.0)
    s = np.where(v > 0, c / safe_v, 0.0)
    safe_c = np.where(c > 0, c, 1.0)
    h = np.where(
        v == r,
        np.mod((g - b) / safe_c, 6.0),
        np.where(v == g, (b - r) / safe_c + 2.0, (r - g) / safe_c + 4.0),
    )
    h = np.where(c > 0, h * 60.0, 0.0)
    h = np.where(h >= 360.0, h - 360.0, h)
    return np.stack([h, s, v], axis=-1)


def hsv_to_rgb(hsv) -> np.ndarray:
    """Inverse of :func:`rgb_to_hsv`."""
    hsv = np.asarray(hsv, dtype=np.float64)
    if hsv.shape[-1] != 3:
        raise ValueError(f"expected trailing dimension 3, got shape {hsv.shape}")
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    if (not np.all(np.isfinite(hsv)) or np.any(h < 0) or np.any(h >= 360)
            or np.any((s < 0) | (s > 1)) or np.any((v < 0) | (v > 1))):
        raise ValueError("HSV out of range: need h in [0, 360), s and v in [0, 1]")
    c = v * s
    hp = h / 60.0
    x = c * (1.0 - np.abs(np.mod(hp, 2.0) - 1.0))
    m = v - c
    sector = np.floor(hp).astype(np.int64) % 6
    zero = np.zeros_like(c)
    r = np.choose(sector, [c, x, zero, zero, x, c])
    g = np.choose(sector, [x, c, c, x, zero, zero])
    b = np.choose(sector, [zero, zero, x, c, c, x])
    return np.clip(np.stack([r + m, g + m, b + m], axis=-1), 0.0, 1.0)


def region_stats(background: np.ndarray, box) -> RegionStats:
    """Mean saturation and value of ``background`` inside the half-open ``box``."""
    h, w = background.shape[:2]
    x1, y1, x2, y2 = check_box(tuple(int(v) for v in box), w, h)
    hsv = rgb_to_hsv(background[y1:y2, x1:x2, :3])
    return RegionStats(float(hsv[..., 1].mean()), float(hsv[..., 2].mean()))


def cutout_means(pixels: np.ndarray) -> RegionStats:
    """Mean S and V over the pixels with ``alpha > 0``."""
    opaque = pixels[..., 3] > 0
    if not opaque.any():
        raise ValueError("cutout has no opaque pixels")
    hsv = rgb_to_hsv(pixels[..., :3][opaque])
    return RegionStats(float(hsv[:, 1].mean()), float(hsv[:, 2].mean()))


def hsv_scales(cutout_stats: RegionStats, region: RegionStats, scale_min=0.5, scale_max=2.0,
               direction="match_region") -> tuple:
    """Clamped per-channel scale factors plus warnings for channels that were skipped."""
    if direction not in ("match_region", "paper_literal"):
        raise ValueError(f"unknown hsv scale direction {direction!r}")
    warnings = []
    scales = []
    for name, m, r in (("saturation", cutout_stats.mean_s, region.mean_s),
                       ("value", cutout_stats.mean_v, region.mean_v)):
        denom = m if direction == "match_region" else r
        num = r if direction == "match_region" else m
        if denom <= 0:
            warnings.append(f"hsv: zero mean {name}, {name} scaling skipped")
            scales.append(1.0)
            continue
        scales.append(float(np.clip(num / denom, scale_min, scale_max)))
    return HsvScale(*scales), warnings


def adapt_cutout_hsv(cutout, stats: RegionStats, scale_min=0.5, scale_max=2.0, direction="match_region"):
    """Scale the opaque pixels' S and V so their means move to ``stats``.

    Returns ``(adapted_cutout, warnings)``. Alpha and hue are left unchanged.
    """
    pixels = cutout.pixels
    opaque = pixels[..., 3] > 0
    if not opaque.any():
        raise ValueError(f"{cutout.source_id}: cutout has no opaque pixels")
    scale, warnings = hsv_scales(cutout_means(pixels), stats, scale_min, scale_max, direction)
    if scale.s_scale == 1.0 and scale.v_scale == 1.0:
        return cutout, warnings
    hsv = rgb_to_hsv(pixels[..., :3][opaque])
    hsv[:, 1] = np.clip(hsv[:, 1] * scale.s_scale, 0.0, 1.0)
    hsv[:, 2] = np.clip(hsv[:, 2] * scale.v_scale, 0.0, 1.0)
    out = pixels.copy()
    out[..., :3][opaque] = hsv_to_rgb(hsv)
    return cutout.with_pixels(out), warnings
