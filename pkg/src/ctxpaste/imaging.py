"""PNG reading and writing on float images in [0, 1]."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.floor(np.clip(image, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def load_rgb(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def load_rgba(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGBA"), dtype=np.float64) / 255.0


def load_gray_u8(path) -> np.ndarray:
    """Raw 8-bit values of a single-channel PNG (palette images yield their indices)."""
    with Image.open(path) as im:
        if im.mode == "1":
            im = im.convert("L")
        if im.mode not in ("L", "P"):
            raise ValueError(f"{path}: expected a single-channel 8-bit image, got mode {im.mode}")
        return np.array(im, dtype=np.uint8)


def save_png(path, array: np.ndarray) -> None:
    arr = array if array.dtype == np.uint8 else to_uint8(array)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    # fixed compression settings keep output bytes reproducible
    Image.fromarray(np.ascontiguousarray(arr)).save(path, format="PNG", compress_level=6, optimize=False)
