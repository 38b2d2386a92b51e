"""Input checks shared by the public functions and the estimator."""

from __future__ import annotations

import numpy as np


def check_image(image, name="image", channels=3) -> np.ndarray:
    """Return ``image`` as a float64 ``(H, W, channels)`` array with values in [0, 1].

    uint8 input is rescaled by 1/255; float input must already be in range.
    """
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != channels:
        raise ValueError(f"{name} must have shape (H, W, {channels}), got {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} is empty")
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    arr = arr.astype(np.float64, copy=False)
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} values must be finite and lie in [0, 1]")
    return arr


def check_box(box, width=None, height=None, name="box") -> tuple:
    """Validate an ``(x1, y1, x2, y2)`` box with positive area, optionally inside ``width x height``."""
    if len(box) != 4:
        raise ValueError(f"{name} must have four coordinates, got {box!r}")
    x1, y1, x2, y2 = box
    if not (x1 < x2 and y1 < y2):
        raise ValueError(f"{name} {tuple(box)} has zero or negative area")
    if width is not None and not (0 <= x1 and x2 <= width and 0 <= y1 and y2 <= height):
        raise ValueError(f"{name} {tuple(box)} exceeds {width}x{height} image bounds")
    return tuple(box)


def box_in_bounds(box, width, height, margin=0) -> bool:
    x1, y1, x2, y2 = box
    return x1 >= margin and y1 >= margin and x2 <= width - margin and y2 <= height - margin


def alpha_tight_box(alpha: np.ndarray, threshold: float = 0.0):
    """Half-open ``(x1, y1, x2, y2)`` box of pixels with ``alpha > threshold``, or None."""
    mask = alpha > threshold
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    return int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1
