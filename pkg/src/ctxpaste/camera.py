"""Pinhole ground-plane geometry for a forward-looking camera.

Coordinates are image pixels with the origin at the top-left corner, rows
growing downward. Every relation here assumes a flat ground plane and an
undistorted pinhole camera with zero pitch and roll, so results are only
meaningful on pixels that lie on drivable ground.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

CAMERA_KEYS = ("fx", "fy", "cx", "cy", "cam_height")


class GeometryError(ValueError):
    """Raised for inputs outside the domain of a projection relation."""


class CameraFileError(ValueError):
    pass


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise GeometryError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    def check_image_size(self, width: int, height: int) -> None:
        """Raise if the principal point falls outside a ``width x height`` image."""
        if not (0 <= self.cx < width and 0 <= self.cy < height):
            raise GeometryError(
                f"principal point ({self.cx}, {self.cy}) outside {width}x{height} image"
            )


@dataclass(frozen=True)
class CameraExtrinsics:
    cam_height: float

    def __post_init__(self):
        if not self.cam_height > 0:
            raise GeometryError(f"cam_height must be positive, got {self.cam_height}")


def _check_distance(d: float) -> None:
    if not d > 0:
        raise GeometryError(f"distance must be positive, got {d}")


def row_from_distance(intr: CameraIntrinsics, extr: CameraExtrinsics, d: float) -> float:
    """Ground-contact image row of an object standing ``d`` meters ahead."""
    _check_distance(d)
    return intr.fy * extr.cam_height / d + intr.cy


def distance_from_row(intr: CameraIntrinsics, extr: CameraExtrinsics, y: float) -> float:
    """Ground distance of the point imaged at row ``y``; ``y`` must lie below the horizon."""
    if not y > intr.cy:
        raise GeometryError(f"row {y} is at or above the horizon row {intr.cy}")
    return intr.fy * extr.cam_height / (y - intr.cy)


def pixel_height(intr: CameraIntrinsics, h_real: float, d: float) -> float:
    """Apparent height in pixels of an object ``h_real`` meters tall at distance ``d``."""
    _check_distance(d)
    if h_real < 0:
        raise GeometryError(f"object height must be non-negative, got {h_real}")
    return intr.fy * h_real / d


def column_from_lateral(intr: CameraIntrinsics, x_lateral: float, d: float) -> float:
    """Image column of a point offset ``x_lateral`` meters (right positive) from the optical axis."""
    _check_distance(d)
    return intr.fx * x_lateral / d + intr.cx


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def read_camera_file(path) -> tuple[CameraIntrinsics, CameraExtrinsics]:
    """Parse a ``key = value`` camera file holding exactly the keys in ``CAMERA_KEYS``."""
    path = Path(path)
    values: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key = key.strip()
            if not sep:
                raise CameraFileError(f"{path}:{lineno}: expected 'key = value'")
            if key not in CAMERA_KEYS:
                raise CameraFileError(f"{path}:{lineno}: unknown camera key {key!r}")
            if key in values:
                raise CameraFileError(f"{path}:{lineno}: duplicate key {key!r}")
            try:
                values[key] = float(val.strip())
            except ValueError:
                raise CameraFileError(f"{path}:{lineno}: {key} is not a number: {val.strip()!r}") from None
    missing = [k for k in CAMERA_KEYS if k not in values]
    if missing:
        raise CameraFileError(f"{path}: missing camera keys {', '.join(missing)}")
    try:
        intr = CameraIntrinsics(values["fx"], values["fy"], values["cx"], values["cy"])
        extr = CameraExtrinsics(values["cam_height"])
    except GeometryError as exc:
        raise CameraFileError(f"{path}: {exc}") from None
    return intr, extr


def write_camera_file(path, intr: CameraIntrinsics, extr: CameraExtrinsics) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in ("fx", "fy", "cx", "cy"):
            fh.write(f"{key} = {getattr(intr, key)!r}\n")
        fh.write(f"cam_height = {extr.cam_height!r}\n")
