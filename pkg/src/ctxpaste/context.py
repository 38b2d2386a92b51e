"""Per-background traffic context and the placement-constraint queries.

A context bundle for background ``NAME.png`` lives in the context directory
as ``NAME.freespace.png`` (>= 128 is drivable), ``NAME.lanes.png`` (0 = no
lane, k = lane instance k) and ``NAME.roadusers.txt`` (one
``<category> <x1> <y1> <x2> <y2>`` box per line). Missing lane or road-user
files degrade to empty inputs and leave a warning on the loaded context.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ._validation import box_in_bounds, check_box
from .camera import CameraExtrinsics, CameraIntrinsics, GeometryError, read_camera_file
from .imaging import load_gray_u8

logger = logging.getLogger(__name__)

ROAD_USER_CATEGORIES = ("car", "truck", "bus", "pedestrian", "bicycle")
FREESPACE_THRESHOLD = 128

OK = "ok"
OFF_FREESPACE = "off_freespace"
OVER_OCCLUDED = "over_occluded"
OUT_OF_BOUNDS = "out_of_bounds"
ABOVE_HORIZON = "above_horizon"


class ContextLoadError(ValueError):
    pass


@dataclass(frozen=True)
class RoadUserBox:
    category: str
    x1: int
    y1: int
    x2: int
    y2: int

    @property
    def box(self):
        return (self.x1, self.y1, self.x2, self.y2)


@dataclass(frozen=True, eq=False)
class SceneContext:
    freespace: np.ndarray  # bool (H, W)
    lanes: np.ndarray  # int (H, W), 0 = no lane
    road_users: tuple
    intrinsics: CameraIntrinsics
    extrinsics: CameraExtrinsics
    image_size: tuple  # (width, height)
    name: str = ""
    warnings: tuple = field(default=())

    def __post_init__(self):
        w, h = self.image_size
        for label, raster in (("freespace", self.freespace), ("lanes", self.lanes)):
            if raster.shape != (h, w):
                raise ContextLoadError(
                    f"{label} raster is {raster.shape[1]}x{raster.shape[0]}, expected {w}x{h}"
                )
        self.freespace.setflags(write=False)
        self.lanes.setflags(write=False)

    @property
    def width(self) -> int:
        return self.image_size[0]

    @property
    def height(self) -> int:
        return self.image_size[1]

    @property
    def n_lanes(self) -> int:
        return int(self.lanes.max()) if self.lanes.size else 0

    def structurally_equal(self, other: "SceneContext") -> bool:
        return (
            self.image_size == other.image_size
            and np.array_equal(self.freespace, other.freespace)
            and np.array_equal(self.lanes, other.lanes)
            and self.road_users == other.road_users
            and self.intrinsics == other.intrinsics
            and self.extrinsics == other.extrinsics
        )


@dataclass(frozen=True)
class PlacementVerdict:
    accepted: bool
    reason: str

    def __bool__(self):
        return self.accepted


def make_context(freespace, lanes=None, road_users=(), intrinsics=None, extrinsics=None, name=""):
    """Build a context from in-memory rasters; ``lanes`` defaults to an empty lane map."""
    freespace = np.asarray(freespace).astype(bool)
    h, w = freespace.shape
    lanes = np.zeros((h, w), dtype=np.int32) if lanes is None else np.asarray(lanes, dtype=np.int32)
    users = tuple(u if isinstance(u, RoadUserBox) else RoadUserBox(*u) for u in road_users)
    if intrinsics is None:
        intrinsics = CameraIntrinsics(1000.0, 1000.0, w / 2, h / 2)
    if extrinsics is None:
        extrinsics = CameraExtrinsics(1.5)
    return SceneContext(freespace.copy(), lanes.copy(), users, intrinsics, extrinsics, (w, h), name=name)


def _image_size(path: Path) -> tuple:
    try:
        with Image.open(path) as im:
            return im.size
    except (OSError, ValueError) as exc:
        raise ContextLoadError(f"{path}: cannot read image ({exc})") from None


def _load_raster(path: Path, size: tuple) -> np.ndarray:
    try:
        raster = load_gray_u8(path)
    except (OSError, ValueError) as exc:
        raise ContextLoadError(f"{path}: cannot read raster ({exc})") from None
    if (raster.shape[1], raster.shape[0]) != tuple(size):
        raise ContextLoadError(
            f"{path}: dimension mismatch, raster is {raster.shape[1]}x{raster.shape[0]} "
            f"but background is {size[0]}x{size[1]}"
        )
    return raster


def read_road_users(path, size) -> tuple:
    width, height = size
    boxes = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 5:
                raise ContextLoadError(f"{path}:{lineno}: expected '<category> <x1> <y1> <x2> <y2>'")
            cat = parts[0]
            if cat not in ROAD_USER_CATEGORIES:
                raise ContextLoadError(f"{path}:{lineno}: unknown road-user category {cat!r}")
            try:
                x1, y1, x2, y2 = (int(p) for p in parts[1:])
            except ValueError:
                raise ContextLoadError(f"{path}:{lineno}: box coordinates must be integers") from None
            try:
                check_box((x1, y1, x2, y2), width, height)
            except ValueError as exc:
                raise ContextLoadError(f"{path}:{lineno}: {exc}") from None
            boxes.append(RoadUserBox(cat, x1, y1, x2, y2))
    return tuple(boxes)


def load_context(background_path, freespace_path, lanes_path, roadusers_path, camera_path) -> SceneContext:
    background_path = Path(background_path)
    size = _image_size(background_path)
    warnings = []

    freespace = _load_raster(Path(freespace_path), size) >= FREESPACE_THRESHOLD

    if lanes_path is not None and Path(lanes_path).exists():
        lanes = _load_raster(Path(lanes_path), size).astype(np.int32)
        ids = np.unique(lanes)
        ids = ids[ids > 0]
        if ids.size and not np.array_equal(ids, np.arange(1, ids.size + 1)):
            raise ContextLoadError(
                f"{lanes_path}: lane ids must be contiguous 1..K, got {ids.tolist()}"
            )
    else:
        lanes = np.zeros((size[1], size[0]), dtype=np.int32)
        warnings.append(f"{background_path.stem}: no lane map, using an empty one")

    if roadusers_path is not None and Path(roadusers_path).exists():
        users = read_road_users(roadusers_path, size)
    else:
        users = ()
        warnings.append(f"{background_path.stem}: no road-user file, using an empty box list")

    try:
        intr, extr = read_camera_file(camera_path)
        intr.check_image_size(*size)
    except (OSError, ValueError) as exc:
        raise ContextLoadError(f"{camera_path}: {exc}") from None

    for msg in warnings:
        logger.warning(msg)
    return SceneContext(freespace, lanes, users, intr, extr, size,
                        name=background_path.stem, warnings=tuple(warnings))


@dataclass(frozen=True)
class Bundle:
    name: str
    background: Path
    freespace: Path
    lanes: Path
    roadusers: Path
    camera: Path

    def load(self) -> SceneContext:
        return load_context(self.background, self.freespace, self.lanes, self.roadusers, self.camera)


def discover_bundles(backgrounds_dir, context_dir, camera_path) -> list:
    """Pair every ``NAME.png`` background with its context files, sorted by name.

    ``NAME.camera.txt`` in the context directory overrides the shared camera file.
    """
    backgrounds_dir, context_dir = Path(backgrounds_dir), Path(context_dir)
    bundles = []
    for bg in sorted(backgrounds_dir.glob("*.png")):
        name = bg.stem
        if "." in name:  # NAME.freespace.png etc. when both dirs coincide
            continue
        override = context_dir / f"{name}.camera.txt"
        bundles.append(Bundle(
            name=name,
            background=bg,
            freespace=context_dir / f"{name}.freespace.png",
            lanes=context_dir / f"{name}.lanes.png",
            roadusers=context_dir / f"{name}.roadusers.txt",
            camera=override if override.exists() else Path(camera_path),
        ))
    return bundles


# -- constraint queries ----------------------------------------------------

def is_on_freespace(ctx: SceneContext, contact, footprint_halfwidth: float, freespace_fraction: float = 0.8) -> bool:
    """True iff the contact pixel and enough of its footprint row segment are drivable.

    ``contact`` is an ``(x, y)`` pixel. The segment covers every column within
    ``footprint_halfwidth`` of ``x``; columns outside the image count as not drivable.
    """
    x, y = int(contact[0]), int(contact[1])
    if not (0 <= x < ctx.width and 0 <= y < ctx.height):
        return False
    if not ctx.freespace[y, x]:
        return False
    hw = int(np.floor(max(footprint_halfwidth, 0.0)))
    lo, hi = x - hw, x + hw + 1
    total = hi - lo
    hits = int(np.count_nonzero(ctx.freespace[y, max(lo, 0):min(hi, ctx.width)]))
    return hits >= freespace_fraction * total


def _covered_area(box, rects) -> float:
    """Exact area of ``box`` covered by the union of ``rects`` (coordinate compression)."""
    bx1, by1, bx2, by2 = box
    clipped = []
    for rx1, ry1, rx2, ry2 in rects:
        x1, y1, x2, y2 = max(rx1, bx1), max(ry1, by1), min(rx2, bx2), min(ry2, by2)
        if x1 < x2 and y1 < y2:
            clipped.append((x1, y1, x2, y2))
    if not clipped:
        return 0.0
    c = np.asarray(clipped, dtype=np.float64)
    xs = np.unique(c[:, [0, 2]])
    ys = np.unique(c[:, [1, 3]])
    cover = np.zeros((len(ys) - 1, len(xs) - 1), dtype=bool)
    for x1, y1, x2, y2 in c:
        i0, i1 = np.searchsorted(xs, [x1, x2])
        j0, j1 = np.searchsorted(ys, [y1, y2])
        cover[j0:j1, i0:i1] = True
    return float((np.diff(ys)[:, None] * np.diff(xs)[None, :])[cover].sum())


def occlusion_fraction(ctx: SceneContext, box) -> float:
    """Fraction of ``box`` covered by the union of the context's road-user boxes."""
    x1, y1, x2, y2 = box
    area = (x2 - x1) * (y2 - y1)
    if not area > 0:
        raise ValueError(f"box {tuple(box)} has zero area")
    return min(1.0, _covered_area(box, [u.box for u in ctx.road_users]) / area)


def lane_columns_at_row(ctx: SceneContext, row: int) -> list:
    if not 0 <= row < ctx.height:
        raise ValueError(f"row {row} outside [0, {ctx.height})")
    line = ctx.lanes[row]
    cols = np.flatnonzero(line)
    return [(int(c), int(line[c])) for c in cols]


def validate_placement(ctx: SceneContext, box, contact, cfg) -> PlacementVerdict:
    """Check bounds, horizon, freespace and occlusion in that order.

    In Poisson mode the box must also keep a one-pixel margin from the image
    border so the solve has background boundary values on every side.
    """
    margin = 1 if cfg.blend_mode == "poisson" else 0
    if not box_in_bounds(box, ctx.width, ctx.height, margin):
        return PlacementVerdict(False, OUT_OF_BOUNDS)
    if not contact[1] > ctx.intrinsics.cy:
        return PlacementVerdict(False, ABOVE_HORIZON)
    halfwidth = (box[2] - box[0]) / 2 * cfg.contact_fraction
    if not is_on_freespace(ctx, contact, halfwidth, cfg.freespace_fraction):
        return PlacementVerdict(False, OFF_FREESPACE)
    if occlusion_fraction(ctx, box) > cfg.occlusion_threshold:
        return PlacementVerdict(False, OVER_OCCLUDED)
    return PlacementVerdict(True, OK)
