"""Synthetic fixture set: road-scene backgrounds, context bundles and cutouts.

Everything is drawn procedurally from a fixed seed, so the set is
byte-reproducible and small enough to ship with the tests::

    ctxpaste-fixtures OUT_DIR

writes ``backgrounds/``, ``context/``, ``masks/`` (with ``manifest.txt``)
and ``camera.txt`` under ``OUT_DIR``.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from .bank import DEFAULT_HEIGHT_RANGES
from .camera import CameraExtrinsics, CameraIntrinsics, write_camera_file
from .imaging import save_png

WIDTH, HEIGHT = 1280, 720
CAMERA = (CameraIntrinsics(1000.0, 1000.0, 640.0, 360.0), CameraExtrinsics(1.5))

# per scene: lighting gain, saturation of the surroundings, road users
SCENES = (
    ("scene_000", 1.0, 1.0, (("car", 300, 420, 420, 500), ("truck", 780, 380, 900, 470))),
    ("scene_001", 0.45, 0.7, (("bus", 900, 395, 1100, 520),)),
    ("scene_002", 1.2, 1.1, (("car", 520, 390, 600, 440), ("pedestrian", 1000, 420, 1030, 500),
                              ("bicycle", 200, 450, 250, 520))),
)


def _road_geometry(width=WIDTH, height=HEIGHT, cx=640.0, cy=360.0):
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    t = np.clip((ys - cy) / (height - cy), 0.0, None)  # 0 at horizon, 1 at bottom
    left = cx - t * (cx - 20.0)
    right = cx + t * (width - 20.0 - cx)
    road = (ys > cy + 4) & (xs >= left) & (xs <= right)
    return ys, xs, t, road


def lane_map(width=WIDTH, height=HEIGHT, cx=640.0, cy=360.0) -> np.ndarray:
    ys, xs, t, road = _road_geometry(width, height, cx, cy)
    lanes = np.zeros((height, width), dtype=np.uint8)
    for k, bottom_x in enumerate((330.0, 950.0), start=1):
        center = cx + t * (bottom_x - cx)
        half = 1.0 + 6.0 * t
        lanes[(np.abs(xs - center) <= half) & road & (ys > cy + 12)] = k
    return lanes


def draw_scene(gain: float, sat: float, users, seed: int):
    rng = np.random.default_rng(seed)
    ys, xs, t, road = _road_geometry()
    img = np.empty((HEIGHT, WIDTH, 3))
    sky_t = (ys / 360.0)[..., None]
    img[:] = (1 - sky_t) * np.array([0.35, 0.55, 0.9]) + sky_t * np.array([0.75, 0.82, 0.92])
    ground = ys > 360
    grass = np.array([0.25, 0.45, 0.2])
    img[ground] = grass
    asphalt = 0.33 + 0.05 * rng.standard_normal((HEIGHT, WIDTH))
    img[road] = np.stack([asphalt, asphalt, asphalt * 1.03], axis=-1)[road]
    lanes = lane_map()
    img[lanes > 0] = [0.92, 0.92, 0.88]
    freespace = road.copy()
    for _, x1, y1, x2, y2 in users:
        shade = rng.uniform(0.1, 0.6, size=3)
        img[y1:y2, x1:x2] = shade
        img[y1 + (y2 - y1) // 3:y1 + (y2 - y1) // 2, x1 + 4:x2 - 4] = shade * 0.4 + 0.3
        freespace[y1:y2, x1:x2] = False
    lum = img.mean(axis=-1, keepdims=True)
    img = np.clip((lum + sat * (img - lum)) * gain, 0.0, 1.0)
    return img, freespace, lanes


def _supersampled(mask_fn, h, w, ss=4):
    yy, xx = np.mgrid[0:h * ss, 0:w * ss].astype(np.float64)
    m = mask_fn((yy + 0.5) / (h * ss), (xx + 0.5) / (w * ss)).astype(np.float64)
    return m.reshape(h, ss, w, ss).mean(axis=(1, 3))


def draw_cone(h: int, w: int, body_rgb, stripe_rgb=(0.95, 0.95, 0.95)) -> np.ndarray:
    """RGBA cone on a tight canvas; coordinates are normalized to [0, 1]."""
    def body(v, u):
        half = 0.07 + 0.36 * (v / 0.88)
        return (v <= 0.88) & (np.abs(u - 0.5) <= half)

    def base(v, u):
        return (v > 0.88) & (np.abs(u - 0.5) <= 0.5)

    alpha = np.clip(_supersampled(lambda v, u: body(v, u) | base(v, u), h, w), 0, 1)
    v = (np.arange(h) + 0.5)[:, None] / h
    u = (np.arange(w) + 0.5)[None, :] / w
    shade = np.broadcast_to(1.0 - 0.35 * np.abs(u - 0.42) * 2, (h, w))
    rgb = np.empty((h, w, 3))
    rgb[:] = np.asarray(body_rgb) * shade[..., None]
    stripes = ((v > 0.32) & (v < 0.44)) | ((v > 0.58) & (v < 0.70))
    stripe = np.broadcast_to(stripes, (h, w))
    rgb[stripe] = (np.asarray(stripe_rgb) * shade[..., None])[stripe]
    rgb[np.broadcast_to(v > 0.88, (h, w))] = [0.12, 0.12, 0.12]
    return np.dstack([np.clip(rgb, 0, 1), alpha])


def draw_barrel(h: int, w: int) -> np.ndarray:
    alpha = _supersampled(lambda v, u: (np.abs(u - 0.5) <= 0.42 + 0.08 * np.sin(np.pi * v)), h, w)
    v = (np.arange(h) + 0.5)[:, None] / h
    u = (np.arange(w) + 0.5)[None, :] / w
    shade = 1.0 - 0.4 * np.abs(u - 0.45) * 2
    bands = (np.floor(v * 5) % 2 == 0)
    rgb = np.where(bands[..., None], np.array([0.95, 0.45, 0.05]), np.array([0.95, 0.95, 0.95]))
    rgb = rgb * shade[..., None]
    return np.dstack([np.clip(rgb, 0, 1), alpha])


CONES = (
    (200, 120, (1.0, 0.45, 0.05)),
    (240, 150, (0.95, 0.35, 0.08)),
    (180, 100, (1.0, 0.55, 0.1)),
    (160, 110, (0.9, 0.2, 0.1)),
    (220, 130, (1.0, 0.6, 0.0)),
    (190, 115, (0.85, 0.4, 0.15)),
)
BARRELS = ((180, 120), (200, 140))


def write_fixture_set(out_dir, seed: int = 7) -> Path:
    out = Path(out_dir)
    for sub in ("backgrounds", "context", "masks"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    write_camera_file(out / "camera.txt", *CAMERA)
    for k, (name, gain, sat, users) in enumerate(SCENES):
        img, freespace, lanes = draw_scene(gain, sat, users, seed + k)
        save_png(out / "backgrounds" / f"{name}.png", img)
        save_png(out / "context" / f"{name}.freespace.png", (freespace * 255).astype(np.uint8))
        save_png(out / "context" / f"{name}.lanes.png", lanes)
        with open(out / "context" / f"{name}.roadusers.txt", "w", encoding="utf-8") as fh:
            fh.write("# category x1 y1 x2 y2\n")
            for cat, x1, y1, x2, y2 in users:
                fh.write(f"{cat} {x1} {y1} {x2} {y2}\n")
    rows = []
    cone_lo, cone_hi = DEFAULT_HEIGHT_RANGES["traffic_cone"]
    for k, (h, w, color) in enumerate(CONES):
        rel = f"cone_{k:02d}.png"
        save_png(out / "masks" / rel, draw_cone(h, w, color))
        rows.append(f"{rel} traffic_cone {cone_lo} {cone_hi}")
    bar_lo, bar_hi = DEFAULT_HEIGHT_RANGES["traffic_barrel"]
    for k, (h, w) in enumerate(BARRELS):
        rel = f"barrel_{k:02d}.png"
        save_png(out / "masks" / rel, draw_barrel(h, w))
        rows.append(f"{rel} traffic_barrel {bar_lo} {bar_hi}")
    (out / "masks" / "manifest.txt").write_text(
        "# path category h_real_min h_real_max\n" + "\n".join(rows) + "\n", encoding="utf-8"
    )
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Write the synthetic fixture set.")
    parser.add_argument("out_dir")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)
    write_fixture_set(args.out_dir, args.seed)
    print(f"fixture set written to {args.out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
