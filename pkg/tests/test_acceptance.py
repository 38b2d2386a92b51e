"""Exit criteria for the generation engine.

Each test carries an ``acceptance`` marker; a PASS/FAIL line per criterion
is printed in the terminal summary. Runtime limits are asserted in-test.
"""

import hashlib
import io
import json
import time

import numpy as np
import pytest

from ctxpaste._validation import alpha_tight_box
from ctxpaste.annotations import read_labels, write_labels
from ctxpaste.bank import make_cutout
from ctxpaste.blending import poisson_blend, solve_poisson_system
from ctxpaste.camera import CameraExtrinsics, CameraIntrinsics, distance_from_row, pixel_height, row_from_distance
from ctxpaste.cli import RunRequest, run
from ctxpaste.color import RegionStats, adapt_cutout_hsv, cutout_means, hsv_scales, hsv_to_rgb, region_stats, rgb_to_hsv
from ctxpaste.config import PipelineConfig, parse_config
from ctxpaste.placement import Placement, augment_indexed, propose_placement

from conftest import open_context
from test_blending import dense_solve, random_region

POISSON_TOL = 1e-4


def independent_checks(ctx, pl, cfg):
    """Re-derive every constraint from the raw rasters without the library's checks."""
    x1, y1, x2, y2 = pl.box
    row, col = pl.contact
    margin = 1 if cfg.blend_mode == "poisson" else 0
    in_bounds = x1 >= margin and y1 >= margin and x2 <= ctx.width - margin and y2 <= ctx.height - margin
    below_horizon = row > ctx.intrinsics.cy
    hw = int(np.floor((x2 - x1) / 2 * cfg.contact_fraction))
    seg = [ctx.freespace[row, c] if 0 <= c < ctx.width else False for c in range(col - hw, col + hw + 1)]
    on_free = bool(ctx.freespace[row, col]) and sum(seg) >= cfg.freespace_fraction * len(seg)
    cover = np.zeros((ctx.height, ctx.width), dtype=bool)
    for u in ctx.road_users:
        cover[u.y1:u.y2, u.x1:u.x2] = True
    occl = cover[y1:y2, x1:x2].mean()
    return {
        "bounds": in_bounds,
        "horizon": below_horizon,
        "freespace": on_free,
        "occlusion": occl <= cfg.occlusion_threshold,
    }


def req(fx, out, **kw):
    return RunRequest(fx / "backgrounds", fx / "context", fx / "masks", fx / "masks" / "manifest.txt",
                      fx / "camera.txt", out, **kw)


def tree_digest(root):
    digest = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            data = p.read_bytes()
            if p.name == "manifest.json":
                m = json.loads(data)
                m.pop("wall_time_s")
                data = json.dumps(m, sort_keys=True).encode()
            digest[str(p.relative_to(root))] = hashlib.sha256(data).hexdigest()
    return digest


@pytest.mark.acceptance(1, "geometry exactness")
def test_geometry_exactness():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        fy = rng.uniform(100, 5000)
        cy = rng.uniform(0, 2000)
        intr = CameraIntrinsics(fy, fy, 0.0, cy)
        extr = CameraExtrinsics(rng.uniform(0.2, 5.0))
        d = rng.uniform(0.5, 1000.0)
        back = distance_from_row(intr, extr, row_from_distance(intr, extr, d))
        worst = max(worst, abs(back - d) / d)
        h = rng.uniform(0.01, 5.0)
        assert pixel_height(intr, h, d) / pixel_height(intr, h, 2 * d) == 2.0
    assert worst < 1e-9
    assert time.perf_counter() - start < 1.0


@pytest.mark.acceptance(2, "placement soundness over >= 10000 accepted placements")
def test_placement_soundness(contexts, bank):
    start = time.perf_counter()
    cfg = PipelineConfig()
    rng = np.random.default_rng(77)
    accepted = failures = tries = 0
    while accepted < 10_000:
        ctx = contexts[tries % len(contexts)]
        pl = propose_placement(ctx, bank.cutouts[tries % len(bank)], cfg, rng)
        tries += 1
        if not isinstance(pl, Placement):
            continue
        accepted += 1
        if not all(independent_checks(ctx, pl, cfg).values()):
            failures += 1
    assert failures == 0
    assert time.perf_counter() - start < 30.0


@pytest.mark.acceptance(3, "HSV mean matching, alpha and hue preserved")
def test_hsv_mean_matching():
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    for _ in range(100):
        h, w = rng.integers(8, 40, size=2)
        hsv = np.stack([rng.uniform(0, 360, (h, w)), rng.uniform(0.3, 0.5, (h, w)),
                        rng.uniform(0.3, 0.5, (h, w))], axis=-1)
        alpha = rng.uniform(0.05, 1.0, (h, w))
        alpha[rng.random((h, w)) < 0.2] = 0.0
        alpha[0, :] = alpha[-1, :] = alpha[:, 0] = alpha[:, -1] = 0.5
        cutout = make_cutout(np.dstack([hsv_to_rgb(hsv), alpha]), "traffic_cone", (0.45, 0.9))
        bg_hsv = np.stack([rng.uniform(0, 360, (h, w)), rng.uniform(0.25, 0.6, (h, w)),
                           rng.uniform(0.25, 0.6, (h, w))], axis=-1)
        stats = region_stats(hsv_to_rgb(bg_hsv), (0, 0, w, h))

        before = cutout_means(cutout.pixels)
        scale, _ = hsv_scales(before, stats)
        raw_s, raw_v = stats.mean_s / before.mean_s, stats.mean_v / before.mean_v
        assert (scale.s_scale, scale.v_scale) == pytest.approx((raw_s, raw_v), abs=0), "scale clamped"
        opaque = cutout.alpha > 0
        src = rgb_to_hsv(cutout.rgb)[opaque]
        assert (src[:, 1] * raw_s).max() <= 1 and (src[:, 2] * raw_v).max() <= 1, "pixel clamped"

        out, _ = adapt_cutout_hsv(cutout, stats)
        after = cutout_means(out.pixels)
        assert abs(after.mean_s - stats.mean_s) <= 1 / 255
        assert abs(after.mean_v - stats.mean_v) <= 1 / 255
        assert np.array_equal(out.alpha, cutout.alpha)
        h0, h1 = src[:, 0], rgb_to_hsv(out.rgb)[opaque][:, 0]
        assert np.abs((h1 - h0 + 180.0) % 360.0 - 180.0).max() < 1e-6
    assert time.perf_counter() - start < 10.0


@pytest.mark.acceptance(4, "Poisson solver: dense oracle and analytic cases")
def test_poisson_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(64)
    checked = 0
    for _ in range(60):
        h, w = rng.integers(1, 9, size=2)
        region = random_region(rng, h, w, fill=rng.uniform(0.3, 1.0))
        if region.sum() > 64:
            continue
        rhs = rng.normal(size=region.shape)
        boundary = rng.random(region.shape)
        cg = solve_poisson_system(region, rhs, boundary, tol=1e-12, max_iters=1000).values
        assert np.abs(cg - dense_solve(region, rhs, boundary))[region].max() <= 1e-8
        checked += 1
    assert checked >= 40

    # identity paste: the source covers its own boundary ring
    bg = rng.random((48, 48, 3))
    alpha = np.full((34, 34), 0.25)
    alpha[1:-1, 1:-1] = 1.0
    ident = make_cutout(np.dstack([bg[7:41, 7:41], alpha]), "x", (1, 1))
    out, _ = poisson_blend(bg, ident, (7, 7), tol=POISSON_TOL)
    assert np.abs(out[8:40, 8:40] - bg[8:40, 8:40]).max() <= POISSON_TOL

    const = make_cutout(np.dstack([np.full((32, 32, 3), 0.8), np.ones((32, 32))]), "x", (1, 1))
    out, _ = poisson_blend(np.full((48, 48, 3), 0.3), const, (8, 8), tol=POISSON_TOL)
    assert np.abs(out[8:40, 8:40] - 0.3).max() <= POISSON_TOL

    ramp = np.tile(np.linspace(0.05, 0.95, 48), (48, 1))
    bg = np.dstack([ramp, ramp[:, ::-1], 0.5 * ramp])
    out, _ = poisson_blend(bg, const, (8, 8), tol=POISSON_TOL)
    assert np.abs(out[8:40, 8:40] - bg[8:40, 8:40]).max() <= POISSON_TOL
    assert time.perf_counter() - start < 10.0


@pytest.mark.acceptance(5, "worker-count determinism (1 vs 8 workers)")
def test_determinism_across_workers(fixture_dir, tmp_path):
    start = time.perf_counter()
    cfg = tmp_path / "run.cfg"
    cfg.write_text("instances_per_image = 5\n")
    digests = []
    for workers in (1, 8):
        out = tmp_path / f"w{workers}"
        assert run(req(fixture_dir, out, config_path=cfg, seed=42, workers=workers), out=io.StringIO()) == 0
        digests.append(tree_digest(out))
    assert len(digests[0]) == 7  # 3 images, 3 labels, manifest
    assert digests[0] == digests[1]
    assert time.perf_counter() - start < 120.0


@pytest.mark.acceptance(6, "annotation fidelity over >= 500 annotations")
def test_annotation_fidelity(fixture_dir, backgrounds, contexts, bank, tmp_path):
    start = time.perf_counter()
    cfg = PipelineConfig(seed=6)
    checked = 0
    index = 0
    while checked < 500:
        k = index % len(contexts)
        sample = augment_indexed(backgrounds[k], contexts[k], bank, cfg, index)
        path = tmp_path / f"{index}.txt"
        write_labels(sample, {"traffic_barrel": 0, "traffic_cone": 1}, path)
        records = read_labels(path)
        assert len(records) == len(sample.provenance)
        for rec, pl in zip(records, sample.provenance):
            x0, y0 = pl.top_left
            t = alpha_tight_box(pl.cutout.alpha)
            truth = (x0 + t[0], y0 + t[1], x0 + t[2], y0 + t[3])
            got = rec.to_box(1280, 720)
            assert max(abs(a - b) for a, b in zip(got, truth)) <= 0.5
            checked += 1
        index += 1
    assert time.perf_counter() - start < 30.0


@pytest.mark.acceptance(7, "default config pastes exactly 5 instances per image")
def test_protocol_conformance(tmp_path, backgrounds, contexts, bank):
    empty = tmp_path / "empty.cfg"
    empty.write_text("")
    cfg = parse_config(empty)
    assert cfg.instances_per_image == 5
    for seed in range(4):
        cfg_s = cfg.replace(seed=seed)
        for k, (bg, ctx) in enumerate(zip(backgrounds, contexts)):
            s = augment_indexed(bg, ctx, bank, cfg_s, k)
            assert len(s.annotations) == 5 and s.stats["skipped"] == 0
        open_ctx = open_context()
        s = augment_indexed(np.full((720, 1280, 3), 0.5), open_ctx, bank, cfg_s, 0)
        assert len(s.annotations) == 5


@pytest.mark.acceptance(8, "throughput: 100 Poisson-blended 1280x720 images under 5 minutes")
def test_throughput(fixture_dir, tmp_path):
    start = time.perf_counter()
    out = tmp_path / "bulk"
    assert run(req(fixture_dir, out, seed=8, count=100), out=io.StringIO()) == 0
    elapsed = time.perf_counter() - start
    assert len(list((out / "images").glob("*.png"))) == 100
    assert elapsed < 300.0, f"100 images took {elapsed:.1f}s"
