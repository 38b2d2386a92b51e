"""Rejection-sampled, depth-aware placement and per-image augmentation.

Randomness is derived from ``(global_seed, image_index)`` through
:class:`numpy.random.SeedSequence`, with one child stream per instance, so a
sample depends only on its inputs and never on worker scheduling.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ._validation import alpha_tight_box, check_image
from .bank import Bank, InstanceCutout, flip_cutout, resize_cutout, resized_shape, sample_cutout
from .blending import BlendConfig, blend
from .camera import pixel_height, round_half_up, row_from_distance
from .color import adapt_cutout_hsv, region_stats
from .config import PipelineConfig
from .context import OFF_FREESPACE, OUT_OF_BOUNDS, SceneContext, lane_columns_at_row, validate_placement


@dataclass(frozen=True, eq=False)
class Placement:
    depth_m: float
    contact: tuple  # (row, col) of the ground-contact pixel
    height_px: float  # real-valued pixel height from the depth relation
    h_real: float
    cutout_ref: str
    category: str
    box: tuple  # (x1, y1, x2, y2), half-open, of the resized cutout
    flipped: bool = False
    cutout: InstanceCutout | None = field(default=None, repr=False)

    @property
    def contact_xy(self) -> tuple:
        return (self.contact[1], self.contact[0])

    @property
    def top_left(self) -> tuple:
        return (self.box[0], self.box[1])

    def to_dict(self) -> dict:
        return {
            "depth_m": self.depth_m,
            "contact_row": self.contact[0],
            "contact_col": self.contact[1],
            "height_px": self.height_px,
            "h_real_m": self.h_real,
            "cutout": self.cutout_ref,
            "category": self.category,
            "box": list(self.box),
            "flipped": self.flipped,
        }


@dataclass(eq=False)
class AugmentedSample:
    image: np.ndarray
    annotations: list  # [(category, (x1, y1, x2, y2))] in paste order
    provenance: list  # Placement per annotation, same order
    seed_record: tuple  # (global_seed, image_index)
    stats: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    provenance_map: np.ndarray | None = None  # paste index per pixel, -1 for background


def image_stream(global_seed: int, image_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(global_seed), int(image_index)]))


def sample_depth(cfg: PipelineConfig, rng: np.random.Generator) -> float:
    return float(rng.uniform(cfg.depth_min_m, cfg.depth_max_m))


def _box_at(contact_row: int, contact_col: int, h: int, w: int) -> tuple:
    x0 = contact_col - w // 2
    return (x0, contact_row - h + 1, x0 + w, contact_row + 1)


def propose_placement(ctx: SceneContext, cutout: InstanceCutout, cfg: PipelineConfig,
                      rng: np.random.Generator):
    """One placement proposal; returns a :class:`Placement` or a rejection reason string."""
    intr, extr = ctx.intrinsics, ctx.extrinsics
    depth = sample_depth(cfg, rng)
    row = round_half_up(row_from_distance(intr, extr, depth))
    if not 0 <= row < ctx.height:
        return OUT_OF_BOUNDS

    use_lane = rng.random() < cfg.lane_prior_prob
    lanes = lane_columns_at_row(ctx, row) if use_lane else []
    if lanes:
        lane_col = lanes[int(rng.integers(len(lanes)))][0]
        jitter = rng.normal(0.0, cfg.lane_lateral_sigma_px) if cfg.lane_lateral_sigma_px > 0 else 0.0
        col = round_half_up(lane_col + jitter)
    else:
        free = np.flatnonzero(ctx.freespace[row])
        if free.size == 0:
            return OFF_FREESPACE
        col = int(free[int(rng.integers(free.size))])

    lo, hi = cutout.h_real_range
    h_real = float(rng.uniform(lo, hi))
    height_px = pixel_height(intr, h_real, depth)
    target = max(1, round_half_up(height_px))
    flipped = cfg.horizontal_flip_prob > 0 and rng.random() < cfg.horizontal_flip_prob

    # validate on the predicted shape first so rejected attempts skip the resize
    h, w = resized_shape(cutout, target)
    box = _box_at(row, col, h, w)
    verdict = validate_placement(ctx, box, (col, row), cfg)
    if not verdict.accepted:
        return verdict.reason
    resized = resize_cutout(cutout, target)
    if flipped:
        resized = flip_cutout(resized)
    if (resized.height, resized.width) != (h, w):
        box = _box_at(row, col, resized.height, resized.width)
        verdict = validate_placement(ctx, box, (col, row), cfg)
        if not verdict.accepted:
            return verdict.reason
    return Placement(depth, (row, col), height_px, h_real, cutout.source_id, cutout.category,
                     box, flipped, resized)


def _visible_box(painted: np.ndarray, box: tuple, covered: np.ndarray):
    x1, y1, x2, y2 = box
    vis = painted & ~covered[y1:y2, x1:x2]
    tight = alpha_tight_box(vis.astype(np.float64))
    if tight is None:
        return None
    return (x1 + tight[0], y1 + tight[1], x1 + tight[2], y1 + tight[3])


def augment_image(background: np.ndarray, ctx: SceneContext, bank: Bank, cfg: PipelineConfig,
                  rng: np.random.Generator, seed_record=None, provenance=False) -> AugmentedSample:
    """Paste up to ``cfg.instances_per_image`` cutouts into ``background``.

    Instances are proposed in index order, each from its own child stream of
    ``rng``, and pasted far-to-near. Instances that exhaust
    ``max_attempts_per_instance`` proposals are skipped.
    """
    background = check_image(background, "background")
    if background.shape[:2] != (ctx.height, ctx.width):
        raise ValueError(
            f"background is {background.shape[1]}x{background.shape[0]}, context is {ctx.width}x{ctx.height}"
        )
    categories = bank.categories
    streams = rng.spawn(cfg.instances_per_image)
    accepted, attempts_per_instance, reasons = [], [], Counter()
    for i, stream in enumerate(streams):
        category = categories[int(stream.integers(len(categories)))]
        cutout = sample_cutout(bank, category, stream)
        tries = 0
        for tries in range(1, cfg.max_attempts_per_instance + 1):
            result = propose_placement(ctx, cutout, cfg, stream)
            if isinstance(result, Placement):
                accepted.append((i, result))
                break
            reasons[result] += 1
        attempts_per_instance.append(tries)

    blend_cfg = BlendConfig.from_pipeline(cfg)
    order = sorted(accepted, key=lambda item: (-item[1].depth_m, item[0]))
    canvas = background
    warnings = []
    painted_masks = []
    prov_map = np.full(background.shape[:2], -1, dtype=np.int32) if provenance else None
    for k, (i, pl) in enumerate(order):
        cutout = pl.cutout
        if cfg.hsv_adapt:
            cutout, hsv_warn = adapt_cutout_hsv(
                cutout, region_stats(background, pl.box),
                cfg.hsv_scale_min, cfg.hsv_scale_max, cfg.hsv_scale_direction,
            )
            warnings.extend({"kind": "hsv", "instance": i, "message": m} for m in hsv_warn)
        canvas, solutions, painted = blend(canvas, cutout, pl.top_left, blend_cfg)
        bad = [s for s in solutions if not s.converged]
        if bad:
            warnings.append({
                "kind": "poisson_nonconvergence",
                "instance": i,
                "iterations": max(s.iterations for s in bad),
                "residual": max(s.residual for s in bad),
            })
        painted_masks.append(painted)
        if prov_map is not None:
            x1, y1, x2, y2 = pl.box
            prov_map[y1:y2, x1:x2][painted] = k

    annotations, placements, hidden = [], [], 0
    if cfg.clip_occluded_boxes:
        covered = np.zeros(background.shape[:2], dtype=bool)
        clipped = [None] * len(order)
        # walk near-to-far so each instance sees only the nearer pastes
        for k in range(len(order) - 1, -1, -1):
            pl = order[k][1]
            clipped[k] = _visible_box(painted_masks[k], pl.box, covered)
            x1, y1, x2, y2 = pl.box
            covered[y1:y2, x1:x2] |= pl.cutout.alpha >= 0.5
        for (i, pl), box in zip(order, clipped):
            if box is None:
                hidden += 1
                continue
            annotations.append((pl.category, box))
            placements.append(pl)
    else:
        for i, pl in order:
            x1, y1, _, _ = pl.box
            tight = alpha_tight_box(pl.cutout.alpha)
            annotations.append((pl.category, (x1 + tight[0], y1 + tight[1], x1 + tight[2], y1 + tight[3])))
            placements.append(pl)

    stats = {
        "accepted": len(accepted),
        "skipped": cfg.instances_per_image - len(accepted),
        "attempts": int(sum(attempts_per_instance)),
        "attempts_per_instance": attempts_per_instance,
        "rejections": dict(sorted(reasons.items())),
        "hidden": hidden,
    }
    return AugmentedSample(canvas if order else background.copy(), annotations, placements,
                           tuple(seed_record) if seed_record is not None else None,
                           stats, warnings, prov_map)


def augment_indexed(background, ctx, bank, cfg: PipelineConfig, image_index: int, provenance=False):
    """:func:`augment_image` with the stream derived from ``(cfg.seed, image_index)``."""
    return augment_image(background, ctx, bank, cfg, image_stream(cfg.seed, image_index),
                         seed_record=(cfg.seed, image_index), provenance=provenance)
