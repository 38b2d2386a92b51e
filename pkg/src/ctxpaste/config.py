"""Pipeline configuration and the flat ``key = value`` config-file grammar.

Grammar, one entry per line::

    identifier = scalar    # optional comment

Blank lines and ``#`` comments are ignored. Keys of the form
``class_<category>`` populate the category-to-class-id table used for
label files; every other key must be a field of :class:`PipelineConfig`.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

BLEND_MODES = ("plain", "gaussian", "poisson")
HSV_DIRECTIONS = ("match_region", "paper_literal")

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class ConfigError(ValueError):
    pass


# (help text) per tunable; used by --help and kept next to the defaults on purpose.
KEY_HELP = {
    "instances_per_image": "instances pasted into each background",
    "depth_min_m": "nearest sampled ground distance in meters",
    "depth_max_m": "farthest sampled ground distance in meters",
    "lane_prior_prob": "probability of drawing the column from a lane pixel",
    "lane_lateral_sigma_px": "Gaussian column jitter around the chosen lane pixel",
    "max_attempts_per_instance": "placement proposals before an instance is skipped",
    "occlusion_threshold": "max fraction of the pasted box covered by road users",
    "freespace_fraction": "min freespace fraction of the footprint segment",
    "contact_fraction": "footprint half-width as a fraction of half the box width",
    "hsv_scale_min": "lower clamp for saturation/value scale factors",
    "hsv_scale_max": "upper clamp for saturation/value scale factors",
    "hsv_scale_direction": "match_region (region/cutout) or paper_literal (cutout/region)",
    "hsv_adapt": "apply the local HSV adaptation",
    "blend_mode": "plain, gaussian or poisson",
    "feather_sigma": "alpha feathering sigma in pixels (gaussian mode)",
    "poisson_tol": "max-norm error bound for the Poisson solve",
    "poisson_max_iters": "iteration cap for the Poisson solve",
    "horizontal_flip_prob": "probability of mirroring a cutout before pasting",
    "clip_occluded_boxes": "shrink boxes of instances covered by nearer pastes",
    "seed": "global random seed",
}


@dataclass(frozen=True)
class PipelineConfig:
    instances_per_image: int = 5
    depth_min_m: float = 5.0
    depth_max_m: float = 60.0
    lane_prior_prob: float = 0.5
    lane_lateral_sigma_px: float = 15.0
    max_attempts_per_instance: int = 50
    occlusion_threshold: float = 0.5
    freespace_fraction: float = 0.8
    contact_fraction: float = 0.6
    hsv_scale_min: float = 0.5
    hsv_scale_max: float = 2.0
    hsv_scale_direction: str = "match_region"
    hsv_adapt: bool = True
    blend_mode: str = "poisson"
    feather_sigma: float = 1.5
    poisson_tol: float = 1e-4
    poisson_max_iters: int = 10_000
    horizontal_flip_prob: float = 0.0
    clip_occluded_boxes: bool = False
    seed: int = 0
    class_table: dict = field(default_factory=dict, compare=True, hash=False)

    def __post_init__(self):
        validate_config(self)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["class_table"] = dict(sorted(self.class_table.items()))
        return out


def validate_config(cfg: PipelineConfig) -> None:
    def bad(msg):
        raise ConfigError(msg)

    if cfg.instances_per_image < 0:
        bad(f"instances_per_image must be >= 0, got {cfg.instances_per_image}")
    if not (0 < cfg.depth_min_m <= cfg.depth_max_m):
        bad(
            "depth_min_m / depth_max_m must satisfy 0 < depth_min_m <= depth_max_m, "
            f"got depth_min_m={cfg.depth_min_m}, depth_max_m={cfg.depth_max_m}"
        )
    for name in ("lane_prior_prob", "occlusion_threshold", "freespace_fraction",
                 "contact_fraction", "horizontal_flip_prob"):
        v = getattr(cfg, name)
        if not 0.0 <= v <= 1.0:
            bad(f"{name} must lie in [0, 1], got {v}")
    if cfg.lane_lateral_sigma_px < 0:
        bad(f"lane_lateral_sigma_px must be >= 0, got {cfg.lane_lateral_sigma_px}")
    if cfg.max_attempts_per_instance < 1:
        bad(f"max_attempts_per_instance must be >= 1, got {cfg.max_attempts_per_instance}")
    if not (0 < cfg.hsv_scale_min <= cfg.hsv_scale_max):
        bad(
            "hsv_scale_min / hsv_scale_max must satisfy 0 < hsv_scale_min <= hsv_scale_max, "
            f"got {cfg.hsv_scale_min}, {cfg.hsv_scale_max}"
        )
    if cfg.hsv_scale_direction not in HSV_DIRECTIONS:
        bad(f"hsv_scale_direction {cfg.hsv_scale_direction!r} is not one of {', '.join(HSV_DIRECTIONS)}")
    if cfg.blend_mode not in BLEND_MODES:
        bad(f"blend_mode {cfg.blend_mode!r} is not one of {', '.join(BLEND_MODES)}")
    if cfg.feather_sigma < 0:
        bad(f"feather_sigma must be >= 0, got {cfg.feather_sigma}")
    if not cfg.poisson_tol > 0:
        bad(f"poisson_tol must be > 0, got {cfg.poisson_tol}")
    if cfg.poisson_max_iters < 1:
        bad(f"poisson_max_iters must be >= 1, got {cfg.poisson_max_iters}")
    for cat, cid in cfg.class_table.items():
        if not isinstance(cid, int) or cid < 0:
            bad(f"class id for {cat!r} must be a non-negative integer, got {cid!r}")


def _convert(key: str, raw: str, kind):
    if kind is bool:
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{key} expects a boolean, got {raw!r}")
    if kind is int:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key} expects an integer, got {raw!r}") from None
    if kind is float:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key} expects a number, got {raw!r}") from None
    return raw


_FIELD_TYPES = {f.name: {"int": int, "float": float, "bool": bool, "str": str}.get(f.type)
                for f in fields(PipelineConfig) if f.name != "class_table"}


def parse_config_text(text: str, source: str = "<config>", overrides: dict | None = None) -> PipelineConfig:
    values: dict = {}
    classes: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not _IDENT.match(key) or not val:
            raise ConfigError(f"{source}:{lineno}: expected 'identifier = value', got {raw.strip()!r}")
        if key.startswith("class_"):
            classes[key[len("class_"):]] = _convert(key, val, int)
        elif key in _FIELD_TYPES:
            try:
                values[key] = _convert(key, val, _FIELD_TYPES[key])
            except ConfigError as exc:
                raise ConfigError(f"{source}:{lineno}: {exc}") from None
        else:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(class_table=classes, **values)


def parse_config(path, overrides: dict | None = None) -> PipelineConfig:
    """Read a config file; absent keys keep their defaults and ``overrides`` win over the file."""
    path = Path(path)
    return parse_config_text(path.read_text(encoding="utf-8"), source=str(path), overrides=overrides)
