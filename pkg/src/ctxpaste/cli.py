"""``ctxpaste`` command line: generate an augmented dataset from a fixture-style layout.

Exit status is 0 on success, 1 when startup validation fails (nothing is
written in that case) and 2 on an I/O failure during generation.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .annotations import WALL_TIME_KEY, default_class_table, write_labels, write_manifest
from .bank import BankLoadError, load_bank
from .camera import CameraFileError
from .config import KEY_HELP, ConfigError, PipelineConfig, parse_config
from .context import ContextLoadError, discover_bundles
from .imaging import load_rgb, save_png, to_uint8
from .placement import augment_indexed

logger = logging.getLogger("ctxpaste")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2
PREVIEW_BOX_RGB = (0, 255, 0)
PREVIEW_GAP = 4


class ValidationError(Exception):
    pass


@dataclass(frozen=True)
class RunRequest:
    backgrounds_dir: Path
    context_dir: Path
    masks_dir: Path
    manifest_path: Path
    camera_path: Path
    out_dir: Path
    config_path: Path | None = None
    seed: int | None = None
    count: int | None = None
    workers: int = 1
    preview: bool = False
    provenance: bool = False


def image_stem(index: int) -> str:
    return f"aug_{index:06d}"


def emit_preview(sample, out_path, original) -> None:
    """Side-by-side ``original | augmented`` with 1-px boxes, split by a white gap."""
    h, w = sample.image.shape[:2]
    aug = Image.fromarray(to_uint8(sample.image))
    draw = ImageDraw.Draw(aug)
    for _, (x1, y1, x2, y2) in sample.annotations:
        draw.rectangle([x1, y1, x2 - 1, y2 - 1], outline=PREVIEW_BOX_RGB, width=1)
    canvas = np.full((h, 2 * w + PREVIEW_GAP, 3), 255, dtype=np.uint8)
    canvas[:, :w] = to_uint8(original)
    canvas[:, w + PREVIEW_GAP:] = np.asarray(aug)
    save_png(out_path, canvas)


def _validate(req: RunRequest):
    """Check every input before any output exists; returns (cfg, bundles, contexts, bank, classes)."""
    for label, path in (("backgrounds", req.backgrounds_dir), ("context", req.context_dir),
                        ("masks", req.masks_dir)):
        if not path.is_dir():
            raise ValidationError(f"--{label}: directory not found: {path}")
    for label, path in (("manifest", req.manifest_path), ("camera", req.camera_path)):
        if not path.is_file():
            raise ValidationError(f"--{label}: file not found: {path}")
    if req.config_path is not None and not req.config_path.is_file():
        raise ValidationError(f"--config: file not found: {req.config_path}")
    if req.workers < 1:
        raise ValidationError("--workers must be >= 1")
    if req.count is not None and req.count < 0:
        raise ValidationError("--count must be >= 0")
    try:
        if req.config_path is not None:
            cfg = parse_config(req.config_path, overrides={"seed": req.seed})
        else:
            cfg = PipelineConfig() if req.seed is None else PipelineConfig(seed=req.seed)
        bundles = discover_bundles(req.backgrounds_dir, req.context_dir, req.camera_path)
        if not bundles:
            raise ValidationError(f"no *.png backgrounds in {req.backgrounds_dir}")
        for bundle in bundles:
            if not bundle.freespace.is_file():
                raise ValidationError(f"{bundle.name}: freespace mask not found: {bundle.freespace}")
            bundle.load()
        bank = load_bank(req.masks_dir, req.manifest_path)
    except (ConfigError, ContextLoadError, BankLoadError, CameraFileError) as exc:
        raise ValidationError(str(exc)) from None
    classes = dict(cfg.class_table) or default_class_table(bank.categories)
    missing = [c for c in bank.categories if c not in classes]
    if missing:
        raise ValidationError(f"class table has no id for {', '.join(missing)}")
    return cfg, bundles, bank, classes


# worker-process state, set once per process by _init_worker
_STATE: dict = {}


def _init_worker(req: RunRequest, cfg: PipelineConfig, bundles, classes):
    _STATE.update(req=req, cfg=cfg, bundles=bundles, classes=classes,
                  bank=load_bank(req.masks_dir, req.manifest_path))


def _generate(index: int) -> dict:
    req, cfg, bundles = _STATE["req"], _STATE["cfg"], _STATE["bundles"]
    bundle = bundles[index % len(bundles)]
    background = load_rgb(bundle.background)
    sample = augment_indexed(background, bundle.load(), _STATE["bank"], cfg, index,
                             provenance=req.provenance)
    stem = image_stem(index)
    save_png(req.out_dir / "images" / f"{stem}.png", sample.image)
    write_labels(sample, _STATE["classes"], req.out_dir / "labels" / f"{stem}.txt")
    if req.preview:
        emit_preview(sample, req.out_dir / "previews" / f"{stem}.png", background)
    if req.provenance:
        np.save(req.out_dir / "provenance" / f"{stem}.npy", sample.provenance_map)
    return {
        "index": index,
        "image": f"images/{stem}.png",
        "labels": f"labels/{stem}.txt",
        "background": bundle.name,
        "seed_record": list(sample.seed_record),
        "accepted": sample.stats["accepted"],
        "skipped": sample.stats["skipped"],
        "attempts": sample.stats["attempts"],
        "attempts_per_instance": sample.stats["attempts_per_instance"],
        "rejections": sample.stats["rejections"],
        "annotations": len(sample.annotations),
        "placements": [p.to_dict() for p in sample.provenance],
        "warnings": sample.warnings,
    }


def run(req: RunRequest, out=sys.stdout) -> int:
    start = time.perf_counter()
    try:
        cfg, bundles, bank, classes = _validate(req)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    n_images = len(bundles) if req.count is None else req.count
    try:
        req.out_dir.mkdir(parents=True, exist_ok=True)
        for sub in ("images", "labels") + (("previews",) if req.preview else ()) + (
                ("provenance",) if req.provenance else ()):
            (req.out_dir / sub).mkdir(exist_ok=True)
        if req.workers == 1:
            _init_worker(req, cfg, bundles, classes)
            entries = [_generate(i) for i in range(n_images)]
        else:
            with ProcessPoolExecutor(max_workers=req.workers, initializer=_init_worker,
                                     initargs=(req, cfg, bundles, classes)) as pool:
                entries = list(pool.map(_generate, range(n_images)))
        totals = summarize(entries)
        manifest = {
            "config": cfg.to_dict(),
            "global_seed": cfg.seed,
            "class_table": dict(sorted(classes.items())),
            "images": entries,
            "totals": totals,
            "warning_count": sum(len(e["warnings"]) for e in entries),
            WALL_TIME_KEY: round(time.perf_counter() - start, 3),
        }
        write_manifest(manifest, req.out_dir / "manifest.json")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(
        f"images: {totals['images']}  accepted: {totals['accepted']}  skipped: {totals['skipped']}  "
        f"mean attempts: {totals['mean_attempts']:.2f}  non-convergent blends: {totals['nonconvergent_blends']}",
        file=out,
    )
    return EXIT_OK


def summarize(entries) -> dict:
    accepted = sum(e["accepted"] for e in entries)
    skipped = sum(e["skipped"] for e in entries)
    attempts = sum(e["attempts"] for e in entries)
    instances = accepted + skipped
    return {
        "images": len(entries),
        "accepted": accepted,
        "skipped": skipped,
        "attempts": attempts,
        "mean_attempts": attempts / instances if instances else 0.0,
        "nonconvergent_blends": sum(
            1 for e in entries for w in e["warnings"] if w["kind"] == "poisson_nonconvergence"
        ),
    }


def build_parser() -> argparse.ArgumentParser:
    keys = "\n".join(f"  {k:<26} {v} (default {getattr(PipelineConfig(), k)!r})" for k, v in KEY_HELP.items())
    parser = argparse.ArgumentParser(
        prog="ctxpaste",
        description="Paste rare-object cutouts into traffic scenes under scene-context constraints.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "config file keys (flat 'key = value', '#' comments):\n" + keys
            + "\n  class_<category>           class id written to label files"
            "\n\nexit status: 0 success, 1 validation failure, 2 I/O failure"
        ),
    )
    parser.add_argument("--config", type=Path, help="flat key = value config file")
    parser.add_argument("--backgrounds", type=Path, required=True, help="directory of NAME.png backgrounds")
    parser.add_argument("--context", type=Path, required=True, help="directory of NAME.* context files")
    parser.add_argument("--masks", type=Path, required=True, help="cutout image directory")
    parser.add_argument("--manifest", type=Path, help="cutout manifest (default: MASKS/manifest.txt)")
    parser.add_argument("--camera", type=Path, required=True, help="shared camera file")
    parser.add_argument("--out", type=Path, required=True, help="output root")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--count", type=int,
                        help="number of images (default: one per background; cycles backgrounds)")
    parser.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    parser.add_argument("--preview", action="store_true", help="write side-by-side previews")
    parser.add_argument("--provenance", action="store_true", help="write per-pixel paste provenance maps")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    req = RunRequest(
        backgrounds_dir=args.backgrounds,
        context_dir=args.context,
        masks_dir=args.masks,
        manifest_path=args.manifest or args.masks / "manifest.txt",
        camera_path=args.camera,
        out_dir=args.out,
        config_path=args.config,
        seed=args.seed,
        count=args.count,
        workers=args.workers,
        preview=args.preview,
        provenance=args.provenance,
    )
    return run(req)


if __name__ == "__main__":
    raise SystemExit(main())
