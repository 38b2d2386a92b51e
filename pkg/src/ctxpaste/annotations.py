"""Label files and the run manifest.

Labels are YOLO-style text: one ``<class_id> <cx> <cy> <w> <h>`` line per
box, normalized by image size and written with six decimals so files are
byte-identical across platforms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

WALL_TIME_KEY = "wall_time_s"


@dataclass(frozen=True)
class LabelRecord:
    class_id: int
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"normalized {name}={v} outside [0, 1]")
        if not (self.w > 0 and self.h > 0):
            raise ValueError("label width and height must be positive")

    @classmethod
    def from_box(cls, class_id, box, width, height) -> "LabelRecord":
        x1, y1, x2, y2 = box
        return cls(int(class_id), (x1 + x2) / 2 / width, (y1 + y2) / 2 / height,
                   (x2 - x1) / width, (y2 - y1) / height)

    def to_box(self, width, height) -> tuple:
        """Denormalized ``(x1, y1, x2, y2)`` in pixels (real-valued)."""
        cx, cy, w, h = self.cx * width, self.cy * height, self.w * width, self.h * height
        return (cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)

    def format(self) -> str:
        return f"{self.class_id} {self.cx:.6f} {self.cy:.6f} {self.w:.6f} {self.h:.6f}"


def default_class_table(categories) -> dict:
    return {cat: i for i, cat in enumerate(sorted(categories))}


def label_lines(annotations, class_table, width, height) -> list:
    lines = []
    for category, box in annotations:
        if category not in class_table:
            raise KeyError(f"category {category!r} has no class id in the class table")
        lines.append(LabelRecord.from_box(class_table[category], box, width, height).format())
    return lines


def write_labels(sample, class_table, out_path) -> None:
    """Write one label line per annotation of ``sample`` in paste order."""
    height, width = sample.image.shape[:2]
    lines = label_lines(sample.annotations, class_table, width, height)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("".join(line + "\n" for line in lines))


def parse_label_line(line: str) -> LabelRecord:
    parts = line.split()
    if len(parts) != 5:
        raise ValueError(f"malformed label line {line!r}")
    return LabelRecord(int(parts[0]), *(float(p) for p in parts[1:]))


def read_labels(path) -> list:
    text = Path(path).read_text(encoding="utf-8")
    return [parse_label_line(line) for line in text.splitlines() if line.strip()]


def manifest_text(run_stats: dict) -> str:
    return json.dumps(run_stats, sort_keys=True, indent=2) + "\n"


def write_manifest(run_stats: dict, out_path) -> None:
    """Serialize ``run_stats`` as JSON with sorted keys."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(manifest_text(run_stats), encoding="utf-8")


def strip_wall_time(manifest: dict) -> dict:
    return {k: v for k, v in manifest.items() if k != WALL_TIME_KEY}
