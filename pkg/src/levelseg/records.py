"""JSON detection records.

Schema::

    {"image": str, "width": int, "height": int,
     "params": {DetectorParams fields},
     "segments": [{"x1", "y1", "x2", "y2", "a", "b", "c",
                   "support", "mean_dist", "mean_angle", "lu", "lv"}, ...]}

Floats are written with ``repr`` precision, so reading a record back gives
bit-identical values.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .params import DetectorParams
from .segment_fitting import LineParams, LineSegment

FORMAT = "levelseg-detections"
VERSION = 1


class RecordFormatError(ValueError):
    pass


@dataclass
class DetectionRecord:
    image: str
    width: int
    height: int
    params: DetectorParams = field(default_factory=DetectorParams)
    segments: list[LineSegment] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": VERSION,
            "image": self.image,
            "width": self.width,
            "height": self.height,
            "params": self.params.to_dict(),
            "segments": [segment_to_dict(s) for s in self.segments],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DetectionRecord":
        try:
            return cls(
                image=str(data["image"]),
                width=int(data["width"]),
                height=int(data["height"]),
                params=DetectorParams.from_dict(data.get("params", {})),
                segments=[segment_from_dict(s) for s in data.get("segments", [])],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise RecordFormatError(f"malformed detection record: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=False) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def read(cls, path) -> "DetectionRecord":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise RecordFormatError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise RecordFormatError(f"{path}: expected a JSON object")
        return cls.from_dict(data)


def segment_to_dict(s: LineSegment) -> dict:
    return {
        "x1": s.p1[0], "y1": s.p1[1], "x2": s.p2[0], "y2": s.p2[1],
        "a": s.line.a, "b": s.line.b, "c": s.line.c,
        "support": s.support, "mean_dist": s.mean_dist, "mean_angle": s.mean_angle,
        "lu": s.level[0], "lv": s.level[1],
    }


def segment_from_dict(d: dict) -> LineSegment:
    return LineSegment(
        LineParams(float(d["a"]), float(d["b"]), float(d["c"])),
        (float(d["x1"]), float(d["y1"])),
        (float(d["x2"]), float(d["y2"])),
        int(d.get("support", 0)),
        float(d.get("mean_dist", 0.0)),
        float(d.get("mean_angle", 0.0)),
        (float(d.get("lu", 0.0)), float(d.get("lv", 0.0))),
    )
