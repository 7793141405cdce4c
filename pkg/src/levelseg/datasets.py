"""Oxford-affine and HPatches style sequence directories.

A sequence directory holds a reference image ``img1.*`` (or ``1.*``), test
images ``img2.*``.. (or ``2.*``..) and one homography file per test image,
named ``H1to{k}p`` (Oxford) or ``H_1_{k}`` (HPatches). Each homography file
is nine whitespace-separated numbers, row-major, mapping reference pixels to
test pixels.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .evaluation import Homography, HomographyError

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".ppm", ".pgm", ".png")
TRANSFORMS = ("blur", "view", "zoom+rotation", "light", "JPEG", "unknown")
_IMAGE_RE = re.compile(r"^(?:img)?(\d+)$")


class HomographyParseError(ValueError):
    pass


class SequenceLoadError(OSError):
    pass


@dataclass
class Sequence:
    name: str
    ref_image: Path
    tests: list[tuple[Path, Homography]] = field(default_factory=list)
    transformation: str = "unknown"


def parse_homography(text: str) -> Homography:
    tokens = text.split()
    if len(tokens) != 9:
        raise HomographyParseError(f"expected 9 numbers, found {len(tokens)}")
    try:
        values = [float(t) for t in tokens]
    except ValueError as exc:
        raise HomographyParseError(str(exc)) from exc
    return Homography(np.array(values).reshape(3, 3))


def parse_homography_file(path) -> Homography:
    path = Path(path)
    try:
        return parse_homography(path.read_text())
    except HomographyParseError as exc:
        raise HomographyParseError(f"{path}: {exc}") from None
    except HomographyError as exc:
        raise HomographyError(f"{path}: {exc}") from None


def format_homography(H: Homography) -> str:
    return "\n".join(" ".join(repr(float(x)) for x in row) for row in H.h) + "\n"


def write_homography_file(path, H: Homography) -> None:
    Path(path).write_text(format_homography(H))


def _index_images(directory: Path) -> dict[int, Path]:
    found: dict[int, Path] = {}
    for p in sorted(directory.iterdir()):
        if not p.is_file() or p.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        m = _IMAGE_RE.match(p.stem)
        if m:
            found.setdefault(int(m.group(1)), p)
    return found


def _homography_path(directory: Path, k: int) -> Path | None:
    for name in (f"H1to{k}p", f"H_1_{k}"):
        p = directory / name
        if p.is_file():
            return p
    return None


def _transformation(directory: Path) -> str:
    label_file = directory / "transform.txt"
    if label_file.is_file():
        label = label_file.read_text().strip()
        return label if label else "unknown"
    return "unknown"


def load_sequence(directory) -> Sequence:
    directory = Path(directory)
    if not directory.is_dir():
        raise SequenceLoadError(f"{directory}: not a directory")
    images = _index_images(directory)
    if 1 not in images:
        raise SequenceLoadError(f"{directory}: no reference image img1.* or 1.*")
    tests = []
    missing = []
    for k in sorted(i for i in images if i != 1):
        hp = _homography_path(directory, k)
        if hp is None:
            style = "H_1_{}" if not images[k].stem.startswith("img") else "H1to{}p"
            missing.append(style.format(k))
            continue
        tests.append((images[k], parse_homography_file(hp)))
    if missing:
        raise SequenceLoadError(f"{directory}: missing homography file(s): {', '.join(missing)}")
    return Sequence(directory.name, images[1], tests, _transformation(directory))


def discover_sequences(root) -> list[Path]:
    """Sequence directories under ``root`` (or ``root`` itself if it is one)."""
    root = Path(root)
    if not root.is_dir():
        return []
    if 1 in _index_images(root):
        return [root]
    return [p for p in sorted(root.iterdir()) if p.is_dir() and 1 in _index_images(p)]
