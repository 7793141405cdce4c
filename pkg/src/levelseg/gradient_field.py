"""Level-line field, direction quantization and anchor extraction.

Angles are measured in a y-up frame (counter-clockwise from East) while
vectors and offsets are stored in image coordinates (x right, y down).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .imaging import RawGradients

# image-coordinate step for each quantized direction, East then counter-clockwise
COMPASS = np.array(
    [(1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)], dtype=np.int64
)
DIRECTION_NAMES = ("E", "NE", "N", "NW", "W", "SW", "S", "SE")


@dataclass(frozen=True)
class GradientField:
    mag: np.ndarray  # normalized magnitude, [0, 1]
    u: np.ndarray  # level-line x component
    v: np.ndarray  # level-line y component (image y down)
    dir: np.ndarray  # quantized level-line direction, 0..7
    valid: np.ndarray

    @property
    def height(self) -> int:
        return self.mag.shape[0]

    @property
    def width(self) -> int:
        return self.mag.shape[1]

    def level(self, x, y):
        return self.u[y, x], self.v[y, x]


class Anchor(NamedTuple):
    x: int
    y: int
    mag: float


def _quantize_angle_deg(alpha):
    # bins are 45 deg wide, centred on k*45; a boundary goes to the lower bin
    return np.mod(np.ceil((np.mod(alpha, 360.0) - 22.5) / 45.0).astype(np.int64), 8)


def quantize_direction(u: float, v: float) -> int:
    """Map an image-coordinate vector to one of eight compass directions (0 = East)."""
    if u == 0 and v == 0:
        raise ValueError("cannot quantize the zero vector")
    alpha = math.degrees(math.atan2(-v, u))
    return int(_quantize_angle_deg(np.float64(alpha)))


def quantize_directions(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return _quantize_angle_deg(np.degrees(np.arctan2(-v, u)))


@njit(cache=True)
def _field_kernel(gx, gy, grad_thresh):
    h, w = gx.shape
    norm = np.empty((h, w))
    peak = 0.0
    for y in range(h):
        for x in range(w):
            m = math.hypot(gx[y, x], gy[y, x])
            norm[y, x] = m
            if m > peak:
                peak = m
    mag = np.zeros((h, w))
    u = np.empty((h, w))
    v = np.empty((h, w))
    d = np.empty((h, w), dtype=np.int64)
    valid = np.zeros((h, w), dtype=np.bool_)
    for y in range(h):
        for x in range(w):
            n = norm[y, x]
            if n > 0.0:
                # cos(theta_o + pi/2) = -sin(theta_o), -sin(theta_o + pi/2) = -cos(theta_o)
                # with theta_o = atan2(-gy, gx)
                uu = gy[y, x] / n
                vv = -gx[y, x] / n
            else:
                uu, vv = 0.0, -1.0
            u[y, x] = uu
            v[y, x] = vv
            alpha = math.degrees(math.atan2(-vv, uu)) % 360.0
            d[y, x] = int(math.ceil((alpha - 22.5) / 45.0)) % 8
            if peak > 0.0:
                mag[y, x] = norm[y, x] / peak
                valid[y, x] = norm[y, x] > 0.0 and mag[y, x] >= grad_thresh
    return mag, u, v, d, valid


def build_gradient_field(raw: RawGradients, grad_thresh: float) -> GradientField:
    """Level-line field from Sobel responses.

    With the gradient angle taken in the y-up frame, ``theta_o = atan2(-gy, gx)``,
    the level-line is ``(cos(theta_o + pi/2), -sin(theta_o + pi/2))``, which
    lands back in image coordinates and reduces to ``(gy, -gx) / |g|``.
    Magnitudes are scaled by the image maximum.
    """
    mag, u, v, d, valid = _field_kernel(np.ascontiguousarray(raw.gx, dtype=np.float64),
                                        np.ascontiguousarray(raw.gy, dtype=np.float64),
                                        float(grad_thresh))
    return GradientField(mag, u, v, d, valid)


@njit(cache=True)
def _anchor_kernel(mag, d, valid, compass):
    h, w = mag.shape
    mask = np.zeros((h, w), dtype=np.bool_)
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            if not valid[y, x]:
                continue
            # level-line direction k has the gradient along k-2 (toward the brighter side)
            g = (d[y, x] + 6) % 8
            m = mag[y, x]
            if m > mag[y + compass[g, 1], x + compass[g, 0]] and \
                    m >= mag[y - compass[g, 1], x - compass[g, 0]]:
                mask[y, x] = True
    return mask


def _anchor_mask(field: GradientField) -> np.ndarray:
    return _anchor_kernel(field.mag, field.dir, field.valid, COMPASS)


def anchor_arrays(field: GradientField):
    """Anchor coordinates and magnitudes sorted by magnitude, then (y, x)."""
    ys, xs = np.nonzero(_anchor_mask(field))
    mags = field.mag[ys, xs]
    order = np.lexsort((xs, ys, -mags))
    return xs[order], ys[order], mags[order]


def extract_anchors(field: GradientField) -> list[Anchor]:
    xs, ys, mags = anchor_arrays(field)
    return [Anchor(int(x), int(y), float(m)) for x, y, m in zip(xs, ys, mags)]


@njit(cache=True)
def _equalize(xs, ys, radius, width, height):
    r = int(math.floor(radius))
    r2 = radius * radius
    taken = np.zeros((height, width), dtype=np.bool_)
    keep = np.zeros(xs.shape[0], dtype=np.bool_)
    for i in range(xs.shape[0]):
        x, y = xs[i], ys[i]
        ok = True
        for dy in range(-r, r + 1):
            yy = y + dy
            if yy < 0 or yy >= height:
                continue
            for dx in range(-r, r + 1):
                xx = x + dx
                if xx < 0 or xx >= width:
                    continue
                if taken[yy, xx] and dx * dx + dy * dy <= r2:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            keep[i] = True
            taken[y, x] = True
    return keep


def equalize_anchor_arrays(xs, ys, mags, radius: float):
    if radius <= 0:
        raise ValueError("radius must be positive")
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    mags = np.asarray(mags, dtype=np.float64)
    if xs.size == 0:
        return xs, ys, mags
    order = np.lexsort((xs, ys, -mags))
    xs, ys, mags = xs[order], ys[order], mags[order]
    off = np.array([xs.min(), ys.min()])
    keep = _equalize(xs - off[0], ys - off[1], float(radius),
                     int(xs.max() - off[0] + 1), int(ys.max() - off[1] + 1))
    return xs[keep], ys[keep], mags[keep]


def equalize_anchors(anchors: list[Anchor], radius: float) -> list[Anchor]:
    """Greedy magnitude-first suppression keeping anchors more than ``radius`` apart."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if not anchors:
        return []
    xs, ys, mags = equalize_anchor_arrays([a.x for a in anchors], [a.y for a in anchors],
                                          [a.mag for a in anchors], radius)
    return [Anchor(int(x), int(y), float(m)) for x, y, m in zip(xs, ys, mags)]
