"""Synthetic test images with known geometry."""
from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates

from .evaluation import Homography


def render_segments(shape, segments, width: float = 3.0, intensity: float = 1.0,
                    background: float = 0.0) -> np.ndarray:
    """Anti-aliased strokes; pixel coverage falls off linearly over one pixel.

    ``segments`` is an iterable of ``((x1, y1), (x2, y2))`` in pixel-centre
    coordinates.
    """
    h, w = shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    cover = np.zeros((h, w))
    for (x1, y1), (x2, y2) in segments:
        dx, dy = x2 - x1, y2 - y1
        L2 = dx * dx + dy * dy
        t = np.clip(((xs - x1) * dx + (ys - y1) * dy) / L2, 0.0, 1.0)
        dist = np.hypot(xs - (x1 + t * dx), ys - (y1 + t * dy))
        cover = np.maximum(cover, np.clip(width / 2 + 0.5 - dist, 0.0, 1.0))
    return background + (intensity - background) * cover


def random_segments(rng, n=12, shape=(512, 512), min_length=60.0, max_length=160.0,
                    radius=None):
    """Random segments whose endpoints stay inside a centred disk."""
    h, w = shape
    cx, cy = (w - 1) / 2, (h - 1) / 2
    radius = radius if radius is not None else 0.42 * min(h, w)
    segs = []
    while len(segs) < n:
        length = rng.uniform(min_length, max_length)
        ang = rng.uniform(0, math.pi)
        r = radius * math.sqrt(rng.uniform())
        t = rng.uniform(0, 2 * math.pi)
        mx, my = cx + r * math.cos(t), cy + r * math.sin(t)
        hx, hy = 0.5 * length * math.cos(ang), 0.5 * length * math.sin(ang)
        p1, p2 = (mx - hx, my - hy), (mx + hx, my + hy)
        if all(math.hypot(px - cx, py - cy) <= radius for px, py in (p1, p2)):
            segs.append((p1, p2))
    return segs


def rigid_homography(angle: float, tx: float, ty: float, center=(0.0, 0.0)) -> Homography:
    """Rotation by ``angle`` radians about ``center`` followed by a translation."""
    cx, cy = center
    c, s = math.cos(angle), math.sin(angle)
    to_c = np.array([[1, 0, -cx], [0, 1, -cy], [0, 0, 1]], dtype=np.float64)
    rot = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=np.float64)
    back = np.array([[1, 0, cx + tx], [0, 1, cy + ty], [0, 0, 1]], dtype=np.float64)
    return Homography(back @ rot @ to_c)


def warp_image(img, H: Homography, shape=None, order: int = 1, cval: float = 0.0) -> np.ndarray:
    """Resample ``img`` so that a point ``p`` of the input lands at ``H(p)``."""
    img = np.asarray(img, dtype=np.float64)
    h, w = shape if shape is not None else img.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    src = H.inverse().apply(np.stack([xs.ravel(), ys.ravel()], axis=1))
    out = map_coordinates(img, [src[:, 1], src[:, 0]], order=order, cval=cval, mode="constant")
    return np.clip(out.reshape(h, w), 0.0, 1.0)


def texture_image(rng, shape=(480, 640), n_shapes=40, noise: float = 0.02) -> np.ndarray:
    """Piecewise-smooth clutter: overlapping polygons and strokes over a soft gradient.

    Stands in for natural images in invariant and timing checks.
    """
    h, w = shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    img = 0.3 + 0.2 * (xs / w) + 0.1 * np.sin(ys / 37.0)
    for _ in range(n_shapes):
        kind = rng.integers(3)
        level = rng.uniform(0.05, 0.95)
        if kind == 0:
            x0, y0 = rng.uniform(0, w), rng.uniform(0, h)
            rw, rh = rng.uniform(20, w / 3), rng.uniform(20, h / 3)
            ang = rng.uniform(0, math.pi)
            c, s = math.cos(ang), math.sin(ang)
            lx = (xs - x0) * c + (ys - y0) * s
            ly = -(xs - x0) * s + (ys - y0) * c
            mask = (np.abs(lx) < rw / 2) & (np.abs(ly) < rh / 2)
            img[mask] = level
        elif kind == 1:
            x0, y0 = rng.uniform(0, w), rng.uniform(0, h)
            r = rng.uniform(10, min(h, w) / 5)
            img[np.hypot(xs - x0, ys - y0) < r] = level
        else:
            p1 = (rng.uniform(0, w), rng.uniform(0, h))
            ang = rng.uniform(0, 2 * math.pi)
            L = rng.uniform(40, 300)
            p2 = (p1[0] + L * math.cos(ang), p1[1] + L * math.sin(ang))
            stroke = render_segments((h, w), [(p1, p2)], width=rng.uniform(2, 6))
            img = img * (1 - stroke) + level * stroke
    img = gaussian_filter(img, 0.7)
    img += rng.normal(0, noise, img.shape)
    return np.clip(img, 0.0, 1.0)
