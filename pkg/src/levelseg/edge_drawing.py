"""Anchor-seeded edge tracking guided by the quantized level-line."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from numba import njit

from .gradient_field import COMPASS, Anchor, GradientField


class ChainKind(str, enum.Enum):
    LINE = "line"
    LOOP = "loop"


@dataclass
class EdgeChain:
    """Ordered 8-connected pixel path; ``points`` is an ``(n, 2)`` array of (x, y)."""

    points: np.ndarray
    kind: ChainKind = ChainKind.LINE
    meta: dict = dc_field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self.points = np.asarray(self.points).reshape(-1, 2)

    def __len__(self) -> int:
        return self.points.shape[0]

    def with_points(self, points, kind=None) -> "EdgeChain":
        return EdgeChain(points, self.kind if kind is None else kind)


def candidate_offsets(direction: int) -> list[tuple[int, int]]:
    """Straight step first, then the counter-clockwise and clockwise neighbours."""
    if not 0 <= direction <= 7 or int(direction) != direction:
        raise ValueError(f"direction must be an integer in 0..7, got {direction!r}")
    k = int(direction)
    return [tuple(int(c) for c in COMPASS[j % 8]) for j in (k, k + 1, k - 1)]


@njit(cache=True)
def _quantize(tx, ty):
    alpha = math.degrees(math.atan2(-ty, tx)) % 360.0
    return int(math.ceil((alpha - 22.5) / 45.0)) % 8


@njit(cache=True)
def _walk(x0, y0, sx, sy, mag, u, v, valid, visited, compass, out_x, out_y):
    """Walk from (x0, y0), first heading along (sx, sy); returns the number of new pixels."""
    h, w = mag.shape
    x, y = x0, y0
    px, py = sx, sy  # previous step vector
    n = 0
    while True:
        tx, ty = u[y, x], v[y, x]
        if tx * px + ty * py < 0:
            tx, ty = -tx, -ty
        k = _quantize(tx, ty)
        best = -1.0
        bx, by = -1, -1
        for j in range(3):
            kk = (k + (0, 1, -1)[j]) % 8
            nx = x + compass[kk, 0]
            ny = y + compass[kk, 1]
            if nx < 0 or ny < 0 or nx >= w or ny >= h:
                continue
            if not valid[ny, nx]:
                continue
            if mag[ny, nx] > best:
                best = mag[ny, nx]
                bx, by = nx, ny
        # running into an already drawn pixel ends the walk
        if bx < 0 or visited[by, bx]:
            return n
        visited[by, bx] = True
        out_x[n] = bx
        out_y[n] = by
        n += 1
        px, py = float(bx - x), float(by - y)
        x, y = bx, by


@njit(cache=True)
def _draw(ax, ay, mag, u, v, valid, compass):
    h, w = mag.shape
    visited = np.zeros((h, w), dtype=np.bool_)
    fx = np.empty(h * w, dtype=np.int64)
    fy = np.empty(h * w, dtype=np.int64)
    bxs = np.empty(h * w, dtype=np.int64)
    bys = np.empty(h * w, dtype=np.int64)
    xs = np.empty(h * w, dtype=np.int64)
    ys = np.empty(h * w, dtype=np.int64)
    starts = np.empty(ax.shape[0] + 1, dtype=np.int64)
    nchains = 0
    total = 0
    starts[0] = 0
    for i in range(ax.shape[0]):
        x0, y0 = ax[i], ay[i]
        if visited[y0, x0] or not valid[y0, x0]:
            continue
        visited[y0, x0] = True
        nf = _walk(x0, y0, u[y0, x0], v[y0, x0], mag, u, v, valid, visited, compass, fx, fy)
        nb = _walk(x0, y0, -u[y0, x0], -v[y0, x0], mag, u, v, valid, visited, compass, bxs, bys)
        if nf + nb + 1 < 2:
            continue
        for j in range(nb - 1, -1, -1):
            xs[total] = bxs[j]
            ys[total] = bys[j]
            total += 1
        xs[total] = x0
        ys[total] = y0
        total += 1
        for j in range(nf):
            xs[total] = fx[j]
            ys[total] = fy[j]
            total += 1
        nchains += 1
        starts[nchains] = total
    return xs[:total], ys[:total], starts[: nchains + 1]


def draw_edges(field: GradientField, anchors) -> list[EdgeChain]:
    """Track one chain per uncovered anchor, strongest anchors first.

    ``anchors`` is a list of :class:`Anchor` or an ``(xs, ys, mags)`` array triple.
    """
    if isinstance(anchors, tuple) and len(anchors) == 3 and isinstance(anchors[0], np.ndarray):
        ax, ay, am = (np.asarray(a) for a in anchors)
    else:
        anchors = list(anchors)
        ax = np.array([a.x for a in anchors], dtype=np.int64)
        ay = np.array([a.y for a in anchors], dtype=np.int64)
        am = np.array([a.mag for a in anchors], dtype=np.float64)
    if ax.size == 0:
        return []
    order = np.lexsort((ax, ay, -am))
    xs, ys, starts = _draw(
        ax[order].astype(np.int64), ay[order].astype(np.int64),
        np.ascontiguousarray(field.mag), np.ascontiguousarray(field.u),
        np.ascontiguousarray(field.v), np.ascontiguousarray(field.valid), COMPASS,
    )
    pts = np.stack([xs, ys], axis=1)
    return [EdgeChain(pts[starts[i]:starts[i + 1]]) for i in range(len(starts) - 1)]
