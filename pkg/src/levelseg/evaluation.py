"""Ground-truth-free repeatability of line segments under a homography."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .segment_fitting import DegenerateFitError, LineSegment

DET_TOL = 1e-12
INFINITY_TOL = 1e-9


class HomographyError(ValueError):
    pass


class ProjectionError(ValueError):
    """A point maps onto (or too close to) the plane at infinity."""


@dataclass(frozen=True)
class Homography:
    h: np.ndarray

    def __post_init__(self):
        h = np.array(self.h, dtype=np.float64).reshape(3, 3)
        if not np.all(np.isfinite(h)):
            raise HomographyError("homography has non-finite entries")
        if h[2, 2] != 0:
            h = h / h[2, 2]
        if abs(np.linalg.det(h)) <= DET_TOL:
            raise HomographyError("homography is singular")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.h))

    def __matmul__(self, other: "Homography") -> "Homography":
        return Homography(self.h @ other.h)

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        hom = np.c_[pts, np.ones(len(pts))] @ self.h.T
        if np.any(np.abs(hom[:, 2]) <= INFINITY_TOL):
            raise ProjectionError("point maps to the plane at infinity")
        return hom[:, :2] / hom[:, 2:]

    def __eq__(self, other):
        return isinstance(other, Homography) and np.array_equal(self.h, other.h)

    def __hash__(self):
        return hash(self.h.tobytes())


@dataclass(frozen=True)
class EvalConfig:
    dist_thresh: float
    angle_thresh: float
    overlap_thresh: float

    def __post_init__(self):
        if not (self.dist_thresh > 0 and self.angle_thresh > 0):
            raise ValueError("evaluation thresholds must be positive")
        if not 0 < self.overlap_thresh <= 1:
            raise ValueError("overlap threshold must lie in (0, 1]")


PRESETS = {
    "strict": EvalConfig(1.5, 5.0, 0.75),
    "loose": EvalConfig(3.0, 10.0, 0.75),
}


@dataclass
class MatchReport:
    n_r: int
    n_t: int
    n_m: int
    rep: float
    pairs: list[tuple[int, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"n_r": self.n_r, "n_t": self.n_t, "n_m": self.n_m, "rep": self.rep,
                "pairs": [list(p) for p in self.pairs]}


def repeatability(n_m: int, n_r: int, n_t: int) -> float:
    if n_r < 0 or n_t < 0:
        raise ValueError("counts must be non-negative")
    if n_r == 0 or n_t == 0:
        return 0.0
    return (n_m / 2) * (1 / n_r + 1 / n_t)


def project_segment(H: Homography, seg: LineSegment) -> LineSegment:
    p1, p2 = H.apply([seg.p1, seg.p2])
    try:
        return LineSegment.from_endpoints(p1, p2, support=seg.support, mean_dist=seg.mean_dist,
                                          mean_angle=seg.mean_angle)
    except DegenerateFitError as exc:
        raise ProjectionError("segment collapses to a point") from exc


def segment_pair_metrics(p: LineSegment, q: LineSegment) -> tuple[float, float, float]:
    """Distance, acute angle and overlap of ``p`` measured against ``q``.

    The distance is the larger distance from p's endpoints to q's infinite
    line; the overlap is the length of p's projection onto q that falls on q,
    divided by the shorter of the two lengths.
    """
    lp, lq = p.length, q.length
    if lp == 0 or lq == 0:
        raise ValueError("segments must have positive length")
    qa, qb, qc = q.line.a, q.line.b, q.line.c
    dist = max(abs(qa * x + qb * y + qc) for x, y in (p.p1, p.p2))

    dpx, dpy = (p.p2[0] - p.p1[0]) / lp, (p.p2[1] - p.p1[1]) / lp
    dqx, dqy = (q.p2[0] - q.p1[0]) / lq, (q.p2[1] - q.p1[1]) / lq
    cosang = min(abs(dpx * dqx + dpy * dqy), 1.0)
    angle = math.degrees(math.acos(cosang))

    t1 = (p.p1[0] - q.p1[0]) * dqx + (p.p1[1] - q.p1[1]) * dqy
    t2 = (p.p2[0] - q.p1[0]) * dqx + (p.p2[1] - q.p1[1]) * dqy
    inter = min(max(t1, t2), lq) - max(min(t1, t2), 0.0)
    overlap = min(max(inter / min(lp, lq), 0.0), 1.0)
    return dist, angle, overlap


def _passes(m, cfg: EvalConfig) -> bool:
    dist, angle, overlap = m
    return dist <= cfg.dist_thresh and angle <= cfg.angle_thresh and overlap >= cfg.overlap_thresh


def _project_all(H, segs):
    out = []
    for s in segs:
        try:
            out.append(project_segment(H, s))
        except ProjectionError:
            out.append(None)
    return out


def closeness_matrix(ref: list[LineSegment], test: list[LineSegment], H: Homography,
                     cfg: EvalConfig) -> np.ndarray:
    """Closeness of every qualifying (ref, test) pair, ``inf`` where a pair does not qualify.

    A pair qualifies when the projected reference segment passes all three
    thresholds against the test segment and the back-projected test segment
    passes them against the reference. Closeness is the mean of the two
    projected-midpoint distances, which keeps it symmetric under swapping the
    images and inverting ``H``.
    """
    if not isinstance(H, Homography):
        H = Homography(H)
    ref_proj = _project_all(H, ref)
    test_proj = _project_all(H.inverse(), test)
    close = np.full((len(ref), len(test)), np.inf)
    for i, (r, rp) in enumerate(zip(ref, ref_proj)):
        if rp is None:
            continue
        for j, (t, tp) in enumerate(zip(test, test_proj)):
            if tp is None:
                continue
            if not (_passes(segment_pair_metrics(rp, t), cfg)
                    and _passes(segment_pair_metrics(tp, r), cfg)):
                continue
            d_fwd = math.dist(rp.midpoint, t.midpoint)
            d_bwd = math.dist(tp.midpoint, r.midpoint)
            close[i, j] = 0.5 * (d_fwd + d_bwd)
    return close


def match_segments(ref: list[LineSegment], test: list[LineSegment], H: Homography,
                   cfg: EvalConfig) -> MatchReport:
    """One-to-one mutual-closest matching of reference and test segments.

    A qualifying pair is kept when each segment is the other's closest
    qualifying candidate (see :func:`closeness_matrix`).
    """
    close = closeness_matrix(ref, test, H, cfg)
    n_r, n_t = close.shape
    pairs = []
    if n_r and n_t:
        best_t = np.argmin(close, axis=1)
        best_r = np.argmin(close, axis=0)
        for i in range(n_r):
            j = int(best_t[i])
            if np.isfinite(close[i, j]) and best_r[j] == i:
                pairs.append((i, j))
    n_m = len(pairs)
    return MatchReport(n_r, n_t, n_m, repeatability(n_m, n_r, n_t), pairs)
