"""Progressive line fitting with distance and level-line angle validation.

Lines are kept in normalized implicit form ``a*x + b*y + c = 0`` with
``a**2 + b**2 == 1``. Refinement minimizes a per-point clamped loss

    sum_i min(d_i / dist_thresh, 1) + rho * min(theta_i / angle_thresh, 1)

where ``d_i`` is the point-to-line distance and ``theta_i`` the angle (in
degrees) between the point's level-line and the line direction. The clamps
make the loss flat far from the optimum, so it is minimized with a
Nelder-Mead simplex over ``(phi, c)``, ``(a, b) = (cos phi, sin phi)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .edge_drawing import ChainKind, EdgeChain
from .gradient_field import GradientField
from .params import DetectorParams

NM_PHI_STEP = math.radians(2.0)
NM_C_STEP = 1.0
NM_FTOL = 1e-8
NM_MAX_ITER = 200
NM_MAX_RESTARTS = 3
NM_POLISH_ROUNDS = 2
# loss decrease below which another restart or polish round is not worth it
NM_GAIN_TOL = 1e-6
MAX_SEEDS = 24


class DegenerateFitError(ValueError):
    pass


@dataclass(frozen=True)
class LineParams:
    a: float
    b: float
    c: float

    @classmethod
    def normalized(cls, a: float, b: float, c: float) -> "LineParams":
        """Scale to a unit normal, with ``a > 0`` (or ``a == 0`` and ``b > 0``)."""
        n = math.hypot(a, b)
        if n == 0:
            raise DegenerateFitError("line normal is zero")
        a, b, c = a / n, b / n, c / n
        if a < 0 or (a == 0 and b < 0):
            a, b, c = -a, -b, -c
        return cls(float(a) + 0.0, float(b) + 0.0, float(c) + 0.0)

    @property
    def direction(self) -> tuple[float, float]:
        return (-self.b, self.a)

    def project(self, x: float, y: float) -> tuple[float, float]:
        s = self.a * x + self.b * y + self.c
        return (float(x - s * self.a), float(y - s * self.b))


@dataclass(frozen=True)
class LineSegment:
    line: LineParams
    p1: tuple[float, float]
    p2: tuple[float, float]
    support: int = 0
    mean_dist: float = 0.0
    mean_angle: float = 0.0
    # mean level-line of the supporting pixels, used for overlay ticks
    level: tuple[float, float] = (0.0, 0.0)
    # chain bookkeeping, not serialized
    span: tuple[int, int] | None = field(default=None, compare=False)
    chain: int | None = field(default=None, compare=False)

    @property
    def length(self) -> float:
        return math.hypot(self.p2[0] - self.p1[0], self.p2[1] - self.p1[1])

    @property
    def midpoint(self) -> tuple[float, float]:
        return ((self.p1[0] + self.p2[0]) / 2, (self.p1[1] + self.p2[1]) / 2)

    @classmethod
    def from_endpoints(cls, p1, p2, **kw) -> "LineSegment":
        x1, y1 = float(p1[0]), float(p1[1])
        x2, y2 = float(p2[0]), float(p2[1])
        if x1 == x2 and y1 == y2:
            raise DegenerateFitError("segment has zero length")
        line = LineParams.normalized(y2 - y1, x1 - x2, x2 * y1 - x1 * y2)
        return cls(line, (x1, y1), (x2, y2), **kw)


def fit_line_tls(points) -> LineParams:
    """Orthogonal least-squares line through ``points``."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 2 or np.all(pts == pts[0]):
        raise DegenerateFitError("need at least two distinct points")
    mean = pts.mean(axis=0)
    d = pts - mean
    scatter = d.T @ d
    _, vecs = np.linalg.eigh(scatter)
    a, b = vecs[:, 0]
    return LineParams.normalized(a, b, -(a * mean[0] + b * mean[1]))


def point_line_distance(line: LineParams, x, y):
    return np.abs(line.a * x + line.b * y + line.c) / math.hypot(line.a, line.b)


def level_line_angle_error(line: LineParams, u, v):
    """Angle in degrees between a level-line and the line direction, in [0, 90]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    norm = np.hypot(u, v)
    if np.any(norm == 0):
        raise ValueError("level-line vector must be nonzero")
    cosang = np.abs(-line.b * u + line.a * v) / (math.hypot(line.a, line.b) * norm)
    out = np.degrees(np.arccos(np.minimum(cosang, 1.0)))
    return float(out) if out.ndim == 0 else out


def clamped_loss(points, levels, line: LineParams, params: DetectorParams | None = None) -> float:
    params = params or DetectorParams()
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    lev = np.asarray(levels, dtype=np.float64).reshape(-1, 2)
    if len(pts) != len(lev):
        raise ValueError("points and levels must have the same length")
    d = point_line_distance(line, pts[:, 0], pts[:, 1])
    loss = np.minimum(d / params.dist_thresh, 1.0).sum()
    if params.use_angle_check:
        theta = level_line_angle_error(line, lev[:, 0], lev[:, 1])
        loss += params.rho * np.minimum(np.asarray(theta) / params.angle_thresh, 1.0).sum()
    return float(loss)


# ---------------------------------------------------------------------------
# compiled kernels; points are passed centred, levels are unit vectors
# ---------------------------------------------------------------------------


@njit(cache=True)
def _loss(phi, c, xs, ys, psi, td, ta, rho, use_angle):
    """Clamped loss; ``psi`` holds level-line angles in radians, ``ta`` is in radians too.

    The angle between the line direction (angle ``phi + pi/2``) and a
    level-line is folded into [0, pi/2], the same value as
    ``acos(|-b*u + a*v|)`` without the per-point ``acos``.
    """
    a = math.cos(phi)
    b = math.sin(phi)
    line_dir = phi + 0.5 * math.pi
    s = 0.0
    for i in range(xs.shape[0]):
        d = abs(a * xs[i] + b * ys[i] + c) / td
        s += d if d < 1.0 else 1.0
        if use_angle:
            t = (line_dir - psi[i]) % math.pi
            if t > 0.5 * math.pi:
                t = math.pi - t
            t /= ta
            s += rho * (t if t < 1.0 else 1.0)
    return s


@njit(cache=True)
def _nelder_mead(phi0, c0, xs, ys, psi, td, ta, rho, use_angle, step_phi, step_c, ftol, max_iter):
    sp = np.empty((3, 2))
    fv = np.empty(3)
    sp[0, 0], sp[0, 1] = phi0, c0
    sp[1, 0], sp[1, 1] = phi0 + step_phi, c0
    sp[2, 0], sp[2, 1] = phi0, c0 + step_c
    for k in range(3):
        fv[k] = _loss(sp[k, 0], sp[k, 1], xs, ys, psi, td, ta, rho, use_angle)
    for _ in range(max_iter):
        order = np.argsort(fv)
        sp = sp[order].copy()
        fv = fv[order].copy()
        if fv[2] - fv[0] < ftol:
            break
        cx = 0.5 * (sp[0, 0] + sp[1, 0])
        cy = 0.5 * (sp[0, 1] + sp[1, 1])
        rx = cx + (cx - sp[2, 0])
        ry = cy + (cy - sp[2, 1])
        fr = _loss(rx, ry, xs, ys, psi, td, ta, rho, use_angle)
        if fr < fv[0]:
            ex = cx + 2.0 * (cx - sp[2, 0])
            ey = cy + 2.0 * (cy - sp[2, 1])
            fe = _loss(ex, ey, xs, ys, psi, td, ta, rho, use_angle)
            if fe < fr:
                sp[2, 0], sp[2, 1], fv[2] = ex, ey, fe
            else:
                sp[2, 0], sp[2, 1], fv[2] = rx, ry, fr
        elif fr < fv[1]:
            sp[2, 0], sp[2, 1], fv[2] = rx, ry, fr
        else:
            if fr < fv[2]:
                kx = cx + 0.5 * (rx - cx)
                ky = cy + 0.5 * (ry - cy)
            else:
                kx = cx + 0.5 * (sp[2, 0] - cx)
                ky = cy + 0.5 * (sp[2, 1] - cy)
            fk = _loss(kx, ky, xs, ys, psi, td, ta, rho, use_angle)
            if fk < min(fr, fv[2]):
                sp[2, 0], sp[2, 1], fv[2] = kx, ky, fk
            else:
                for k in range(1, 3):
                    sp[k, 0] = sp[0, 0] + 0.5 * (sp[k, 0] - sp[0, 0])
                    sp[k, 1] = sp[0, 1] + 0.5 * (sp[k, 1] - sp[0, 1])
                    fv[k] = _loss(sp[k, 0], sp[k, 1], xs, ys, psi, td, ta, rho, use_angle)
    best = np.argmin(fv)
    return sp[best, 0], sp[best, 1], fv[best]


@njit(cache=True)
def _refine(phi0, c0, xs, ys, psi, td, ta, rho, use_angle):
    """Simplex search with restarts; never returns a worse point than the start.

    Candidate lines through each point along its own level-line, and chords
    between points half the set apart, are scored as well; when the best of
    them beats the starting loss a second simplex is run from there. Each run restarts from its optimum with a
    fresh simplex until the loss stops improving.
    """
    n = xs.shape[0]
    f0 = _loss(phi0, c0, xs, ys, psi, td, ta, rho, use_angle)
    if f0 <= 0.0:
        return phi0, c0, f0
    best_phi, best_c, best_f = _restarted_nm(phi0, c0, f0, xs, ys, psi, td, ta, rho, use_angle)
    if best_f <= 0.0:
        return best_phi, best_c, best_f

    stride = max(1, n // MAX_SEEDS)
    seed_phi, seed_c, seed_f = phi0, c0, f0
    half = n // 2
    for i in range(0, n, stride):
        for kind in range(2):
            if kind == 0:
                if not use_angle:
                    continue
                # line through point i running along its level-line
                p = psi[i] - 0.5 * math.pi
            else:
                j = (i + half) % n
                dx = xs[j] - xs[i]
                dy = ys[j] - ys[i]
                if dx == 0.0 and dy == 0.0:
                    continue
                p = math.atan2(dx, -dy)
            cc = -(math.cos(p) * xs[i] + math.sin(p) * ys[i])
            f = _loss(p, cc, xs, ys, psi, td, ta, rho, use_angle)
            if f < seed_f:
                seed_phi, seed_c, seed_f = p, cc, f
    if seed_f < best_f:
        p, cc, f = _restarted_nm(seed_phi, seed_c, seed_f, xs, ys, psi, td, ta, rho, use_angle)
        if f < best_f:
            best_phi, best_c, best_f = p, cc, f
    # polish: refit the unclamped points and search again from there
    for _ in range(NM_POLISH_ROUNDS):
        ok, p, cc = _inlier_tls(best_phi, best_c, xs, ys, psi, td, ta, use_angle)
        if not ok:
            break
        f = _loss(p, cc, xs, ys, psi, td, ta, rho, use_angle)
        p, cc, f = _restarted_nm(p, cc, f, xs, ys, psi, td, ta, rho, use_angle)
        gain = best_f - f
        if f < best_f:
            best_phi, best_c, best_f = p, cc, f
        if gain <= NM_GAIN_TOL:
            break
    return best_phi, best_c, best_f


@njit(cache=True)
def _restarted_nm(p, cc, f, xs, ys, psi, td, ta, rho, use_angle):
    for _ in range(NM_MAX_RESTARTS + 1):
        p2, c2, f2 = _nelder_mead(p, cc, xs, ys, psi, td, ta, rho, use_angle,
                                  NM_PHI_STEP, NM_C_STEP, NM_FTOL, NM_MAX_ITER)
        improved = f2 < f - NM_GAIN_TOL
        if f2 < f:
            p, cc, f = p2, c2, f2
        if not improved:
            break
    return p, cc, f


@njit(cache=True)
def _inlier_tls(phi, c, xs, ys, psi, td, ta, use_angle):
    """TLS angle and offset over the points left unclamped by ``(phi, c)``."""
    a = math.cos(phi)
    b = math.sin(phi)
    line_dir = phi + 0.5 * math.pi
    n = 0
    sx = sy = sxx = sxy = syy = 0.0
    for i in range(xs.shape[0]):
        if abs(a * xs[i] + b * ys[i] + c) >= td:
            continue
        if use_angle:
            t = (line_dir - psi[i]) % math.pi
            if min(t, math.pi - t) >= ta:
                continue
        n += 1
        sx += xs[i]
        sy += ys[i]
        sxx += xs[i] * xs[i]
        sxy += xs[i] * ys[i]
        syy += ys[i] * ys[i]
    if n < 2:
        return False, phi, c
    na, nb, nc = _tls_from_sums(n, sx, sy, sxx, sxy, syy)
    if na * na + nb * nb == 0.0:
        return False, phi, c
    return True, math.atan2(nb, na), nc


def refine_line(points, levels, init: LineParams, params: DetectorParams | None = None) -> LineParams:
    """Minimize the clamped loss starting from ``init``; the loss never increases."""
    params = params or DetectorParams()
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    lev = np.asarray(levels, dtype=np.float64).reshape(-1, 2)
    if len(pts) != len(lev):
        raise ValueError("points and levels must have the same length")
    if len(pts) < 2:
        return init
    norms = np.hypot(lev[:, 0], lev[:, 1])
    if np.any(norms == 0):
        return init
    lev = lev / norms[:, None]
    mx, my = pts.mean(axis=0)
    xs, ys = pts[:, 0] - mx, pts[:, 1] - my
    init = LineParams.normalized(init.a, init.b, init.c)
    phi0 = math.atan2(init.b, init.a)
    c0 = init.c + init.a * mx + init.b * my
    psi = np.arctan2(lev[:, 1], lev[:, 0])
    phi, c, _ = _refine(phi0, c0, xs, ys, psi, params.dist_thresh,
                        math.radians(params.angle_thresh), params.rho, params.use_angle_check)
    a, b = math.cos(phi), math.sin(phi)
    out = LineParams.normalized(a, b, c - a * mx - b * my)
    # compare in original coordinates so the guarantee holds exactly as evaluated
    if clamped_loss(pts, lev, out, params) > clamped_loss(pts, lev, init, params):
        return init
    return out


# ---------------------------------------------------------------------------
# progressive extraction along a chain
# ---------------------------------------------------------------------------


@njit(cache=True)
def _tls_from_sums(n, sx, sy, sxx, sxy, syy):
    mx = sx / n
    my = sy / n
    cxx = sxx / n - mx * mx
    cxy = sxy / n - mx * my
    cyy = syy / n - my * my
    theta = 0.5 * math.atan2(2.0 * cxy, cxx - cyy)
    a = -math.sin(theta)
    b = math.cos(theta)
    if a < 0.0 or (a == 0.0 and b < 0.0):
        a, b = -a, -b
    return a, b, -(a * mx + b * my)


@njit(cache=True)
def _is_inlier(a, b, c, x, y, u, v, td, ta, use_angle):
    if abs(a * x + b * y + c) >= td:
        return False
    if use_angle:
        ct = min(abs(-b * u + a * v), 1.0)
        if math.degrees(math.acos(ct)) >= ta:
            return False
    return True


@njit(cache=True)
def _refine_subset(a, b, c, xs, ys, us, vs, idx, td, ta, rho, use_angle):
    m = idx.shape[0]
    px = np.empty(m)
    py = np.empty(m)
    psi = np.empty(m)
    for k in range(m):
        px[k] = xs[idx[k]]
        py[k] = ys[idx[k]]
        psi[k] = math.atan2(vs[idx[k]], us[idx[k]])
    mx = px.mean()
    my = py.mean()
    px -= mx
    py -= my
    phi0 = math.atan2(b, a)
    c0 = c + a * mx + b * my
    phi, cc, _ = _refine(phi0, c0, px, py, psi, td, math.radians(ta), rho, use_angle)
    na = math.cos(phi)
    nb = math.sin(phi)
    nc = cc - na * mx - nb * my
    if na < 0.0 or (na == 0.0 and nb < 0.0):
        na, nb, nc = -na, -nb, -nc
    return na, nb, nc


@njit(cache=True)
def _extract(xs, ys, us, vs, n, window, td, ta, t_ir, rho, min_len, max_rej, init_refine,
             use_angle):
    """Scan one chain; coordinates are relative to the chain's first point.

    For a loop the arrays hold the chain twice over and ``n`` is its true
    length: windows start inside the first copy, while growth may run past
    the end up to the first point claimed by the loop's first segment.

    Output rows: a, b, c, x1, y1, x2, y2, support, mean_dist, mean_angle,
    first, last, level_u, level_v.
    """
    out = np.empty((n // 2 + 1, 14))
    nout = 0
    acc = np.empty(xs.shape[0], dtype=np.int64)
    grow_end = n
    found = False
    i = 0
    while i + window <= n:
        sx = sy = sxx = sxy = syy = 0.0
        for k in range(i, i + window):
            sx += xs[k]
            sy += ys[k]
            sxx += xs[k] * xs[k]
            sxy += xs[k] * ys[k]
            syy += ys[k] * ys[k]
        a, b, c = _tls_from_sums(window, sx, sy, sxx, sxy, syy)
        cnt = 0
        for k in range(i, i + window):
            if _is_inlier(a, b, c, xs[k], ys[k], us[k], vs[k], td, ta, use_angle):
                cnt += 1
        if cnt < t_ir * window:
            i += 1
            continue
        if init_refine:
            widx = np.arange(i, i + window)
            a, b, c = _refine_subset(a, b, c, xs, ys, us, vs, widx, td, ta, rho, use_angle)
        nacc = 0
        sx = sy = sxx = sxy = syy = 0.0
        for k in range(i, i + window):
            if _is_inlier(a, b, c, xs[k], ys[k], us[k], vs[k], td, ta, use_angle):
                acc[nacc] = k
                nacc += 1
                sx += xs[k]
                sy += ys[k]
                sxx += xs[k] * xs[k]
                sxy += xs[k] * ys[k]
                syy += ys[k] * ys[k]
        if nacc < t_ir * window or nacc < 2:
            i += 1
            continue

        if not found:
            found = True
            if xs.shape[0] > n:
                grow_end = n + acc[0]
        j = i + window
        rejects = 0
        while j < grow_end and rejects < max_rej:
            if _is_inlier(a, b, c, xs[j], ys[j], us[j], vs[j], td, ta, use_angle):
                acc[nacc] = j
                nacc += 1
                sx += xs[j]
                sy += ys[j]
                sxx += xs[j] * xs[j]
                sxy += xs[j] * ys[j]
                syy += ys[j] * ys[j]
                a, b, c = _tls_from_sums(nacc, sx, sy, sxx, sxy, syy)
                rejects = 0
            else:
                rejects += 1
            j += 1

        a, b, c = _refine_subset(a, b, c, xs, ys, us, vs, acc[:nacc], td, ta, rho, use_angle)
        first = acc[0]
        last = acc[nacc - 1]

        support = 0
        sd = 0.0
        sa = 0.0
        lu = 0.0
        lv = 0.0
        fi = -1
        li = -1
        for k in range(first, last + 1):
            d = abs(a * xs[k] + b * ys[k] + c)
            ct = min(abs(-b * us[k] + a * vs[k]), 1.0)
            ang = math.degrees(math.acos(ct))
            if d < td and (not use_angle or ang < ta):
                support += 1
                sd += d
                sa += ang
                lu += us[k]
                lv += vs[k]
                if fi < 0:
                    fi = k
                li = k
        i = last + 1
        if support == 0:
            continue
        s1 = a * xs[fi] + b * ys[fi] + c
        s2 = a * xs[li] + b * ys[li] + c
        x1 = xs[fi] - s1 * a
        y1 = ys[fi] - s1 * b
        x2 = xs[li] - s2 * a
        y2 = ys[li] - s2 * b
        length = math.hypot(x2 - x1, y2 - y1)
        if length < min_len or support < t_ir * (last - first + 1):
            continue
        ln = math.hypot(lu, lv)
        out[nout, 0] = a
        out[nout, 1] = b
        out[nout, 2] = c
        out[nout, 3] = x1
        out[nout, 4] = y1
        out[nout, 5] = x2
        out[nout, 6] = y2
        out[nout, 7] = support
        out[nout, 8] = sd / support
        out[nout, 9] = sa / support
        out[nout, 10] = first
        out[nout, 11] = last
        out[nout, 12] = lu / ln if ln > 0 else 0.0
        out[nout, 13] = lv / ln if ln > 0 else 0.0
        nout += 1
    return out[:nout]


def chain_levels(chain: EdgeChain, field: GradientField) -> np.ndarray:
    x, y = chain.points[:, 0], chain.points[:, 1]
    return np.stack([field.u[y, x], field.v[y, x]], axis=1)


def extract_segments_from_points(points, levels, params: DetectorParams | None = None,
                                 chain_id: int | None = None, loop: bool = False) -> list[LineSegment]:
    """Run the progressive extraction on explicit points and level-lines.

    With ``loop=True`` the last segment may grow across the end of the
    sequence back into its start; its span indices then exceed ``len(points)``
    and refer to positions modulo the length.
    """
    params = params or DetectorParams()
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    lev = np.asarray(levels, dtype=np.float64).reshape(-1, 2)
    if len(pts) != len(lev):
        raise ValueError("points and levels must have the same length")
    if len(pts) < params.init_window:
        return []
    norms = np.hypot(lev[:, 0], lev[:, 1])
    lev = lev / np.where(norms > 0, norms, 1.0)[:, None]
    n = len(pts)
    if loop:
        pts = np.concatenate([pts, pts])
        lev = np.concatenate([lev, lev])
    ox, oy = pts[0]
    rows = _extract(pts[:, 0] - ox, pts[:, 1] - oy, lev[:, 0].copy(), lev[:, 1].copy(),
                    n, int(params.init_window), params.dist_thresh, params.angle_thresh,
                    params.inlier_ratio, params.rho, params.min_length,
                    int(params.max_consecutive_rejects), params.init_refine,
                    params.use_angle_check)
    segs = []
    for r in rows:
        a, b, c = r[0], r[1], r[2] - r[0] * ox - r[1] * oy
        line = LineParams.normalized(a, b, c)
        p1 = line.project(r[3] + ox, r[4] + oy)
        p2 = line.project(r[5] + ox, r[6] + oy)
        segs.append(LineSegment(line, p1, p2, int(r[7]), float(r[8]), float(r[9]),
                                (float(r[12]), float(r[13])), (int(r[10]), int(r[11])), chain_id))
    return segs


def extract_segments(chain: EdgeChain, field: GradientField, params: DetectorParams | None = None,
                     chain_id: int | None = None) -> list[LineSegment]:
    return extract_segments_from_points(chain.points, chain_levels(chain, field), params, chain_id,
                                        loop=chain.kind is ChainKind.LOOP)
