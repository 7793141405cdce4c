"""Loop/line classification, endpoint merging and corner-based loop reordering."""
from __future__ import annotations

import heapq

import numpy as np
from scipy.spatial import cKDTree

from .edge_drawing import ChainKind, EdgeChain

MIN_LOOP_LENGTH = 8
CHORD_LENGTHS = (10, 20, 30)
# relative tolerance under which corner scores count as tied
SCORE_TIE_RTOL = 1e-6


def classify_chain(chain: EdgeChain, endpoint_thresh: float = 3.0) -> EdgeChain:
    pts = chain.points
    if len(pts) < 2:
        raise ValueError("a chain needs at least two points")
    gap = float(np.hypot(*(pts[0] - pts[-1]).astype(np.float64)))
    kind = ChainKind.LOOP if gap <= endpoint_thresh and len(pts) >= MIN_LOOP_LENGTH else ChainKind.LINE
    return chain.with_points(pts, kind)


def merge_line_chains(chains: list[EdgeChain], endpoint_thresh: float = 3.0) -> list[EdgeChain]:
    """Join line chains whose endpoints lie within ``endpoint_thresh``, closest pair first.

    Merged chains are re-classified and a chain that closes into a loop stops
    taking part. Output keeps the input order, a merged chain taking the slot
    of its lowest-indexed member.
    """
    n = len(chains)
    if n < 2:
        return [classify_chain(c, endpoint_thresh) for c in chains]

    # endpoint 2*i is the start of chain i, 2*i+1 its end
    ends = np.empty((2 * n, 2), dtype=np.float64)
    for i, c in enumerate(chains):
        ends[2 * i] = c.points[0]
        ends[2 * i + 1] = c.points[-1]
    pairs = cKDTree(ends).query_pairs(endpoint_thresh, output_type="ndarray")
    pairs = pairs[pairs[:, 0] // 2 != pairs[:, 1] // 2]
    heap = []
    for p, q in pairs:
        p, q = min(p, q), max(p, q)
        d = float(np.hypot(*(ends[p] - ends[q])))
        heap.append((d, int(p), int(q)))
    heapq.heapify(heap)

    # each group is a list of (chain index, reversed?) pieces
    groups = {i: [(i, False)] for i in range(n)}
    kind = {i: classify_chain(c, endpoint_thresh).kind for i, c in enumerate(chains)}
    # exposed[e] -> group id currently ending at endpoint e, None once joined
    exposed: list[int | None] = [i // 2 for i in range(2 * n)]

    def group_ends(g):
        first_c, first_rev = groups[g][0]
        last_c, last_rev = groups[g][-1]
        start = 2 * first_c + (1 if first_rev else 0)
        end = 2 * last_c + (0 if last_rev else 1)
        return start, end

    while heap:
        _, p, q = heapq.heappop(heap)
        gp, gq = exposed[p], exposed[q]
        if gp is None or gq is None or gp == gq:
            continue
        if kind[gp] is ChainKind.LOOP or kind[gq] is ChainKind.LOOP:
            continue
        sp, ep = group_ends(gp)
        sq, eq = group_ends(gq)
        a = groups[gp] if p == ep else _reverse(groups[gp])
        b = groups[gq] if q == sq else _reverse(groups[gq])
        merged = a + b
        keep, drop = min(gp, gq), max(gp, gq)
        groups[keep] = merged
        del groups[drop]
        del kind[drop]
        exposed[p] = exposed[q] = None
        s, e = group_ends(keep)
        exposed[s] = exposed[e] = keep
        pts = _assemble(chains, merged)
        kind[keep] = classify_chain(EdgeChain(pts), endpoint_thresh).kind

    out = []
    for g in sorted(groups):
        pts = _assemble(chains, groups[g])
        out.append(EdgeChain(pts, kind[g]))
    return out


def _reverse(pieces):
    return [(c, not r) for c, r in reversed(pieces)]


def _assemble(chains, pieces) -> np.ndarray:
    parts = [chains[c].points[::-1] if r else chains[c].points for c, r in pieces]
    return np.concatenate(parts, axis=0)


def _point_chord_distance(p, a, b):
    d = b - a
    norm = np.hypot(d[:, 0], d[:, 1])
    cross = np.abs(d[:, 0] * (p[:, 1] - a[:, 1]) - d[:, 1] * (p[:, 0] - a[:, 0]))
    direct = np.hypot(p[:, 0] - a[:, 0], p[:, 1] - a[:, 1])
    safe = np.where(norm > 0, norm, 1.0)
    return np.where(norm > 0, cross / safe, direct)


def cpda_corner_scores(chain: EdgeChain, chord_lengths=CHORD_LENGTHS) -> np.ndarray:
    """Chord-to-point distance accumulation corner strength for every point.

    For each chord length L the distance from point i to the chord joining
    points j and j+L is summed over every chord that strictly spans i, the
    sums are scaled to a maximum of 1, and the per-length maps multiplied.
    """
    pts = np.asarray(chain.points, dtype=np.float64)
    n = len(pts)
    scores = np.ones(n)
    if n < 2 * max(chord_lengths) + 1:
        return np.zeros(n)
    idx = np.arange(n)
    loop = chain.kind is ChainKind.LOOP
    for L in chord_lengths:
        acc = np.zeros(n)
        for k in range(1, L):
            j0 = idx - k
            j1 = j0 + L
            if loop:
                a, b = pts[j0 % n], pts[j1 % n]
                acc += _point_chord_distance(pts, a, b)
            else:
                ok = (j0 >= 0) & (j1 < n)
                a, b = pts[np.clip(j0, 0, n - 1)], pts[np.clip(j1, 0, n - 1)]
                acc += np.where(ok, _point_chord_distance(pts, a, b), 0.0)
        if not loop:
            acc[(idx < L) | (idx > n - 1 - L)] = 0.0
        peak = acc.max()
        acc = acc / peak if peak > 0 else acc
        scores *= acc
    return scores


def reorder_loop_chain(chain: EdgeChain) -> EdgeChain:
    """Rotate a loop so that its sharpest corner comes first."""
    if chain.kind is not ChainKind.LOOP:
        raise ValueError("only loop chains can be reordered")
    scores = cpda_corner_scores(chain)
    if len(scores) == 0:
        return chain
    top = scores.max()
    start = int(np.flatnonzero(scores >= top - SCORE_TIE_RTOL * max(top, 1e-300))[0])
    return chain.with_points(np.roll(chain.points, -start, axis=0))


def refine_chains(chains: list[EdgeChain], endpoint_thresh: float = 3.0) -> list[EdgeChain]:
    """Classify, merge and reorder; running it twice is the same as once."""
    classified = [classify_chain(c, endpoint_thresh) for c in chains]
    merged = merge_line_chains(classified, endpoint_thresh)
    return [reorder_loop_chain(c) if c.kind is ChainKind.LOOP else c for c in merged]
