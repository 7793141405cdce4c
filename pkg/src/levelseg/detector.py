"""End-to-end detection pipeline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .edge_drawing import EdgeChain, draw_edges
from .edge_refine import refine_chains
from .gradient_field import GradientField, anchor_arrays, build_gradient_field, equalize_anchor_arrays
from .imaging import as_gray, gaussian_smooth, sobel
from .params import DetectorParams
from .segment_fitting import LineSegment, extract_segments


@dataclass
class Detection:
    field: GradientField
    anchors: tuple[np.ndarray, np.ndarray, np.ndarray]
    chains: list[EdgeChain]
    segments: list[LineSegment]


def run_pipeline(img, params: DetectorParams | None = None) -> Detection:
    """Detect segments and keep every intermediate product."""
    params = params or DetectorParams()
    img = as_gray(img)
    field = build_gradient_field(sobel(gaussian_smooth(img)), params.grad_thresh)
    anchors = equalize_anchor_arrays(*anchor_arrays(field), params.equalize_radius)
    chains = refine_chains(draw_edges(field, anchors), params.endpoint_thresh)
    segments = []
    for i, chain in enumerate(chains):
        segments.extend(extract_segments(chain, field, params, chain_id=i))
    return Detection(field, anchors, chains, segments)


def detect_segments(img, params: DetectorParams | None = None) -> list[LineSegment]:
    return run_pipeline(img, params).segments
