"""Level-line guided edge drawing for line segment detection.

Typical use::

    from levelseg import load_grayscale, detect_segments
    segments = detect_segments(load_grayscale("house.png"))
"""
from .detector import Detection, detect_segments, run_pipeline
from .edge_drawing import ChainKind, EdgeChain, draw_edges
from .edge_refine import refine_chains
from .evaluation import PRESETS, EvalConfig, Homography, MatchReport, match_segments, repeatability
from .gradient_field import Anchor, GradientField, build_gradient_field
from .imaging import as_gray, gaussian_smooth, load_grayscale, sobel
from .params import DetectorParams
from .records import DetectionRecord
from .segment_fitting import LineParams, LineSegment, fit_line_tls, refine_line

__version__ = "0.1.0"

__all__ = [
    "Anchor", "ChainKind", "Detection", "DetectionRecord", "DetectorParams", "EdgeChain",
    "EvalConfig", "GradientField", "Homography", "LineParams", "LineSegment", "MatchReport",
    "PRESETS", "as_gray", "build_gradient_field", "detect_segments", "draw_edges",
    "fit_line_tls", "gaussian_smooth", "load_grayscale", "match_segments", "refine_chains",
    "refine_line", "repeatability", "run_pipeline", "sobel",
]
