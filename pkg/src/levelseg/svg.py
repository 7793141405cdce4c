"""SVG overlays of detected segments."""
from __future__ import annotations

import base64
import io
from xml.sax.saxutils import quoteattr

import numpy as np
from PIL import Image

from .segment_fitting import LineSegment

TICK_LENGTH = 6.0


def _png_data_uri(img) -> str:
    arr = np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return "data:image/png;base64," + base64.b64encode(buf.getvalue()).decode("ascii")


def render_svg(segments: list[LineSegment], width: int, height: int, image=None,
               stroke: str = "#00c000", tick: str = "#ff00ff") -> str:
    """One polyline per segment plus a level-line tick at each midpoint.

    The tick points along the mean level-line of the segment's support, so it
    shows which side of the edge is brighter (brighter side to its left).
    """
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" '
        f'width="{width}" height="{height}" viewBox="-0.5 -0.5 {width} {height}">',
    ]
    if image is not None:
        out.append(f'<image x="-0.5" y="-0.5" width="{width}" height="{height}" '
                   f'xlink:href={quoteattr(_png_data_uri(image))}/>')
    out.append(f'<g fill="none" stroke={quoteattr(stroke)} stroke-width="1">')
    for i, s in enumerate(segments):
        out.append(f'<polyline id="seg{i}" points="{s.p1[0]:.3f},{s.p1[1]:.3f} '
                   f'{s.p2[0]:.3f},{s.p2[1]:.3f}"/>')
    out.append("</g>")
    out.append(f'<g fill="none" stroke={quoteattr(tick)} stroke-width="1">')
    for i, s in enumerate(segments):
        lu, lv = s.level
        if lu == 0 and lv == 0:
            continue
        mx, my = s.midpoint
        out.append(f'<line id="tick{i}" x1="{mx:.3f}" y1="{my:.3f}" '
                   f'x2="{mx + TICK_LENGTH * lu:.3f}" y2="{my + TICK_LENGTH * lv:.3f}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
