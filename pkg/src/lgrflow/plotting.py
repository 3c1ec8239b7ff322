"""Dependency-free SVG scatter plots of metric samples.

Output is byte-stable for identical input: no timestamps, ids or random
element names, and all numbers use fixed formatting.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .metrics import MetricSample

__all__ = ["ScatterStyle", "render_scatter", "COLORMAPS"]

# anchor colors, evenly spaced on [0, 1]
COLORMAPS = {
    "viridis": [(68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37)],
    "coolwarm": [(59, 76, 192), (141, 176, 254), (221, 221, 221), (244, 154, 123), (180, 4, 38)],
    "magma": [(0, 0, 4), (81, 18, 124), (183, 55, 121), (252, 137, 97), (252, 253, 191)],
}


@dataclass(frozen=True)
class ScatterStyle:
    width: int = 640
    height: int = 480
    radius: float = 3.0
    colormap: str = "viridis"
    title: str | None = None
    legend_steps: int = 16


def _color(t: float, cmap: str) -> str:
    anchors = COLORMAPS[cmap]
    t = min(max(t, 0.0), 1.0) * (len(anchors) - 1)
    i = min(int(t), len(anchors) - 2)
    f = t - i
    rgb = [round(a + (b - a) * f) for a, b in zip(anchors[i], anchors[i + 1])]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _n(v: float) -> str:
    return f"{v:.2f}"


def render_scatter(samples: Sequence[MetricSample], style: ScatterStyle | None, path) -> None:
    """Write an SVG with one colored circle per sample and a color legend."""
    if not samples:
        raise ValueError("nothing to plot: no samples")
    style = style or ScatterStyle()
    if style.colormap not in COLORMAPS:
        raise ValueError(f"unknown colormap {style.colormap!r}; choose from {sorted(COLORMAPS)}")
    pos = np.array([s.position[:2] for s in samples], dtype=float)
    val = np.array([s.value for s in samples], dtype=float)
    vmin, vmax = float(val.min()), float(val.max())
    span = vmax - vmin
    norm = (val - vmin) / span if span > 0 else np.full(len(val), 0.5)

    legend_w = 90
    pad = 20
    top = 30 if style.title else pad
    plot_w = style.width - legend_w - 2 * pad
    plot_h = style.height - top - pad
    (x0, y0), (x1, y1) = pos.min(axis=0), pos.max(axis=0)
    sx = plot_w / (x1 - x0) if x1 > x0 else 0.0
    sy = plot_h / (y1 - y0) if y1 > y0 else 0.0
    scale = min(s for s in (sx, sy) if s > 0) if (sx > 0 or sy > 0) else 0.0
    cx = pad + (plot_w - (x1 - x0) * scale) / 2
    cy = top + (plot_h - (y1 - y0) * scale) / 2

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{style.width}" height="{style.height}" '
        f'viewBox="0 0 {style.width} {style.height}">',
        f'<rect x="0" y="0" width="{style.width}" height="{style.height}" fill="#ffffff"/>',
    ]
    if style.title:
        out.append(f'<text x="{pad}" y="20" font-family="sans-serif" font-size="14">'
                   f'{escape(style.title)}</text>')
    out.append('<g class="markers">')
    for (x, y), t in zip(pos, norm):
        px = cx + (x - x0) * scale
        py = cy + (y1 - y) * scale  # y axis points up
        out.append(f'<circle cx="{_n(px)}" cy="{_n(py)}" r="{_n(style.radius)}" '
                   f'fill="{_color(float(t), style.colormap)}"/>')
    out.append('</g>')

    lx = style.width - legend_w + 10
    bar_h = plot_h * 0.8
    ly = top + (plot_h - bar_h) / 2
    out.append('<g class="legend">')
    steps = 1 if span == 0 else max(2, style.legend_steps)
    seg = bar_h / steps
    for i in range(steps):
        t = 0.5 if steps == 1 else 1.0 - i / (steps - 1)
        out.append(f'<rect x="{lx}" y="{_n(ly + i * seg)}" width="16" height="{_n(seg)}" '
                   f'fill="{_color(t, style.colormap)}"/>')
    out.append(f'<text x="{lx + 22}" y="{_n(ly + 10)}" font-family="sans-serif" font-size="11">'
               f'{vmax:.4g}</text>')
    out.append(f'<text x="{lx + 22}" y="{_n(ly + bar_h)}" font-family="sans-serif" font-size="11">'
               f'{vmin:.4g}</text>')
    metric = samples[0].metric
    out.append(f'<text x="{lx}" y="{_n(ly - 8)}" font-family="sans-serif" font-size="11">'
               f'{escape(metric)}</text>')
    out.append('</g>')
    out.append('</svg>')
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
