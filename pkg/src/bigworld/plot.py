"""Minimal SVG line plots of metrics CSVs."""
from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

from .loop import N_LOGGED_COMPONENTS

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
           "#bcbd22", "#17becf")
WIDTH, HEIGHT = 720, 400
MARGIN = dict(left=70, right=150, top=30, bottom=50)


def svg_lines(series: Sequence[tuple[str, Sequence[float], Sequence[float]]], title: str = "",
              xlabel: str = "step", ylabel: str = "value") -> str:
    """Render ``(label, xs, ys)`` series as one polyline each. Non-finite points are dropped."""
    clean = []
    for label, xs, ys in series:
        pts = [(float(x), float(y)) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
        clean.append((label, pts))
    allpts = [p for _, pts in clean for p in pts]
    if allpts:
        x0, x1 = min(p[0] for p in allpts), max(p[0] for p in allpts)
        y0, y1 = min(p[1] for p in allpts), max(p[1] for p in allpts)
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return MARGIN["top"] + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="16" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv, yv = x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
        out.append(f'<text x="{sx(xv):.1f}" y="{MARGIN["top"] + ph + 16}" text-anchor="middle" font-size="10">{xv:.4g}</text>')
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end" font-size="10">{yv:.4g}</text>')
    for i, (label, pts) in enumerate(clean):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        out.append(f'<polyline data-label="{escape(label)}" fill="none" stroke="{color}" stroke-width="1.2" points="{coords}"/>')
        ly = MARGIN["top"] + 14 * (i + 1)
        out.append(f'<text x="{WIDTH - MARGIN["right"] + 10}" y="{ly}" font-size="11" fill="{color}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_metrics(tables: Sequence[tuple[str, dict]], kind: str = "interactivity") -> str:
    """``tables`` holds ``(label, columns)`` pairs as returned by ``read_metrics_csv``."""
    if kind == "interactivity":
        series = [(label, cols["step"], cols["interactivity"]) for label, cols in tables]
        return svg_lines(series, "interactivity", ylabel="interactivity")
    if kind == "actions":
        series = []
        for label, cols in tables:
            for i in range(N_LOGGED_COMPONENTS):
                key = f"b{i}"
                if key not in cols:
                    raise ValueError(f"{label}: missing column {key!r}")
                name = f"{label}:{key}" if len(tables) > 1 else key
                series.append((name, cols["step"], cols[key]))
        return svg_lines(series, "action components", ylabel="action value")
    raise ValueError(f"unknown plot kind {kind!r}")
