"""Dependency-free SVG line and scatter plots.

Deliberately minimal: polylines, point markers, axes with linear ticks,
and a legend.  Every plotted value comes straight from the arrays that are
also written to the CSV artifacts, so plots are views of the data files.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Series", "render_plot"]

_COLORS = ["#1f6fb2", "#d1495b", "#3c8d53", "#8b5fa8", "#c77f2e",
           "#4aa3a0", "#74562e", "#5a6072"]


class Series:
    def __init__(self, x, y, label="", marker=False):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.label = label
        self.marker = marker


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, count)


def render_plot(path, series, title="", xlabel="", ylabel="",
                width=640, height=420):
    """Write a standalone SVG with the given series."""
    ml, mr, mt, mb = 62, 16, 30, 46
    pw, ph = width - ml - mr, height - mt - mb
    xs = np.concatenate([s.x for s in series]) if series else np.array([0.0, 1.0])
    ys = np.concatenate([s.y for s in series]) if series else np.array([0.0, 1.0])
    xlo, xhi = float(xs.min()), float(xs.max())
    ylo, yhi = float(ys.min()), float(ys.max())
    if xhi == xlo:
        xhi = xlo + 1.0
    if yhi == ylo:
        yhi = ylo + 1.0
    ypad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - ypad, yhi + ypad

    def X(v):
        return ml + (v - xlo) / (xhi - xlo) * pw

    def Y(v):
        return mt + ph - (v - ylo) / (yhi - ylo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{title}</text>',
    ]
    for tx in _ticks(xlo, xhi):
        px = X(tx)
        parts.append(f'<line x1="{px:.1f}" y1="{mt + ph}" x2="{px:.1f}" '
                     f'y2="{mt + ph + 4}" stroke="black"/>')
        parts.append(f'<text x="{px:.1f}" y="{mt + ph + 16}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="10">{tx:.3g}</text>')
    for ty in _ticks(ylo, yhi):
        py = Y(ty)
        parts.append(f'<line x1="{ml - 4}" y1="{py:.1f}" x2="{ml}" y2="{py:.1f}" '
                     f'stroke="black"/>')
        parts.append(f'<text x="{ml - 7}" y="{py + 3:.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="10">{ty:.3g}</text>')
    parts.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" '
                 f'fill="none" stroke="black"/>')
    parts.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="11">{xlabel}</text>')
    parts.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="11" '
                 f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{ylabel}</text>')
    for i, s in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        if s.marker:
            for xv, yv in zip(s.x, s.y):
                parts.append(f'<circle cx="{X(xv):.2f}" cy="{Y(yv):.2f}" r="2.4" '
                             f'fill="{color}"/>')
        else:
            pts = " ".join(f"{X(xv):.2f},{Y(yv):.2f}" for xv, yv in zip(s.x, s.y))
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                         f'stroke-width="1.4"/>')
        if s.label:
            ly = mt + 14 + 14 * i
            parts.append(f'<line x1="{ml + pw - 110}" y1="{ly - 4}" x2="{ml + pw - 90}" '
                         f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
            parts.append(f'<text x="{ml + pw - 84}" y="{ly}" font-family="sans-serif" '
                         f'font-size="10">{s.label}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
