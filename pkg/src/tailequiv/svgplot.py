"""Minimal native SVG line charts for estimate curves."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=64, right=20, top=36, bottom=52)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, count: int = 5) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return np.arange(start, hi + step * 1e-9, step)


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def line_chart(x, series: dict, band=None, hlines=(), title: str = "", xlabel: str = "",
               ylabel: str = "", ylim=None) -> str:
    """Render ``series`` (label -> y values) against ``x``.

    ``band`` is an optional (lower, upper) pair drawn as a shaded region and
    ``hlines`` are dashed horizontal reference lines.
    """
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    pool = [v[np.isfinite(v)] for v in ys.values()]
    if band is not None:
        band = tuple(np.asarray(b, dtype=float) for b in band)
        pool += [b[np.isfinite(b)] for b in band]
    pool += [np.asarray(list(hlines), dtype=float)]
    flat = np.concatenate([p for p in pool if p.size]) if any(p.size for p in pool) else np.array([0.0])
    y0, y1 = ylim if ylim is not None else (float(flat.min()), float(flat.max()))
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 1.0, y1 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    x0, x1 = float(x.min()), float(x.max())
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 1.0, x1 + 1.0

    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN["top"] + (y1 - v) / (y1 - y0) * ph

    def path(xs, vs):
        pts, out = [], []
        for a, b in zip(xs, vs):
            if math.isfinite(b):
                pts.append(f"{sx(a):.2f},{sy(min(max(b, y0), y1)):.2f}")
            elif pts:
                out.append(pts)
                pts = []
        if pts:
            out.append(pts)
        return out

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
             f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
             '<rect width="100%" height="100%" fill="white"/>']
    if band is not None:
        lo, hi = band
        ok = np.isfinite(lo) & np.isfinite(hi)
        if ok.any():
            upper = [f"{sx(a):.2f},{sy(min(max(b, y0), y1)):.2f}" for a, b in zip(x[ok], hi[ok])]
            lower = [f"{sx(a):.2f},{sy(min(max(b, y0), y1)):.2f}" for a, b in zip(x[ok][::-1], lo[ok][::-1])]
            parts.append(f'<polygon points="{" ".join(upper + lower)}" fill="#1f77b4" fill-opacity="0.18" stroke="none"/>')
    for t in _ticks(y0, y1):
        parts.append(f'<line x1="{MARGIN["left"]}" x2="{WIDTH - MARGIN["right"]}" y1="{sy(t):.2f}" '
                     f'y2="{sy(t):.2f}" stroke="#e5e5e5"/>')
        parts.append(f'<text x="{MARGIN["left"] - 6}" y="{sy(t) + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    for t in _ticks(x0, x1):
        parts.append(f'<text x="{sx(t):.2f}" y="{HEIGHT - MARGIN["bottom"] + 16}" text-anchor="middle">{_fmt(t)}</text>')
    for h in hlines:
        if y0 <= h <= y1:
            parts.append(f'<line x1="{MARGIN["left"]}" x2="{WIDTH - MARGIN["right"]}" y1="{sy(h):.2f}" '
                         f'y2="{sy(h):.2f}" stroke="#555" stroke-dasharray="5,4"/>')
    for i, (label, v) in enumerate(ys.items()):
        colour = PALETTE[i % len(PALETTE)]
        for pts in path(x, v):
            parts.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="{colour}" stroke-width="1.6"/>')
        ly = MARGIN["top"] + 14 * i + 4
        parts.append(f'<line x1="{WIDTH - 150}" x2="{WIDTH - 130}" y1="{ly}" y2="{ly}" stroke="{colour}" stroke-width="2"/>')
        parts.append(f'<text x="{WIDTH - 125}" y="{ly + 4}">{escape(str(label))}</text>')
    parts.append(f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>')
    parts.append(f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>')
    parts.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    parts.append(f'<text transform="translate(16,{MARGIN["top"] + ph / 2}) rotate(-90)" '
                 f'text-anchor="middle">{escape(ylabel)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
