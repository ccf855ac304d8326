"""Self-contained SVG line plots (fixed 800x500 viewBox, no external assets)."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 500
MARGIN = dict(left=70, right=20, top=40, bottom=55)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
MAX_POINTS = 4000


def _ticks(lo: float, hi: float, count: int = 5) -> list:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _thin(x: np.ndarray, y: np.ndarray):
    if x.size <= MAX_POINTS:
        return x, y
    idx = np.linspace(0, x.size - 1, MAX_POINTS).round().astype(int)
    return x[idx], y[idx]


def line_plot(series, title: str = "", xlabel: str = "", ylabel: str = "", markers: bool = False) -> str:
    """Render ``series`` = [(label, x, y), ...] as an SVG document string."""
    series = [(lab, np.asarray(x, float), np.asarray(y, float)) for lab, x, y in series]
    xs = np.concatenate([s[1] for s in series])
    ys = np.concatenate([s[2] for s in series])
    finite = np.isfinite(xs) & np.isfinite(ys)
    x0, x1 = (float(xs[finite].min()), float(xs[finite].max())) if finite.any() else (0.0, 1.0)
    y0, y1 = (float(ys[finite].min()), float(ys[finite].max())) if finite.any() else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    L, R, T, B = MARGIN["left"], WIDTH - MARGIN["right"], MARGIN["top"], HEIGHT - MARGIN["bottom"]

    def px(x):
        return L + (x - x0) / (x1 - x0) * (R - L)

    def py(y):
        return B - (y - y0) / (y1 - y0) * (B - T)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{L}" y1="{B}" x2="{R}" y2="{B}" stroke="black"/>',
        f'<line x1="{L}" y1="{B}" x2="{L}" y2="{T}" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        X = px(t)
        out.append(f'<line x1="{X:.2f}" y1="{B}" x2="{X:.2f}" y2="{B + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{B + 20}" font-size="12" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y0, y1):
        Y = py(t)
        out.append(f'<line x1="{L - 5}" y1="{Y:.2f}" x2="{L}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{L - 8}" y="{Y + 4:.2f}" font-size="12" text-anchor="end">{_fmt(t)}</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="24" font-size="16" text-anchor="middle">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{(L + R) / 2}" y="{HEIGHT - 12}" font-size="14" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(
            f'<text x="18" y="{(T + B) / 2}" font-size="14" text-anchor="middle" '
            f'transform="rotate(-90 18 {(T + B) / 2})">{escape(ylabel)}</text>'
        )
    for i, (label, x, y) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        keep = np.isfinite(x) & np.isfinite(y)
        x, y = _thin(x[keep], y[keep])
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        if markers:
            for a, b in zip(x, y):
                out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="{color}"/>')
        if label:
            ly = T + 16 * (i + 1)
            out.append(f'<line x1="{R - 150}" y1="{ly - 4}" x2="{R - 130}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{R - 125}" y="{ly}" font-size="12">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
