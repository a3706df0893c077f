"""Minimal static SVG figures: line plots and arrow plots."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT, MARGIN = 640, 420, 60


def _frame(x0: float, x1: float, y0: float, y1: float, width: int = WIDTH, height: int = HEIGHT):
    sx = (width - 2 * MARGIN) / (x1 - x0 or 1.0)
    sy = (height - 2 * MARGIN) / (y1 - y0 or 1.0)

    def tx(x):
        return MARGIN + (np.asarray(x) - x0) * sx

    def ty(y):
        return height - MARGIN - (np.asarray(y) - y0) * sy

    return tx, ty


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    return np.linspace(lo, hi, n)


def line_plot(path: str | Path, x: Sequence[float], y: Sequence[float], *, reference: float | None = None,
              xlabel: str = "", ylabel: str = "", title: str = "") -> None:
    """Polyline with markers and an optional horizontal reference line."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ys = np.append(y, reference) if reference is not None else y
    pad = 0.1 * (ys.max() - ys.min() or 1.0)
    x0, x1 = float(x.min()), float(x.max())
    y0, y1 = float(ys.min() - pad), float(ys.max() + pad)
    tx, ty = _frame(x0, x1, y0, y1)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">',
             f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
             f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
             f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>']
    for t in _ticks(x0, x1):
        parts.append(f'<text x="{tx(t):.1f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(y0, y1):
        parts.append(f'<text x="{MARGIN - 6}" y="{ty(t) + 4:.1f}" text-anchor="end">{t:.3g}</text>')
    if reference is not None:
        parts.append(f'<line x1="{MARGIN}" y1="{ty(reference):.1f}" x2="{WIDTH - MARGIN}" y2="{ty(reference):.1f}" '
                     f'stroke="gray" stroke-dasharray="6,4"/>')
        parts.append(f'<text x="{WIDTH - MARGIN}" y="{ty(reference) - 6:.1f}" text-anchor="end" fill="gray">'
                     f'reference {reference:.4g}</text>')
    pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(tx(x), ty(y)))
    parts.append(f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>')
    parts += [f'<circle cx="{a:.1f}" cy="{b:.1f}" r="3.5" fill="steelblue"/>' for a, b in zip(tx(x), ty(y))]
    parts.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    parts.append(f'<text x="15" y="{HEIGHT / 2}" text-anchor="middle" transform="rotate(-90 15 {HEIGHT / 2})">{escape(ylabel)}</text>')
    parts.append(f'<text x="{WIDTH / 2}" y="25" text-anchor="middle" font-size="14">{escape(title)}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


def arrow_plot(path: str | Path, points: np.ndarray, vectors: np.ndarray, *,
               curves: Sequence[np.ndarray] = (), markers: np.ndarray | None = None,
               max_arrows: int = 900, size: int = 560, title: str = "") -> None:
    """Unit-length arrows on a subsample of points, boundary curves and marker dots."""
    points = np.asarray(points, dtype=float)
    vectors = np.asarray(vectors, dtype=float)
    allp = np.vstack([points] + [np.asarray(c) for c in curves])
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    span = float(max(hi - lo))
    x0, y0 = lo
    tx, ty = _frame(x0, x0 + span, y0, y0 + span, size, size)
    step = max(1, len(points) // max_arrows)
    sel = np.arange(0, len(points), step)
    ell = 0.8 * span / np.sqrt(len(sel)) * (size - 2 * MARGIN) / span
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" font-family="sans-serif" font-size="12">',
             f'<rect width="{size}" height="{size}" fill="white"/>',
             f'<text x="{size / 2}" y="25" text-anchor="middle" font-size="14">{escape(title)}</text>']
    for c in curves:
        c = np.asarray(c)
        pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(tx(c[:, 0]), ty(c[:, 1])))
        parts.append(f'<polygon points="{pts}" fill="none" stroke="black" stroke-width="1.2"/>')
    for i in sel:
        v = vectors[i]
        n = float(np.hypot(*v))
        if n < 1e-12:
            continue
        cx, cy = float(tx(points[i, 0])), float(ty(points[i, 1]))
        dx, dy = 0.5 * ell * v[0] / n, -0.5 * ell * v[1] / n
        parts.append(f'<line x1="{cx - dx:.1f}" y1="{cy - dy:.1f}" x2="{cx + dx:.1f}" y2="{cy + dy:.1f}" '
                     f'stroke="steelblue" stroke-width="1"/>')
        parts.append(f'<circle cx="{cx + dx:.1f}" cy="{cy + dy:.1f}" r="1.2" fill="steelblue"/>')
    if markers is not None:
        for p in np.atleast_2d(markers):
            parts.append(f'<circle cx="{float(tx(p[0])):.1f}" cy="{float(ty(p[1])):.1f}" r="4" fill="crimson"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))
