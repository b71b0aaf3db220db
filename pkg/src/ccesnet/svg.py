"""Bare-bones SVG emitters. Every plotted number is also written to CSV."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT, PAD = 640, 400, 48


def _doc(body: list[str], title: str, width=WIDTH, height=HEIGHT) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">'
    )
    t = f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>'
    return "\n".join([head, t, *body, "</svg>"]) + "\n"


def _scale(v, lo, hi, a, b):
    if hi == lo:
        return 0.5 * (a + b)
    return a + (v - lo) / (hi - lo) * (b - a)


def histogram(counts, edges, title: str = "", xlabel: str = "") -> str:
    counts = np.asarray(counts, dtype=float)
    edges = np.asarray(edges, dtype=float)
    top = max(counts.max(initial=0.0), 1.0)
    x0, x1, y0, y1 = PAD, WIDTH - PAD, HEIGHT - PAD, PAD
    body = [f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>']
    for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
        a = _scale(lo, edges[0], edges[-1], x0, x1)
        b = _scale(hi, edges[0], edges[-1], x0, x1)
        h = (y0 - y1) * c / top
        body.append(
            f'<rect x="{a:.2f}" y="{y0 - h:.2f}" width="{max(b - a - 0.5, 0.5):.2f}" '
            f'height="{h:.2f}" fill="steelblue"/>'
        )
    body.append(f'<text x="{x0}" y="{y0 + 16}">{edges[0]:.3g}</text>')
    body.append(f'<text x="{x1}" y="{y0 + 16}" text-anchor="end">{edges[-1]:.3g}</text>')
    body.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{y0 + 32}" text-anchor="middle">{escape(xlabel)}</text>')
    body.append(f'<text x="{x0 - 4}" y="{y1 + 4}" text-anchor="end">{int(top)}</text>')
    return _doc(body, title)


def line_chart(x, y, title: str = "", mark: int | None = None, xlabel: str = "", ylabel: str = "") -> str:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x0, x1, y0, y1 = PAD, WIDTH - PAD, HEIGHT - PAD, PAD
    lo, hi = float(y.min()), float(y.max())
    pts = " ".join(
        f"{_scale(a, x[0], x[-1], x0, x1):.2f},{_scale(b, lo, hi, y0, y1):.2f}" for a, b in zip(x, y)
    )
    body = [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<polyline points="{pts}" fill="none" stroke="steelblue"/>',
        f'<text x="{(x0 + x1) / 2:.1f}" y="{y0 + 32}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="{x0 - 4}" y="{y1 + 4}" text-anchor="end">{hi:.4g}</text>',
        f'<text x="{x0 - 4}" y="{y0}" text-anchor="end">{lo:.4g}</text>',
        f'<text x="{x0}" y="{y1 - 8}">{escape(ylabel)}</text>',
    ]
    if mark is not None:
        cx = _scale(x[mark], x[0], x[-1], x0, x1)
        cy = _scale(y[mark], lo, hi, y0, y1)
        body.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="4" fill="crimson"/>')
        body.append(f'<text x="{cx:.2f}" y="{cy - 8:.2f}" text-anchor="middle">{x[mark]:.2f}</text>')
    return _doc(body, title)


def dendrogram(linkage, leaf_order, labels=None, title: str = "") -> str:
    """Vertical dendrogram; leaves along the bottom in ``leaf_order``."""
    Z = np.asarray(linkage, dtype=float)
    n = len(leaf_order)
    width = max(WIDTH, 12 * n + 2 * PAD)
    x0, x1, y0, y1 = PAD, width - PAD, HEIGHT - PAD - 30, PAD
    top = max(float(Z[:, 2].max(initial=0.0)), 1e-12)
    xpos = {int(leaf): _scale(k, 0, max(n - 1, 1), x0, x1) for k, leaf in enumerate(leaf_order)}
    ypos = {int(leaf): float(y0) for leaf in leaf_order}
    body = []
    for k, (a, b, h, _) in enumerate(Z):
        a, b = int(a), int(b)
        yh = _scale(h, 0.0, top, y0, y1)
        body.append(
            f'<polyline points="{xpos[a]:.2f},{ypos[a]:.2f} {xpos[a]:.2f},{yh:.2f} '
            f'{xpos[b]:.2f},{yh:.2f} {xpos[b]:.2f},{ypos[b]:.2f}" fill="none" stroke="black"/>'
        )
        xpos[n + k] = 0.5 * (xpos[a] + xpos[b])
        ypos[n + k] = yh
    if labels is not None:
        for leaf in leaf_order:
            x = xpos[int(leaf)]
            body.append(
                f'<text x="{x:.2f}" y="{y0 + 6}" transform="rotate(90 {x:.2f} {y0 + 6})">'
                f"{escape(str(labels[int(leaf)]))}</text>"
            )
    body.append(f'<text x="{x0 - 4}" y="{y1 + 4}" text-anchor="end">{top:.3g}</text>')
    return _doc(body, title, width=width)
