"""Tiny SVG line-plot writer; no plotting dependency needed for norm-vs-time plots."""

from __future__ import annotations

import numpy as np

_WIDTH, _HEIGHT = 720, 360
_MARGIN = 50


def write_line_svg(path, t, y, title: str) -> None:
    """One polyline of y against t inside a labeled axes box."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size != y.size or t.size < 2:
        raise ValueError("need matching t and y arrays with at least two points")
    t0, t1 = float(t[0]), float(t[-1])
    y0, y1 = float(np.min(y)), float(np.max(y))
    if y1 == y0:
        y1 = y0 + 1.0
    span_t = t1 - t0 if t1 > t0 else 1.0

    def sx(v):
        return _MARGIN + (v - t0) / span_t * (_WIDTH - 2 * _MARGIN)

    def sy(v):
        return _HEIGHT - _MARGIN - (v - y0) / (y1 - y0) * (_HEIGHT - 2 * _MARGIN)

    points = " ".join(f"{sx(ti):.2f},{sy(yi):.2f}" for ti, yi in zip(t, y))
    box = (
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_WIDTH - 2*_MARGIN}" '
        f'height="{_HEIGHT - 2*_MARGIN}" fill="none" stroke="black"/>'
    )
    labels = (
        f'<text x="{_WIDTH//2}" y="24" text-anchor="middle" font-size="15">{title}</text>'
        f'<text x="{_MARGIN}" y="{_HEIGHT - 14}" font-size="11">t = {t0:g}</text>'
        f'<text x="{_WIDTH - _MARGIN}" y="{_HEIGHT - 14}" text-anchor="end" font-size="11">'
        f"t = {t1:g}</text>"
        f'<text x="{_MARGIN - 6}" y="{sy(y1):.0f}" text-anchor="end" font-size="11">{y1:.3g}</text>'
        f'<text x="{_MARGIN - 6}" y="{sy(y0):.0f}" text-anchor="end" font-size="11">{y0:.3g}</text>'
    )
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">\n'
        f"{box}\n{labels}\n"
        f'<polyline points="{points}" fill="none" stroke="steelblue" stroke-width="1.5"/>\n'
        "</svg>\n"
    )
    with open(path, "w") as fh:
        fh.write(svg)
