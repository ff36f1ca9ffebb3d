"""Minimal static SVG figures: scatter/line plots and labelled rasters."""

from __future__ import annotations

from typing import Sequence

import numpy as np

__all__ = ["line_plot", "raster_plot", "PALETTE"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")

_W, _H, _M = 480, 400, 50


def _num(v) -> str:
    return format(float(v), ".6g")


def _frame(xlim, ylim, xlabel, ylabel, title):
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_M}" y="{_M}" width="{_W - 2 * _M}" height="{_H - 2 * _M}" fill="none" stroke="black"/>',
        f'<text x="{_W / 2}" y="{_M / 2}" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{_W / 2}" y="{_H - 8}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="14" y="{_H / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {_H / 2})">{ylabel}</text>',
        f'<text x="{_M}" y="{_H - _M + 14}" font-size="10">{_num(xlim[0])}</text>',
        f'<text x="{_W - _M}" y="{_H - _M + 14}" text-anchor="end" font-size="10">{_num(xlim[1])}</text>',
        f'<text x="{_M - 4}" y="{_H - _M}" text-anchor="end" font-size="10">{_num(ylim[0])}</text>',
        f'<text x="{_M - 4}" y="{_M + 8}" text-anchor="end" font-size="10">{_num(ylim[1])}</text>',
    ]
    return parts


def _scale(v, lim, lo_px, hi_px):
    span = lim[1] - lim[0] or 1.0
    return lo_px + (np.asarray(v, dtype=float) - lim[0]) / span * (hi_px - lo_px)


def _limits(arrays):
    vals = np.concatenate([np.ravel(a) for a in arrays])
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        return (0.0, 1.0)
    lo, hi = float(vals.min()), float(vals.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return (lo, hi)


def line_plot(curves: Sequence, xlabel: str = "", ylabel: str = "", title: str = "",
              xlim=None, ylim=None, points: bool = False) -> str:
    """SVG text for polylines (or dots when ``points``); ``curves`` holds ``(xs, ys)`` pairs.

    Curves may contain ``nan`` to break a polyline, e.g. where an angle wraps.
    """
    xlim = xlim or _limits([c[0] for c in curves])
    ylim = ylim or _limits([c[1] for c in curves])
    parts = _frame(xlim, ylim, xlabel, ylabel, title)
    for k, (xs, ys) in enumerate(curves):
        color = PALETTE[k % len(PALETTE)]
        px = _scale(xs, xlim, _M, _W - _M)
        py = _scale(ys, ylim, _H - _M, _M)
        if points:
            for a, b in zip(px, py):
                if np.isfinite(a) and np.isfinite(b):
                    parts.append(f'<circle cx="{_num(a)}" cy="{_num(b)}" r="1.2" fill="{color}"/>')
            continue
        run = []
        for a, b in zip(px, py):
            if np.isfinite(a) and np.isfinite(b):
                run.append(f"{_num(a)},{_num(b)}")
            elif run:
                parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{" ".join(run)}"/>')
                run = []
        if run:
            parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{" ".join(run)}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def raster_plot(labels, names: Sequence[str], xlim, ylim, xlabel: str = "", ylabel: str = "",
                title: str = "") -> str:
    """SVG raster of a label grid ``labels[i, j]`` (``i`` along x) with a legend."""
    labels = np.asarray(labels)
    ni, nj = labels.shape
    parts = _frame(xlim, ylim, xlabel, ylabel, title)
    cw = (_W - 2 * _M) / ni
    ch = (_H - 2 * _M) / nj
    colors = {name: PALETTE[k % len(PALETTE)] for k, name in enumerate(names)}
    colors.setdefault("Undetermined", "#dddddd")
    for i in range(ni):
        for j in range(nj):
            x = _M + i * cw
            y = _H - _M - (j + 1) * ch
            parts.append(f'<rect x="{_num(x)}" y="{_num(y)}" width="{_num(cw)}" height="{_num(ch)}" '
                         f'fill="{colors.get(str(labels[i, j]), "#000000")}"/>')
    for k, name in enumerate(list(colors)):
        lx = _M + 130 * k
        parts.append(f'<rect x="{lx}" y="{_H - 34}" width="10" height="10" fill="{colors[name]}"/>')
        parts.append(f'<text x="{lx + 14}" y="{_H - 25}" font-size="10">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
