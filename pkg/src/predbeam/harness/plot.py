"""Dependency-free SVG line charts with byte-stable output."""

from __future__ import annotations

import math
from typing import Iterable, List, Optional, Sequence
from xml.sax.saxutils import escape

from .results import COLUMNS, ResultRow, SchemaError, read_csv

__all__ = ["plot_rows", "plot_csv", "PlotError"]

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 80, 150, 30, 60
COLORS = {"upper_bound": "#1b9e77", "hcl": "#d95f02", "naive": "#7570b3", "random": "#e7298a"}
MARKERS = {"upper_bound": "circle", "hcl": "square", "naive": "diamond", "random": "triangle"}


class PlotError(ValueError):
    pass


def _ticks(lo: float, hi: float, n: int = 5) -> List[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step) * step
    out, v = [], first
    while v <= hi + 1e-9 * step:
        out.append(round(v, 12))
        v += step
    return out


def _num(v: float) -> str:
    return f"{v:.2f}"


def _label(v: float, log_scale: bool) -> str:
    if log_scale:
        return f"1e{int(round(v))}"
    return f"{v:g}"


def _marker(kind: str, x: float, y: float, color: str) -> str:
    if kind == "circle":
        return f'<circle cx="{_num(x)}" cy="{_num(y)}" r="3.5" fill="{color}"/>'
    if kind == "square":
        return (f'<rect x="{_num(x - 3.5)}" y="{_num(y - 3.5)}" width="7" height="7" '
                f'fill="{color}"/>')
    if kind == "diamond":
        pts = f"{_num(x)},{_num(y - 4.5)} {_num(x + 4.5)},{_num(y)} {_num(x)},{_num(y + 4.5)} {_num(x - 4.5)},{_num(y)}"
    else:
        pts = f"{_num(x)},{_num(y - 4.5)} {_num(x + 4.5)},{_num(y + 3.5)} {_num(x - 4.5)},{_num(y + 3.5)}"
    return f'<polygon points="{pts}" fill="{color}"/>'


def plot_rows(rows: Sequence[ResultRow], metric: str, axis: Optional[str] = None,
              log_scale: bool = False, methods: Optional[Iterable[str]] = None,
              title: Optional[str] = None) -> str:
    """One polyline per method of ``metric`` against the sweep axis, averaged over seeds."""
    if metric not in COLUMNS[4:]:
        raise SchemaError(f"unknown metric column {metric!r}")
    rows = [r for r in rows if axis is None or r.axis_name == axis]
    if not rows:
        raise PlotError("no rows to plot")
    axis = rows[0].axis_name
    order = [m for m in COLORS if any(r.method == m for r in rows)]
    if methods is not None:
        wanted = list(methods)
        if not wanted:
            raise PlotError("empty method selection")
        order = [m for m in order if m in wanted]
    if not order:
        raise PlotError("no methods to plot")

    series = {}
    for m in order:
        pts = {}
        for r in rows:
            if r.method == m:
                pts.setdefault(r.axis_value, []).append(getattr(r, metric))
        xs = sorted(pts)
        ys = [math.fsum(pts[x]) / len(pts[x]) for x in xs]
        if log_scale:
            if any(y <= 0 for y in ys):
                raise PlotError(f"log scale needs positive {metric} values ({m})")
            ys = [math.log10(y) for y in ys]
        series[m] = list(zip(xs, ys))

    allx = [x for s in series.values() for x, _ in s]
    ally = [y for s in series.values() for _, y in s]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if log_scale:
        y0, y1 = math.floor(y0), math.ceil(y1)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pad = 0.0 if log_scale else 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return TOP + (1 - (y - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="18" text-anchor="middle">{escape(title)}</text>')
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>')
    yt = list(range(int(y0), int(y1) + 1)) if log_scale else _ticks(y0, y1)
    for t in yt:
        if y0 <= t <= y1:
            out.append(f'<line x1="{LEFT}" y1="{_num(sy(t))}" x2="{LEFT + pw}" y2="{_num(sy(t))}" '
                       f'stroke="#ddd"/>')
            out.append(f'<text x="{LEFT - 6}" y="{_num(sy(t) + 4)}" text-anchor="end">'
                       f'{_label(t, log_scale)}</text>')
    xvals = sorted(set(allx))
    for t in (xvals if len(xvals) <= 10 else _ticks(x0, x1)):
        out.append(f'<text x="{_num(sx(t))}" y="{TOP + ph + 18}" text-anchor="middle">{t:g}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 15}" text-anchor="middle">'
               f'{escape(axis)}</text>')
    ylab = f"{metric} (log10)" if log_scale else metric
    out.append(f'<text x="18" y="{TOP + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {TOP + ph / 2:.2f})">{escape(ylab)}</text>')
    for i, m in enumerate(order):
        color = COLORS[m]
        pts = " ".join(f"{_num(sx(x))},{_num(sy(y))}" for x, y in series[m])
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        for x, y in series[m]:
            out.append(_marker(MARKERS[m], sx(x), sy(y), color))
        ly = TOP + 10 + 20 * i
        out.append(f'<line x1="{LEFT + pw + 15}" y1="{ly}" x2="{LEFT + pw + 40}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{LEFT + pw + 46}" y="{ly + 4}">{m}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_csv(path, metric: str, axis: Optional[str] = None, log_scale: bool = False,
             methods: Optional[Iterable[str]] = None) -> str:
    return plot_rows(read_csv(path), metric, axis, log_scale, methods)
