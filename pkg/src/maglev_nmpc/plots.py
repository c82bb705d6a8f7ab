"""Static SVG line and bar charts.

Output depends only on the data: coordinates are printed with fixed
precision and nothing time-dependent is embedded.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
MAX_POINTS = 2000


@dataclass
class Panel:
    title: str
    xlabel: str
    ylabel: str
    series: list  # (label, x, y)
    kind: str = "line"  # or "bar"
    logy: bool = False
    xlim: tuple | None = None


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, count: int = 5) -> list:
    if not hi > lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-12 * abs(step):
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def _tick_label(v: float) -> str:
    return f"{v:.3g}"


def decimate(x, y, max_points: int = MAX_POINTS):
    """Min/max envelope per bucket so narrow peaks survive downsampling."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if len(x) <= max_points:
        return x, y
    buckets = max_points // 2
    edges = np.linspace(0, len(x), buckets + 1).astype(int)
    xs, ys = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        seg = y[a:b]
        i, j = a + int(np.argmin(seg)), a + int(np.argmax(seg))
        for k in sorted((i, j)):
            xs.append(x[k])
            ys.append(y[k])
    return np.array(xs), np.array(ys)


def _panel_svg(p: Panel, ox: float, oy: float, w: float, h: float) -> list:
    left, right, top, bottom = 70.0, 15.0, 28.0, 45.0
    pw, ph = w - left - right, h - top - bottom
    out = [f'<text x="{_fmt(ox + w / 2)}" y="{_fmt(oy + 18)}" text-anchor="middle" font-size="13">'
           f'{escape(p.title)}</text>']
    xs_all = [np.asarray(s[1], float) for s in p.series]
    ys_all = [np.asarray(s[2], float) for s in p.series]
    if p.xlim is not None:
        x0, x1 = p.xlim
        masks = [(x >= x0) & (x <= x1) for x in xs_all]
        xs_all = [x[m] for x, m in zip(xs_all, masks)]
        ys_all = [y[m] for y, m in zip(ys_all, masks)]
    finite = [y[np.isfinite(y) & ((y > 0) if p.logy else True)] for y in ys_all]
    if not any(len(f) for f in finite):
        out.append(f'<text x="{_fmt(ox + w / 2)}" y="{_fmt(oy + h / 2)}" text-anchor="middle">no data</text>')
        return out
    x0 = min(float(x.min()) for x in xs_all if len(x))
    x1 = max(float(x.max()) for x in xs_all if len(x))
    if p.xlim is not None:
        x0, x1 = p.xlim
    y0 = min(float(f.min()) for f in finite if len(f))
    y1 = max(float(f.max()) for f in finite if len(f))
    if p.kind == "bar":
        y0 = 0.0
    if p.logy:
        y0, y1 = math.log10(y0), math.log10(y1)
    if y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = (y0 if p.kind == "bar" else y0 - pad), y1 + pad
    if x1 == x0:
        x0, x1 = x0 - 1.0, x1 + 1.0

    def px(v):
        return ox + left + (v - x0) / (x1 - x0) * pw

    def py(v):
        if p.logy:
            v = math.log10(v) if v > 0 else y0
        return oy + top + (1 - (v - y0) / (y1 - y0)) * ph

    out.append(f'<rect x="{_fmt(ox + left)}" y="{_fmt(oy + top)}" width="{_fmt(pw)}" height="{_fmt(ph)}" '
               f'fill="none" stroke="#444"/>')
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{_fmt(px(t))}" y1="{_fmt(oy + top + ph)}" x2="{_fmt(px(t))}" '
                   f'y2="{_fmt(oy + top + ph + 4)}" stroke="#444"/>')
        out.append(f'<text x="{_fmt(px(t))}" y="{_fmt(oy + top + ph + 16)}" text-anchor="middle" '
                   f'font-size="10">{_tick_label(t)}</text>')
    if p.logy:
        yticks = [10.0 ** e for e in range(math.ceil(y0), math.floor(y1) + 1)]
    else:
        yticks = _ticks(y0, y1)
    for t in yticks:
        out.append(f'<line x1="{_fmt(ox + left - 4)}" y1="{_fmt(py(t))}" x2="{_fmt(ox + left)}" '
                   f'y2="{_fmt(py(t))}" stroke="#444"/>')
        out.append(f'<text x="{_fmt(ox + left - 6)}" y="{_fmt(py(t) + 3)}" text-anchor="end" '
                   f'font-size="10">{_tick_label(t)}</text>')
    out.append(f'<text x="{_fmt(ox + left + pw / 2)}" y="{_fmt(oy + h - 8)}" text-anchor="middle" '
               f'font-size="11">{escape(p.xlabel)}</text>')
    out.append(f'<text x="{_fmt(ox + 14)}" y="{_fmt(oy + top + ph / 2)}" text-anchor="middle" font-size="11" '
               f'transform="rotate(-90 {_fmt(ox + 14)} {_fmt(oy + top + ph / 2)})">{escape(p.ylabel)}</text>')

    for idx, ((label, _, _), x, y) in enumerate(zip(p.series, xs_all, ys_all)):
        color = PALETTE[idx % len(PALETTE)]
        if p.kind == "bar":
            if len(x) < 1:
                continue
            width = (x[1] - x[0]) if len(x) > 1 else 1.0
            sub = width / max(len(p.series), 1)
            for xc, yc in zip(x, y):
                left_edge = xc - width / 2 + idx * sub
                bx, bw = px(left_edge), px(left_edge + sub) - px(left_edge)
                by = py(yc)
                out.append(f'<rect x="{_fmt(bx)}" y="{_fmt(by)}" width="{_fmt(max(bw, 0.5))}" '
                           f'height="{_fmt(oy + top + ph - by)}" fill="{color}" fill-opacity="0.8"/>')
        else:
            xd, yd = decimate(x, y)
            keep = np.isfinite(yd) & ((yd > 0) if p.logy else True)
            pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(xd[keep], yd[keep]))
            if pts:
                out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"/>')
        ly = oy + top + 14 + 14 * idx
        out.append(f'<rect x="{_fmt(ox + left + pw - 110)}" y="{_fmt(ly - 8)}" width="10" height="10" '
                   f'fill="{color}"/>')
        out.append(f'<text x="{_fmt(ox + left + pw - 96)}" y="{_fmt(ly + 1)}" font-size="10">'
                   f'{escape(label)}</text>')
    return out


def render(panels: list, columns: int = 1, panel_size=(560, 300)) -> str:
    w, h = panel_size
    rows = math.ceil(len(panels) / columns)
    total_w, total_h = w * columns, h * rows
    body = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{total_h}" '
            f'viewBox="0 0 {total_w} {total_h}" font-family="sans-serif">',
            f'<rect width="{total_w}" height="{total_h}" fill="white"/>']
    for i, panel in enumerate(panels):
        body.extend(_panel_svg(panel, (i % columns) * w, (i // columns) * h, w, h))
    body.append("</svg>")
    return "\n".join(body) + "\n"


def write_svg(panels: list, path, columns: int = 1, panel_size=(560, 300)) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(render(panels, columns, panel_size))
