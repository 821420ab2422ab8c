"""Dependency-free SVG charts for result tables.

The emitter draws information per channel use against N: one solid series
per ancilla dimension, a dashed series where splitting the channel budget
changes the answer, and a solid horizontal reference line when the model has
a closed-form per-use ceiling.  Output is plain SVG text assembled with
fixed number formatting from sorted inputs, so identical rows give
byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

from .analytic import parallel_dephasing_bound

__all__ = ["PlotStyle", "emit_plot", "write_plot"]

PALETTE = ("#1f77b4", "#d62728", "#e0a800", "#2ca02c", "#9467bd", "#8c564b")
BOUNDED_MODELS = ("dephasing_parallel", "correlated_dephasing")


@dataclass(frozen=True)
class PlotStyle:
    width: int = 640
    height: int = 440
    title: str = ""
    x_label: str = "N"
    y_label: str = "F/N"


def _fmt(v):
    return "%.2f" % v


def _tick_values(lo, hi, target=6):
    span = hi - lo
    if span <= 0:
        return [lo]
    step = 10.0 ** math.floor(math.log10(span / target))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if span / (step * mult) <= target:
            step *= mult
            break
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * span:
        ticks.append(round(t, 10) + 0.0)
        t += step
    return ticks


def _series(rows):
    """Best value per (d_A, N) over seeds, as sorted point lists."""
    solid, dashed = {}, {}
    for row in rows:
        if not math.isfinite(row.qfi_per_n):
            continue
        cell = solid.setdefault(row.d_a, {})
        if row.n not in cell or row.qfi_per_n > cell[row.n]:
            cell[row.n] = row.qfi_per_n
        if math.isfinite(row.split_qfi_per_n):
            dcell = dashed.setdefault(row.d_a, {})
            if row.n not in dcell or row.split_qfi_per_n > dcell[row.n]:
                dcell[row.n] = row.split_qfi_per_n
    out = []
    for d_a in sorted(solid):
        pts = sorted(solid[d_a].items())
        spts = sorted(dashed.get(d_a, {}).items())
        want_split = any(abs(sv - solid[d_a][n]) > 1e-12 for n, sv in spts)
        out.append((d_a, pts, spts if want_split else []))
    return out


def emit_plot(rows, style=None):
    """Render result rows to SVG text (one experiment per chart)."""
    style = style or PlotStyle()
    if not rows:
        raise ValueError("no rows to plot")
    models = {(r.model, r.p, r.c) for r in rows}
    if len(models) > 1:
        raise ValueError("plot expects a single model per table")
    model, p, _ = next(iter(models))
    series = _series(rows)
    if not series:
        raise ValueError("no finite values to plot")

    bound = None
    if model in BOUNDED_MODELS and 0.0 < p < 1.0:
        bound = parallel_dephasing_bound(1, p)

    xs = [n for _, pts, spts in series for n, _ in pts + spts]
    ys = [v for _, pts, spts in series for _, v in pts + spts]
    if bound is not None:
        ys.append(bound)
    x0, x1 = min(xs), max(xs)
    if x0 == x1:
        x0, x1 = x0 - 1.0, x1 + 1.0
    y1 = max(ys) * 1.08 or 1.0
    y0 = 0.0

    w, h = style.width, style.height
    ml, mr, mt, mb = 64, 16, 30, 46

    def px(x):
        return ml + (x - x0) / (x1 - x0) * (w - ml - mr)

    def py(y):
        return h - mb - (y - y0) / (y1 - y0) * (h - mt - mb)

    parts = []
    parts.append('<svg xmlns="http://www.w3.org/2000/svg" width="%d" '
                 'height="%d" viewBox="0 0 %d %d">' % (w, h, w, h))
    parts.append('<rect width="%d" height="%d" fill="white"/>' % (w, h))
    if style.title:
        parts.append('<text x="%s" y="18" font-family="sans-serif" '
                     'font-size="14" text-anchor="middle">%s</text>'
                     % (_fmt((ml + w - mr) / 2), escape(style.title)))

    axis = 'stroke="black" stroke-width="1"'
    parts.append('<line x1="%s" y1="%s" x2="%s" y2="%s" %s/>'
                 % (_fmt(ml), _fmt(h - mb), _fmt(w - mr), _fmt(h - mb), axis))
    parts.append('<line x1="%s" y1="%s" x2="%s" y2="%s" %s/>'
                 % (_fmt(ml), _fmt(mt), _fmt(ml), _fmt(h - mb), axis))
    for t in _tick_values(x0, x1):
        x = px(t)
        parts.append('<line x1="%s" y1="%s" x2="%s" y2="%s" %s/>'
                     % (_fmt(x), _fmt(h - mb), _fmt(x), _fmt(h - mb + 5),
                        axis))
        parts.append('<text x="%s" y="%s" font-family="sans-serif" '
                     'font-size="11" text-anchor="middle">%g</text>'
                     % (_fmt(x), _fmt(h - mb + 18), t))
    for t in _tick_values(y0, y1):
        y = py(t)
        parts.append('<line x1="%s" y1="%s" x2="%s" y2="%s" %s/>'
                     % (_fmt(ml - 5), _fmt(y), _fmt(ml), _fmt(y), axis))
        parts.append('<text x="%s" y="%s" font-family="sans-serif" '
                     'font-size="11" text-anchor="end">%g</text>'
                     % (_fmt(ml - 8), _fmt(y + 4), t))
    parts.append('<text x="%s" y="%s" font-family="sans-serif" '
                 'font-size="12" text-anchor="middle">%s</text>'
                 % (_fmt((ml + w - mr) / 2), _fmt(h - 10),
                    escape(style.x_label)))
    parts.append('<text x="16" y="%s" font-family="sans-serif" '
                 'font-size="12" text-anchor="middle" '
                 'transform="rotate(-90 16 %s)">%s</text>'
                 % (_fmt((mt + h - mb) / 2), _fmt((mt + h - mb) / 2),
                    escape(style.y_label)))

    legend = []
    if bound is not None:
        yb = py(bound)
        parts.append('<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="black" '
                     'stroke-width="1.5"/>'
                     % (_fmt(ml), _fmt(yb), _fmt(w - mr), _fmt(yb)))
        legend.append(("black", "", "bound"))
    for i, (d_a, pts, spts) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join("%s,%s" % (_fmt(px(n)), _fmt(py(v)))
                          for n, v in pts)
        if len(pts) > 1:
            parts.append('<polyline fill="none" stroke="%s" '
                         'stroke-width="1.5" points="%s"/>' % (color, coords))
        for n, v in pts:
            parts.append('<circle cx="%s" cy="%s" r="2.5" fill="%s"/>'
                         % (_fmt(px(n)), _fmt(py(v)), color))
        legend.append((color, "", "d_A=%d" % d_a))
        if spts:
            scoords = " ".join("%s,%s" % (_fmt(px(n)), _fmt(py(v)))
                               for n, v in spts)
            parts.append('<polyline fill="none" stroke="%s" '
                         'stroke-width="1.5" stroke-dasharray="6 4" '
                         'points="%s"/>' % (color, scoords))
            legend.append((color, "6 4", "d_A=%d split" % d_a))
    for j, (color, dash, label) in enumerate(legend):
        ly = mt + 12 + 16 * j
        stroke = ' stroke-dasharray="%s"' % dash if dash else ""
        parts.append('<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="%s" '
                     'stroke-width="1.5"%s/>'
                     % (_fmt(w - mr - 150), _fmt(ly - 4),
                        _fmt(w - mr - 122), _fmt(ly - 4), color, stroke))
        parts.append('<text x="%s" y="%s" font-family="sans-serif" '
                     'font-size="11">%s</text>'
                     % (_fmt(w - mr - 116), _fmt(ly), escape(label)))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_plot(path, rows, style=None):
    svg = emit_plot(rows, style)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg)
    return path
