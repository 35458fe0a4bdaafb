"""Static SVG rendering for validated chart specs.

Every data mark carries ``class="mark"`` so callers (and tests) can count
them: one ``rect`` per plotted bar value, one ``polyline`` per line series,
one ``path`` per area series or pie wedge, one ``circle`` per scatter/bubble
point. Output is byte-deterministic for identical inputs.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from ..model import DataTable, DataTableSet, has_errors
from .spec import ChartType, VisSpec, VisSpecError
from .validate import validate_visspec

SVG_NS = "http://www.w3.org/2000/svg"
DEFAULT_PALETTE = (
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
)


class EmptyData(VisSpecError):
    code = "EmptyData"


class RenderError(VisSpecError):
    code = "RenderError"


@dataclass(frozen=True)
class RenderOptions:
    width: int = 640
    height: int = 400
    palette: tuple[str, ...] = DEFAULT_PALETTE
    margin_left: int = 64
    margin_right: int = 24
    margin_top: int = 48
    margin_bottom: int = 56
    legend_width: int = 120


def fmt(v: float) -> str:
    s = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _num(v) -> Optional[float]:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        return None
    return float(v)


def _label(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return "" if v is None else str(v)


def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = first
    while t <= hi + step * 1e-9:
        ticks.append(round(t, 10))
        t += step
    return ticks


def bar_range(values: Sequence[float]) -> tuple[float, float]:
    """[0, 1.05 max], extended below zero when values go negative."""
    hi = 1.05 * max(max(values, default=0.0), 0.0)
    lo = 1.05 * min(min(values, default=0.0), 0.0)
    if hi == lo:
        hi = lo + 1.0
    return lo, hi


def padded_range(values: Sequence[float]) -> tuple[float, float]:
    """[min - 5% of span, max + 5% of span]; flat data gets a unit pad."""
    lo, hi = min(values), max(values)
    span = hi - lo
    pad = 0.05 * span if span > 0 else max(abs(hi) * 0.05, 1.0)
    return lo - pad, hi + pad


@dataclass
class _Series:
    name: str
    points: list[tuple[int, object, float]]  # (row index, x value, y value)


def _series(spec: VisSpec, table: DataTable) -> list[_Series]:
    """Group plotted values into series.

    Without a series column each y column is a series. With one, every
    (series value, y column) pair is a series; rows keep table order.
    """
    xs = table.values(spec.x)
    ycols = {c: table.values(c) for c in spec.y}
    if spec.series is None or spec.chart_type is ChartType.BUBBLE:
        out = []
        for c in spec.y:
            pts = [(i, xs[i], v) for i, raw in enumerate(ycols[c]) if (v := _num(raw)) is not None]
            out.append(_Series(c, pts))
        return out
    groups = list(dict.fromkeys(table.values(spec.series)))
    svals = table.values(spec.series)
    out = []
    for g in groups:
        for c in spec.y:
            name = _label(g) if len(spec.y) == 1 else f"{_label(g)} · {c}"
            pts = [
                (i, xs[i], v) for i, raw in enumerate(ycols[c]) if svals[i] == g and (v := _num(raw)) is not None
            ]
            out.append(_Series(name, pts))
    return out


class _Canvas:
    def __init__(self, spec: VisSpec, opts: RenderOptions, legend: bool) -> None:
        self.opts = opts
        self.root = ET.Element(
            "svg",
            {
                "xmlns": SVG_NS,
                "version": "1.1",
                "width": str(opts.width),
                "height": str(opts.height),
                "viewBox": f"0 0 {opts.width} {opts.height}",
                "font-family": "sans-serif",
                "font-size": "11",
            },
        )
        ET.SubElement(self.root, "rect", {"class": "background", "x": "0", "y": "0", "width": str(opts.width),
                                          "height": str(opts.height), "fill": "#ffffff"})
        title = ET.SubElement(self.root, "text", {"class": "title", "x": fmt(opts.width / 2), "y": "24",
                                                  "text-anchor": "middle", "font-size": "15", "font-weight": "bold"})
        title.text = spec.title or f"{', '.join(spec.y)} by {spec.x}"
        self.left = opts.margin_left
        self.right = opts.width - opts.margin_right - (opts.legend_width if legend else 0)
        self.top = opts.margin_top
        self.bottom = opts.height - opts.margin_bottom
        self.marks = ET.SubElement(self.root, "g", {"class": "marks"})

    def color(self, i: int) -> str:
        return self.opts.palette[i % len(self.opts.palette)]

    def add(self, parent: ET.Element, tag: str, **attrs: str) -> ET.Element:
        return ET.SubElement(parent, tag, {k.replace("_", "-"): v for k, v in attrs.items()})

    def text(self, parent: ET.Element, content: str, **attrs: str) -> None:
        self.add(parent, "text", **attrs).text = content

    def y_axis(self, lo: float, hi: float, label: str) -> Callable[[float], float]:
        scale = lambda v: self.bottom - (v - lo) / (hi - lo) * (self.bottom - self.top)  # noqa: E731
        g = self.add(self.root, "g", **{"class": "axis y-axis"})
        self.add(g, "line", x1=fmt(self.left), y1=fmt(self.top), x2=fmt(self.left), y2=fmt(self.bottom), stroke="#333333")
        for t in nice_ticks(lo, hi):
            y = scale(t)
            self.add(g, "line", x1=fmt(self.left - 4), y1=fmt(y), x2=fmt(self.left), y2=fmt(y), stroke="#333333")
            self.text(g, fmt(t), x=fmt(self.left - 6), y=fmt(y + 4), text_anchor="end")
        cx, cy = 16, (self.top + self.bottom) / 2
        self.text(g, label, **{"class": "axis-label", "x": fmt(cx), "y": fmt(cy), "text-anchor": "middle",
                               "transform": f"rotate(-90 {fmt(cx)} {fmt(cy)})"})
        return scale

    def x_axis(self, label: str, ticks: Sequence[tuple[float, str]], baseline: Optional[float] = None) -> None:
        g = self.add(self.root, "g", **{"class": "axis x-axis"})
        y0 = self.bottom if baseline is None else baseline
        self.add(g, "line", x1=fmt(self.left), y1=fmt(y0), x2=fmt(self.right), y2=fmt(y0), stroke="#333333")
        every = max(1, math.ceil(len(ticks) / 16))
        for k, (x, name) in enumerate(ticks):
            if k % every:
                continue
            self.text(g, name[:14], x=fmt(x), y=fmt(self.bottom + 16), text_anchor="middle")
        self.text(g, label, **{"class": "axis-label", "x": fmt((self.left + self.right) / 2),
                               "y": fmt(self.opts.height - 12), "text-anchor": "middle"})

    def legend(self, names: Sequence[str]) -> None:
        g = self.add(self.root, "g", **{"class": "legend"})
        x = self.opts.width - self.opts.margin_right - self.opts.legend_width + 12
        for i, name in enumerate(names):
            y = self.top + i * 18
            self.add(g, "rect", x=fmt(x), y=fmt(y), width="10", height="10", fill=self.color(i))
            self.text(g, name[:18], x=fmt(x + 14), y=fmt(y + 9))

    def tostring(self) -> str:
        ET.indent(self.root, space="  ")
        return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(self.root, encoding="unicode") + "\n"


def _categorical_x(canvas: _Canvas, n: int) -> tuple[list[float], float]:
    band = (canvas.right - canvas.left) / n
    return [canvas.left + band * (i + 0.5) for i in range(n)], band


def _render_bars(spec: VisSpec, table: DataTable, series: list[_Series], canvas: _Canvas) -> None:
    long = spec.series is not None
    cats = list(dict.fromkeys(table.values(spec.x))) if long else list(table.values(spec.x))
    cat_index = (lambda row, x: cats.index(x)) if long else (lambda row, x: row)
    stacked = spec.chart_type is ChartType.STACKED_BAR
    if stacked:
        totals = [0.0] * len(cats)
        for s in series:
            for row, x, v in s.points:
                totals[cat_index(row, x)] += v
        lo, hi = bar_range(totals)
    else:
        lo, hi = bar_range([v for s in series for _, _, v in s.points])
    scale = canvas.y_axis(lo, hi, ", ".join(spec.y))
    centers, band = _categorical_x(canvas, len(cats))
    inner = band * 0.8
    offsets = [0.0] * len(cats)
    width = inner if stacked or len(series) == 1 else inner / len(series)
    for si, s in enumerate(series):
        for row, x, v in s.points:
            ci = cat_index(row, x)
            if stacked:
                x0 = centers[ci] - inner / 2
                y_from, y_to = offsets[ci], offsets[ci] + v
                offsets[ci] = y_to
            else:
                x0 = centers[ci] - inner / 2 + (0 if len(series) == 1 else si * width)
                y_from, y_to = 0.0, v
            top, bot = sorted((scale(y_from), scale(y_to)))
            canvas.add(canvas.marks, "rect", **{"class": "mark", "x": fmt(x0), "y": fmt(top), "width": fmt(width),
                                                 "height": fmt(bot - top), "fill": canvas.color(si)})
    canvas.x_axis(spec.x, [(c, _label(name)) for c, name in zip(centers, cats)], baseline=scale(0.0))


def _x_positions(spec: VisSpec, table: DataTable, canvas: _Canvas):
    """Scale for the x axis: linear for numeric columns, banded otherwise."""
    if table.column(spec.x).kind == "number":
        xs = [v for v in (_num(x) for x in table.values(spec.x)) if v is not None]
        lo, hi = padded_range(xs)
        scale = lambda v: canvas.left + (v - lo) / (hi - lo) * (canvas.right - canvas.left)  # noqa: E731
        ticks = [(scale(t), fmt(t)) for t in nice_ticks(lo, hi)]
        return (lambda row, x: scale(float(x))), ticks
    cats = list(dict.fromkeys(table.values(spec.x)))
    centers, _ = _categorical_x(canvas, len(cats))
    ticks = [(c, _label(n)) for c, n in zip(centers, cats)]
    return (lambda row, x: centers[cats.index(x)]), ticks


def _render_lines(spec: VisSpec, table: DataTable, series: list[_Series], canvas: _Canvas) -> None:
    values = [v for s in series for _, _, v in s.points]
    area = spec.chart_type is ChartType.AREA
    lo, hi = bar_range(values) if area else padded_range(values)
    scale = canvas.y_axis(lo, hi, ", ".join(spec.y))
    xpos, ticks = _x_positions(spec, table, canvas)
    base = scale(max(lo, 0.0)) if area else None
    for si, s in enumerate(series):
        pts = [(xpos(row, x), scale(v)) for row, x, v in s.points if x is not None]
        if not pts:
            continue
        coords = " ".join(f"{fmt(px)},{fmt(py)}" for px, py in pts)
        if area:
            d = f"M {fmt(pts[0][0])},{fmt(base)} L " + " L ".join(f"{fmt(px)},{fmt(py)}" for px, py in pts)
            d += f" L {fmt(pts[-1][0])},{fmt(base)} Z"
            canvas.add(canvas.marks, "path", **{"class": "mark", "d": d, "fill": canvas.color(si),
                                                 "fill-opacity": "0.5", "stroke": canvas.color(si)})
        else:
            canvas.add(canvas.marks, "polyline", **{"class": "mark", "points": coords, "fill": "none",
                                                     "stroke": canvas.color(si), "stroke-width": "2"})
    canvas.x_axis(spec.x, ticks, baseline=base)


def _render_points(spec: VisSpec, table: DataTable, series: list[_Series], canvas: _Canvas) -> None:
    bubble = spec.chart_type is ChartType.BUBBLE
    scale_y = canvas.y_axis(*padded_range([v for s in series for _, _, v in s.points]), ", ".join(spec.y))
    xpos, ticks = _x_positions(spec, table, canvas)
    sizes = table.values(spec.series) if bubble else None
    max_size = max((v for v in (_num(s) for s in sizes) if v is not None), default=0.0) if bubble else 0.0
    max_r = min(canvas.right - canvas.left, canvas.bottom - canvas.top) / 10
    for si, s in enumerate(series):
        for row, x, v in s.points:
            if _num(x) is None:
                continue
            if bubble:
                size = _num(sizes[row])
                if size is None:
                    continue
                r = max_r * math.sqrt(size / max_size) if max_size > 0 else 2.0
            else:
                r = 4.0
            canvas.add(canvas.marks, "circle", **{"class": "mark", "cx": fmt(xpos(row, x)), "cy": fmt(scale_y(v)),
                                                   "r": fmt(r), "fill": canvas.color(si), "fill-opacity": "0.7"})
    canvas.x_axis(spec.x, ticks)


def _render_pie(spec: VisSpec, table: DataTable, canvas: _Canvas) -> None:
    labels = table.values(spec.x)
    values = [_num(v) for v in table.values(spec.y[0])]
    total = sum(v for v in values if v is not None)
    if total <= 0:
        raise EmptyData("pie values sum to zero")
    cx = (canvas.left + canvas.right) / 2
    cy = (canvas.top + canvas.bottom) / 2
    r = min(canvas.right - canvas.left, canvas.bottom - canvas.top) / 2
    angle = 0.0  # degrees clockwise from 12 o'clock
    names = []
    for i, v in enumerate(values):
        if v is None:
            continue
        sweep = 360.0 * v / total
        a0, a1 = angle, angle + sweep
        angle = a1
        p0 = (cx + r * math.sin(math.radians(a0)), cy - r * math.cos(math.radians(a0)))
        p1 = (cx + r * math.sin(math.radians(a1)), cy - r * math.cos(math.radians(a1)))
        if sweep >= 360.0 - 1e-9:
            mid = (cx - r * math.sin(math.radians(a0)), cy + r * math.cos(math.radians(a0)))
            d = (f"M {fmt(p0[0])},{fmt(p0[1])} A {fmt(r)},{fmt(r)} 0 1 1 {fmt(mid[0])},{fmt(mid[1])} "
                 f"A {fmt(r)},{fmt(r)} 0 1 1 {fmt(p0[0])},{fmt(p0[1])} Z")
        else:
            large = 1 if sweep > 180.0 else 0
            d = (f"M {fmt(cx)},{fmt(cy)} L {fmt(p0[0])},{fmt(p0[1])} "
                 f"A {fmt(r)},{fmt(r)} 0 {large} 1 {fmt(p1[0])},{fmt(p1[1])} Z")
        canvas.add(canvas.marks, "path", **{"class": "mark", "d": d, "fill": canvas.color(len(names)),
                                             "stroke": "#ffffff"})
        names.append(_label(labels[i]))
    canvas.legend(names)


def render_svg(spec: VisSpec, tables: DataTableSet, opts: RenderOptions = RenderOptions()) -> str:
    """Render ``spec`` against ``tables`` as an SVG 1.1 document."""
    report = validate_visspec(spec, tables)
    if has_errors(report):
        first = next(i for i in report if i.severity == "error")
        raise RenderError(f"spec does not validate: {first.code}: {first.message}")
    table = tables.get(spec.table_ref)
    assert table is not None
    if not table.rows:
        raise EmptyData(f"table {table.id!r} has no rows")

    series = _series(spec, table)
    if spec.chart_type is ChartType.PIE:
        canvas = _Canvas(spec, opts, legend=True)
        _render_pie(spec, table, canvas)
        return canvas.tostring()
    if not any(s.points for s in series):
        raise EmptyData(f"no numeric values to plot in {', '.join(spec.y)}")

    legend = len(series) > 1
    canvas = _Canvas(spec, opts, legend=legend)
    if spec.chart_type.is_bar_family:
        _render_bars(spec, table, series, canvas)
    elif spec.chart_type in (ChartType.LINE, ChartType.AREA):
        _render_lines(spec, table, series, canvas)
    else:
        _render_points(spec, table, series, canvas)
    if legend:
        canvas.legend([s.name for s in series])
    return canvas.tostring()
