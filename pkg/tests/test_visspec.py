from __future__ import annotations

import math
import re
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from datastory.model import Column, DataTable, DataTableSet
from datastory.visspec import (
    AmbiguousChartType,
    ChartType,
    MissingField,
    VisSpec,
    normalize_chart_type,
    parse_visspec,
    serialize_visspec,
)
from datastory.visspec.render import EmptyData, RenderError, RenderOptions, bar_range, nice_ticks, padded_range, render_svg
from datastory.visspec.spec import ArityError, MalformedLine, UnknownField
from datastory.visspec.validate import validate_visspec

SVG = "{http://www.w3.org/2000/svg}"
REJECTED = ["side-by-side bar chart", "multi-dimensional infographic", "summary chart", "combined"]


def marks(svg: str) -> list[ET.Element]:
    root = ET.fromstring(svg.split("\n", 1)[1])
    return [el for el in root.iter() if el.get("class") == "mark"]


def table(rows, cols):
    return DataTableSet((DataTable("t0", "T", tuple(cols), tuple(tuple(r) for r in rows)),))


@pytest.fixture
def wide():
    cols = (Column("Year"), Column("A", "number"), Column("B", "number"), Column("Size", "number"))
    rows = [(str(2016 + i), 10 + i, 20 - i, 1 + i) for i in range(5)]
    return table(rows, cols)


# --------------------------------------------------------------------------
# Parsing


def test_parse_minimal():
    spec = parse_visspec("chart_type: bar\ntable: t0\nx: Year\ny: Approval")
    assert spec == VisSpec(ChartType.BAR, "t0", "Year", ("Approval",))


def test_parse_full_and_case_insensitive_keys():
    spec = parse_visspec("Title: Views\nCHART_TYPE: Scatter Plot\ntable: t0\nx: A\ny: B, C\nseries: D\nnotes: n")
    assert spec.chart_type is ChartType.SCATTER
    assert spec.y == ("B", "C") and spec.series == "D" and spec.title == "Views"


@pytest.mark.parametrize("raw", REJECTED + ["infographic"])
def test_rejection_list(raw):
    with pytest.raises(AmbiguousChartType) as e:
        normalize_chart_type(raw)
    assert raw in str(e.value)
    with pytest.raises(AmbiguousChartType):
        parse_visspec(f"chart_type: {raw}\ntable: t0\nx: a\ny: b")


def test_unknown_type_is_also_ambiguous():
    with pytest.raises(AmbiguousChartType):
        normalize_chart_type("radar")


@pytest.mark.parametrize(
    "raw,kind",
    [("bar chart", "bar"), ("Line Chart", "line"), ("scatterplot", "scatter"), ("scatter plot", "scatter"),
     ("stacked bar", "stacked_bar"), ("group bar", "grouped_bar"), ("grouped bar", "grouped_bar"),
     ("Simple bar", "bar"), ("bubble", "bubble"), ("stacked-bar", "stacked_bar"), ("AREA", "area")],
)
def test_synonyms(raw, kind):
    assert normalize_chart_type(raw).value == kind


def test_missing_field():
    with pytest.raises(MissingField, match="table"):
        parse_visspec("chart_type: bar\nx: a\ny: b")


def test_malformed_and_unknown_lines():
    with pytest.raises(MalformedLine):
        parse_visspec("chart_type bar")
    with pytest.raises(UnknownField):
        parse_visspec("chart_type: bar\ntable: t\nx: a\ny: b\ncolor: red")
    with pytest.raises(MalformedLine):
        parse_visspec("chart_type: bar\nchart_type: line\ntable: t\nx: a\ny: b")


def test_arity_rules():
    with pytest.raises(ArityError):
        VisSpec(ChartType.PIE, "t", "x", ("a", "b"))
    with pytest.raises(ArityError):
        VisSpec(ChartType.BUBBLE, "t", "x", ("a",))
    with pytest.raises(ArityError):
        VisSpec(ChartType.BAR, "t", "x", ("x",))
    with pytest.raises(ArityError):
        VisSpec(ChartType.BAR, "t", "x", ())


_ident = st.text("abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=8)


@st.composite
def specs(draw):
    kind = draw(st.sampled_from(list(ChartType)))
    cols = draw(st.lists(_ident, min_size=4, max_size=4, unique=True))
    n_y = 1 if kind in (ChartType.PIE, ChartType.BUBBLE) else draw(st.integers(1, 2))
    series = cols[3] if kind is ChartType.BUBBLE else draw(st.one_of(st.none(), st.just(cols[3])))
    title = draw(st.text("abc XYZ-,.", max_size=12)).strip()
    return VisSpec(kind, draw(_ident), cols[0], tuple(cols[1:1 + n_y]), title=title, series=series,
                   notes=draw(st.one_of(st.none(), _ident)))


@given(specs())
@settings(max_examples=100, deadline=None)
def test_serialize_parse_round_trip(spec):
    assert parse_visspec(serialize_visspec(spec)) == spec


# --------------------------------------------------------------------------
# Validation


def test_unknown_column_with_hint():
    ts = table([("2019", 1)], (Column("Year"), Column("Approval", "number")))
    report = validate_visspec(VisSpec(ChartType.BAR, "t0", "Yearr", ("Approval",)), ts)
    assert [i.code for i in report] == ["UnknownColumn"]
    assert "'Year'" in report[0].message and report[0].path == "x"


def test_unknown_table():
    ts = table([("2019", 1)], (Column("Year"), Column("V", "number")))
    assert [i.code for i in validate_visspec(VisSpec(ChartType.BAR, "t1", "Year", ("V",)), ts)] == ["UnknownTable"]


def test_negative_pie_and_non_numeric():
    ts = table([("a", 5, "x"), ("b", -3, "y")], (Column("K"), Column("V", "number"), Column("L")))
    assert [i.code for i in validate_visspec(VisSpec(ChartType.PIE, "t0", "K", ("V",)), ts)] == ["NegativePieValue"]
    assert [i.code for i in validate_visspec(VisSpec(ChartType.BAR, "t0", "K", ("L",)), ts)] == ["NonNumericColumn"]
    assert [i.code for i in validate_visspec(VisSpec(ChartType.STACKED_BAR, "t0", "K", ("V",)), ts)] == ["NegativeStackedValue"]


def test_fully_resolvable_is_clean(wide):
    assert validate_visspec(VisSpec(ChartType.BAR, "t0", "Year", ("A",)), wide) == []


def test_warnings_for_many_slices_and_series():
    rows = [(f"k{i}", i + 1) for i in range(13)]
    ts = table(rows, (Column("K"), Column("V", "number")))
    report = validate_visspec(VisSpec(ChartType.PIE, "t0", "K", ("V",)), ts)
    assert [(i.severity, i.code) for i in report] == [("warning", "TooManySlices")]
    ts = table([(str(i), i, f"g{i}") for i in range(9)], (Column("X"), Column("V", "number"), Column("G")))
    report = validate_visspec(VisSpec(ChartType.LINE, "t0", "X", ("V",), series="G"), ts)
    assert [i.code for i in report] == ["TooManySeries"]


# --------------------------------------------------------------------------
# Rendering


def test_bar_three_rows_three_rects():
    ts = table([("a", 1), ("b", 2), ("c", 3)], (Column("K"), Column("V", "number")))
    svg = render_svg(VisSpec(ChartType.BAR, "t0", "K", ("V",), title="Three"), ts)
    m = marks(svg)
    assert len(m) == 3 and all(el.tag == SVG + "rect" for el in m)
    assert ">Three<" in svg and ">K<" in svg and ">V<" in svg


def test_line_two_series_five_points(wide):
    m = marks(render_svg(VisSpec(ChartType.LINE, "t0", "Year", ("A", "B")), wide))
    assert [el.tag for el in m] == [SVG + "polyline"] * 2
    assert all(len(el.get("points").split()) == 5 for el in m)


def _wedge_angle(d: str) -> float:
    nums = [float(v) for v in re.findall(r"-?\d+(?:\.\d+)?", d)]
    cx, cy, x0, y0 = nums[0:4]
    x1, y1 = nums[-2:]
    a0 = math.atan2(x0 - cx, cy - y0)
    a1 = math.atan2(x1 - cx, cy - y1)
    return math.degrees((a1 - a0) % (2 * math.pi)) or 360.0


def test_pie_halves_are_180_degrees():
    ts = table([("yes", 50), ("no", 50)], (Column("Answer"), Column("Share", "number")))
    m = marks(render_svg(VisSpec(ChartType.PIE, "t0", "Answer", ("Share",)), ts))
    assert len(m) == 2
    for el in m:
        assert abs(_wedge_angle(el.get("d")) - 180.0) < 0.01


def test_single_slice_pie_is_full_circle():
    ts = table([("all", 7)], (Column("K"), Column("V", "number")))
    (el,) = marks(render_svg(VisSpec(ChartType.PIE, "t0", "K", ("V",)), ts))
    assert el.get("d").count(" A ") == 2


def test_bubble_radius_scales_with_sqrt(wide):
    spec = VisSpec(ChartType.BUBBLE, "t0", "A", ("B",), series="Size")
    ts = table([(1, 1, 1), (2, 2, 4)], (Column("A", "number"), Column("B", "number"), Column("Size", "number")))
    r = [float(el.get("r")) for el in marks(render_svg(spec, ts))]
    assert r[1] / r[0] == pytest.approx(2.0, rel=1e-3)


def test_empty_data_and_invalid_spec():
    ts = table([], (Column("K"), Column("V", "number")))
    with pytest.raises(EmptyData):
        render_svg(VisSpec(ChartType.BAR, "t0", "K", ("V",)), ts)
    with pytest.raises(RenderError):
        render_svg(VisSpec(ChartType.BAR, "t0", "Nope", ("V",)), ts)


def test_render_options_size(wide):
    svg = render_svg(VisSpec(ChartType.BAR, "t0", "Year", ("A",)), wide, RenderOptions(width=300, height=200))
    root = ET.fromstring(svg.split("\n", 1)[1])
    assert root.get("width") == "300" and root.get("height") == "200"


def test_ranges():
    assert bar_range([10, 20]) == (0.0, pytest.approx(21.0))
    lo, hi = bar_range([-10, 20])
    assert lo == pytest.approx(-10.5) and hi == pytest.approx(21.0)
    assert padded_range([10, 20]) == (pytest.approx(9.5), pytest.approx(20.5))
    ticks = nice_ticks(0, 21)
    assert ticks[0] >= 0 and ticks[-1] <= 21 and len(ticks) >= 3


FAMILY_SPECS = {
    ChartType.BAR: VisSpec(ChartType.BAR, "t0", "Year", ("A",)),
    ChartType.STACKED_BAR: VisSpec(ChartType.STACKED_BAR, "t0", "Year", ("A", "B")),
    ChartType.GROUPED_BAR: VisSpec(ChartType.GROUPED_BAR, "t0", "Year", ("A", "B")),
    ChartType.LINE: VisSpec(ChartType.LINE, "t0", "Year", ("A", "B")),
    ChartType.AREA: VisSpec(ChartType.AREA, "t0", "Year", ("A",)),
    ChartType.PIE: VisSpec(ChartType.PIE, "t0", "Year", ("A",)),
    ChartType.SCATTER: VisSpec(ChartType.SCATTER, "t0", "A", ("B",)),
    ChartType.BUBBLE: VisSpec(ChartType.BUBBLE, "t0", "A", ("B",), series="Size"),
}


def expected_marks(spec: VisSpec, ts: DataTableSet) -> int:
    """The arity law, stated independently of the renderer."""
    t = ts.tables[0]
    n_rows = len(t.rows)
    if spec.chart_type in (ChartType.BAR, ChartType.STACKED_BAR, ChartType.GROUPED_BAR):
        return sum(1 for c in spec.y for v in t.values(c) if v is not None)
    if spec.chart_type in (ChartType.LINE, ChartType.AREA):
        if spec.series is None:
            return len(spec.y)
        return len(set(t.values(spec.series))) * len(spec.y)
    if spec.chart_type is ChartType.PIE:
        return n_rows
    return n_rows


@pytest.mark.parametrize("kind", list(ChartType))
def test_each_family_renders_with_arity_law(kind, wide):
    spec = FAMILY_SPECS[kind]
    assert validate_visspec(spec, wide) == []
    svg = render_svg(spec, wide)
    assert len(marks(svg)) == expected_marks(spec, wide)
    assert svg == render_svg(spec, wide)


@given(
    st.sampled_from(list(ChartType)),
    st.lists(st.tuples(st.integers(0, 100), st.integers(0, 100), st.integers(1, 50)), min_size=1, max_size=8),
)
@settings(max_examples=120, deadline=None)
def test_element_count_law_random_tables(kind, rows):
    cols = (Column("Year"), Column("A", "number"), Column("B", "number"), Column("Size", "number"))
    if kind in (ChartType.SCATTER, ChartType.BUBBLE):
        data = [(f"{i}", a, b, s) for i, (a, b, s) in enumerate(rows)]
    else:
        data = [(f"c{i}", a, b, s) for i, (a, b, s) in enumerate(rows)]
    ts = table(data, cols)
    spec = FAMILY_SPECS[kind]
    if kind is ChartType.PIE and sum(r[0] for r in rows) == 0:
        with pytest.raises(EmptyData):
            render_svg(spec, ts)
        return
    svg = render_svg(spec, ts)
    ET.fromstring(svg.split("\n", 1)[1])
    assert len(marks(svg)) == expected_marks(spec, ts)


def test_long_format_grouped_bars():
    cols = (Column("Year"), Column("Party"), Column("Share", "number"))
    rows = [("2019", "Rep", 40), ("2019", "Dem", 55), ("2020", "Rep", 42), ("2020", "Dem", 53)]
    ts = table(rows, cols)
    spec = VisSpec(ChartType.GROUPED_BAR, "t0", "Year", ("Share",), series="Party")
    svg = render_svg(spec, ts)
    assert len(marks(svg)) == 4
    assert ">Rep<" in svg and ">Dem<" in svg
