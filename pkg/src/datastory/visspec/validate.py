"""Check a chart spec against the tables it points at."""

from __future__ import annotations

import difflib

from ..model import DataTable, DataTableSet, Issue
from .spec import ChartType, VisSpec

MAX_PIE_SLICES = 12
MAX_SERIES = 8


def _hint(name: str, options) -> str:
    close = difflib.get_close_matches(name, list(options), n=1, cutoff=0.6)
    return f"; did you mean {close[0]!r}?" if close else ""


def numbers(table: DataTable, column: str) -> list[float]:
    return [v for v in table.values(column) if isinstance(v, (int, float)) and not isinstance(v, bool)]


def series_count(spec: VisSpec, table: DataTable) -> int:
    if spec.series is not None and spec.chart_type is not ChartType.BUBBLE:
        return len(dict.fromkeys(table.values(spec.series)))
    return len(spec.y)


def validate_visspec(spec: VisSpec, tables: DataTableSet) -> list[Issue]:
    """Report-style check; an empty list means the spec can be rendered."""
    report: list[Issue] = []

    def error(code: str, message: str, path: str) -> None:
        report.append(Issue("error", code, message, path))

    table = tables.get(spec.table_ref)
    if table is None:
        error("UnknownTable", f"unknown table {spec.table_ref!r}{_hint(spec.table_ref, tables.ids)}", "table")
        return report

    names = table.column_names
    fields = [("x", spec.x)] + [(f"y[{i}]", c) for i, c in enumerate(spec.y)]
    if spec.series is not None:
        fields.append(("series", spec.series))
    unresolved = False
    for path, col in fields:
        if col not in names:
            error("UnknownColumn", f"unknown column {col!r} in table {table.id!r}{_hint(col, names)}", path)
            unresolved = True
    if unresolved:
        return report

    def require_numeric(path: str, col: str) -> bool:
        if table.column(col).kind != "number":
            error("NonNumericColumn", f"column {col!r} is not numeric", path)
            return False
        return True

    numeric_y = [c for i, c in enumerate(spec.y) if require_numeric(f"y[{i}]", c)]
    if spec.chart_type in (ChartType.SCATTER, ChartType.BUBBLE):
        require_numeric("x", spec.x)
    if spec.chart_type is ChartType.BUBBLE and require_numeric("series", spec.series):
        if any(v < 0 for v in numbers(table, spec.series)):
            error("NegativeBubbleSize", f"bubble size column {spec.series!r} has negative values", "series")

    if spec.chart_type is ChartType.PIE:
        for col in numeric_y:
            if any(v < 0 for v in numbers(table, col)):
                error("NegativePieValue", f"pie column {col!r} has negative values", "y[0]")
        if len(table.rows) > MAX_PIE_SLICES:
            report.append(Issue("warning", "TooManySlices", f"pie has {len(table.rows)} slices (> {MAX_PIE_SLICES})", "x"))
    if spec.chart_type is ChartType.STACKED_BAR:
        for i, col in enumerate(spec.y):
            if col in numeric_y and any(v < 0 for v in numbers(table, col)):
                error("NegativeStackedValue", f"stacked column {col!r} has negative values", f"y[{i}]")

    n_series = series_count(spec, table)
    if n_series > MAX_SERIES:
        report.append(Issue("warning", "TooManySeries", f"{n_series} series (> {MAX_SERIES})", "series" if spec.series else "y"))
    return report
