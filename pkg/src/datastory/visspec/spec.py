"""Chart specification type and the fenced-block grammar it is written in.

A block interior is a sequence of ``key: value`` lines::

    title: Approval by year
    chart_type: bar
    table: t0
    x: Year
    y: Approval, Disapproval
    series: Party
    notes: free text

Keys are case-insensitive. Blank lines and lines starting with ``#`` are
ignored. ``y`` is a comma-separated list of column names.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional


class ChartType(str, enum.Enum):
    BAR = "bar"
    STACKED_BAR = "stacked_bar"
    GROUPED_BAR = "grouped_bar"
    LINE = "line"
    PIE = "pie"
    SCATTER = "scatter"
    BUBBLE = "bubble"
    AREA = "area"

    @property
    def is_bar_family(self) -> bool:
        return self in (ChartType.BAR, ChartType.STACKED_BAR, ChartType.GROUPED_BAR)


class VisSpecError(ValueError):
    """Base class for chart specification errors. ``code`` is a stable identifier."""

    code = "VisSpecError"


class AmbiguousChartType(VisSpecError):
    code = "AmbiguousChartType"

    def __init__(self, raw: str, listed: bool = False) -> None:
        self.raw = raw
        self.listed = listed
        why = "ambiguous chart type" if listed else "unknown chart type"
        super().__init__(f"{why} {raw!r}")


class MissingField(VisSpecError):
    code = "MissingField"

    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"missing required field {name!r}")


class MalformedLine(VisSpecError):
    code = "MalformedLine"


class UnknownField(VisSpecError):
    code = "UnknownField"


class ArityError(VisSpecError):
    code = "ArityError"


FIELDS = ("title", "chart_type", "table", "x", "y", "series", "notes")
REQUIRED = ("chart_type", "table", "x", "y")


def _norm(raw: str) -> str:
    return " ".join(re.sub(r"[-_]", " ", raw.strip().lower()).split())


@lru_cache(maxsize=None)
def _synonyms() -> dict[str, ChartType]:
    text = resources.files(__package__).joinpath("data/chart_types/synonyms.json").read_text("utf-8")
    return {_norm(k): ChartType(v) for k, v in json.loads(text).items()}


@lru_cache(maxsize=None)
def rejected_chart_types() -> frozenset[str]:
    text = resources.files(__package__).joinpath("data/chart_types/rejected.txt").read_text("utf-8")
    lines = (ln.strip() for ln in text.splitlines())
    return frozenset(_norm(ln) for ln in lines if ln and not ln.startswith("#"))


def normalize_chart_type(raw: str) -> ChartType:
    """Map a free-text chart type onto the closed :class:`ChartType` set.

    Raises :class:`AmbiguousChartType` for strings on the rejection list and
    for anything the synonym map does not know.
    """
    key = _norm(raw)
    if key in rejected_chart_types():
        raise AmbiguousChartType(raw, listed=True)
    try:
        return _synonyms()[key]
    except KeyError:
        raise AmbiguousChartType(raw) from None


@dataclass(frozen=True)
class VisSpec:
    chart_type: ChartType
    table_ref: str
    x: str
    y: tuple[str, ...]
    title: str = ""
    series: Optional[str] = None
    notes: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "chart_type", ChartType(self.chart_type))
        object.__setattr__(self, "y", tuple(self.y))
        if not self.y:
            raise ArityError("y must name at least one column")
        if self.chart_type is ChartType.PIE and len(self.y) != 1:
            raise ArityError(f"pie takes exactly one y column, got {len(self.y)}")
        if self.chart_type is ChartType.BUBBLE:
            if self.series is None:
                raise ArityError("bubble needs a size column in the series slot")
            if len(self.y) != 1:
                raise ArityError(f"bubble takes exactly one y column, got {len(self.y)}")
        used = [self.x, *self.y] + ([self.series] if self.series is not None else [])
        dupes = sorted({c for c in used if used.count(c) > 1})
        if dupes:
            raise ArityError(f"column used more than once: {', '.join(dupes)}")

    @property
    def columns(self) -> tuple[str, ...]:
        return (self.x, *self.y) + ((self.series,) if self.series is not None else ())

    def to_dict(self) -> dict:
        d = {
            "chart_type": self.chart_type.value,
            "table": self.table_ref,
            "title": self.title,
            "x": self.x,
            "y": list(self.y),
        }
        if self.series is not None:
            d["series"] = self.series
        if self.notes is not None:
            d["notes"] = self.notes
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VisSpec":
        return cls(
            chart_type=ChartType(d["chart_type"]),
            table_ref=d["table"],
            x=d["x"],
            y=tuple(d["y"]),
            title=d.get("title", ""),
            series=d.get("series"),
            notes=d.get("notes"),
        )


def parse_visspec(block: str) -> VisSpec:
    values: dict[str, str] = {}
    for lineno, line in enumerate(block.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition(":")
        if not sep:
            raise MalformedLine(f"line {lineno}: expected 'key: value', got {stripped!r}")
        key = key.strip().lower().replace(" ", "_")
        if key not in FIELDS:
            raise UnknownField(f"line {lineno}: unknown field {key!r}")
        if key in values:
            raise MalformedLine(f"line {lineno}: field {key!r} given twice")
        values[key] = value.strip()

    for name in REQUIRED:
        if not values.get(name):
            raise MissingField(name)

    y = tuple(c.strip() for c in values["y"].split(",") if c.strip())
    return VisSpec(
        chart_type=normalize_chart_type(values["chart_type"]),
        table_ref=values["table"],
        x=values["x"],
        y=y,
        title=values.get("title", ""),
        series=values.get("series") or None,
        notes=values.get("notes") or None,
    )


def serialize_visspec(spec: VisSpec) -> str:
    """Inverse of :func:`parse_visspec`; fixed key order, no fences."""
    lines = []
    if spec.title:
        lines.append(f"title: {spec.title}")
    lines += [
        f"chart_type: {spec.chart_type.value}",
        f"table: {spec.table_ref}",
        f"x: {spec.x}",
        f"y: {', '.join(spec.y)}",
    ]
    if spec.series is not None:
        lines.append(f"series: {spec.series}")
    if spec.notes is not None:
        lines.append(f"notes: {spec.notes}")
    return "\n".join(lines) + "\n"
