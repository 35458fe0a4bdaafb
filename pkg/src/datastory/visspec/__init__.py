"""Chart specifications: grammar, validation and SVG rendering.

Only the grammar is re-exported here; import :mod:`.validate` and
:mod:`.render` directly (they depend on the table model).
"""

from .spec import (
    AmbiguousChartType,
    ArityError,
    ChartType,
    MalformedLine,
    MissingField,
    UnknownField,
    VisSpec,
    VisSpecError,
    normalize_chart_type,
    parse_visspec,
    rejected_chart_types,
    serialize_visspec,
)

__all__ = [
    "AmbiguousChartType",
    "ArityError",
    "ChartType",
    "MalformedLine",
    "MissingField",
    "UnknownField",
    "VisSpec",
    "VisSpecError",
    "normalize_chart_type",
    "parse_visspec",
    "rejected_chart_types",
    "serialize_visspec",
]
