"""Domain types shared by the pipeline, renderer, corpus tools and evaluator.

All types are frozen dataclasses holding tuples, so they can be shared across
threads. Documents on disk are UTF-8 JSON carrying ``"schema": "dn/1"``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Literal, Optional, Union

from .visspec.spec import VisSpec

SCHEMA_VERSION = "dn/1"

Cell = Union[str, int, float, None]
ColumnKind = Literal["text", "number"]
Role = Literal["beginning", "middle", "end"]
STAGES = ("reflection", "outline", "narration")
ROLES = ("beginning", "middle", "end")


class SchemaError(ValueError):
    """A document does not match the dn/1 schema or is not valid JSON."""

    def __init__(self, message: str, path: str = "", line: Optional[int] = None, col: Optional[int] = None):
        self.path = path
        self.line = line
        self.col = col
        where = []
        if line is not None:
            where.append(f"line {line}, column {col}")
        if path:
            where.append(f"at {path}")
        super().__init__(f"{message} ({'; '.join(where)})" if where else message)


@dataclass(frozen=True)
class Issue:
    """One entry of a validation report."""

    severity: Literal["error", "warning"]
    code: str
    message: str
    path: str = ""

    def to_dict(self) -> dict:
        return {"severity": self.severity, "code": self.code, "message": self.message, "path": self.path}

    @classmethod
    def from_dict(cls, d: dict) -> "Issue":
        return cls(d["severity"], d["code"], d["message"], d.get("path", ""))


def has_errors(report: list[Issue] | tuple[Issue, ...]) -> bool:
    return any(i.severity == "error" for i in report)


# --------------------------------------------------------------------------
# Tables


@dataclass(frozen=True)
class Column:
    name: str
    kind: ColumnKind = "text"
    unit: Optional[str] = None


@dataclass(frozen=True)
class DataTable:
    id: str
    title: str
    columns: tuple[Column, ...]
    rows: tuple[tuple[Cell, ...], ...]
    source_note: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def values(self, name: str) -> list[Cell]:
        idx = self.column_names.index(name)
        return [row[idx] for row in self.rows]


@dataclass(frozen=True)
class DataTableSet:
    tables: tuple[DataTable, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tables", tuple(self.tables))

    def get(self, table_id: str) -> Optional[DataTable]:
        for t in self.tables:
            if t.id == table_id:
                return t
        return None

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.tables)


def validate_table_set(tables: DataTableSet) -> list[Issue]:
    """Report every broken table invariant. An empty list means valid."""
    report: list[Issue] = []

    def err(code: str, message: str, path: str) -> None:
        report.append(Issue("error", code, message, path))

    if not tables.tables:
        err("empty_table_set", "table set has no tables", "tables")
    seen_ids: set[str] = set()
    for t in tables.tables:
        base = f"tables[{t.id}]"
        if t.id in seen_ids:
            err("duplicate_table_id", f"table id {t.id!r} is not unique", base)
        seen_ids.add(t.id)
        names = [c.name for c in t.columns]
        for name in sorted({n for n in names if names.count(n) > 1}):
            err("duplicate_column", f"duplicate column {name!r} in table {t.id!r}", f"{base}.columns[{name}]")
        for c in t.columns:
            if c.kind not in ("text", "number"):
                err("bad_column_kind", f"column {c.name!r} has unknown kind {c.kind!r}", f"{base}.columns[{c.name}]")
        for r, row in enumerate(t.rows):
            if len(row) != len(t.columns):
                err(
                    "row_length_mismatch",
                    f"row length mismatch in table {t.id!r}: row {r} has {len(row)} cells, expected {len(t.columns)}",
                    f"{base}.rows[{r}]",
                )
                continue
            for c, cell in zip(t.columns, row):
                path = f"{base}.rows[{r}][{c.name}]"
                if cell is None:
                    continue
                if c.kind == "number":
                    if isinstance(cell, bool) or not isinstance(cell, (int, float)):
                        err("text_in_number_column", f"non-numeric cell {cell!r} in number column {c.name!r}", path)
                    elif not math.isfinite(cell):
                        err("non_finite_number", f"non-finite cell {cell!r} in column {c.name!r}", path)
                elif not isinstance(cell, str):
                    err("number_in_text_column", f"non-text cell {cell!r} in text column {c.name!r}", path)
    return report


# --------------------------------------------------------------------------
# Requests and staged artifacts


@dataclass(frozen=True)
class StoryRequest:
    tables: DataTableSet
    intent: str
    guidelines: str = ""

    def __post_init__(self) -> None:
        if not self.intent.strip():
            raise ValueError("intent must be non-empty")

    @property
    def request_id(self) -> str:
        doc = {"tables": tables_to_dict(self.tables), "intent": self.intent, "guidelines": self.guidelines}
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class Critique:
    needs_revision: bool
    plan: tuple[str, ...] = ()
    raw: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "plan", tuple(self.plan))
        if self.needs_revision and not self.plan:
            raise ValueError("a critique asking for revision needs a non-empty plan")

    def to_dict(self) -> dict:
        return {"needs_revision": self.needs_revision, "plan": list(self.plan), "raw": self.raw}

    @classmethod
    def from_dict(cls, d: dict) -> "Critique":
        return cls(d["needs_revision"], tuple(d["plan"]), d.get("raw", ""))


@dataclass(frozen=True)
class StageMeta:
    revised: bool = False
    critique: Optional[Critique] = None
    issues: tuple[Issue, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "issues", tuple(self.issues))

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"revised": self.revised, "critique": self.critique.to_dict() if self.critique else None}
        if self.issues:
            d["issues"] = [i.to_dict() for i in self.issues]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StageMeta":
        crit = d.get("critique")
        return cls(
            revised=d["revised"],
            critique=Critique.from_dict(crit) if crit else None,
            issues=tuple(Issue.from_dict(i) for i in d.get("issues", ())),
        )


@dataclass(frozen=True)
class Reflection:
    bullets: tuple[str, ...]
    text: str = ""
    stage_meta: StageMeta = field(default_factory=StageMeta)

    def __post_init__(self) -> None:
        object.__setattr__(self, "bullets", tuple(self.bullets))
        if any(not b.strip() for b in self.bullets):
            raise ValueError("reflection bullets must be non-empty text")


@dataclass(frozen=True)
class OutlinePoint:
    text: str
    subpoints: tuple[str, ...] = ()
    vis_hint: Optional[str] = None


@dataclass(frozen=True)
class OutlineSection:
    role: Role
    heading: str
    points: tuple[OutlinePoint, ...] = ()


@dataclass(frozen=True)
class Outline:
    sections: tuple[OutlineSection, ...]
    text: str = ""
    stage_meta: StageMeta = field(default_factory=StageMeta)


def outline_structure_issue(sections: tuple[OutlineSection, ...] | list[OutlineSection]) -> Optional[str]:
    """Return a reason string if sections do not run beginning -> middle -> end."""
    roles = [s.role for s in sections]
    missing = [r for r in ROLES if r not in roles]
    if missing:
        return f"missing {', '.join(missing)}"
    ranks = [ROLES.index(r) for r in roles]
    if ranks != sorted(ranks):
        return "sections out of order: " + " -> ".join(roles)
    return None


# --------------------------------------------------------------------------
# Stories


@dataclass(frozen=True)
class VisSpecFailure:
    """A fenced chart block that could not be parsed; kept instead of aborting."""

    code: str
    message: str
    raw: str

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "raw": self.raw}


@dataclass(frozen=True)
class StorySegment:
    paragraphs: tuple[str, ...] = ()
    heading: Optional[str] = None
    visspec: Optional[VisSpec] = None
    visspec_error: Optional[VisSpecFailure] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "paragraphs", tuple(self.paragraphs))
        if not self.paragraphs and self.visspec is None and self.visspec_error is None:
            raise ValueError("a segment needs at least one paragraph or a chart")


@dataclass(frozen=True)
class DataStory:
    request_id: str
    segments: tuple[StorySegment, ...]
    stage_meta: StageMeta = field(default_factory=StageMeta)

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def visspecs(self) -> list[VisSpec]:
        return [s.visspec for s in self.segments if s.visspec is not None]


def check_story(story: DataStory, tables: DataTableSet) -> list[Issue]:
    """Finalization check: at least one chart, every chart's table resolves."""
    report: list[Issue] = []
    if not story.visspecs:
        report.append(Issue("error", "no_visualizations", "story contains no visualizations", "segments"))
    for i, seg in enumerate(story.segments):
        if seg.visspec is not None and tables.get(seg.visspec.table_ref) is None:
            report.append(
                Issue(
                    "error",
                    "UnknownTable",
                    f"chart references unknown table {seg.visspec.table_ref!r}",
                    f"segments[{i}].visspec.table",
                )
            )
        if seg.visspec_error is not None:
            report.append(
                Issue("warning", seg.visspec_error.code, seg.visspec_error.message, f"segments[{i}].visspec")
            )
    return report


# --------------------------------------------------------------------------
# Pipeline trace


@dataclass(frozen=True)
class TraceCall:
    role: Literal["generate", "critique", "revise"]
    tag: str
    prompt: str
    response: str
    latency_ms: float = 0.0

    def to_dict(self, latency: bool = True) -> dict:
        d = {"role": self.role, "tag": self.tag, "prompt": self.prompt, "response": self.response}
        if latency:
            d["latency_ms"] = round(self.latency_ms, 3)
        return d


@dataclass(frozen=True)
class StageRecord:
    stage: Literal["reflection", "outline", "narration"]
    calls: tuple[TraceCall, ...] = ()
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class PipelineTrace:
    stages: tuple[StageRecord, ...] = ()
    config_name: str = "full"
    request_id: str = ""

    @property
    def calls(self) -> list[TraceCall]:
        return [c for s in self.stages for c in s.calls]

    @property
    def tags(self) -> list[str]:
        return [c.tag for c in self.calls]


def check_trace(trace: PipelineTrace) -> list[str]:
    """Return violated ordering rules (empty when the trace is well formed)."""
    problems = []
    order = [STAGES.index(s.stage) for s in trace.stages]
    if order != sorted(order) or len(set(order)) != len(order):
        problems.append("stages out of order or repeated")
    for s in trace.stages:
        roles = [c.role for c in s.calls]
        if not roles or roles[0] != "generate":
            problems.append(f"{s.stage}: first call must be generate")
        for a, b in zip(roles, roles[1:]):
            if (a, b) not in {("generate", "critique"), ("critique", "revise"), ("revise", "critique")}:
                problems.append(f"{s.stage}: {a} followed by {b}")
        for c in s.calls:
            if c.tag != f"{s.stage}.{c.role}":
                problems.append(f"{s.stage}: call tagged {c.tag!r}")
    return problems


# --------------------------------------------------------------------------
# Serialization


def _dump(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _load(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"malformed JSON: {e.msg}", line=e.lineno, col=e.colno) from None
    if not isinstance(doc, dict):
        raise SchemaError("document must be a JSON object")
    if doc.get("schema") != SCHEMA_VERSION:
        raise SchemaError(f"expected schema {SCHEMA_VERSION!r}, got {doc.get('schema')!r}", path="schema")
    return doc


def _req(d: Any, key: str, path: str, kind: type | tuple[type, ...]) -> Any:
    if not isinstance(d, dict):
        raise SchemaError("expected an object", path=path)
    if key not in d:
        raise SchemaError(f"missing field {key!r}", path=f"{path}.{key}" if path else key)
    value = d[key]
    if not isinstance(value, kind):
        raise SchemaError(f"field {key!r} has wrong type", path=f"{path}.{key}" if path else key)
    return value


def table_to_dict(t: DataTable) -> dict:
    cols = []
    for c in t.columns:
        cd: dict[str, Any] = {"name": c.name, "kind": c.kind}
        if c.unit is not None:
            cd["unit"] = c.unit
        cols.append(cd)
    d: dict[str, Any] = {"id": t.id, "title": t.title, "columns": cols, "rows": [list(r) for r in t.rows]}
    if t.source_note is not None:
        d["source_note"] = t.source_note
    return d


def table_from_dict(d: dict, path: str = "table") -> DataTable:
    cols = []
    for i, c in enumerate(_req(d, "columns", path, list)):
        cpath = f"{path}.columns[{i}]"
        cols.append(Column(_req(c, "name", cpath, str), c.get("kind", "text"), c.get("unit")))
    rows = _req(d, "rows", path, list)
    for i, r in enumerate(rows):
        if not isinstance(r, list):
            raise SchemaError("row must be a list", path=f"{path}.rows[{i}]")
    return DataTable(
        id=_req(d, "id", path, str),
        title=_req(d, "title", path, str),
        columns=tuple(cols),
        rows=tuple(tuple(r) for r in rows),
        source_note=d.get("source_note"),
    )


def tables_to_dict(ts: DataTableSet) -> list[dict]:
    return [table_to_dict(t) for t in ts.tables]


def serialize_tables(ts: DataTableSet) -> str:
    return _dump({"schema": SCHEMA_VERSION, "kind": "tables", "tables": tables_to_dict(ts)})


def deserialize_tables(text: str) -> DataTableSet:
    doc = _load(text)
    tables = _req(doc, "tables", "", list)
    return DataTableSet(tuple(table_from_dict(t, f"tables[{i}]") for i, t in enumerate(tables)))


def segment_to_dict(seg: StorySegment) -> dict:
    d: dict[str, Any] = {"heading": seg.heading, "paragraphs": list(seg.paragraphs)}
    d["visspec"] = seg.visspec.to_dict() if seg.visspec is not None else None
    if seg.visspec_error is not None:
        d["visspec_error"] = seg.visspec_error.to_dict()
    return d


def story_to_dict(story: DataStory) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "kind": "story",
        "request_id": story.request_id,
        "segments": [segment_to_dict(s) for s in story.segments],
        "stage_meta": story.stage_meta.to_dict(),
    }


def serialize_story(story: DataStory) -> str:
    return _dump(story_to_dict(story))


def story_from_dict(doc: dict) -> DataStory:
    segs = []
    for i, s in enumerate(_req(doc, "segments", "", list)):
        path = f"segments[{i}]"
        paragraphs = _req(s, "paragraphs", path, list)
        vs = s.get("visspec")
        err = s.get("visspec_error")
        try:
            spec = VisSpec.from_dict(vs) if vs else None
            segs.append(
                StorySegment(
                    paragraphs=tuple(paragraphs),
                    heading=s.get("heading"),
                    visspec=spec,
                    visspec_error=VisSpecFailure(err["code"], err["message"], err["raw"]) if err else None,
                )
            )
        except (KeyError, ValueError, TypeError) as e:
            raise SchemaError(f"invalid segment: {e}", path=path) from None
    meta = doc.get("stage_meta") or {"revised": False}
    try:
        stage_meta = StageMeta.from_dict(meta)
    except (KeyError, ValueError, TypeError) as e:
        raise SchemaError(f"invalid stage_meta: {e}", path="stage_meta") from None
    return DataStory(request_id=_req(doc, "request_id", "", str), segments=tuple(segs), stage_meta=stage_meta)


def deserialize_story(text: str) -> DataStory:
    return story_from_dict(_load(text))


def trace_to_dict(trace: PipelineTrace, latency: bool = True) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "kind": "trace",
        "config_name": trace.config_name,
        "request_id": trace.request_id,
        "stages": [
            {
                "stage": s.stage,
                "calls": [c.to_dict(latency) for c in s.calls],
                "warnings": list(s.warnings),
            }
            for s in trace.stages
        ],
    }


def serialize_trace(trace: PipelineTrace, latency: bool = True) -> str:
    return _dump(trace_to_dict(trace, latency))


def deserialize_trace(text: str) -> PipelineTrace:
    doc = _load(text)
    stages = []
    for i, s in enumerate(_req(doc, "stages", "", list)):
        path = f"stages[{i}]"
        calls = tuple(
            TraceCall(
                role=_req(c, "role", f"{path}.calls[{j}]", str),
                tag=_req(c, "tag", f"{path}.calls[{j}]", str),
                prompt=_req(c, "prompt", f"{path}.calls[{j}]", str),
                response=_req(c, "response", f"{path}.calls[{j}]", str),
                latency_ms=c.get("latency_ms", 0.0),
            )
            for j, c in enumerate(_req(s, "calls", path, list))
        )
        stages.append(StageRecord(_req(s, "stage", path, str), calls, tuple(s.get("warnings", ()))))
    return PipelineTrace(tuple(stages), doc.get("config_name", "full"), doc.get("request_id", ""))
