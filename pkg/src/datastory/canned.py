"""A deterministic, table-driven stand-in for the generator and critic models.

Used to record replay transcripts, for dry runs without network access, and
in tests. Replies follow the formats the prompt templates ask for, built from
the actual table contents so downstream parsing and validation see realistic
input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .gateway import ChatRequest
from .model import DataTable, DataTableSet
from .pipeline.templates import format_cell


def _numeric(t: DataTable) -> list[str]:
    return [c.name for c in t.columns if c.kind == "number"]


def _label_col(t: DataTable) -> str:
    text = [c.name for c in t.columns if c.kind == "text"]
    return text[0] if text else t.columns[0].name


def _extremes(t: DataTable, col: str) -> Optional[tuple[str, str, str, str]]:
    """(first label, first value, last label, last value) over non-missing cells."""
    lab = _label_col(t)
    pairs = [(r[t.column_names.index(lab)], r[t.column_names.index(col)]) for r in t.rows]
    pairs = [(a, b) for a, b in pairs if b is not None]
    if not pairs:
        return None
    (l0, v0), (l1, v1) = pairs[0], pairs[-1]
    return format_cell(l0), format_cell(v0), format_cell(l1), format_cell(v1)


@dataclass
class CannedResponder:
    """``request -> text`` function; critiques demand revision iff ``revise``."""

    tables: DataTableSet
    revise: bool = True

    def __call__(self, request: ChatRequest) -> str:
        stage, _, role = request.tag.partition(".")
        if role == "critique":
            return self._critique(stage)
        revised = role == "revise"
        return {"reflection": self._reflection, "outline": self._outline, "narration": self._narration}[stage](revised)

    def _critique(self, stage: str) -> str:
        if not self.revise:
            return "REVISION: NO\nThe draft is consistent with the data tables."
        t = self.tables.tables[0]
        return (
            "REVISION: YES\n"
            f"- Quote the exact first and last values of table {t.id} instead of rounding them.\n"
            f"- Make the {stage} state the direction of change explicitly."
        )

    def _facts(self) -> list[str]:
        out = []
        for t in self.tables.tables:
            for col in _numeric(t)[:2]:
                ex = _extremes(t, col)
                if ex:
                    l0, v0, l1, v1 = ex
                    out.append(f"In {t.title}, {col} moves from {v0} ({l0}) to {v1} ({l1}).")
        return out or [f"{t.title} lists {len(t.rows)} rows." for t in self.tables.tables]

    def _reflection(self, revised: bool) -> str:
        bullets = self._facts()
        if revised:
            bullets.append("The direction of change is stated for every series above, using exact table values.")
        return "\n".join(f"- {b}" for b in bullets)

    def _outline(self, revised: bool) -> str:
        ts = self.tables.tables
        lines = ["Beginning:", f"- Introduce the question behind {ts[0].title}"]
        lines.append(f"  - Set the scene with the earliest values in {ts[0].id} (vis: bar)")
        lines.append("Middle:")
        for t in ts:
            cols = _numeric(t)
            lines.append(f"- Walk through how {cols[0] if cols else t.title} changes in {t.title} (vis: line)")
            for fact in self._facts():
                if t.title in fact:
                    lines.append(f"  - {fact}")
        lines += ["End:", "- Summarize what the tables show together"]
        if revised:
            lines.append("  - Restate each direction of change with its exact values")
        return "\n".join(lines)

    def _narration(self, revised: bool) -> str:
        ts = self.tables.tables
        facts = self._facts()
        parts = ["## Setting the scene", f"This story looks at {', '.join(t.title for t in ts)}."]
        for i, t in enumerate(ts):
            cols = _numeric(t)
            label = _label_col(t)
            parts.append(f"## {t.title}")
            parts.append(" ".join(f for f in facts if t.title in f) or f"{t.title} lists {len(t.rows)} rows.")
            if cols:
                kind = "line" if i % 2 == 0 else "bar"
                parts.append(
                    "```visspec\n"
                    f"title: {t.title}\n"
                    f"chart_type: {kind}\n"
                    f"table: {t.id}\n"
                    f"x: {label}\n"
                    f"y: {', '.join(cols[:2])}\n"
                    "```"
                )
        parts.append("## What it adds up to")
        parts.append("Taken together, the tables " + ("show consistent directions of change." if revised else "tell one story."))
        return "\n\n".join(parts)
