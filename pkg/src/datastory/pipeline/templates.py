"""Prompt templates with ``{name}`` placeholders and table rendering."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional

from ..model import DataTable, DataTableSet

TEMPLATE_NAMES = tuple(f"{stage}.{role}" for stage in ("reflection", "outline", "narration") for role in ("generate", "critique", "revise"))

_COMMON = {"tables", "guidelines", "revision_plan"}
ALLOWED_PLACEHOLDERS: dict[str, frozenset[str]] = {
    "reflection": frozenset(_COMMON | {"reflection"}),
    "outline": frozenset(_COMMON | {"intent", "reflection", "outline"}),
    "narration": frozenset(_COMMON | {"intent", "reflection", "outline", "narration"}),
}

PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")


class TemplateError(ValueError):
    pass


class UnboundPlaceholder(TemplateError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"unbound placeholder {name}")


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str

    def __post_init__(self) -> None:
        if self.name not in TEMPLATE_NAMES:
            raise TemplateError(f"unknown template name {self.name!r}")
        allowed = ALLOWED_PLACEHOLDERS[self.stage]
        bad = sorted(self.placeholders - allowed)
        if bad:
            raise TemplateError(f"{self.name}: placeholder(s) not allowed in this stage: {', '.join(bad)}")

    @property
    def stage(self) -> str:
        return self.name.split(".")[0]

    @property
    def placeholders(self) -> frozenset[str]:
        return frozenset(PLACEHOLDER.findall(self.body))


def render_prompt(template: PromptTemplate, bindings: Mapping[str, str]) -> str:
    # Single pass, so braces inside substituted values are never re-expanded.
    def sub(m: re.Match) -> str:
        name = m.group(1)
        if name not in bindings:
            raise UnboundPlaceholder(name)
        return bindings[name]

    return PLACEHOLDER.sub(sub, template.body)


def load_templates(directory: Optional[str | Path] = None) -> dict[str, PromptTemplate]:
    """Load the nine stage templates from ``directory`` or the bundled set."""
    out = {}
    for name in TEMPLATE_NAMES:
        if directory is None:
            body = resources.files("datastory").joinpath(f"prompts/{name}.txt").read_text("utf-8")
        else:
            body = (Path(directory) / f"{name}.txt").read_text("utf-8")
        out[name] = PromptTemplate(name, body.rstrip("\n"))
    return out


def load_system_prompt(role: str) -> str:
    return resources.files("datastory").joinpath(f"prompts/system.{role}.txt").read_text("utf-8").strip()


# --------------------------------------------------------------------------
# Tables as prompt text


def format_cell(cell) -> str:
    if cell is None:
        return ""
    if isinstance(cell, float):
        if cell.is_integer():
            return str(int(cell))
        return repr(cell)
    return str(cell)


def render_table(table: DataTable) -> str:
    """Title line, header row, then one aligned line per data row."""
    headers = [c.name + (f" ({c.unit})" if c.unit else "") for c in table.columns]
    body = [[format_cell(v) for v in row] for row in table.rows]
    widths = [max([len(h)] + [len(r[i]) for r in body]) for i, h in enumerate(headers)]

    def line(cells: list[str]) -> str:
        return " | ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    out = [f"Table {table.id}: {table.title}", line(headers)]
    out += [line(r) for r in body]
    return "\n".join(out)


def render_tables(tables: DataTableSet) -> str:
    return "\n\n".join(render_table(t) for t in tables.tables)
