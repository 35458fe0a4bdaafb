"""Reading corpora from disk and a thin CSV-to-table adapter."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional

from ..model import Cell, Column, DataTable
from .model import CorpusSchemaError, CorpusStory, story_from_dict


def load_story(path: str | Path) -> CorpusStory:
    path = Path(path)
    try:
        doc = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise CorpusSchemaError(path.stem, f"line {e.lineno} column {e.colno}", f"malformed JSON: {e.msg}") from None
    return story_from_dict(doc, fallback_id=path.stem)


def load_corpus(path: str | Path) -> list[CorpusStory]:
    """Load every ``*.json`` story below ``path`` (``<source>/<id>.json`` or flat).

    Stories come back sorted by (id, source).
    """
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus directory {root} does not exist")
    stories = [load_story(p) for p in sorted(root.rglob("*.json")) if not p.name.startswith(".")]
    return sorted(stories, key=lambda s: (s.id, s.source))


def _parse_number(raw: str) -> Optional[float]:
    try:
        v = float(raw.replace(",", ""))
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _as_cell(raw: str) -> Cell:
    v = _parse_number(raw)
    assert v is not None
    stripped = raw.replace(",", "").strip()
    if v.is_integer() and all(ch.isdigit() or ch in "+-" for ch in stripped):
        return int(v)
    return v


def import_csv_table(path: str | Path, title: str, table_id: Optional[str] = None) -> DataTable:
    """Read a CSV with a header row into a :class:`DataTable`.

    A column is numeric iff every non-empty cell parses as a finite number.
    Columns whose cells all end in ``%`` are parsed as numbers with unit ``%``.
    Empty cells become ``None``.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    header, data = [h.strip() for h in rows[0]], [r for r in rows[1:] if any(c.strip() for c in r)]
    for i, r in enumerate(data, 2):
        if len(r) != len(header):
            raise ValueError(f"{path}: line {i} has {len(r)} cells, header has {len(header)}")

    columns = []
    out_cols: list[list[Cell]] = []
    for j, name in enumerate(header):
        raw = [r[j].strip() for r in data]
        filled = [c for c in raw if c]
        unit = None
        if filled and all(c.endswith("%") for c in filled):
            raw = [c[:-1].strip() for c in raw]
            filled = [c for c in raw if c]
            unit = "%"
        if filled and all(_parse_number(c) is not None for c in filled):
            columns.append(Column(name, "number", unit))
            out_cols.append([_as_cell(c) if c else None for c in raw])
        else:
            columns.append(Column(name, "text"))
            out_cols.append([r[j].strip() or None for r in data])
    table_rows = tuple(tuple(col[i] for col in out_cols) for i in range(len(data)))
    return DataTable(table_id or path.stem, title, tuple(columns), table_rows)
