"""Corpus story records and their JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Literal, Optional

from ..model import DataTable, table_from_dict, table_to_dict

Source = Literal["pew", "tableau", "gapminder"]
SOURCES = ("pew", "tableau", "gapminder")


class CorpusSchemaError(ValueError):
    def __init__(self, story_id: str, path: str, message: str) -> None:
        self.story_id = story_id
        self.path = path
        super().__init__(f"story {story_id!r}: {path}: {message}")


@dataclass(frozen=True)
class CorpusSegment:
    text: str
    chart_type: Optional[str] = None
    table: Optional[DataTable] = None


@dataclass(frozen=True)
class CorpusStory:
    id: str
    source: Source
    title: str
    segments: tuple[CorpusSegment, ...]
    topics: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "topics", tuple(self.topics))
        if self.source not in SOURCES:
            raise CorpusSchemaError(self.id, "source", f"unknown source {self.source!r}")
        if not self.segments:
            raise CorpusSchemaError(self.id, "segments", "story has no segments")

    @property
    def text(self) -> str:
        return "\n\n".join(s.text for s in self.segments)

    @property
    def chart_count(self) -> int:
        return sum(1 for s in self.segments if s.chart_type is not None)

    @property
    def table_count(self) -> int:
        return sum(1 for s in self.segments if s.table is not None)


def story_to_dict(story: CorpusStory) -> dict:
    segs = []
    for s in story.segments:
        d: dict = {"text": s.text}
        if s.chart_type is not None:
            d["chart_type"] = s.chart_type
        if s.table is not None:
            d["table"] = table_to_dict(s.table)
        segs.append(d)
    return {
        "id": story.id,
        "source": story.source,
        "title": story.title,
        "topics": list(story.topics),
        "segments": segs,
    }


def dump_story(story: CorpusStory) -> str:
    return json.dumps(story_to_dict(story), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def story_from_dict(d: dict, fallback_id: str = "?") -> CorpusStory:
    if not isinstance(d, dict):
        raise CorpusSchemaError(fallback_id, "", "story must be a JSON object")
    sid = d.get("id", fallback_id)

    def need(obj: dict, key: str, kind, path: str):
        if key not in obj:
            raise CorpusSchemaError(sid, path, "missing field")
        if not isinstance(obj[key], kind):
            raise CorpusSchemaError(sid, path, f"expected {getattr(kind, '__name__', kind)}")
        return obj[key]

    need(d, "id", str, "id")
    source = need(d, "source", str, "source")
    if source not in SOURCES:
        raise CorpusSchemaError(sid, "source", f"unknown source {source!r}; expected one of {', '.join(SOURCES)}")
    topics = d.get("topics", [])
    if not isinstance(topics, list) or not all(isinstance(t, str) for t in topics):
        raise CorpusSchemaError(sid, "topics", "expected a list of strings")
    segs = []
    for i, s in enumerate(need(d, "segments", list, "segments")):
        path = f"segments[{i}]"
        if not isinstance(s, dict):
            raise CorpusSchemaError(sid, path, "expected an object")
        text = need(s, "text", str, f"{path}.text")
        chart = s.get("chart_type")
        if chart is not None and not isinstance(chart, str):
            raise CorpusSchemaError(sid, f"{path}.chart_type", "expected a string")
        table = None
        if s.get("table") is not None:
            try:
                table = table_from_dict(s["table"], f"{path}.table")
            except ValueError as e:
                raise CorpusSchemaError(sid, f"{path}.table", str(e)) from None
        segs.append(CorpusSegment(text, chart, table))
    return CorpusStory(sid, source, d.get("title", ""), tuple(segs), tuple(topics))
