"""Story exclusion criteria for corpus construction.

A story is excluded when its text is too short for its source (fewer than 500
tokens for Pew, fewer than 140 for Tableau and GapMinder) or when it has fewer
than 3 or more than 10 charts. The token check runs first. Both bounds keep
the boundary value: exactly 500 tokens, or exactly 3 or 10 charts, is kept.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .model import CorpusStory
from .text import tokenize

MIN_TOKENS = {"pew": 500, "tableau": 140, "gapminder": 140}
MIN_CHARTS = 3
MAX_CHARTS = 10


@dataclass(frozen=True)
class FilterDecision:
    kept: bool
    reason: Optional[str] = None
    detail: str = ""

    @classmethod
    def keep(cls) -> "FilterDecision":
        return cls(True)

    @classmethod
    def exclude(cls, reason: str, detail: str = "") -> "FilterDecision":
        return cls(False, reason, detail)


def apply_exclusion_criteria(story: CorpusStory, token_count: Optional[int] = None) -> FilterDecision:
    tokens = len(tokenize(story.text)) if token_count is None else token_count
    floor = MIN_TOKENS[story.source]
    if tokens < floor:
        return FilterDecision.exclude("token_length", f"{tokens} tokens < {floor} ({story.source})")
    charts = story.chart_count
    if charts < MIN_CHARTS or charts > MAX_CHARTS:
        return FilterDecision.exclude("chart_count", f"{charts} charts outside {MIN_CHARTS}..{MAX_CHARTS}")
    return FilterDecision.keep()
