"""Turn model replies into structured stage artifacts.

The parsers are lenient about markup (markdown emphasis, bullet glyphs,
numbering) but strict about structure: a reflection needs bullets, an outline
needs beginning/middle/end parts, chart blocks must parse as visspecs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from ..model import (
    Critique,
    OutlinePoint,
    OutlineSection,
    StorySegment,
    VisSpecFailure,
)
from ..visspec.spec import VisSpecError, parse_visspec

BULLET = re.compile(r"^(?P<indent>[ \t]*)(?:[-*•‣▪◦–]|\d+[.)])[ \t]+(?P<text>\S.*?)\s*$")
VERDICT = re.compile(r"REVISION\s*:\s*\**\s*(YES|NO)\b", re.IGNORECASE)
ROLE_HEADER = re.compile(
    r"^\s*(?:#{1,6}\s*)?(?:\*\*|__)?\s*(?:\d+[.)]\s*)?(?:part\s+\w+\s*[:.\-–—]\s*)?"
    r"(?P<role>beginning|middle|end)(?:\s+\d+)?\s*(?:\*\*|__)?\s*"
    r"(?:$|[:.\-–—(]\s*(?P<rest>.*?))\s*(?:\*\*|__)?\s*$",
    re.IGNORECASE,
)
VIS_HINT = re.compile(r"\(\s*(?:vis|visual|visualization|visualisation|chart)\s*:\s*([^)]*?)\s*\)", re.IGNORECASE)
FENCE_OPEN = re.compile(r"^\s*```+\s*visspec\s*$", re.IGNORECASE)
FENCE_ANY = re.compile(r"^\s*```")


def _clean(text: str) -> str:
    text = text.strip()
    if len(text) >= 4 and text[:2] in ("**", "__") and text[-2:] == text[:2]:
        text = text[2:-2].strip()
    return text


def parse_bullets(text: str) -> list[str]:
    """Bullet items in order. Markers: ``-``, ``*``, ``•`` and ``1.``/``1)`` numbering."""
    out = []
    for line in text.splitlines():
        m = BULLET.match(line)
        if m:
            item = _clean(m.group("text"))
            if item:
                out.append(item)
    return out


def parse_critique(text: str) -> Critique:
    """Read a ``REVISION: YES|NO`` verdict and the revision plan bullets after it.

    Without a verdict line, revision is inferred iff any bullet is present.
    """
    m = VERDICT.search(text)
    if m is None:
        plan = parse_bullets(text)
        return Critique(needs_revision=bool(plan), plan=tuple(plan), raw=text)

    after = text[m.end():]
    plan = parse_bullets(after)
    if m.group(1).upper() == "NO":
        return Critique(needs_revision=False, plan=tuple(plan), raw=text)
    if not plan:
        # A bare YES still needs a plan; keep whatever prose followed.
        lines = [ln.strip() for ln in after.splitlines() if ln.strip()]
        plan = lines or ["Revise the draft against the data tables."]
    return Critique(needs_revision=True, plan=tuple(plan), raw=text)


def critique_has_verdict(text: str) -> bool:
    return VERDICT.search(text) is not None


def format_plan(critique: Critique) -> str:
    return "\n".join(f"- {p}" for p in critique.plan)


class OutlineParseError(ValueError):
    pass


def _header(line: str) -> Optional[tuple[str, str]]:
    if BULLET.match(line) and not re.match(r"^\s*\d+[.)]", line):
        return None
    m = ROLE_HEADER.match(line)
    if not m:
        return None
    return m.group("role").lower(), _clean((m.group("rest") or "").rstrip("*_ :"))


def parse_outline(text: str) -> list[OutlineSection]:
    """Split an outline into role sections with points, sub-points and vis hints.

    Points are the least-indented bullets under a header; deeper bullets are
    sub-points of the point above them. Text before the first header is ignored.
    """
    sections: list[OutlineSection] = []
    role: Optional[str] = None
    heading = ""
    points: list[OutlinePoint] = []
    point_indent: Optional[int] = None

    def flush() -> None:
        if role is not None:
            sections.append(OutlineSection(role, heading, tuple(points)))  # type: ignore[arg-type]

    for line in text.splitlines():
        hdr = _header(line)
        if hdr is not None:
            flush()
            role, heading = hdr
            points, point_indent = [], None
            continue
        if role is None:
            continue
        m = BULLET.match(line)
        if not m:
            continue
        indent = len(m.group("indent").expandtabs(4))
        item = _clean(m.group("text"))
        if point_indent is None or indent <= point_indent or not points:
            point_indent = indent if point_indent is None else min(point_indent, indent)
            hint = VIS_HINT.search(item)
            vis = None
            if hint:
                vis = hint.group(1) or None
                item = (item[: hint.start()] + item[hint.end():]).strip()
            points.append(OutlinePoint(item, (), vis))
        else:
            last = points[-1]
            points[-1] = OutlinePoint(last.text, last.subpoints + (item,), last.vis_hint)
    flush()
    return sections


@dataclass
class _Draft:
    heading: Optional[str]
    paragraphs: list[str]
    spec: object = None
    error: Optional[VisSpecFailure] = None

    @property
    def has_chart(self) -> bool:
        return self.spec is not None or self.error is not None

    @property
    def empty(self) -> bool:
        return not self.paragraphs and not self.has_chart

    def build(self) -> StorySegment:
        return StorySegment(tuple(self.paragraphs), self.heading, self.spec, self.error)  # type: ignore[arg-type]


def parse_narration(text: str) -> list[StorySegment]:
    """Split a narration into segments.

    Sections start at lines beginning with ``##``. A section holding several
    ```` ```visspec ```` blocks is split so each segment carries one chart;
    the continuation segments keep the section heading.
    """
    segments: list[StorySegment] = []
    lines = text.splitlines()
    cur = _Draft(None, [])
    para: list[str] = []

    def end_para() -> None:
        if para:
            joined = " ".join(p.strip() for p in para).strip()
            if joined:
                cur.paragraphs.append(joined)
            para.clear()

    def end_segment(next_heading: Optional[str]) -> None:
        nonlocal cur
        end_para()
        if not cur.empty:
            segments.append(cur.build())
        cur = _Draft(next_heading, [])

    i = 0
    while i < len(lines):
        line = lines[i]
        if line.startswith("##"):
            end_segment(_clean(line.lstrip("#")) or None)
        elif FENCE_OPEN.match(line):
            end_para()
            body = []
            i += 1
            while i < len(lines) and not FENCE_ANY.match(lines[i]):
                body.append(lines[i])
                i += 1
            raw = "\n".join(body)
            if cur.has_chart:
                end_segment(cur.heading)
            try:
                cur.spec = parse_visspec(raw)
            except VisSpecError as e:
                cur.error = VisSpecFailure(e.code, str(e), raw)
        elif FENCE_ANY.match(line):
            # Some other fenced block: keep its text as a paragraph.
            end_para()
            i += 1
            while i < len(lines) and not FENCE_ANY.match(lines[i]):
                para.append(lines[i])
                i += 1
            end_para()
        elif not line.strip():
            end_para()
        else:
            para.append(line)
        i += 1
    end_segment(None)
    return segments
