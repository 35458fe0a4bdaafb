"""Pairwise LLM-judge protocol.

Two stories are shown under the neutral labels "Story A" and "Story B". The
presentation order is chosen by a seeded coin flip and recorded, and labels
are mapped back to the caller's A/B when the reply is parsed.
"""

from __future__ import annotations

import enum
import json
import random
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Literal, Mapping, Optional, Sequence

from ..gateway import CRITIQUE_TEMPERATURE, ChatRequest, Gateway, GatewayError, Message
from ..model import DataStory, DataTableSet
from ..pipeline.templates import render_tables

Outcome = Literal["A", "B", "tie"]
Order = Literal["AB", "BA"]


class Criterion(str, enum.Enum):
    INFORMATIVENESS = "informativeness"
    CLARITY_COHERENCE = "clarity_coherence"
    VISUALIZATION_QUALITY = "visualization_quality"
    NARRATIVE_QUALITY = "narrative_quality"
    FACTUAL_CORRECTNESS = "factual_correctness"

    @property
    def label(self) -> str:
        return _LABELS[self]


ALL_CRITERIA = tuple(Criterion)

_LABELS = {
    Criterion.INFORMATIVENESS: "INFORMATIVENESS",
    Criterion.CLARITY_COHERENCE: "CLARITY AND COHERENCE",
    Criterion.VISUALIZATION_QUALITY: "VISUALIZATION QUALITY",
    Criterion.NARRATIVE_QUALITY: "NARRATIVE QUALITY",
    Criterion.FACTUAL_CORRECTNESS: "FACTUAL CORRECTNESS",
}

_DESCRIPTIONS = {
    Criterion.INFORMATIVENESS: "how much substantive, useful information about the data the story conveys",
    Criterion.CLARITY_COHERENCE: "how logically the story is organized, how easy it is to follow, and how well its parts connect",
    Criterion.VISUALIZATION_QUALITY: "how well the specified charts support understanding of the data",
    Criterion.NARRATIVE_QUALITY: "how engaging the narrative is and how deep its insights go",
    Criterion.FACTUAL_CORRECTNESS: "whether the numbers and claims agree with the data tables",
}


class ParseFailure(ValueError):
    pass


class JudgeError(RuntimeError):
    def __init__(self, pair_id: str, cause: Exception) -> None:
        self.pair_id = pair_id
        self.cause = cause
        super().__init__(f"pair {pair_id}: {cause}")


@dataclass(frozen=True)
class Verdict:
    pair_id: str
    overall: Outcome
    criteria: Mapping[Criterion, Outcome] = field(default_factory=dict)
    order_shown: Order = "AB"
    raw: str = ""
    warnings: tuple[str, ...] = ()
    both_orders: bool = False

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "overall": self.overall,
            "criteria": {c.value: o for c, o in self.criteria.items()},
            "order_shown": self.order_shown,
            "both_orders": self.both_orders,
            "warnings": list(self.warnings),
            "raw": self.raw,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Verdict":
        return cls(
            pair_id=d["pair_id"],
            overall=_outcome(d["overall"]),
            criteria={Criterion(k): _outcome(v) for k, v in (d.get("criteria") or {}).items()},
            order_shown=d.get("order_shown", "AB"),
            raw=d.get("raw", ""),
            warnings=tuple(d.get("warnings", ())),
            both_orders=d.get("both_orders", False),
        )


def _outcome(v: str) -> Outcome:
    u = v.strip().upper()
    if u in ("A", "B"):
        return u  # type: ignore[return-value]
    if u in ("TIE", "TIED", "DRAW", "EQUAL"):
        return "tie"
    raise ValueError(f"not an outcome: {v!r}")


def _flip(o: Outcome) -> Outcome:
    return {"A": "B", "B": "A", "tie": "tie"}[o]  # type: ignore[return-value]


def mirror(v: Verdict) -> Verdict:
    """Swap the roles of A and B in every outcome."""
    return replace(v, overall=_flip(v.overall), criteria={c: _flip(o) for c, o in v.criteria.items()})


# --------------------------------------------------------------------------
# Prompt


def story_text(story: DataStory) -> str:
    """Paragraphs plus one-line chart summaries, in story order."""
    out = []
    for seg in story.segments:
        if seg.heading:
            out.append(f"## {seg.heading}")
        out.extend(seg.paragraphs)
        if seg.visspec is not None:
            v = seg.visspec
            parts = [f"{v.chart_type.value} chart", f"table {v.table_ref}", f"x = {v.x}", f"y = {', '.join(v.y)}"]
            if v.series:
                parts.append(f"series = {v.series}")
            title = f' "{v.title}"' if v.title else ""
            out.append(f"[Chart{title}: " + "; ".join(parts) + "]")
        elif seg.visspec_error is not None:
            out.append(f"[Chart specification that could not be interpreted: {seg.visspec_error.message}]")
        out.append("")
    return "\n".join(out).strip()


def verdict_lines(criteria: Sequence[Criterion]) -> list[str]:
    return [f"{c.label}: A|B|TIE" for c in criteria] + ["OVERALL: A|B|TIE"]


def build_judge_prompt(
    story_a: DataStory,
    story_b: DataStory,
    criteria: Sequence[Criterion] = ALL_CRITERIA,
    order_shown: Order = "AB",
    tables: Optional[DataTableSet] = None,
    model: str = "gemini-1.5-pro",
    tag: str = "judge",
) -> ChatRequest:
    first, second = (story_a, story_b) if order_shown == "AB" else (story_b, story_a)
    parts = ["You will compare two data stories written from the same data and decide which one is better.", ""]
    if tables is not None:
        parts += ["Data tables:", render_tables(tables), ""]
    parts += ["=== Story A ===", story_text(first), "", "=== Story B ===", story_text(second), ""]
    parts.append("Judge the stories on these criteria:")
    parts += [f"- {c.label}: {_DESCRIPTIONS[c]}" for c in criteria]
    parts += [
        "",
        "Ignore which story was shown first and ignore length on its own. After any reasoning, end your answer "
        "with exactly one line per criterion followed by an overall line, in this format:",
        *verdict_lines(criteria),
    ]
    return ChatRequest(
        model=model,
        messages=(
            Message("system", "You are an impartial expert judge of data journalism."),
            Message("user", "\n".join(parts)),
        ),
        temperature=CRITIQUE_TEMPERATURE,
        max_tokens=1024,
        tag=tag,
    )


# --------------------------------------------------------------------------
# Reply parsing


_LINE = re.compile(
    r"^[\s>*#\-•]*(?P<label>[A-Za-z][A-Za-z &_/\-]*?)[\s*]*[:=][\s*]*(?P<v>A|B|TIE|TIED|DRAW|EQUAL)\b",
    re.IGNORECASE,
)


def _key(label: str) -> str:
    return re.sub(r"[^a-z]", "", label.lower().replace("&", "and"))


_ALIASES: dict[str, Optional[Criterion]] = {"overall": None, "overallwinner": None, "winner": None, "final": None}
for _c in Criterion:
    _ALIASES[_key(_c.label)] = _c
    _ALIASES[_key(_c.value)] = _c
_ALIASES[_key("clarity & coherence")] = Criterion.CLARITY_COHERENCE
_ALIASES[_key("clarity")] = Criterion.CLARITY_COHERENCE
_ALIASES[_key("coherence")] = Criterion.CLARITY_COHERENCE
_ALIASES[_key("visualisation quality")] = Criterion.VISUALIZATION_QUALITY
_ALIASES[_key("factuality")] = Criterion.FACTUAL_CORRECTNESS


def parse_verdict(
    text: str,
    order_shown: Order = "AB",
    criteria: Sequence[Criterion] = ALL_CRITERIA,
    pair_id: str = "",
) -> Verdict:
    """Read ``LABEL: A|B|TIE`` lines; the last occurrence of a label wins.

    A requested criterion with no line becomes a tie, with a warning. If no
    criterion lines exist at all the verdict is overall-only. A missing
    OVERALL line is derived from the criterion majority.
    """
    found: dict[Optional[Criterion], Outcome] = {}
    for line in text.splitlines():
        m = _LINE.match(line)
        if not m:
            continue
        key = _key(m.group("label"))
        if key not in _ALIASES:
            continue
        found[_ALIASES[key]] = _outcome(m.group("v"))

    per = {c: o for c, o in found.items() if c is not None}
    if None not in found and not per:
        raise ParseFailure("no verdict lines in judge reply")

    un = (lambda o: o) if order_shown == "AB" else _flip
    warnings = []
    crit: dict[Criterion, Outcome] = {}
    if per:
        for c in criteria:
            if c in per:
                crit[c] = un(per[c])
            else:
                crit[c] = "tie"
                warnings.append(f"no verdict line for {c.value}; counted as tie")
    else:
        warnings.append("overall-only verdict")

    if None in found:
        overall = un(found[None])
    else:
        a = sum(1 for o in crit.values() if o == "A")
        b = sum(1 for o in crit.values() if o == "B")
        overall = "A" if a > b else "B" if b > a else "tie"
        warnings.append("no OVERALL line; derived from criterion majority")
    return Verdict(pair_id, overall, crit, order_shown, text, tuple(warnings))


# --------------------------------------------------------------------------
# Judging


def choose_order(seed: int, pair_id: str) -> Order:
    return "BA" if random.Random(f"{seed}:{pair_id}").random() < 0.5 else "AB"


def default_pair_id(story_a: DataStory, story_b: DataStory) -> str:
    return f"{story_a.request_id}~{story_b.request_id}"


def pairwise_judge(
    story_a: DataStory,
    story_b: DataStory,
    gateway: Gateway,
    seed: int = 0,
    pair_id: Optional[str] = None,
    tables: Optional[DataTableSet] = None,
    criteria: Sequence[Criterion] = ALL_CRITERIA,
    order_shown: Optional[Order] = None,
) -> Verdict:
    pid = pair_id or default_pair_id(story_a, story_b)
    order = order_shown or choose_order(seed, pid)
    request = build_judge_prompt(story_a, story_b, criteria, order, tables, model=gateway.model, tag=f"judge.{order}")
    try:
        reply = gateway.complete(request)
        return parse_verdict(reply.content, order, criteria, pid)
    except (GatewayError, ParseFailure) as e:
        raise JudgeError(pid, e) from e


def combine_orders(first: Verdict, second: Verdict) -> Verdict:
    """Keep outcomes both orders agree on; conflicts become ties."""

    def pick(a: Outcome, b: Outcome) -> Outcome:
        return a if a == b else "tie"

    crit = {c: pick(first.criteria[c], second.criteria[c]) for c in first.criteria if c in second.criteria}
    conflicts = [c.value for c in crit if first.criteria[c] != second.criteria[c]]
    if first.overall != second.overall:
        conflicts.append("overall")
    warnings = list(first.warnings) + list(second.warnings)
    if conflicts:
        warnings.append("order-dependent outcome, tied: " + ", ".join(conflicts))
    return Verdict(
        pair_id=first.pair_id,
        overall=pick(first.overall, second.overall),
        criteria=crit,
        order_shown=first.order_shown,
        raw=first.raw + "\n\n----\n\n" + second.raw,
        warnings=tuple(warnings),
        both_orders=True,
    )


def judge_both_orders(
    story_a: DataStory,
    story_b: DataStory,
    gateway: Gateway,
    pair_id: Optional[str] = None,
    tables: Optional[DataTableSet] = None,
    criteria: Sequence[Criterion] = ALL_CRITERIA,
) -> Verdict:
    pid = pair_id or default_pair_id(story_a, story_b)
    ab = pairwise_judge(story_a, story_b, gateway, pair_id=pid, tables=tables, criteria=criteria, order_shown="AB")
    ba = pairwise_judge(story_a, story_b, gateway, pair_id=pid, tables=tables, criteria=criteria, order_shown="BA")
    return combine_orders(ab, ba)


def dump_verdicts(verdicts: Iterable[Verdict]) -> str:
    return "".join(json.dumps(v.to_dict(), sort_keys=True, ensure_ascii=False) + "\n" for v in verdicts)


def load_verdicts(text: str) -> list[Verdict]:
    out = []
    for lineno, line in enumerate(text.split("\n"), 1):
        if line.strip():
            try:
                out.append(Verdict.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as e:
                raise ValueError(f"verdicts line {lineno}: {e}") from None
    return out
