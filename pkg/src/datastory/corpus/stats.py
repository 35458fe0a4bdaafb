"""Per-story and corpus-level text and chart statistics.

Definitions, all over :func:`~.text.tokenize` tokens:

* vocab_token_ratio -- unique tokens / tokens.
* intra_trigram_rep_pct -- 100 * (1 - unique trigrams / trigrams).
* inter_trigram_rep_pct -- mean over stories s (with at least one trigram) of
  the share of s's trigram types that also occur in some other story.
* diverse_verb_pct -- share of a story's verb tokens whose lemma is not among
  the corpus's ``top_k`` most frequent verb lemmas.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field
from statistics import fmean
from typing import Mapping, Optional, Sequence

from ..visspec.spec import VisSpecError, normalize_chart_type
from .model import CorpusStory
from .text import VerbTagger, default_tagger, intra_trigram_repetition, paragraphs, tokenize, trigrams

TOP_VERBS = 10


class EmptyStory(ValueError):
    pass


@dataclass(frozen=True)
class StoryStats:
    char_len: int
    token_count: int
    paragraph_count: int
    vocab_token_ratio: float
    unique_verbs: int
    diverse_verb_pct: float
    intra_trigram_rep_pct: float


@dataclass(frozen=True)
class CorpusStats:
    story_count: int
    table_count: int
    chart_count: int
    char_len: float
    token_count: float
    paragraph_count: float
    vocab_token_ratio: float
    unique_verbs: float
    diverse_verb_pct: float
    intra_trigram_rep_pct: float
    inter_trigram_rep_pct: float
    chart_type_distribution: dict[str, float] = field(default_factory=dict)
    topic_distribution: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def top_verbs(verb_freq: Mapping[str, int], k: int = TOP_VERBS) -> set[str]:
    ranked = sorted(verb_freq.items(), key=lambda kv: (-kv[1], kv[0]))
    return {lemma for lemma, _ in ranked[:k]}


def corpus_verb_freq(stories: Sequence[CorpusStory], tagger: Optional[VerbTagger] = None) -> Counter:
    tagger = tagger or default_tagger()
    freq: Counter = Counter()
    for s in stories:
        freq.update(tagger.verb_lemmas(tokenize(s.text)))
    return freq


def story_stats(
    story: CorpusStory,
    corpus_verb_freq: Mapping[str, int],
    tagger: Optional[VerbTagger] = None,
    top_k: int = TOP_VERBS,
) -> StoryStats:
    tagger = tagger or default_tagger()
    text = story.text
    tokens = tokenize(text)
    if not tokens:
        raise EmptyStory(f"story {story.id!r} has no tokens")
    verbs = tagger.verb_lemmas(tokens)
    frequent = top_verbs(corpus_verb_freq, top_k)
    diverse = sum(1 for v in verbs if v not in frequent)
    return StoryStats(
        char_len=len(text),
        token_count=len(tokens),
        paragraph_count=len(paragraphs(text)),
        vocab_token_ratio=len(set(tokens)) / len(tokens),
        unique_verbs=len(set(verbs)),
        diverse_verb_pct=100.0 * diverse / len(verbs) if verbs else 0.0,
        intra_trigram_rep_pct=intra_trigram_repetition(tokens),
    )


def inter_trigram_repetition(token_lists: Sequence[Sequence[str]]) -> float:
    """Mean share of each story's trigram types found in at least one other story."""
    types = [set(trigrams(t)) for t in token_lists]
    doc_freq: Counter = Counter()
    for ts in types:
        doc_freq.update(ts)
    shares = [100.0 * sum(1 for g in ts if doc_freq[g] > 1) / len(ts) for ts in types if ts]
    return fmean(shares) if shares else 0.0


def _distribution(counts: Counter) -> dict[str, float]:
    total = sum(counts.values())
    if not total:
        return {}
    return {k: 100.0 * v / total for k, v in sorted(counts.items())}


def chart_family(raw: str) -> str:
    try:
        return normalize_chart_type(raw).value
    except VisSpecError:
        return "other"


def corpus_stats(
    stories: Sequence[CorpusStory],
    tagger: Optional[VerbTagger] = None,
    top_k: int = TOP_VERBS,
) -> CorpusStats:
    if not stories:
        raise ValueError("corpus is empty")
    tagger = tagger or default_tagger()
    freq = corpus_verb_freq(stories, tagger)
    per = [story_stats(s, freq, tagger, top_k) for s in stories]
    charts = Counter(chart_family(seg.chart_type) for s in stories for seg in s.segments if seg.chart_type is not None)
    topics = Counter(t for s in stories for t in s.topics)
    return CorpusStats(
        story_count=len(stories),
        table_count=sum(s.table_count for s in stories),
        chart_count=sum(s.chart_count for s in stories),
        char_len=fmean(p.char_len for p in per),
        token_count=fmean(p.token_count for p in per),
        paragraph_count=fmean(p.paragraph_count for p in per),
        vocab_token_ratio=fmean(p.vocab_token_ratio for p in per),
        unique_verbs=fmean(p.unique_verbs for p in per),
        diverse_verb_pct=fmean(p.diverse_verb_pct for p in per),
        intra_trigram_rep_pct=fmean(p.intra_trigram_rep_pct for p in per),
        inter_trigram_rep_pct=inter_trigram_repetition([tokenize(s.text) for s in stories]),
        chart_type_distribution=_distribution(charts),
        topic_distribution=_distribution(topics),
    )


_COLUMNS = [
    ("Split", None),
    ("#Stories", "story_count"),
    ("#Tables", "table_count"),
    ("#Charts", "chart_count"),
    ("Avg chars", "char_len"),
    ("Avg tokens", "token_count"),
    ("Avg paras", "paragraph_count"),
    ("Vocab:Token", "vocab_token_ratio"),
    ("Uniq verbs", "unique_verbs"),
    ("Diverse verbs %", "diverse_verb_pct"),
    ("Intra-tri rep %", "intra_trigram_rep_pct"),
    ("Inter-tri rep %", "inter_trigram_rep_pct"),
]


def format_stats_table(rows: Mapping[str, CorpusStats]) -> str:
    """Aligned text table, one row per split."""
    header = [c for c, _ in _COLUMNS]
    body = []
    for name, st in rows.items():
        cells = [name]
        for _, attr in _COLUMNS[1:]:
            v = getattr(st, attr)
            if isinstance(v, int):
                cells.append(str(v))
            elif attr == "vocab_token_ratio":
                cells.append(f"{v:.2f}")
            elif attr.endswith("_pct"):
                cells.append(f"{v:.2f}")
            else:
                cells.append(f"{v:.1f}")
        body.append(cells)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(row, widths)))
             for row in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
