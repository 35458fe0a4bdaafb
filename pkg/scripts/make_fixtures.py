#!/usr/bin/env python3
"""Regenerate the committed test fixtures under tests/fixtures/.

Everything here is deterministic: rerunning the script reproduces the same
bytes, so a diff after running it means a prompt template, the digest
definition or a serializer changed.

    python3 scripts/make_fixtures.py [--out tests/fixtures]
"""

from __future__ import annotations

import argparse
import csv
import io
import re
from pathlib import Path

from datastory.canned import CannedResponder
from datastory.corpus.model import CorpusSegment, CorpusStory, dump_story
from datastory.evaluation import ABLATIONS, pairwise_judge, run_ablation
from datastory.evaluation.judge import ALL_CRITERIA, combine_orders, dump_verdicts
from datastory.gateway import ChatRequest, Gateway, Transcript, scripted
from datastory.model import (
    Column,
    DataStory,
    DataTable,
    DataTableSet,
    StoryRequest,
    StorySegment,
    serialize_story,
    serialize_tables,
)
from datastory.visspec import ChartType, VisSpec

INTENT = "Public confidence fell as economic views soured between 2019 and 2021"


def two_tables() -> DataTableSet:
    approval = DataTable(
        "approval",
        "Presidential job approval",
        (Column("Year"), Column("Approve", "number", "%"), Column("Disapprove", "number", "%")),
        (("2019", 45, 52), ("2020", 41, 57), ("2021", 38, 60)),
        "Survey of adults, annual averages",
    )
    economy = DataTable(
        "economy",
        "Rating of national economic conditions",
        (Column("Year"), Column("Good", "number", "%"), Column("Poor", "number", "%")),
        (("2019", 58, 41), ("2020", 35, 64), ("2021", 33.5, 65.5)),
    )
    return DataTableSet((approval, economy))


def record_pipeline(tables: DataTableSet, revise: bool, configs) -> Transcript:
    request = StoryRequest(tables, INTENT)
    out = Transcript()
    for name in configs:
        gw = Gateway(scripted(CannedResponder(tables, revise)))
        run_ablation(name, request, gw)
        for r in gw.transcript.records:
            out.append(r)
    return out


# --------------------------------------------------------------------------
# Judge fixtures


def pair_story(pid: str, system: str) -> DataStory:
    table = "approval"
    spec = VisSpec(ChartType.LINE, table, "Year", ("Approve",), title=f"Approval ({pid})")
    return DataStory(
        f"{pid}-{system}",
        (
            StorySegment((f"Pair {pid}, system {system}: approval moved from 45% to 38%.",), "Approval", spec),
            StorySegment((f"Pair {pid}, system {system}: disapproval rose to 60%.",), "Conclusion"),
        ),
    )


# Intended outcome for system A in each pair: 7 A, 2 B, 1 tie.
PAIR_OUTCOMES = {f"p{i:02d}": o for i, o in enumerate(["A"] * 7 + ["B"] * 2 + ["tie"], 1)}

_SHOWN = re.compile(r"=== Story A ===\s*\n(?:## .*\n)?Pair (p\d+), system ([AB])")


class PairJudge:
    """Answers so that, after un-swapping, the pair's intended outcome wins."""

    def __call__(self, request: ChatRequest) -> str:
        m = _SHOWN.search(request.prompt)
        assert m, "judge prompt layout changed"
        pid, first = m.group(1), m.group(2)
        want = PAIR_OUTCOMES[pid]
        label = "TIE" if want == "tie" else ("A" if want == first else "B")
        lines = [f"The stories differ mainly in emphasis ({pid})."]
        lines += [f"{c.label}: {label}" for c in ALL_CRITERIA]
        lines.append(f"OVERALL: {label}")
        return "\n".join(lines)


def first_shown_judge(request: ChatRequest) -> str:
    """Position-biased judge: always prefers whichever story is shown first."""
    return "\n".join([f"{c.label}: A" for c in ALL_CRITERIA] + ["OVERALL: A"])


# --------------------------------------------------------------------------
# Corpus boundary fixture


def _words(n: int, offset: int = 0) -> list[str]:
    return [f"w{(offset + i) % 97}" for i in range(n)]


def corpus_story(sid: str, source: str, tokens: int, charts: int) -> CorpusStory:
    n_seg = max(charts, 1)
    words = _words(tokens)
    per = [len(words[i::n_seg]) for i in range(n_seg)]
    segs, pos = [], 0
    for i, k in enumerate(per):
        segs.append(CorpusSegment(" ".join(words[pos:pos + k]), "bar" if i < charts else None))
        pos += k
    return CorpusStory(sid, source, f"Boundary story {sid}", tuple(segs), ("politics",))


BOUNDARY = [
    # id, source, tokens, charts, expected reason (None = kept)
    ("b1_pew_499", "pew", 499, 5, "token_length"),
    ("b2_pew_500", "pew", 500, 5, None),
    ("b3_tableau_139", "tableau", 139, 5, "token_length"),
    ("b4_tableau_140", "tableau", 140, 5, None),
    ("b5_charts_2", "tableau", 200, 2, "chart_count"),
    ("b6_charts_3", "tableau", 200, 3, None),
    ("b7_charts_10", "gapminder", 200, 10, None),
    ("b8_charts_11", "gapminder", 200, 11, "chart_count"),
]


# --------------------------------------------------------------------------
# Annotations


def annotations_20() -> str:
    agree = ["A"] * 9 + ["B"] * 5 + ["tie"] * 3  # 17 agreements
    disagree = [("A", "B"), ("A", "tie"), ("tie", "B")]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["item_id", "annotator", "label"])
    pairs = [(x, x) for x in agree] + disagree
    for i, (a, b) in enumerate(pairs, 1):
        w.writerow([f"s{i:02d}", "ann1", a])
        w.writerow([f"s{i:02d}", "ann2", b])
    return buf.getvalue()


# Three annotators, some missing labels; item u6 has a single label and is unpairable.
ALPHA_6 = {
    "u1": {"r1": "A", "r2": "A", "r3": "A"},
    "u2": {"r1": "A", "r2": "B", "r3": "A"},
    "u3": {"r1": "B", "r2": "B"},
    "u4": {"r1": "tie", "r2": "B", "r3": "tie"},
    "u5": {"r2": "tie", "r3": "A"},
    "u6": {"r1": "B"},
}


def alpha_6() -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["item_id", "annotator", "label"])
    for item, labels in ALPHA_6.items():
        for who, lab in labels.items():
            w.writerow([item, who, lab])
    return buf.getvalue()


# --------------------------------------------------------------------------


def write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "tests" / "fixtures"))
    out = Path(ap.parse_args().out)

    tables = two_tables()
    write(out / "tables_2.json", serialize_tables(tables))
    write(out / "intent.txt", INTENT + "\n")
    write(out / "transcript_revise.jsonl", record_pipeline(tables, True, list(ABLATIONS)).to_jsonl())
    write(out / "transcript_norevise.jsonl", record_pipeline(tables, False, ["full"]).to_jsonl())

    # A finished story for the render tests: the full pipeline's output.
    story, _ = run_ablation("full", StoryRequest(tables, INTENT), Gateway(scripted(CannedResponder(tables, True))))
    write(out / "story_full.json", serialize_story(story))

    judge_dir = out / "judge"
    manifest, verdicts = [], []
    judge_gw = Gateway(scripted(PairJudge()))
    for pid in PAIR_OUTCOMES:
        a, b = pair_story(pid, "A"), pair_story(pid, "B")
        write(judge_dir / f"{pid}_a.json", serialize_story(a))
        write(judge_dir / f"{pid}_b.json", serialize_story(b))
        manifest.append(f'{{"a": "{pid}_a.json", "b": "{pid}_b.json", "pair_id": "{pid}"}}\n')
        verdicts.append(pairwise_judge(a, b, judge_gw, seed=0, pair_id=pid))
    write(judge_dir / "manifest.jsonl", "".join(manifest))
    write(judge_dir / "transcript.jsonl", judge_gw.transcript.to_jsonl())
    write(out / "verdicts_10.jsonl", dump_verdicts(verdicts))

    flip_gw = Gateway(scripted(first_shown_judge))
    a, b = pair_story("p01", "A"), pair_story("p01", "B")
    ab = pairwise_judge(a, b, flip_gw, pair_id="flip", order_shown="AB")
    ba = pairwise_judge(a, b, flip_gw, pair_id="flip", order_shown="BA")
    assert combine_orders(ab, ba).overall == "tie"
    write(judge_dir / "transcript_flip.jsonl", flip_gw.transcript.to_jsonl())

    for sid, source, tokens, charts, _ in BOUNDARY:
        write(out / "corpus_boundary" / source / f"{sid}.json", dump_story(corpus_story(sid, source, tokens, charts)))

    write(out / "annotations_20.csv", annotations_20())
    write(out / "alpha_6.csv", alpha_6())


if __name__ == "__main__":
    main()
