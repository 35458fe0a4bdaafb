"""Win-rate aggregation over pairwise verdicts."""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass
from statistics import fmean
from typing import Mapping, Sequence

from .judge import ALL_CRITERIA, Criterion, Verdict

OVERALL = "overall"
AVERAGE = "average"


@dataclass(frozen=True)
class WinRateRow:
    a_win_pct: float
    b_win_pct: float
    tie_pct: float
    n: int

    @property
    def total(self) -> float:
        return self.a_win_pct + self.b_win_pct + self.tie_pct


@dataclass(frozen=True)
class WinRateTable:
    """Rows keyed by criterion value, ``"overall"`` and ``"average"``."""

    rows: Mapping[str, WinRateRow]

    def __getitem__(self, key: str | Criterion) -> WinRateRow:
        return self.rows[key.value if isinstance(key, Criterion) else key]

    def to_dict(self) -> dict:
        return {k: asdict(r) for k, r in self.rows.items()}


def _row(outcomes: Sequence[str]) -> WinRateRow:
    c = Counter(outcomes)
    n = len(outcomes)
    return WinRateRow(100.0 * c["A"] / n, 100.0 * c["B"] / n, 100.0 * c["tie"] / n, n)


def win_rates(verdicts: Sequence[Verdict]) -> WinRateTable:
    """Percentages of A wins, B wins and ties per criterion and overall.

    The average row is the unweighted mean of the criterion rows that have at
    least one verdict; it is omitted when no verdict carries criteria.
    """
    if not verdicts:
        raise ValueError("no verdicts to aggregate")
    rows: dict[str, WinRateRow] = {}
    for c in ALL_CRITERIA:
        got = [v.criteria[c] for v in verdicts if c in v.criteria]
        if got:
            rows[c.value] = _row(got)
    crit_rows = list(rows.values())
    rows[OVERALL] = _row([v.overall for v in verdicts])
    if crit_rows:
        rows[AVERAGE] = WinRateRow(
            fmean(r.a_win_pct for r in crit_rows),
            fmean(r.b_win_pct for r in crit_rows),
            fmean(r.tie_pct for r in crit_rows),
            sum(r.n for r in crit_rows),
        )
    return WinRateTable(rows)


_DISPLAY = {
    Criterion.INFORMATIVENESS.value: "Informativeness",
    Criterion.CLARITY_COHERENCE.value: "Clarity & Coherence",
    Criterion.VISUALIZATION_QUALITY.value: "Visualization Quality",
    Criterion.NARRATIVE_QUALITY.value: "Narrative Quality",
    Criterion.FACTUAL_CORRECTNESS.value: "Factual Correctness",
    OVERALL: "Overall",
    AVERAGE: "Average",
}


def format_win_rate_table(tables: Mapping[str, WinRateTable]) -> str:
    """Aligned text: one column per test set, Win/Loss/Tie rows per criterion.

    Win and Loss are from the point of view of system A.
    """
    sets = list(tables)
    keys: list[str] = []
    for t in tables.values():
        keys += [k for k in t.rows if k not in keys]
    order = [k for k in _DISPLAY if k in keys]

    header = ["Criterion", "Outcome", *sets]
    body = []
    for k in order:
        for i, (label, attr) in enumerate((("Win", "a_win_pct"), ("Loss", "b_win_pct"), ("Tie", "tie_pct"))):
            cells = [_DISPLAY[k] if i == 0 else "", label]
            for s in sets:
                row = tables[s].rows.get(k)
                cells.append(f"{getattr(row, attr):.2f}" if row else "-")
            body.append(cells)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) if j < 2 else c.rjust(w) for j, (c, w) in enumerate(zip(r, widths)))
             for r in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(line.rstrip() for line in lines) + "\n"
