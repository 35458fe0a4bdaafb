"""Annotator merging, raw agreement and nominal Krippendorff's alpha."""

from __future__ import annotations

import csv
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import permutations
from pathlib import Path
from typing import Mapping, Optional

logger = logging.getLogger(__name__)

LABELS = ("A", "B", "tie")


def normalize_label(raw: str) -> str:
    u = raw.strip().upper()
    if u in ("A", "B"):
        return u
    if u in ("TIE", "TIED", "DRAW", "EQUAL"):
        return "tie"
    raise ValueError(f"unknown label {raw!r}; expected A, B or tie")


@dataclass(frozen=True)
class AnnotationItem:
    item_id: str
    labels: Mapping[str, str]


@dataclass(frozen=True)
class AnnotationSet:
    items: tuple[AnnotationItem, ...]

    @property
    def annotators(self) -> list[str]:
        return sorted({a for it in self.items for a in it.labels})


def load_annotations_csv(path: str | Path) -> AnnotationSet:
    """Read ``item_id,annotator,label`` rows (header required)."""
    by_item: dict[str, dict[str, str]] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"item_id", "annotator", "label"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, 2):
            item, who = row["item_id"].strip(), row["annotator"].strip()
            try:
                label = normalize_label(row["label"])
            except ValueError as e:
                raise ValueError(f"{path}: line {lineno}: {e}") from None
            labels = by_item.setdefault(item, {})
            if who in labels:
                raise ValueError(f"{path}: line {lineno}: annotator {who!r} labelled item {item!r} twice")
            labels[who] = label
    return AnnotationSet(tuple(AnnotationItem(i, labels) for i, labels in by_item.items()))


@dataclass(frozen=True)
class MergeResult:
    consensus: dict[str, str]
    raw_agreement_pct: float
    disagreements: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return len(self.consensus)


def merge_annotators(annotations: AnnotationSet) -> MergeResult:
    """Two labels per item: the shared label when they agree, otherwise a tie."""
    if not annotations.items:
        raise ValueError("no annotation items")
    consensus: dict[str, str] = {}
    disagree = []
    for it in annotations.items:
        if len(it.labels) != 2:
            raise ValueError(f"item {it.item_id!r} has {len(it.labels)} labels; exactly 2 are required")
        a, b = it.labels.values()
        if a == b:
            consensus[it.item_id] = a
        else:
            consensus[it.item_id] = "tie"
            disagree.append(it.item_id)
    n = len(annotations.items)
    return MergeResult(consensus, 100.0 * (n - len(disagree)) / n, tuple(disagree))


@dataclass(frozen=True)
class AlphaResult:
    alpha: float
    pairable: int
    warnings: tuple[str, ...] = field(default=())

    def __float__(self) -> float:
        return self.alpha


def coincidence_matrix(annotations: AnnotationSet) -> dict[tuple[str, str], float]:
    """o[c, k] summed over units with at least two labels, each pair weighted 1/(m-1)."""
    o: dict[tuple[str, str], float] = defaultdict(float)
    for it in annotations.items:
        vals = list(it.labels.values())
        m = len(vals)
        if m < 2:
            continue
        for c, k in permutations(vals, 2):
            o[c, k] += 1.0 / (m - 1)
    return dict(o)


def krippendorff_alpha_detail(annotations: AnnotationSet) -> AlphaResult:
    o = coincidence_matrix(annotations)
    if not o:
        raise ValueError("no item carries two or more labels")
    n_c: Counter = Counter()
    for (c, _), v in o.items():
        n_c[c] += v
    n = sum(n_c.values())
    observed = sum(v for (c, k), v in o.items() if c != k)
    expected = sum(n_c[c] * n_c[k] for c in n_c for k in n_c if c != k)
    pairable = sum(1 for it in annotations.items if len(it.labels) >= 2)
    if expected == 0:
        msg = "zero expected disagreement (a single label value); alpha defined as 1.0"
        logger.warning(msg)
        return AlphaResult(1.0, pairable, (msg,))
    return AlphaResult(1.0 - (n - 1) * observed / expected, pairable)


def krippendorff_alpha(annotations: AnnotationSet) -> float:
    """Nominal Krippendorff's alpha; items with fewer than two labels are ignored."""
    return krippendorff_alpha_detail(annotations).alpha


def annotation_set(rows: Mapping[str, Mapping[str, str]], normalize: Optional[bool] = True) -> AnnotationSet:
    """Build an :class:`AnnotationSet` from ``{item_id: {annotator: label}}``."""
    f = normalize_label if normalize else (lambda s: s)
    return AnnotationSet(tuple(AnnotationItem(i, {a: f(l) for a, l in labs.items()}) for i, labs in rows.items()))
