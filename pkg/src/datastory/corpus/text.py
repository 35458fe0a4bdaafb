"""Tokenization, verb identification and trigram measures."""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources
from typing import Iterable, Optional, Protocol, Sequence

_TOKEN = re.compile(r"(?:[^\W_]|')+")


def tokenize(text: str) -> list[str]:
    """Lowercased runs of letters, digits and apostrophes.

    Punctuation splits tokens, so ``"53.8%"`` gives ``["53", "8"]``. Curly
    apostrophes count as straight ones; apostrophes at either end of a run
    (quotation marks) are stripped.
    """
    out = []
    for m in _TOKEN.finditer(text.replace("’", "'").lower()):
        tok = m.group().strip("'")
        if tok:
            out.append(tok)
    return out


def paragraphs(text: str) -> list[str]:
    return [p.strip() for p in re.split(r"\n(?:[ \t]*\n)+", text) if p.strip()]


def trigrams(tokens: Sequence[str]) -> list[tuple[str, str, str]]:
    return [tuple(tokens[i:i + 3]) for i in range(len(tokens) - 2)]  # type: ignore[misc]


def intra_trigram_repetition(tokens: Sequence[str]) -> float:
    """100 * (1 - unique/total) over the token trigrams; 0 with no trigrams."""
    grams = trigrams(tokens)
    if not grams:
        return 0.0
    return 100.0 * (1.0 - len(set(grams)) / len(grams))


def vocab_token_ratio(tokens: Sequence[str]) -> float:
    if not tokens:
        raise ValueError("no tokens")
    return len(set(tokens)) / len(tokens)


# --------------------------------------------------------------------------
# Verbs


class VerbTagger(Protocol):
    def verb_lemmas(self, tokens: Sequence[str]) -> list[str]:
        """Lemma of every token identified as a verb, in token order."""
        ...


class LexiconVerbTagger:
    """Closed verb lexicon plus -s/-ed/-ing suffix rules over its stems.

    It has no context, so noun/verb homographs ("rate", "increase") always
    count as verbs.
    """

    def __init__(self, entries: Optional[Iterable[Sequence[str]]] = None) -> None:
        if entries is None:
            entries = _bundled_entries()
        self.lemmas: set[str] = set()
        self.forms: dict[str, str] = {}
        for lemma, *irregular in entries:
            self.lemmas.add(lemma)
            self.forms.setdefault(lemma, lemma)
            for form in irregular:
                self.forms.setdefault(form, lemma)

    def lemma(self, token: str) -> Optional[str]:
        if token in self.forms:
            return self.forms[token]
        if not token.isalpha():
            return None
        for stem in _candidate_stems(token):
            if stem in self.lemmas:
                return stem
        return None

    def verb_lemmas(self, tokens: Sequence[str]) -> list[str]:
        out = []
        for t in tokens:
            lemma = self.lemma(t)
            if lemma is not None:
                out.append(lemma)
        return out


def _candidate_stems(token: str) -> list[str]:
    c: list[str] = []
    if token.endswith("ing") and len(token) > 4:
        s = token[:-3]
        c += [s, s + "e"]
        if len(s) > 2 and s[-1] == s[-2]:
            c.append(s[:-1])
        if s.endswith("y"):
            c.append(s[:-1] + "ie")
    elif token.endswith("ed") and len(token) > 3:
        s = token[:-2]
        c += [s, token[:-1]]
        if len(s) > 2 and s[-1] == s[-2]:
            c.append(s[:-1])
        if s.endswith("i"):
            c.append(s[:-1] + "y")
    elif token.endswith("s") and len(token) > 2 and not token.endswith("ss"):
        c.append(token[:-1])
        if token.endswith("es"):
            c.append(token[:-2])
        if token.endswith("ies"):
            c.append(token[:-3] + "y")
    return c


@lru_cache(maxsize=1)
def _bundled_entries() -> tuple[tuple[str, ...], ...]:
    text = resources.files("datastory.corpus").joinpath("data/verbs.txt").read_text("utf-8")
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            rows.append(tuple(line.split()))
    return tuple(rows)


@lru_cache(maxsize=1)
def default_tagger() -> LexiconVerbTagger:
    return LexiconVerbTagger()
