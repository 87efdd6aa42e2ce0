"""Tokenization, subject-alias span matching and predicate abstraction.

These helpers are shared by training, inference and the dataset audit so
that alias matching and question tokenization can never disagree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

PLACEHOLDER = "$e$"
INSIDE, OUTSIDE = "I", "O"


def _is_punct(ch: str) -> bool:
    return not ch.isalnum()


def tokenize(text: str) -> list[str]:
    """Lowercase, whitespace split, and peel punctuation off chunk edges.

    Apostrophes and hyphens inside a word stay in the token, so
    ``"gulliver's"`` is one token while ``"travels?"`` becomes two.
    """
    tokens: list[str] = []
    for chunk in text.lower().split():
        lo, hi = 0, len(chunk)
        while lo < hi and _is_punct(chunk[lo]):
            lo += 1
        while hi > lo and _is_punct(chunk[hi - 1]):
            hi -= 1
        tokens.extend(chunk[:lo])
        if lo < hi:
            tokens.append(chunk[lo:hi])
        tokens.extend(chunk[hi:])
    return tokens


@dataclass(frozen=True, order=True)
class TokenSpan:
    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def check(self, n: int) -> None:
        if self.end > n:
            raise ValueError(f"span [{self.start}, {self.end}) exceeds length {n}")

    def as_list(self) -> list[int]:
        return [self.start, self.end]


@dataclass(frozen=True)
class PredicateTemplate:
    tokens: tuple[str, ...]
    placeholder_pos: int

    def __post_init__(self):
        if self.tokens.count(PLACEHOLDER) != 1 or self.tokens[self.placeholder_pos] != PLACEHOLDER:
            raise ValueError(f"template must hold exactly one {PLACEHOLDER}: {self.tokens}")

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class QuestionExample:
    raw: str
    tokens: tuple[str, ...]
    gold_subject: str
    gold_relation: str
    gold_object: str
    qid: str = ""

    @classmethod
    def from_text(cls, raw, subject, relation, obj, qid=""):
        return cls(raw, tuple(tokenize(raw)), subject, relation, obj, qid)


def abstract_predicate(tokens: Sequence[str], span: TokenSpan) -> PredicateTemplate:
    """Replace ``tokens[span]`` with the single placeholder token."""
    span.check(len(tokens))
    out = tuple(tokens[: span.start]) + (PLACEHOLDER,) + tuple(tokens[span.end:])
    return PredicateTemplate(out, span.start)


def find_alias_spans(tokens: Sequence[str], aliases) -> Optional[tuple[TokenSpan, tuple[str, ...]]]:
    """Longest contiguous span of ``tokens`` equal to one of ``aliases``.

    Ties go to the leftmost start. Returns None when nothing matches.
    """
    tokens = tuple(tokens)
    by_len: dict[int, set] = {}
    for a in aliases:
        if a:
            by_len.setdefault(len(a), set()).add(tuple(a))
    for length in sorted(by_len, reverse=True):
        if length > len(tokens):
            continue
        wanted = by_len[length]
        for start in range(len(tokens) - length + 1):
            window = tokens[start:start + length]
            if window in wanted:
                return TokenSpan(start, start + length), window
    return None


def match_subject_alias(q: QuestionExample, kg) -> Optional[tuple[TokenSpan, tuple[str, ...]]]:
    """Locate the gold subject's alias inside the question, if mentioned."""
    return find_alias_spans(q.tokens, kg.aliases_of(q.gold_subject))


def spans_from_tags(tags: Sequence[str]) -> list[TokenSpan]:
    """Maximal runs of ``I``, longest first, then by start position."""
    spans = []
    start = None
    for i, tag in enumerate(list(tags) + [OUTSIDE]):
        if tag == INSIDE and start is None:
            start = i
        elif tag != INSIDE and start is not None:
            spans.append(TokenSpan(start, i))
            start = None
    spans.sort(key=lambda s: (-len(s), s.start))
    return spans


def tags_for_span(n: int, span: TokenSpan) -> list[str]:
    span.check(n)
    return [INSIDE if span.start <= i < span.end else OUTSIDE for i in range(n)]
