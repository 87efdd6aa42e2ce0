"""Dataset ambiguity audit.

For each question the gold subject's alias is located, every entity
sharing that alias forms the subject set, and every relation the
abstracted predicate co-occurs with in the dataset forms the relation
set. KG pairs in their cross product are the question's valid
interpretations. Three accuracy upperbounds follow from those sets.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .text import PredicateTemplate, QuestionExample, TokenSpan, abstract_predicate, match_subject_alias

ANSWERABLE = "answerable"
AMBIGUOUS = "ambiguous"
UNMENTIONED = "unmentioned_subject"

GUESS_RULES = ("dataset_then_kg", "kg_then_dataset")


class PredicateRelationTable:
    """Predicate template -> Counter of gold relations across a corpus."""

    def __init__(self):
        self._table: dict = defaultdict(Counter)

    def add(self, template: PredicateTemplate, relation: str):
        self._table[template.tokens][relation] += 1

    def relations(self, template: PredicateTemplate) -> Counter:
        return self._table.get(template.tokens, Counter())

    def count(self, template: PredicateTemplate, relation: str) -> int:
        return self.relations(template)[relation]

    def __len__(self):
        return len(self._table)

    def __contains__(self, template):
        return template.tokens in self._table

    def items(self):
        return self._table.items()


def build_predicate_table(examples: Iterable[QuestionExample], kg) -> PredicateRelationTable:
    table = PredicateRelationTable()
    for q in examples:
        match = match_subject_alias(q, kg)
        if match is not None:
            table.add(abstract_predicate(q.tokens, match[0]), q.gold_relation)
    return table


@dataclass(frozen=True)
class Interpretation:
    subject: str
    relation: str
    rel_count: int
    fact_count: int

    @property
    def pair(self):
        return (self.subject, self.relation)


@dataclass
class InterpretationSet:
    question: QuestionExample
    span: TokenSpan
    alias: tuple
    template: PredicateTemplate
    pairs: list  # of Interpretation, sorted by (subject, relation)

    @property
    def gold_pair(self):
        return (self.question.gold_subject, self.question.gold_relation)

    def pair_set(self) -> set:
        return {p.pair for p in self.pairs}

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self.pair_set()

    def __len__(self):
        return len(self.pairs)


def interpretation_set(q: QuestionExample, kg, table: PredicateRelationTable) -> Optional[InterpretationSet]:
    """All (subject, relation) KG pairs consistent with the question's alias
    and predicate; None when the gold subject is not mentioned."""
    match = match_subject_alias(q, kg)
    if match is None:
        return None
    span, alias = match
    template = abstract_predicate(q.tokens, span)
    rel_counts = table.relations(template)
    pairs = []
    for s in sorted(kg.entities_with_alias(alias)):
        for r in sorted(rel_counts):
            n = kg.fact_count(s, r)
            if n:
                pairs.append(Interpretation(s, r, rel_counts[r], n))
    return InterpretationSet(q, span, alias, template, pairs)


def is_unanswerable(iset: Optional[InterpretationSet]) -> str:
    if iset is None:
        return UNMENTIONED
    return AMBIGUOUS if len(iset.pairs) > 1 else ANSWERABLE


def guess(iset: InterpretationSet, rule: str = "dataset_then_kg") -> Optional[Interpretation]:
    """Deterministic best guess among the interpretations.

    ``dataset_then_kg`` ranks by predicate co-occurrence count, then KG fact
    count; ``kg_then_dataset`` swaps the two. Remaining ties go to the
    lexicographically smallest (relation, subject).
    """
    if not iset.pairs:
        return None
    if rule == "dataset_then_kg":
        key = lambda p: (-p.rel_count, -p.fact_count, p.relation, p.subject)
    elif rule == "kg_then_dataset":
        key = lambda p: (-p.fact_count, -p.rel_count, p.relation, p.subject)
    else:
        raise ValueError(f"unknown guess rule {rule!r}; expected one of {GUESS_RULES}")
    return min(iset.pairs, key=key)


@dataclass
class QuestionAudit:
    qid: str
    verdict: str
    iset: Optional[InterpretationSet]
    guess: Optional[Interpretation]
    naive: float
    distribution: float
    noise_adjusted: float

    def to_json(self) -> dict:
        q = self.iset.question if self.iset else None
        return {
            "id": self.qid,
            "verdict": self.verdict,
            "pairs": [{"subject": p.subject, "relation": p.relation, "rel_count": p.rel_count,
                       "fact_count": p.fact_count} for p in (self.iset.pairs if self.iset else [])],
            "guess": list(self.guess.pair) if self.guess else None,
            "gold": [q.gold_subject, q.gold_relation] if q else None,
            "contribution": self.distribution,
            "contribution_naive": self.naive,
            "contribution_noise_adjusted": self.noise_adjusted,
        }


@dataclass
class AuditReport:
    total: int = 0
    unmentioned_subject_count: int = 0
    unanswerable_count: int = 0
    answerable_count: int = 0
    naive_upperbound: float = 1.0
    distribution_upperbound: float = 1.0
    noise_adjusted_upperbound: float = 1.0
    guess_rule: str = "dataset_then_kg"
    questions: list = field(default_factory=list)

    @property
    def unanswerable_fraction(self) -> float:
        return self.unanswerable_count / self.total if self.total else 0.0

    @property
    def unmentioned_fraction(self) -> float:
        return self.unmentioned_subject_count / self.total if self.total else 0.0

    def to_json(self, split: str = "") -> dict:
        return {
            "schema": "kgqa-audit/1",
            "split": split,
            "guess_rule": self.guess_rule,
            "total": self.total,
            "answerable_count": self.answerable_count,
            "unanswerable_count": self.unanswerable_count,
            "unmentioned_subject_count": self.unmentioned_subject_count,
            "unanswerable_fraction": self.unanswerable_fraction,
            "unmentioned_fraction": self.unmentioned_fraction,
            "naive_upperbound": self.naive_upperbound,
            "distribution_upperbound": self.distribution_upperbound,
            "noise_adjusted_upperbound": self.noise_adjusted_upperbound,
            "questions": [qa.to_json() for qa in self.questions],
        }


def audit_question(q: QuestionExample, kg, table, rule="dataset_then_kg") -> QuestionAudit:
    iset = interpretation_set(q, kg, table)
    verdict = is_unanswerable(iset)
    if verdict == UNMENTIONED:
        return QuestionAudit(q.qid, verdict, None, None, 1.0, 1.0, 0.0)
    best = guess(iset, rule)
    if verdict == ANSWERABLE:
        return QuestionAudit(q.qid, verdict, iset, best, 1.0, 1.0, 1.0)
    hit = 1.0 if best.pair == iset.gold_pair else 0.0
    return QuestionAudit(q.qid, verdict, iset, best, 1.0 / len(iset.pairs), hit, hit)


def compute_upperbounds(split: Sequence[QuestionExample], kg, table: PredicateRelationTable,
                        rule: str = "dataset_then_kg") -> AuditReport:
    """Audit every question of ``split`` and average the three contributions.

    Answerable questions count 1. Ambiguous ones count 1 when the
    deterministic guess is gold (1/|pairs| for the naive bound).
    Unmentioned-subject questions count 1 except in the noise-adjusted bound.
    """
    if rule not in GUESS_RULES:
        raise ValueError(f"unknown guess rule {rule!r}")
    report = AuditReport(guess_rule=rule)
    report.questions = [audit_question(q, kg, table, rule) for q in split]
    report.total = len(report.questions)
    verdicts = Counter(qa.verdict for qa in report.questions)
    report.answerable_count = verdicts[ANSWERABLE]
    report.unanswerable_count = verdicts[AMBIGUOUS]
    report.unmentioned_subject_count = verdicts[UNMENTIONED]
    if report.total:
        n = report.total
        report.naive_upperbound = sum(qa.naive for qa in report.questions) / n
        report.distribution_upperbound = sum(qa.distribution for qa in report.questions) / n
        report.noise_adjusted_upperbound = sum(qa.noise_adjusted for qa in report.questions) / n
    return report
