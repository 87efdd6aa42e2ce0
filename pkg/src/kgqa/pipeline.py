"""End-to-end question -> (subject, relation) inference and evaluation."""

from __future__ import annotations

import random
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .audit import InterpretationSet
from .relation import argmax_relation
from .text import TokenSpan, abstract_predicate

BUCKETS = ("ambiguous_equal_evidence", "noise", "subject_span", "low_shot", "other")
LOW_SHOT_THRESHOLD = 10


@dataclass
class Prediction:
    subject: Optional[str] = None
    relation: Optional[str] = None
    span: Optional[TokenSpan] = None
    alias: Optional[tuple] = None
    probability: float = 0.0
    abstained: bool = True
    span_source: str = ""
    candidates: dict = field(default_factory=dict)

    @property
    def pair(self):
        return None if self.abstained else (self.subject, self.relation)

    def to_json(self) -> dict:
        return {
            "subject": self.subject,
            "relation": self.relation,
            "span": self.span.as_list() if self.span else None,
            "alias": " ".join(self.alias) if self.alias else None,
            "probability": self.probability,
            "abstained": self.abstained,
            "span_source": self.span_source,
            "candidates": dict(sorted(self.candidates.items(), key=lambda kv: (-kv[1], kv[0]))),
        }


def longest_kg_ngram(tokens, kg) -> Optional[tuple[TokenSpan, tuple]]:
    """Longest question n-gram that is any KG alias (leftmost on ties)."""
    tokens = tuple(tokens)
    for length in range(min(len(tokens), kg.max_alias_len), 0, -1):
        for start in range(len(tokens) - length + 1):
            gram = tokens[start:start + length]
            if kg.is_alias(gram):
                return TokenSpan(start, start + length), gram
    return None


def predict(tokens, tagger, clf, kg, k: int = 10) -> Prediction:
    """Top-k span recognition, alias lookup, masked relation
    classification, then the subject with the most facts of that relation."""
    if k < 1:
        raise ValueError("k must be >= 1")
    tokens = tuple(tokens)
    if not tokens:
        return Prediction()
    chosen, source = None, ""
    for span, _ in tagger.topk_subject_spans(tokens, k):
        alias = tokens[span.start:span.end]
        if kg.is_alias(alias):
            chosen, source = (span, alias), "tagger"
            break
    if chosen is None:
        chosen = longest_kg_ngram(tokens, kg)
        source = "ngram_fallback"
    if chosen is None:
        return Prediction(span_source="none")
    span, alias = chosen
    subjects = kg.entities_with_alias(alias)
    relations = kg.relations_over(subjects)
    if not relations:
        # aliases of entities absent from every triple
        return Prediction(span=span, alias=alias, span_source=source)
    probs = clf.classify(abstract_predicate(tokens, span), relations)
    r_max = argmax_relation(probs)
    holders = [s for s in subjects if kg.has_pair(s, r_max)]
    assert holders, "argmax relation must be held by some subject"
    s_max = min(holders, key=lambda s: (-kg.fact_count(s, r_max), s))
    return Prediction(s_max, r_max, span, alias, probs[r_max], False, source, probs)


def predict_many(questions: Sequence, tagger, clf, kg, k=10, jobs: int = 1) -> list[Prediction]:
    token_lists = [q.tokens if hasattr(q, "tokens") else q for q in questions]
    if jobs <= 1:
        return [predict(t, tagger, clf, kg, k) for t in token_lists]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda t: predict(t, tagger, clf, kg, k), token_lists))


def _gold_pair(g):
    return (g.gold_subject, g.gold_relation) if hasattr(g, "gold_subject") else tuple(g)


def evaluate_strict(predictions: Sequence[Prediction], golds: Sequence) -> float:
    """Subject-relation pair accuracy; abstentions are wrong."""
    if len(predictions) != len(golds):
        raise ValueError(f"{len(predictions)} predictions for {len(golds)} golds")
    if not golds:
        return 0.0
    return sum(p.pair == _gold_pair(g) for p, g in zip(predictions, golds)) / len(golds)


def correct_any(pred: Prediction, gold, iset: Optional[InterpretationSet]) -> bool:
    if pred.abstained:
        return False
    if pred.pair == _gold_pair(gold):
        return True
    return iset is not None and pred.pair in iset


def evaluate_any_interpretation(predictions, golds, audit_sets) -> float:
    """Accuracy counting any valid interpretation of the question as correct."""
    if not (len(predictions) == len(golds) == len(audit_sets)):
        raise ValueError("predictions, golds and audit sets must align")
    if not golds:
        return 0.0
    return sum(correct_any(p, g, s) for p, g, s in zip(predictions, golds, audit_sets)) / len(golds)


def bucket_error(pred: Prediction, question, iset: Optional[InterpretationSet], train_relation_counts) -> str:
    """Assign a failed prediction to the first matching bucket in ``BUCKETS``."""
    if iset is not None and not pred.abstained and pred.pair in iset:
        return "ambiguous_equal_evidence"
    if iset is None:
        return "noise"
    if pred.span != iset.span:
        return "subject_span"
    if train_relation_counts.get(question.gold_relation, 0) < LOW_SHOT_THRESHOLD:
        return "low_shot"
    return "other"


def bucket_errors(failures, train_relation_counts, audit_sets) -> list[str]:
    """``failures`` is a sequence of (prediction, question) pairs aligned with
    ``audit_sets``."""
    return [bucket_error(p, q, s, train_relation_counts) for (p, q), s in zip(failures, audit_sets)]


@dataclass
class EvalReport:
    total: int
    strict_accuracy: float
    any_interpretation_accuracy: float
    abstention_rate: float
    buckets: dict
    samples: dict
    rows: list

    def to_json(self, split="") -> dict:
        return {
            "schema": "kgqa-eval/1",
            "split": split,
            "total": self.total,
            "strict_accuracy": self.strict_accuracy,
            "any_interpretation_accuracy": self.any_interpretation_accuracy,
            "abstention_rate": self.abstention_rate,
            "error_buckets": {b: {"count": self.buckets[b], "samples": self.samples[b]} for b in BUCKETS},
        }

    def tsv_lines(self):
        for row in self.rows:
            yield "\t".join(str(v) for v in row)


def evaluate(questions, predictions, audit_sets, train_relation_counts, sample_size=5, seed=0) -> EvalReport:
    """Strict and any-interpretation accuracy plus error buckets."""
    strict = evaluate_strict(predictions, questions)
    anyacc = evaluate_any_interpretation(predictions, questions, audit_sets)
    counts = Counter({b: 0 for b in BUCKETS})
    cases: dict = {b: [] for b in BUCKETS}
    rows = []
    for i, (q, p, s) in enumerate(zip(questions, predictions, audit_sets)):
        ok_strict = p.pair == _gold_pair(q)
        ok_any = correct_any(p, q, s)
        bucket = ""
        if not ok_strict:
            bucket = bucket_error(p, q, s, train_relation_counts)
            counts[bucket] += 1
            cases[bucket].append({"id": q.qid or str(i), "question": q.raw,
                                  "gold": [q.gold_subject, q.gold_relation],
                                  "predicted": list(p.pair) if p.pair else None})
        rows.append((q.qid or str(i), p.subject or "", p.relation or "", int(ok_strict), int(ok_any), bucket))
    rng = random.Random(seed)
    samples = {b: (rng.sample(c, sample_size) if len(c) > sample_size else c) for b, c in cases.items()}
    n = len(questions)
    abst = sum(p.abstained for p in predictions) / n if n else 0.0
    return EvalReport(n, strict, anyacc, abst, dict(counts), samples, rows)
