"""Immutable knowledge-graph subset with alias and fact-count indexes."""

from __future__ import annotations

import logging
import sys
from collections import defaultdict
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Optional

from .text import tokenize

log = logging.getLogger(__name__)

FREEBASE_PREFIXES = ("www.freebase.com/m/", "www.freebase.com/", "http://www.freebase.com/m/",
                     "http://www.freebase.com/", "https://www.freebase.com/m/",
                     "https://www.freebase.com/")


class KGLoadError(ValueError):
    pass


def strip_freebase(value: str) -> str:
    """Remove a Freebase URL prefix from an MID or relation path."""
    for prefix in FREEBASE_PREFIXES:
        if value.startswith(prefix):
            return value[len(prefix):]
    return value


@dataclass(frozen=True)
class Triple:
    subject: str
    relation: str
    object: str


@dataclass
class LoadReport:
    triples: int = 0
    entities: int = 0
    aliases: int = 0
    rejected_lines: list = field(default_factory=list)
    unlinked_alias_entities: int = 0

    def to_json(self) -> dict:
        return {
            "triples": self.triples,
            "entities": self.entities,
            "aliases": self.aliases,
            "rejected_lines": self.rejected_lines,
            "unlinked_alias_entities": self.unlinked_alias_entities,
        }


class KnowledgeGraph:
    """Read-only triple store.

    Aliases are held as normalized token tuples. ``fact_counts`` counts
    distinct objects per (subject, relation) pair.
    """

    def __init__(self, triples, alias_index, entity_aliases, subject_relations, fact_counts,
                 report: Optional[LoadReport] = None):
        self.triples: tuple[Triple, ...] = tuple(triples)
        self.alias_index: Mapping[tuple, frozenset] = MappingProxyType(alias_index)
        self.entity_aliases: Mapping[str, frozenset] = MappingProxyType(entity_aliases)
        self.subject_relations: Mapping[str, frozenset] = MappingProxyType(subject_relations)
        self.fact_counts: Mapping[tuple, int] = MappingProxyType(fact_counts)
        self.report = report or LoadReport()

    def entities_with_alias(self, alias_tokens) -> frozenset:
        return self.alias_index.get(tuple(alias_tokens), frozenset())

    def aliases_of(self, entity: str) -> frozenset:
        return self.entity_aliases.get(entity, frozenset())

    def is_alias(self, alias_tokens) -> bool:
        return tuple(alias_tokens) in self.alias_index

    def relations_over(self, subjects: Iterable[str]) -> set:
        out: set = set()
        for s in subjects:
            out.update(self.subject_relations.get(s, ()))
        return out

    def fact_count(self, s: str, r: str) -> int:
        return self.fact_counts.get((s, r), 0)

    def has_pair(self, s: str, r: str) -> bool:
        return (s, r) in self.fact_counts

    @property
    def graph_query_count(self) -> int:
        return len(self.fact_counts)

    @property
    def max_alias_len(self) -> int:
        return max((len(a) for a in self.alias_index), default=0)

    def __repr__(self):
        return (f"KnowledgeGraph(triples={len(self.triples)}, pairs={len(self.fact_counts)}, "
                f"aliases={len(self.alias_index)})")


def load_kg(triples_source: Iterable[str], aliases_source: Iterable[str],
            normalizer: Callable[[str], list] = tokenize) -> KnowledgeGraph:
    """Build a :class:`KnowledgeGraph` from triples and aliases TSV lines.

    Malformed lines are skipped and listed in ``kg.report.rejected_lines`` as
    ``{"source", "line", "reason"}``. An input with no usable triple raises
    :class:`KGLoadError`.
    """
    report = LoadReport()
    objects: dict = defaultdict(set)
    triples = []
    for lineno, line in enumerate(triples_source, 1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3 or not all(f.strip() for f in fields):
            report.rejected_lines.append({"source": "triples", "line": lineno,
                                          "reason": f"expected 3 fields, got {len(fields)}"})
            continue
        s, r, objs = (f.strip() for f in fields)
        if "/" not in r:
            report.rejected_lines.append({"source": "triples", "line": lineno,
                                          "reason": f"relation {r!r} has no '/'"})
            continue
        s, r = sys.intern(s), sys.intern(r)
        for o in objs.split():
            o = sys.intern(o)
            triples.append(Triple(s, r, o))
            objects[(s, r)].add(o)
    if not triples:
        raise KGLoadError("no triples loaded; a KG that completes zero graph queries is rejected")

    subject_relations: dict = defaultdict(set)
    for s, r in objects:
        subject_relations[s].add(r)
    known = {t.subject for t in triples} | {t.object for t in triples}

    alias_index: dict = defaultdict(set)
    entity_aliases: dict = defaultdict(set)
    for lineno, line in enumerate(aliases_source, 1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 2 or not fields[0].strip():
            report.rejected_lines.append({"source": "aliases", "line": lineno,
                                          "reason": f"expected 2 fields, got {len(fields)}"})
            continue
        entity = sys.intern(fields[0].strip())
        alias = tuple(normalizer(fields[1]))
        if not alias:
            report.rejected_lines.append({"source": "aliases", "line": lineno,
                                          "reason": "empty alias"})
            continue
        alias_index[alias].add(entity)
        entity_aliases[entity].add(alias)

    unlinked = [e for e in entity_aliases if e not in known]
    if unlinked:
        log.info("%d aliased entities appear in no triple", len(unlinked))

    report.triples = len(triples)
    report.entities = len(known | set(entity_aliases))
    report.aliases = len(alias_index)
    report.unlinked_alias_entities = len(unlinked)
    return KnowledgeGraph(
        triples,
        {a: frozenset(es) for a, es in alias_index.items()},
        {e: frozenset(a) for e, a in entity_aliases.items()},
        {s: frozenset(rs) for s, rs in subject_relations.items()},
        {k: len(v) for k, v in objects.items()},
        report,
    )


def load_kg_files(triples_path, aliases_path, normalizer=tokenize) -> KnowledgeGraph:
    with open(triples_path, encoding="utf-8") as tf, open(aliases_path, encoding="utf-8") as af:
        return load_kg(tf, af, normalizer)
