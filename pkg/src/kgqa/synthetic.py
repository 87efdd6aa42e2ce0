"""Seeded toy corpora: a small KG, aliases, templated questions and
random word vectors. Used by the test-suite and the ``synth`` command."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .text import QuestionExample, tokenize

TEMPLATES = {
    "book/written_work/author": ["who wrote {}", "who is the author of {}"],
    "location/location/containedby": ["where is {} located", "which region contains {}"],
    "music/artist/genre": ["what genre does {} play", "what kind of music is {}"],
    "people/person/place_of_birth": ["where was {} born", "what city is the birthplace of {}"],
    "film/film/language": ["what language is {} in", "which language is spoken in {}"],
}

_SYLLABLES = ["ka", "lo", "mir", "zu", "ten", "vor", "qua", "bel", "dri", "nox", "pel", "sha",
              "tum", "wex", "yor", "gil", "fen", "hap", "jor", "cil"]


@dataclass
class Corpus:
    triples: list  # (s, r, [objects])
    aliases: list  # (entity, alias text)
    train: list
    valid: list
    test: list
    vocab: list

    def triple_lines(self):
        return [f"{s}\t{r}\t{' '.join(objs)}" for s, r, objs in self.triples]

    def alias_lines(self):
        return [f"{e}\t{a}" for e, a in self.aliases]

    @property
    def n_triples(self) -> int:
        return sum(len(objs) for _, _, objs in self.triples)


def _words(rng, n, taken):
    out = []
    while len(out) < n:
        w = "".join(rng.choice(_SYLLABLES, size=rng.integers(2, 4)))
        if w not in taken:
            taken.add(w)
            out.append(w)
    return out


def make_corpus(seed=0, n_subjects=10, relations_per_subject=3, n_questions=50,
                n_valid=10, n_test=10) -> Corpus:
    """Every subject has a unique one- or two-word alias and
    ``relations_per_subject`` single-object facts; questions are drawn from
    the templates of the relations each subject actually has."""
    rng = np.random.default_rng(seed)
    taken = {w for ts in TEMPLATES.values() for t in ts for w in tokenize(t.format(""))}
    relations = sorted(TEMPLATES)
    subjects = [f"s{i:03d}" for i in range(n_subjects)]
    triples, aliases = [], []
    for i, s in enumerate(subjects):
        words = _words(rng, 1 + (i % 2), taken)
        aliases.append((s, " ".join(words)))
        for r in sorted(rng.choice(relations, size=relations_per_subject, replace=False)):
            triples.append((s, str(r), [f"o{len(triples):03d}"]))
    pairs = [(s, r, objs[0]) for s, r, objs in triples]
    alias_of = dict(aliases)

    def questions(n, tag):
        out = []
        for j in range(n):
            s, r, o = pairs[rng.integers(len(pairs))] if j >= len(pairs) else pairs[j]
            template = TEMPLATES[r][rng.integers(len(TEMPLATES[r]))]
            text = template.format(alias_of[s]) + " ?"
            out.append(QuestionExample.from_text(text, s, r, o, qid=f"{tag}-{j + 1}"))
        return out

    train = questions(n_questions, "train")
    valid = questions(n_valid, "valid")
    test = questions(n_test, "test")
    vocab = sorted({t for q in train + valid + test for t in q.tokens}
                   | {t for _, a in aliases for t in tokenize(a)})
    return Corpus(triples, aliases, train, valid, test, vocab)


def write_embeddings(path, vocab, dim=16, seed=0, header=False):
    rng = np.random.default_rng(seed)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write(f"{len(vocab)} {dim}\n")
        for w in vocab:
            fh.write(w + " " + " ".join(f"{v:.6f}" for v in rng.normal(0, 1, dim)) + "\n")


def write_corpus(corpus: Corpus, raw_dir, emb_dim=16, seed=0) -> dict:
    """Write the corpus in the raw distribution layout (Freebase URL
    prefixes included) plus two embedding files."""
    raw_dir = Path(raw_dir)
    os.makedirs(raw_dir, exist_ok=True)
    with open(raw_dir / "triples.txt", "w", encoding="utf-8", newline="\n") as fh:
        for s, r, objs in corpus.triples:
            fh.write(f"www.freebase.com/m/{s}\twww.freebase.com/{r}\t"
                     + " ".join(f"www.freebase.com/m/{o}" for o in objs) + "\n")
    with open(raw_dir / "aliases.txt", "w", encoding="utf-8", newline="\n") as fh:
        for e, a in corpus.aliases:
            fh.write(f"www.freebase.com/m/{e}\t{a}\n")
    for split in ("train", "valid", "test"):
        with open(raw_dir / f"annotated_fb_data_{split}.txt", "w", encoding="utf-8", newline="\n") as fh:
            for q in getattr(corpus, split):
                fh.write(f"www.freebase.com/m/{q.gold_subject}\twww.freebase.com/{q.gold_relation}\t"
                         f"www.freebase.com/m/{q.gold_object}\t{q.raw}\n")
    glove = raw_dir / "glove.txt"
    fasttext = raw_dir / "fasttext.vec"
    write_embeddings(glove, corpus.vocab, emb_dim, seed)
    write_embeddings(fasttext, corpus.vocab, emb_dim, seed + 1, header=True)
    return {"tagger_embeddings": str(glove), "classifier_embeddings": str(fasttext)}
