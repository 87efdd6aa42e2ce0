"""Hand-built corpora and brute-force oracles shared by the tests."""

import itertools

import numpy as np

from kgqa.kg import load_kg
from kgqa.neural import EmbeddingTable
from kgqa.text import QuestionExample, tokenize

AUTHOR = "book/written_work/author"
WRITTEN_BY = "film/film/written_by"
STORY_BY = "film/film/story_by"
GULLIVER = ["0btc7", "090s_0", "06znpjr", "02py9bj"]


def q(text, s, r, o="o0", qid=""):
    return QuestionExample.from_text(text, s, r, o, qid)


def gulliver():
    """Four entities share the alias; the KG holds exactly six pairs in the
    cross product of those entities with author/written_by/story_by, and
    "who wrote $e$ ?" co-occurs 132/67/9 times with the three relations."""
    triples = [
        f"0btc7\t{AUTHOR}\t03_f0",
        f"090s_0\t{WRITTEN_BY}\tw1",
        f"090s_0\t{STORY_BY}\t03_f0",
        f"06znpjr\t{WRITTEN_BY}\tw2",
        f"06znpjr\t{STORY_BY}\t03_f0 x9",
        f"02py9bj\t{STORY_BY}\t03_f0",
        "0btc7\tbook/book/characters\tc1",
        "04b5zb_\tlocation/location/containedby\t0f80hy",
        "01n7q\tlocation/location/contains\tc2",
    ]
    aliases = [f"{e}\tgulliver's travels" for e in GULLIVER]
    aliases += ["04b5zb_\tfires creek", "01n7q\tcalifornia"]
    questions = [q("who wrote gulliver's travels?", "090s_0", STORY_BY, "03_f0", "gulliver")]
    for rel, n in ((AUTHOR, 132), (WRITTEN_BY, 67), (STORY_BY, 8)):
        tag = rel.split("/")[-1].replace("_", "")
        for i in range(n):
            ent = f"{tag}{i}"
            triples.append(f"{ent}\t{rel}\tobj{i}")
            aliases.append(f"{ent}\t{tag} title {i}")
            questions.append(q(f"who wrote {tag} title {i} ?", ent, rel, f"obj{i}"))
    kg = load_kg(triples, aliases)
    return kg, questions


def california_question():
    return q("Which book is written about?", "01n7q", "location/location/contains", "c2", "california")


def toy_embeddings(words, dim=8, seed=0):
    rng = np.random.default_rng(seed)
    return EmbeddingTable(sorted(set(words)), rng.normal(0, 1, (len(set(words)), dim)))


def ambiguity_fixture():
    """Two answerable questions and two sharing one ambiguous signature.
    "twin" names A (2 author facts) and B (1 author fact), so the guess is A:
    right for the first ambiguous question, wrong for the second."""
    triples = [f"A\t{AUTHOR}\tx y", f"B\t{AUTHOR}\tz", "C\tlocation/location/containedby\tp",
               "D\tmusic/artist/genre\tg"]
    aliases = ["A\ttwin", "B\ttwin", "C\tkelso", "D\tmorvane"]
    questions = [
        q("who wrote twin ?", "A", AUTHOR, qid="amb-1"),
        q("who wrote twin ?", "B", AUTHOR, qid="amb-2"),
        q("where is kelso ?", "C", "location/location/containedby", qid="ans-1"),
        q("what genre is morvane ?", "D", "music/artist/genre", qid="ans-2"),
    ]
    return load_kg(triples, aliases), questions


def noise_fixture():
    """Four otherwise perfect questions, one of which never names its subject."""
    triples = [f"A\t{AUTHOR}\tx", "C\tlocation/location/containedby\tp", "D\tmusic/artist/genre\tg",
               "E\tpeople/person/place_of_birth\tb"]
    aliases = ["A\tquill", "C\tkelso", "D\tmorvane", "E\tedra"]
    questions = [
        q("who wrote quill ?", "A", AUTHOR, qid="n-1"),
        q("where is kelso ?", "C", "location/location/containedby", qid="n-2"),
        q("what genre is morvane ?", "D", "music/artist/genre", qid="n-3"),
        q("where was this person born ?", "E", "people/person/place_of_birth", qid="n-4"),
    ]
    return load_kg(triples, aliases), questions


def random_audit_fixture(rng, n_entities=8, n_relations=4, n_aliases=4, n_questions=12, n_templates=3):
    """Random KG (<= 1000 triples) with shared aliases and templated questions."""
    relations = [f"dom/type/rel{i}" for i in range(n_relations)]
    entities = [f"e{i}" for i in range(n_entities)]
    alias_words = [f"name{i}" for i in range(n_aliases)]
    templates = [f"t{j} {{}} ?" for j in range(n_templates)]
    triples, aliases = [], []
    for e in entities:
        for r in relations:
            if rng.random() < 0.5:
                k = int(rng.integers(1, 4))
                triples.append(f"{e}\t{r}\t" + " ".join(f"o{int(x)}" for x in rng.integers(0, 20, k)))
        aliases.append(f"{e}\t{alias_words[int(rng.integers(n_aliases))]}")
    if not triples:
        triples.append(f"{entities[0]}\t{relations[0]}\to0")
    kg = load_kg(triples, aliases)
    facts = sorted(kg.fact_counts)
    alias_of = {e: " ".join(next(iter(kg.aliases_of(e)))) for e in entities}
    questions = []
    for i in range(n_questions):
        s, r = facts[int(rng.integers(len(facts)))]
        if rng.random() < 0.15:
            text = templates[int(rng.integers(n_templates))].format("nobody")
        else:
            text = templates[int(rng.integers(n_templates))].format(alias_of[s])
        questions.append(q(text, s, r, qid=f"r-{i}"))
    return kg, triples, aliases, questions


def enumerate_paths(E, T, start, end):
    """Brute-force oracle: every label path with an independently summed score,
    sorted by (score desc, labels asc)."""
    n, L = E.shape
    out = []
    for labels in itertools.product(range(L), repeat=n):
        s = start[labels[0]] + end[labels[-1]]
        s += sum(E[t, y] for t, y in enumerate(labels))
        s += sum(T[a, b] for a, b in zip(labels[:-1], labels[1:]))
        out.append((labels, float(s)))
    out.sort(key=lambda x: (-x[1], x[0]))
    return out


def brute_force_pairs(question, corpus, triple_lines, alias_lines):
    """Independent scan over raw lines: no KG indexes, no predicate table."""
    names = [(line.split("\t")[0], tuple(tokenize(line.split("\t")[1]))) for line in alias_lines]

    def gold_match(x):
        own = {a for e, a in names if e == x.gold_subject}
        best = None
        n = len(x.tokens)
        for start in range(n):
            for end in range(start + 1, n + 1):
                if x.tokens[start:end] in own:
                    key = (-(end - start), start)
                    if best is None or key < best[0]:
                        best = (key, start, end)
        if best is None:
            return None
        _, start, end = best
        return x.tokens[start:end], x.tokens[:start] + ("$e$",) + x.tokens[end:]

    m = gold_match(question)
    if m is None:
        return None
    alias, template = m
    subjects = {e for e, a in names if a == alias}
    relations = set()
    for other in corpus:
        mo = gold_match(other)
        if mo is not None and mo[1] == template:
            relations.add(other.gold_relation)
    pairs = set()
    for line in triple_lines:
        s, r, _ = line.split("\t")
        if s in subjects and r in relations:
            pairs.add((s, r))
    return pairs
