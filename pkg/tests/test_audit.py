import numpy as np
import pytest

from kgqa.audit import (
    AMBIGUOUS,
    ANSWERABLE,
    UNMENTIONED,
    build_predicate_table,
    compute_upperbounds,
    guess,
    interpretation_set,
    is_unanswerable,
)
from kgqa.kg import load_kg

from fixtures import (
    AUTHOR,
    GULLIVER,
    STORY_BY,
    WRITTEN_BY,
    ambiguity_fixture,
    brute_force_pairs,
    california_question,
    gulliver,
    noise_fixture,
    q,
    random_audit_fixture,
)


def test_predicate_table_counts():
    kg, questions = gulliver()
    table = build_predicate_table(questions, kg)
    counts = table.relations(interpretation_set(questions[0], kg, table).template)
    assert dict(counts) == {AUTHOR: 132, WRITTEN_BY: 67, STORY_BY: 9}


def test_predicate_table_collapses_aliases():
    kg = load_kg(["a\tr/x\to", "b\tr/x\to"], ["a\talpha one", "b\tbeta"])
    table = build_predicate_table([q("who wrote alpha one ?", "a", "r/x"), q("who wrote beta ?", "b", "r/x")], kg)
    assert len(table) == 1
    single = build_predicate_table([q("who wrote beta ?", "b", "r/x")], kg)
    assert len(single) == 1 and sum(c for _, cnt in single.items() for c in cnt.values()) == 1


def test_gulliver_six_interpretations():
    kg, questions = gulliver()
    table = build_predicate_table(questions, kg)
    iset = interpretation_set(questions[0], kg, table)
    assert len(iset.pairs) == 6
    assert iset.pair_set() == {
        ("0btc7", AUTHOR), ("090s_0", WRITTEN_BY), ("090s_0", STORY_BY),
        ("06znpjr", WRITTEN_BY), ("06znpjr", STORY_BY), ("02py9bj", STORY_BY)}
    assert {p.subject for p in iset.pairs} == set(GULLIVER)
    assert iset.gold_pair in iset
    assert is_unanswerable(iset) == AMBIGUOUS
    assert guess(iset).pair == ("0btc7", AUTHOR)


def test_california_unmentioned():
    kg, questions = gulliver()
    table = build_predicate_table(questions, kg)
    assert interpretation_set(california_question(), kg, table) is None
    assert is_unanswerable(None) == UNMENTIONED


def test_singleton_answerable():
    kg = load_kg(["s\tr/x\to"], ["s\tzed"])
    x = q("where is zed ?", "s", "r/x")
    iset = interpretation_set(x, kg, build_predicate_table([x], kg))
    assert iset.pair_set() == {("s", "r/x")}
    assert is_unanswerable(iset) == ANSWERABLE


def test_bounds_all_answerable():
    kg = load_kg(["s\tr/x\to", "t\tr/y\to"], ["s\tzed", "t\tyon"])
    qs = [q("where is zed ?", "s", "r/x"), q("who is yon ?", "t", "r/y")]
    rep = compute_upperbounds(qs, kg, build_predicate_table(qs, kg))
    assert (rep.naive_upperbound, rep.distribution_upperbound, rep.noise_adjusted_upperbound) == (1.0, 1.0, 1.0)


def test_bounds_ambiguity_fixture():
    kg, qs = ambiguity_fixture()
    rep = compute_upperbounds(qs, kg, build_predicate_table(qs, kg))
    assert [a.verdict for a in rep.questions] == [AMBIGUOUS, AMBIGUOUS, ANSWERABLE, ANSWERABLE]
    assert [a.distribution for a in rep.questions] == [1.0, 0.0, 1.0, 1.0]
    assert rep.distribution_upperbound == 3 / 4
    assert rep.naive_upperbound == (2 + 2 * 0.5) / 4
    assert rep.noise_adjusted_upperbound == 3 / 4


def test_bounds_noise_fixture():
    kg, qs = noise_fixture()
    rep = compute_upperbounds(qs, kg, build_predicate_table(qs, kg))
    assert rep.unmentioned_subject_count == 1
    assert rep.noise_adjusted_upperbound == 3 / 4
    assert rep.distribution_upperbound == 1.0
    assert rep.naive_upperbound == 1.0


def test_guess_rule_switch():
    kg, questions = gulliver()
    table = build_predicate_table(questions, kg)
    iset = interpretation_set(questions[0], kg, table)
    assert guess(iset, "kg_then_dataset").pair == ("06znpjr", STORY_BY)
    with pytest.raises(ValueError):
        guess(iset, "coin_flip")


def test_report_json_shape():
    kg, qs = ambiguity_fixture()
    data = compute_upperbounds(qs, kg, build_predicate_table(qs, kg)).to_json("valid")
    assert {"naive_upperbound", "distribution_upperbound", "noise_adjusted_upperbound"} <= set(data)
    first = data["questions"][0]
    assert set(first) >= {"id", "verdict", "pairs", "guess", "gold", "contribution"}
    assert set(first["pairs"][0]) == {"subject", "relation", "rel_count", "fact_count"}


@pytest.mark.parametrize("seed", range(40))
def test_random_fixture_properties(seed):
    rng = np.random.default_rng(seed)
    kg, triples, aliases, questions = random_audit_fixture(rng)
    assert len(kg.triples) <= 1000
    table = build_predicate_table(questions, kg)
    rep = compute_upperbounds(questions, kg, table)
    assert rep.noise_adjusted_upperbound <= rep.distribution_upperbound
    assert rep.answerable_count + rep.unanswerable_count + rep.unmentioned_subject_count == len(questions)
    for x in questions:
        iset = interpretation_set(x, kg, table)
        expected = brute_force_pairs(x, questions, triples, aliases)
        assert (iset is None) == (expected is None)
        if iset is not None:
            assert iset.pair_set() == expected
            if kg.has_pair(x.gold_subject, x.gold_relation):
                assert iset.gold_pair in iset
