import random

import pytest

from nestedrpq.errors import InconsistentKBError
from nestedrpq.evaluator import (Evaluator, answers_on_interpretation, certain_answers, eval_atom,
                                 eval_on_interpretation, eval_query)
from nestedrpq.kb import NormalizedTBox, make_abox, normalize_kb, parse_kb
from nestedrpq.oracles import existential_depth, random_abox, random_query, random_tbox
from nestedrpq.query import compile_nre, parse_nre, parse_query
from nestedrpq.reasoner import ABoxReasoner, FiniteInterpretation, SaturatedTBox, materialize_canonical


def kb(text):
    return normalize_kb(parse_kb(text))


def graph(text):
    return FiniteInterpretation.from_abox(kb(text)[1])


def part(text):
    return compile_nre(parse_nre(text))


def test_eval_atom_named_step():
    assert eval_atom(part("r"), kb("r(a, b)"), "a", "b")
    assert not eval_atom(part("r"), kb("r(a, b)"), "b", "a")


def test_eval_atom_anon_via_floop():
    k = kb("A <= exists r.B\nA(a)")
    assert eval_atom(part("r"), k, "a")
    assert not eval_atom(part("r"), kb("A(a)"), "a")


def test_eval_atom_self_test():
    assert eval_atom(part("<r . B?>"), kb("A <= exists r.B\nA(a)"), "a", "a")


def test_eval_atom_inconsistent():
    with pytest.raises(InconsistentKBError):
        eval_atom(part("r"), kb("A <= bot\nA(a)"), "a", "a")


def test_eval_query_examples():
    assert eval_query(parse_query("q() <- Z(y)"), kb("A <= bot\nA(a)"))
    assert eval_query(parse_query("q() <- B(y)"), kb("A <= exists r.B\nA(a)"))
    assert not eval_query(parse_query("q() <- B(y)"), kb(""))


def test_eval_query_needs_boolean():
    with pytest.raises(ValueError):
        eval_query(parse_query("q(x) <- B(x)"), kb("B(a)"))


def test_advisor_answers():
    k = kb("advisor(a, b)\nwrote(b, t)\ntopic(t, ph)\nPhysics(ph)")
    q = parse_query("q(x,y) <- (advisor . <wrote . topic . Physics?>)*(x,y)")
    got = certain_answers(q, k)
    assert ("a", "b") in got
    assert {(x, x) for x in "a b t ph".split()} <= got
    assert got == answers_on_interpretation(q, FiniteInterpretation.from_abox(k[1]))


def test_empty_abox_no_answers():
    assert certain_answers(parse_query("q(x) <- A(x)"), kb("B <= A")) == set()


def test_inconsistent_all_tuples():
    got = certain_answers(parse_query("q(x) <- Z(x)"), kb("A <= bot\nA(a)\nB(b)"))
    assert got == {("a",), ("b",)}


def test_interpretation_examples():
    assert eval_on_interpretation(part("p*"), graph("p(a, b)")) == {("a", "a"), ("b", "b"), ("a", "b")}
    assert eval_on_interpretation(part("p . <q>"), graph("p(a, b)\nq(b, c)")) == {("a", "b")}
    assert ("b", "a") in eval_on_interpretation(part("p-"), graph("p(a, b)"))


def test_answers_on_interpretation_examples():
    g = graph("p(a, b)\nq(b, c)")
    assert answers_on_interpretation(parse_query("q(x) <- p(x, y), q(y, z)"), g) == {("a",)}
    assert answers_on_interpretation(parse_query("q(x, y) <- p*(x, y)"), graph("p(a, b)")) == \
        {("a", "a"), ("b", "b"), ("a", "b")}
    assert answers_on_interpretation(parse_query("q() <- Z(x)"), g) == set()


def test_query_individuals_outside_abox():
    q = parse_query("q() <- r*('c', 'c')")
    assert eval_query(q, kb("A(a)"))


def test_nominal_test():
    q = parse_query("q(x) <- (r . {b}?)(x, y)")
    assert certain_answers(q, kb("r(a, b)\nr(a, c)\nr(c, c)")) == {("a",)}


def _random_kbs(seed, count):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        t = random_tbox(rng, rng.randint(1, 8))
        ab = random_abox(rng, rng.randint(1, 5))
        if ABoxReasoner(SaturatedTBox(t), ab).consistent:
            out.append((rng, t, ab))
    return out


def test_memo_transparent():
    for rng, t, ab in _random_kbs(41, 25):
        q = random_query(rng, 2, 2)
        assert certain_answers(q, (t, ab), memo=True) == certain_answers(q, (t, ab), memo=False)


def test_step_bound_respected():
    for rng, t, ab in _random_kbs(42, 25):
        q = random_query(rng, 2, 2)
        ev = Evaluator(t, ab, q.individuals())
        ev.certain_answers(q)
        assert ev.stats.longest <= ev.stats.bound_at_longest


def test_materialization_answers_are_certain():
    for rng, t, ab in _random_kbs(43, 30):
        q = random_query(rng, 2, 2)
        got = certain_answers(q, (t, ab))
        sat = SaturatedTBox(t)
        inds = set(ab.inds) | q.individuals()
        for d in range(4):
            i = materialize_canonical(sat, ab, d, q.individuals())
            found = {tup for tup in answers_on_interpretation(q, i) if set(tup) <= inds}
            assert found <= got


def test_acyclic_answers_found_at_chain_depth():
    checked = 0
    for rng, t, ab in _random_kbs(44, 40):
        sat = SaturatedTBox(t)
        ar = ABoxReasoner(sat, ab)
        d = existential_depth(sat, [ar.type_of(a) for a in ar.inds])
        if d is None:
            continue
        q = random_query(rng, 2, 2)
        got = certain_answers(q, (t, ab))
        i = materialize_canonical(sat, ab, d, q.individuals())
        inds = set(ab.inds) | q.individuals()
        assert {tup for tup in answers_on_interpretation(q, i) if set(tup) <= inds} == got
        checked += 1
    assert checked >= 10


def test_empty_tbox_matches_graph_engine():
    rng = random.Random(45)
    for _ in range(30):
        ab = random_abox(rng, rng.randint(1, 6))
        q = random_query(rng, 3, 2)
        assert certain_answers(q, (NormalizedTBox(), ab)) == \
            answers_on_interpretation(q, FiniteInterpretation.from_abox(ab))


def test_reflexive_concept_test():
    ab = make_abox([("A", "a")], (), ["a"])
    assert certain_answers(parse_query("q(x) <- A?(x, x)"), (NormalizedTBox(), ab)) == {("a",)}


def test_semi_join_matches_per_start_search():
    t, _ = kb("A <= exists r.B")
    inds = [f"a{k}" for k in range(30)]
    ab = make_abox([("A", inds[k]) for k in range(0, 30, 7)] + [("C", "a20")],
                   [("r", inds[k], inds[k + 1]) for k in range(29)], inds)
    for text in ["q(x) <- r*(x, y), C(y)", "q(x) <- (r . r)*(x, y), A(y), C(y)", "q(x) <- r(x, y)"]:
        q = parse_query(text)
        assert Evaluator(t, ab).certain_answers(q) == Evaluator(t, ab, memo=False).certain_answers(q)
    got = Evaluator(t, ab).certain_answers(parse_query("q(x) <- r*(x, y), C(y)"))
    assert got == {(f"a{k}",) for k in range(21)}
