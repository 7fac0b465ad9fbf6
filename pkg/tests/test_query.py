import random

import pytest

from nestedrpq.errors import ParseError
from nestedrpq.evaluator import eval_on_interpretation
from nestedrpq.kb import Role
from nestedrpq.oracles import nre_pairs, random_graph, random_nre
from nestedrpq.query import (NNFA, Automaton, ConceptAtom, ConceptTest, Ind, NestedTest, NNFAPart,
                             NominalTest, RoleAtom, Var, compile_nre, eliminate_nominal_tests,
                             format_nre, format_query, level_of, parse_nre, parse_query,
                             part_to_nre, reduce_nnfa)


def test_parse_advisor_query():
    q = parse_query("q(x,y) <- (advisor . <wrote . topic . Physics?>)* (x,y)")
    assert q.answer_vars == (Var("x"), Var("y"))
    (a,) = q.atoms
    assert isinstance(a, RoleAtom) and (a.left, a.right) == (Var("x"), Var("y"))
    n = a.part.nnfa
    assert len(n) == 2
    assert any(isinstance(l, NestedTest) for _, l, _ in n.automaton(1).transitions)


def test_parse_boolean_concept_query():
    q = parse_query("q() <- B(y)")
    assert q.boolean
    assert q.atoms == (ConceptAtom("B", Var("y")),)
    assert q.existential_vars() == {Var("y")}


def test_parse_self_loop():
    q = parse_query("q(x) <- p*(x,x)")
    (a,) = q.atoms
    assert a.left == a.right == Var("x")


def test_parse_individuals():
    q = parse_query("q() <- r('a', y), A('b')")
    assert q.individuals() == {"a", "b"}


@pytest.mark.parametrize("text", [
    "q(x) <- B(y)",            # answer variable unused
    "q(x, x) <- r(x, y)",      # repeated answer variable
    "q(x) <- r(x, y",          # unbalanced
    "q(x) <- r-(x)",           # one-term atom that is not a name or test
])
def test_query_errors(text):
    with pytest.raises(ParseError):
        parse_query(text)


def test_compile_single_symbol():
    p = compile_nre(parse_nre("p"))
    (a,) = p.nnfa.automata
    assert len(a.states) == 2 and len(a.transitions) == 1
    (s, lab, f) = a.transitions[0]
    assert lab == Role("p") and s == p.start and p.finals == {f}


def test_compile_test():
    p = compile_nre(parse_nre("<q>"))
    n = p.nnfa
    assert len(n) == 2
    assert [l for _, l, _ in n.automaton(1).transitions] == [NestedTest((2,))]
    assert [l for _, l, _ in n.automaton(2).transitions] == [Role("q")]


def test_compile_index_order():
    n = compile_nre(parse_nre("p . <q . <t>>")).nnfa
    assert len(n) == 3
    for a in n.automata:
        for _, l, _ in a.transitions:
            if isinstance(l, NestedTest):
                assert all(j > a.index for j in l.indices)


def test_compiled_language_matches_semantics():
    rng = random.Random(5)
    for _ in range(40):
        e = random_nre(rng, 6)
        p = compile_nre(e)
        for _ in range(5):
            g = random_graph(rng, 5)
            assert eval_on_interpretation(p, g) == nre_pairs(e, g), format_nre(e)


def _multi_test_nnfa():
    a1 = Automaton(1, (0, 1), 0, frozenset([1]), ((0, NestedTest((2, 3, 4)), 1),))
    a2 = Automaton(2, (2, 3), 2, frozenset([3]), ((2, Role("p"), 3),))
    a3 = Automaton(3, (4, 5), 4, frozenset([5]), ((4, ConceptTest("A"), 5),))
    a4 = Automaton(4, (6, 7), 6, frozenset([7]), ((6, Role("q", True), 7),))
    return NNFA([a1, a2, a3, a4])


def test_reduce_chains_tests():
    n = NNFA([Automaton(1, (0, 1), 0, frozenset([1]), ((0, NestedTest((2, 3)), 1),)),
              Automaton(2, (2,), 2, frozenset([2]), ()),
              Automaton(3, (3,), 3, frozenset([3]), ())])
    r = reduce_nnfa(n)
    assert r.reduced
    (m,) = set(r.states_of(1)) - {0, 1}
    assert set(r.automaton(1).transitions) == {(0, NestedTest((2,)), m), (m, NestedTest((3,)), 1)}


def test_reduce_identity_on_reduced():
    n = compile_nre(parse_nre("p . <q>")).nnfa
    assert reduce_nnfa(n) is n


def test_reduce_preserves_language():
    n = _multi_test_nnfa()
    r = reduce_nnfa(n)
    assert r.state_count() <= n.state_count() + 2
    rng = random.Random(2)
    for _ in range(50):
        g = random_graph(rng, 6, roles=("p", "q"))
        assert eval_on_interpretation(NNFAPart(n, 0, frozenset([1])), g) == \
            eval_on_interpretation(NNFAPart(r, 0, frozenset([1])), g)


def test_levels():
    assert level_of(compile_nre(parse_nre("p")).nnfa) == {1: 0}
    assert level_of(compile_nre(parse_nre("p . <q>")).nnfa) == {1: 1, 2: 0}
    assert level_of(compile_nre(parse_nre("<<t>>")).nnfa) == {1: 2, 2: 1, 3: 0}


def test_nominal_elimination():
    q = parse_query("q(x) <- (r . {usa}? . s . {usa}?)(x, y)")
    q2, ext = eliminate_nominal_tests(q)
    assert ext == [("__o_usa", "usa")]
    labels = [l for a in q2.atoms[0].part.nnfa.automata for _, l, _ in a.transitions]
    assert ConceptTest("__o_usa") in labels
    assert not any(isinstance(l, NominalTest) for l in labels)


def test_nominal_elimination_identity():
    q = parse_query("q(x) <- r(x, y)")
    q2, ext = eliminate_nominal_tests(q)
    assert ext == [] and q2 == q


def test_part_to_nre_round_trip():
    rng = random.Random(8)
    for _ in range(30):
        e = random_nre(rng, 5)
        p = compile_nre(e)
        back = part_to_nre(p)
        g = random_graph(rng, 5)
        if back is None:
            assert not eval_on_interpretation(p, g)
        else:
            assert nre_pairs(back, g) == nre_pairs(e, g)


def test_format_query_round_trip():
    text = "q(x) <- (r . <s- . A?>)*(x, y), B(y), <r>('a')"
    q = parse_query(text)
    again = parse_query(format_query(q))
    assert format_query(again) == format_query(q)
    assert again.atoms[2].term == Ind("a")
