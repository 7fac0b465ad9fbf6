import random

import pytest

from nestedrpq.errors import InconsistentKBError, ParseError
from nestedrpq.evaluator import Evaluator, answers_on_interpretation, eval_query
from nestedrpq.kb import NormalizedTBox, Role, make_abox, normalize_kb, parse_kb
from nestedrpq.query import (ConceptTest, NestedTest, compile_nre, parse_nre, parse_query,
                             single_atom_query)
from nestedrpq.reasoner import FiniteInterpretation
from nestedrpq.reductions.atm import ATMSpec, corpus, gen_atm_instance, parse_atm, simulate_atm
from nestedrpq.reductions.horn import (HornTheory, gen_horn_instance, horn_entails, parse_horn,
                                       random_horn)
from nestedrpq.reductions.prop import (ReductionPipeline, answer_via_reduction, nnfa_tbox,
                                       reduce_n2rpq_to_instance, translate_cn2rpq)


def kb(text):
    return normalize_kb(parse_kb(text))


# ---------------------------------------------------------------- test elimination

def test_concept_test_axiom():
    n = compile_nre(parse_nre("A?")).nnfa
    (s, _, d), = n.automaton(1).transitions
    t = nnfa_tbox(n, "0")
    assert (f"__s0_{d}", "A", f"__s0_{s}") in t.conj


def test_nested_test_becomes_concept_test():
    q = parse_query("q(x) <- <r>(x, x)")
    t, q2 = translate_cn2rpq(q)
    n = q.atoms[0].part.nnfa
    (s, _, d), = n.automaton(1).transitions
    sj = f"__s0_{n.initial(2)}"
    assert (f"__s0_{d}", sj, f"__s0_{s}") in t.conj
    labels = [l for _, l, _ in q2.atoms[0].part.nnfa.automaton(1).transitions]
    assert labels == [ConceptTest(sj)]


def test_no_tests_keeps_automaton():
    q = parse_query("q(x, y) <- (r . s-)(x, y)")
    t, q2 = translate_cn2rpq(q)
    assert not t.conj
    assert q2.atoms[0].part.nnfa.automaton(1).transitions == q.atoms[0].part.nnfa.automaton(1).transitions


def test_translation_size_polynomial():
    q = parse_query("q(x) <- (r . <s . <A?>>)*(x, y), <r- . B?>(y)")
    t, _ = translate_cn2rpq(q)
    bound = sum(len(a.transitions) + len(a.finals) for a in q.nnfas()[0].automata)
    bound += sum(len(a.transitions) + len(a.finals) for a in q.nnfas()[1].automata)
    assert t.axiom_count() <= bound


def test_translation_preserves_answers():
    q = parse_query("q(x) <- (r . <s . B?>)(x, y)")
    t, ab = kb("A <= exists s.B\nr(a, b)\nA(b)\nr(c, d)")
    t2, q2 = translate_cn2rpq(q)
    ev = Evaluator(t.union(t2), ab)
    assert ev.certain_answers(q2) == Evaluator(t, ab).certain_answers(q) == {("a",)}


def test_reduction_examples():
    e = parse_nre("p")
    assert answer_via_reduction(e, kb("p(a, b)"), "a", "b")
    assert not answer_via_reduction(e, kb("p(a, b)"), "b", "a")
    assert ReductionPipeline(e, kb("A(a)")).all_pairs() == set()
    assert answer_via_reduction(parse_nre("<r . B?>"), kb("A <= exists r.B\nA(a)"), "a", "a")
    assert answer_via_reduction(parse_nre("A?"), kb("A(a)"), "a", "a")


def test_reduction_target_names():
    t, mark, target = reduce_n2rpq_to_instance(parse_nre("p"))
    assert mark.startswith("__") and target.startswith("__s")
    assert any(r == Role("p") for r, _, _ in t.exists_lhs)


def test_reduction_rejects_inconsistent():
    with pytest.raises(InconsistentKBError):
        ReductionPipeline(parse_nre("p"), kb("A <= bot\nA(a)"))


def test_reduction_matches_eval_atom_on_edges():
    rng = random.Random(51)
    for _ in range(50):
        edges = [(rng.choice("pq"), rng.choice("abc"), rng.choice("abc")) for _ in range(rng.randint(0, 3))]
        ab = make_abox((), edges, ["a", "b", "c"])
        k = (NormalizedTBox(), ab)
        e = parse_nre(rng.choice(["p", "p-", "p . q", "(p | q)*", "<q> . p"]))
        ev = Evaluator(*k)
        part = compile_nre(e)
        pipe = ReductionPipeline(e, k)
        for x in "abc":
            for y in "abc":
                assert pipe.holds(x, y) == ev.eval_atom(part, x, y)


# ---------------------------------------------------------------- Horn

def horn_answer(h):
    ab, e, pair = gen_horn_instance(h)
    q = single_atom_query(e)
    return pair in answers_on_interpretation(q, FiniteInterpretation.from_abox(ab))


def test_horn_oracle():
    assert horn_entails(parse_horn("goal g\n-> g"))
    assert not horn_entails(parse_horn("goal g\ng -> g"))
    assert horn_entails(parse_horn("goal g\n-> a\na -> b\nb -> g"))


@pytest.mark.parametrize("text, expected", [
    ("goal g\ng -> g", False),
    ("goal g\ng -> g\n-> g", True),
    ("goal g\ng -> g\nh -> g\n-> h", True),
    ("goal g\na & b -> g\n-> a", False),
    ("goal g\na & b -> g\n-> a\n-> b", True),
])
def test_horn_generator_examples(text, expected):
    assert horn_answer(parse_horn(text)) == expected


def test_horn_inserts_goal_rule():
    h = HornTheory(frozenset({"g"}), (((), "g"),), "g")
    assert h.normalized().rules[0] == (("g",), "g")


def test_horn_chain_shape():
    ab, _, pair = gen_horn_instance(parse_horn("goal g\na -> g"))
    assert ("p_g", "e1_2", "e1_1") in ab.roles
    assert ("s", "e2_0", "f") in ab.roles
    assert ("t", "e1_0", "e1_2") in ab.roles
    assert ("t", "e1_0", "e2_2") in ab.roles
    assert not any(r == "t" and a == "e2_0" for r, a, _ in ab.roles)
    assert pair == ("e1_1", "f")


def test_horn_rejects_undeclared():
    with pytest.raises(ValueError):
        gen_horn_instance(HornTheory(frozenset({"g"}), (((), "x"),), "g"))


def test_horn_parse_errors():
    with pytest.raises(ParseError):
        parse_horn("a -> g")
    with pytest.raises(ParseError):
        parse_horn("goal g\na & -> g")


def test_horn_random():
    rng = random.Random(52)
    for _ in range(25):
        h = random_horn(rng, 4, 5)
        assert horn_answer(h) == horn_entails(h.normalized())


# ---------------------------------------------------------------- ATM

AND_MACHINE = """name: and
states: init c1 c2 z acc rej
universal: init
init: init
accept: acc
reject: rej
word: 11
delta1:
  init,0 -> c1,0,0
  init,1 -> c1,1,0
  init,b -> c1,b,0
delta2:
  init,0 -> c2,0,+1
  init,1 -> c2,1,+1
  init,b -> c2,b,+1
"""


def _with_checks(text):
    rows = []
    for a in "01b":
        rows.append(f"  c1,{a} -> " + ("z,b,+1" if a == "1" else f"rej,{a},0"))
        rows.append(f"  c2,{a} -> " + ("z,b,-1" if a == "1" else f"rej,{a},0"))
        rows.append(f"  z,{a} -> acc,b,0")
    body = "\n".join(rows) + "\n"
    return text.replace("delta2:\n", body + "delta2:\n") + body


def test_parse_atm_and_simulate():
    m = parse_atm(_with_checks(AND_MACHINE))
    assert m.universal == {"init"} and m.m == 2
    assert simulate_atm(m)
    m10 = parse_atm(_with_checks(AND_MACHINE).replace("word: 11", "word: 10"))
    assert not simulate_atm(m10)


def test_atm_format_round_trip():
    for m, _ in corpus():
        assert parse_atm(m.format()) == m


def test_atm_validation_names_assumption():
    with pytest.raises(ValueError, match=r"\(i\)"):
        parse_atm(_with_checks(AND_MACHINE).replace("init: init", "init: acc"))
    with pytest.raises(ValueError, match=r"\(iii\)"):
        parse_atm(_with_checks(AND_MACHINE).replace("  init,b -> c1,b,0\n", ""))


def test_simulator_rejects_leaving_tape():
    d = {(s, a): ("acc", "b", 1) for s in ("init",) for a in "01b"}
    m = ATMSpec(("init", "acc", "rej"), frozenset(), d, d, "init", "acc", "rej", "1")
    with pytest.raises(ValueError):
        simulate_atm(m)


def test_simulator_warns_on_non_blank_halt():
    d = {("init", a): ("acc", a, 0) for a in "01b"}
    m = ATMSpec(("init", "acc", "rej"), frozenset(), d, d, "init", "acc", "rej", "1")
    with pytest.warns(UserWarning):
        assert simulate_atm(m)


def test_corpus_expectations():
    cases = corpus()
    assert len(cases) >= 6
    assert any(m.universal for m, _ in cases)
    for m, expected in cases:
        assert simulate_atm(m) == expected, m.name
        assert m.m <= 2 and len(m.states) <= 6


def test_atm_test_automata_shape():
    m, _ = corpus()[2]
    _, q, _ = gen_atm_instance(m)
    n = q.atoms[0].part.nnfa
    for l in range(1, m.m + 1):
        a = n.automaton(l + 1)
        assert len(a.states) == 4
        assert a.initial == a.states[2] and a.finals == {a.states[3]}
    first = n.automaton(1)
    assert any(isinstance(lab, NestedTest) for _, lab, _ in first.transitions)


@pytest.mark.parametrize("variant, fragment", [("dl-lite", "dl-lite-core"), ("el", "el")])
def test_atm_kb_fragment(variant, fragment):
    m, _ = corpus()[0]
    k, q, a = gen_atm_instance(m, variant)
    assert k.fragment == fragment and a == "a" and q.boolean


@pytest.mark.parametrize("variant", ["dl-lite", "el"])
@pytest.mark.parametrize("index", [0, 1, 2, 3, 6])
def test_atm_small_cases(variant, index):
    m, expected = corpus()[index]
    k, q, _ = gen_atm_instance(m, variant)
    assert eval_query(q, k) == expected
