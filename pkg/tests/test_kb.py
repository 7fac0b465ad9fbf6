import itertools
import random

import pytest

from nestedrpq.errors import FragmentError, ParseError
from nestedrpq.kb import (BOT, TOP, And, ConceptAssertion, ConceptInclusion, DisjointRoles, Exists,
                          KnowledgeBase, Name, Role, RoleAssertion, RoleInclusion,
                          format_kb, normalize, normalize_kb, parse_kb, sub_concept_occurrences)
from nestedrpq.oracles import chase_entails
from nestedrpq.reasoner import SaturatedTBox


def test_parse_concept_inclusion():
    kb = parse_kb("A <= exists r.B")
    assert kb.tbox == (ConceptInclusion(Name("A"), Exists(Role("r"), Name("B"))),)


def test_parse_inverse_role_inclusion():
    kb = parse_kb("r- <= s")
    assert kb.tbox == (RoleInclusion(Role("r", True), Role("s")),)


def test_fragment_violation_names_axiom():
    with pytest.raises(FragmentError, match="r <= s"):
        parse_kb("fragment dl-lite-core\nr <= s\n")


def test_parse_error_has_position():
    with pytest.raises(ParseError) as e:
        parse_kb("A <= exists r.\n")
    assert e.value.line == 1


def test_reserved_prefix_rejected():
    with pytest.raises(ParseError):
        parse_kb("__n1 <= A")


def test_abox_and_comments():
    kb = parse_kb("# people\nA(a)\n\nr(a, b)  # edge\n")
    assert ConceptAssertion(Name("A"), "a") in kb.abox
    assert RoleAssertion(Role("r"), "a", "b") in kb.abox
    assert kb.individuals() == {"a", "b"}


def test_disjoint_roles_unordered():
    assert DisjointRoles(Role("r"), Role("s")) == DisjointRoles(Role("s"), Role("r"))
    kb = parse_kb("r & s <= bot")
    assert kb.tbox == (DisjointRoles(Role("s"), Role("r")),)


def test_inverse_involution():
    r = Role("r")
    assert r.inverse().inverse() == r


def test_round_trip():
    text = """fragment elhi-bot
A & B <= exists r-.(C & D)
exists s.top <= bot
top <= E
r <= s-
r & s <= bot
A(a)
(exists r.B)(b)
r(a, b)
"""
    kb = parse_kb(text)
    assert parse_kb(format_kb(kb)) == kb


def test_normalize_exists_conjunction():
    t, _ = normalize([ConceptInclusion(Name("A"), Exists(Role("r"), And(Name("B"), Name("C"))))])
    assert len(t.exists_rhs) == 1
    a, r, x = next(iter(t.exists_rhs))
    assert (a, r) == ("A", Role("r")) and x.startswith("__n")
    assert t.conj == {(x, x, "B"), (x, x, "C")}


def test_normalize_lhs_exists_conjunction():
    t, _ = normalize([ConceptInclusion(Exists(Role("r"), And(Name("B"), Name("C"))), Name("A"))])
    assert len(t.conj) == 1 and len(t.exists_lhs) == 1
    b1, b2, x = next(iter(t.conj))
    assert {b1, b2} == {"B", "C"}
    assert t.exists_lhs == {(Role("r"), x, "A")}


def test_normalize_complex_assertion():
    t, a = normalize([], [ConceptAssertion(Exists(Role("r"), Name("B")), "a")])
    (x, ind), = a.concepts
    assert ind == "a" and x.startswith("__n")
    assert t.exists_rhs == {(x, Role("r"), "B")}


def test_normalized_size_bound():
    rng = random.Random(4)
    names = [Name(n) for n in "ABC"]
    for _ in range(50):
        def concept(d):
            k = rng.random()
            if d == 0 or k < 0.4:
                return rng.choice(names + [TOP])
            if k < 0.7:
                return Exists(Role(rng.choice("rs"), rng.random() < 0.3), concept(d - 1))
            return And(concept(d - 1), concept(d - 1))
        tbox = [ConceptInclusion(concept(2), rng.choice([concept(2), BOT])) for _ in range(3)]
        t, _ = normalize(tbox)
        assert t.axiom_count() <= 4 * sub_concept_occurrences(tbox)


def _ext(c, dom, conc, rel):
    if c is TOP:
        return set(dom)
    if c is BOT:
        return set()
    if isinstance(c, Name):
        return conc.get(c.name, set())
    if isinstance(c, And):
        return _ext(c.left, dom, conc, rel) & _ext(c.right, dom, conc, rel)
    inner = _ext(c.filler, dom, conc, rel)
    pairs = rel.get(c.role.name, set())
    if c.role.inverted:
        pairs = {(b, a) for a, b in pairs}
    return {a for a, b in pairs if b in inner}


def _surface_countermodels(tbox, names, roles, size):
    """Pairs (c, d) refuted by some model of the surface TBox with `size` objects."""
    dom = list(range(size))
    cells = [(n, o) for n in names for o in dom]
    edges = [(r, a, b) for r in roles for a in dom for b in dom]
    refuted = set()
    for cb in itertools.product((0, 1), repeat=len(cells)):
        conc: dict = {}
        for bit, (n, o) in zip(cb, cells):
            if bit:
                conc.setdefault(n, set()).add(o)
        for rb in itertools.product((0, 1), repeat=len(edges)):
            rel: dict = {}
            for bit, (r, a, b) in zip(rb, edges):
                if bit:
                    rel.setdefault(r, set()).add((a, b))
            if all(_ext(ax.lhs, dom, conc, rel) <= _ext(ax.rhs, dom, conc, rel) for ax in tbox):
                for c in names:
                    for d in names:
                        if conc.get(c, set()) - conc.get(d, set()):
                            refuted.add((c, d))
    return refuted


def test_normalization_conservative():
    """Subsumptions over the input signature agree before and after normalizing."""
    rng = random.Random(9)
    names = ["A", "B", "C"]
    for _ in range(12):
        def concept(d):
            if d == 0 or rng.random() < 0.5:
                return Name(rng.choice(names))
            if rng.random() < 0.6:
                return Exists(Role("r", rng.random() < 0.3), concept(d - 1))
            return And(concept(d - 1), concept(d - 1))
        tbox = [ConceptInclusion(concept(2), concept(1)) for _ in range(2)]
        t, _ = normalize(tbox)
        sat = SaturatedTBox(t)
        refuted = _surface_countermodels(tbox, names, ["r"], 1) | _surface_countermodels(tbox, names, ["r"], 2)
        for c in names:
            for d in names:
                got = sat.entails_subsumption([c], [d])
                if (c, d) in refuted:
                    assert not got
                if chase_entails(t, [c], d, 4):
                    assert got


def test_normalize_kb_checks_fragment():
    kb = KnowledgeBase((RoleInclusion(Role("r"), Role("s")),), (), "el")
    with pytest.raises(FragmentError):
        normalize_kb(kb)
