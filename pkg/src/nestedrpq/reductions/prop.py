"""Eliminating nested tests with fresh concept names.

Each state s of an automaton gets a name A_s meaning "a run from here in
state s can be completed". The axioms below force A_s wherever such a run
exists, so a nested test <j> can be replaced by the plain test A_{s_j}?
on the initial state s_j of α_j. With a single atom whose last step
tests a marker A_b placed on b, the whole question becomes one instance
check A_{s_0}(a).
"""

from __future__ import annotations

from ..errors import InconsistentKBError
from ..kb import KnowledgeBase, NormalizedABox, NormalizedTBox, Role, normalize_kb
from ..query import (CN2RPQ, NNFA, NRE, Automaton, ConceptAtom, ConceptTest, Concat,
                     ExistTestAtom, NestedTest, NNFAPart, NominalTest, RoleAtom, Sym, Test, Var,
                     compile_nre, eliminate_nominal_tests, reduce_part)
from ..reasoner import ABoxReasoner, SaturatedTBox

MARK = "__b"


def _sname(tag: str, s: int) -> str:
    return f"__s{tag}_{s}"


def nnfa_tbox(n: NNFA, tag: str, finals_of=None) -> NormalizedTBox:
    """The axioms forcing A_s for every automaton of n.

    `finals_of(j)` overrides the final states used for the ⊤ <= A_f axioms.
    """
    top, conj, lhs = set(), set(), set()
    for a in n.automata:
        fin = a.finals if finals_of is None else finals_of(a.index)
        top.update(_sname(tag, f) for f in fin)
        for s, lab, d in a.transitions:
            As, Ad = _sname(tag, s), _sname(tag, d)
            if isinstance(lab, Role):
                lhs.add((lab, Ad, As))
            elif isinstance(lab, ConceptTest):
                conj.add((Ad, lab.name, As))
            elif isinstance(lab, NestedTest):
                for j in lab.indices:
                    if len(lab.indices) != 1:
                        raise ValueError("reduce the NNFA first")
                    conj.add((Ad, _sname(tag, n.initial(j)), As))
            elif isinstance(lab, NominalTest):
                raise ValueError("nominal tests must be eliminated first")
    return NormalizedTBox(top=frozenset(top), conj=frozenset(conj), exists_lhs=frozenset(lhs))


def flatten_part(part: NNFAPart, tag: str) -> NNFAPart:
    """The part's own automaton with each <j> replaced by A_{s_j}?, as a one-automaton NNFA."""
    n = part.nnfa
    a = n.automaton(part.index)

    def swap(lab):
        if isinstance(lab, NestedTest):
            (j,) = lab.indices
            return ConceptTest(_sname(tag, n.initial(j)))
        return lab

    flat = NNFA([Automaton(1, a.states, a.initial, a.finals,
                           tuple((s, swap(l), d) for s, l, d in a.transitions))])
    return NNFAPart(flat, part.start, part.finals)


def translate_cn2rpq(q: CN2RPQ) -> tuple[NormalizedTBox, CN2RPQ]:
    """An ELI TBox T' and a query q' without nested tests, with the same answers."""
    for n in q.nnfas():
        for a in n.automata:
            if any(isinstance(l, NominalTest) for _, l, _ in a.transitions):
                raise ValueError("nominal tests must be eliminated first")
    t = NormalizedTBox()
    atoms = []
    for k, atom in enumerate(q.atoms):
        if isinstance(atom, ConceptAtom):
            atoms.append(atom)
            continue
        part = reduce_part(atom.part)
        tag = str(k)
        t = t.union(nnfa_tbox(part.nnfa, tag))
        flat = flatten_part(part, tag)
        if isinstance(atom, RoleAtom):
            atoms.append(RoleAtom(flat, atom.left, atom.right))
        else:
            atoms.append(ExistTestAtom(flat, atom.term))
    return t, CN2RPQ(q.answer_vars, tuple(atoms), q.name)


def reduce_n2rpq_to_instance(e: NRE) -> tuple[NormalizedTBox, str, str]:
    """(T', marker name A_b, target name A_{s_0}) for the expression e.

    (a, b) answers e over <T, A> iff <T ∪ T', A ∪ {A_b(b)}> entails A_{s_0}(a).
    """
    part = compile_nre(Test(Concat(e, Sym(ConceptTest(MARK)))))
    n = part.nnfa
    t = nnfa_tbox(n, "")
    return t, MARK, _sname("", part.start)


class ReductionPipeline:
    """Answers one N2RPQ on named pairs by instance checking; the TBox is saturated once."""

    def __init__(self, e: NRE, kb):
        if isinstance(kb, KnowledgeBase):
            t, a = normalize_kb(kb)
        else:
            t, a = kb
        e2, ext = _nominals_out(e)
        self.abox: NormalizedABox = a.extend(concepts=ext)
        t2, self.mark, self.target = reduce_n2rpq_to_instance(e2)
        self.sat = SaturatedTBox(t.union(t2))
        base = ABoxReasoner(SaturatedTBox(t), self.abox)
        if not base.consistent:
            raise InconsistentKBError("the reduction needs a consistent KB")
        self.inds = sorted(self.abox.inds)
        self._cache: dict = {}

    def answers_to(self, b: str) -> frozenset:
        """All a with (a, b) in the answers."""
        hit = self._cache.get(b)
        if hit is None:
            ar = ABoxReasoner(self.sat, self.abox.extend(concepts=[(self.mark, b)]))
            hit = frozenset(a for a in ar.inds if self.target in ar.type_of(a))
            self._cache[b] = hit
        return hit

    def holds(self, a: str, b: str) -> bool:
        return a in self.answers_to(b)

    def all_pairs(self) -> set[tuple]:
        return {(a, b) for b in self.inds for a in self.answers_to(b)}


def _nominals_out(e: NRE):
    q = CN2RPQ((), (RoleAtom(compile_nre(e), Var("x"), Var("y"), e),))
    q2, ext = eliminate_nominal_tests(q)
    return q2.atoms[0].nre, ext


def answer_via_reduction(e: NRE, kb, a: str, b: str) -> bool:
    return ReductionPipeline(e, kb).holds(a, b)
