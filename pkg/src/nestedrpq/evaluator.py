"""Query evaluation over KBs and over finite interpretations.

Over a KB, an atom is evaluated by a search over pairs (individual, state).
A step either follows a transition between named individuals, or jumps
from (c, s) to (c, s') when the anonymous tree below c admits a partial
run from s back to s' (a Loop tuple). Nested tests at c are discharged
through the set Γ_c of states whose own automaton accepts starting at c.
A search towards `anon` stops when the rest of the run fits below the
current individual (an FLoop tuple).
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .errors import InconsistentKBError, InvariantError
from .kb import KnowledgeBase, NormalizedABox, NormalizedTBox, Role, normalize_kb
from .loops import LoopTables
from .query import (CN2RPQ, NNFA, ConceptAtom, ConceptTest, ExistTestAtom, Ind,
                    NestedTest, NNFAPart, NominalTest, RoleAtom, Var,
                    eliminate_nominal_tests, reduce_part)
from .reasoner import ABoxReasoner, FiniteInterpretation, SaturatedTBox
from .rewriter import Rewriter

ANON = None


@dataclass
class Reach:
    """What a search from one start individual accepts."""

    named: frozenset
    anon: bool
    longest: int = 0   # longest shortest-path among accepted nodes
    bound: int = 0


@dataclass
class EvalStats:
    searches: int = 0
    longest: int = 0
    bound_at_longest: int = 0
    rewritten: int = 0
    timings: dict = field(default_factory=dict)


class Evaluator:
    """Certain answers over a consistent or inconsistent normalized KB."""

    def __init__(self, t: NormalizedTBox, abox: NormalizedABox, extra_inds: Iterable[str] = (),
                 memo: bool = True):
        self.tbox = t
        self.abox = abox
        self.memo = memo
        self.sat = SaturatedTBox(t)
        self.ar = ABoxReasoner(self.sat, abox, extra_inds)
        self.inds = sorted(self.ar.inds)
        self.consistent = self.ar.consistent
        self.tables = LoopTables(t)
        self._rewriter: Rewriter | None = None
        self._loop_rel: dict = {}
        self._floop: dict = {}
        self._good: dict = {}
        self._preds: dict = {}
        self._starts: dict = {}
        self._reach: dict = {}
        self._at: dict = {}
        self.stats = EvalStats()

    @property
    def rewriter(self) -> Rewriter:
        if self._rewriter is None:
            self._rewriter = Rewriter(self.tbox, self.tables)
        return self._rewriter

    def type_of(self, c: str) -> frozenset:
        return self.ar.type_of(c)

    # ------------------------------------------------------------ tables

    def _loops_at(self, n: NNFA, i: int, c: frozenset, gamma: frozenset) -> dict:
        """s1 -> {s2 : (C, s1, s2, Γ) in Loop} over automaton i."""
        key = (n.uid, i, c, gamma)
        rel = self._loop_rel.get(key)
        if rel is None:
            rel = {s: set() for s in n.states_of(i)}
            for s2 in n.states_of(i):
                for s1 in self.tables.loop_sources(n, c, s2, gamma):
                    rel[s1].add(s2)
            self._loop_rel[key] = rel
        return rel

    def _floops_at(self, n: NNFA, c: frozenset, finals: frozenset, gamma: frozenset) -> frozenset:
        key = (n.uid, c, finals, gamma)
        hit = self._floop.get(key)
        if hit is None:
            hit = self.tables.floop_sources(n, c, finals, gamma)
            self._floop[key] = hit
        return hit

    def _gamma(self, n: NNFA, i: int, c: str) -> frozenset:
        """Γ_c for focus automaton i: states u of referenced automata with
        evalatom(A_{u,F_k}, (c, anon)) = yes."""
        out = set()
        for k in sorted(n.referenced(i)):
            if self.memo:
                out |= self._good_states(n, k).get(c, frozenset())
            else:
                fk = n.finals(k)
                for u in n.states_of(k):
                    if self._search(NNFAPart(n, u, fk), c).anon:
                        out.add(u)
        return frozenset(out)

    def _good_states(self, n: NNFA, k: int, finals: frozenset | None = None) -> dict:
        """c -> states u of α_k from which a run starting at c reaches
        `finals` (default F_k) somewhere in the anonymous part.

        A backward fixpoint over (individual, state) pairs, shared by every
        start state and every start individual.
        """
        fk = n.finals(k) if finals is None else frozenset(finals)
        key = (n.uid, k, fk)
        hit = self._good.get(key)
        if hit is not None:
            return hit
        seeds = []
        for c in self.inds:
            gam = self._gamma(n, k, c)
            seeds += [(c, u) for u in self._floops_at(n, self.type_of(c), fk, gam)]
        res = self._close_back(n, k, seeds)
        self._good[key] = res
        return res

    def _pred(self, n: NNFA, k: int) -> dict:
        """The moves of α_k between (individual, state) pairs, reversed."""
        key = (n.uid, k)
        pred = self._preds.get(key)
        if pred is None:
            pred = {}
            for c in self.inds:
                gam = self._gamma(n, k, c)
                for u, succ in self._successors(n, k, c, self.type_of(c), gam):
                    pred.setdefault(succ, []).append((c, u))
            self._preds[key] = pred
        return pred

    def _close_back(self, n: NNFA, k: int, seeds) -> dict:
        """c -> states u such that (c, u) reaches a seed."""
        pred = self._pred(n, k)
        good = set(seeds)
        work = list(good)
        while work:
            for p in pred.get(work.pop(), ()):
                if p not in good:
                    good.add(p)
                    work.append(p)
        out: dict = {}
        for c, u in good:
            out.setdefault(c, set()).add(u)
        return {c: frozenset(s) for c, s in out.items()}

    def _successors(self, n: NNFA, i: int, c: str, tc: frozenset, gam: frozenset):
        """All moves (u, (d, u')) out of individual c in automaton i."""
        loops = self._loops_at(n, i, tc, gam)
        for u in n.states_of(i):
            for lab, v in n.out[u]:
                if isinstance(lab, Role):
                    for d in self.ar.successors(lab, c):
                        yield u, (d, v)
                elif isinstance(lab, ConceptTest):
                    if lab.name in tc:
                        yield u, (c, v)
                elif isinstance(lab, NominalTest):
                    raise ValueError("nominal tests must be eliminated first")
            for v in loops[u]:
                if v != u:
                    yield u, (c, v)

    # ------------------------------------------------------------ search

    def _search(self, part: NNFAPart, a: str) -> Reach:
        key = (part.key(), a)
        if self.memo:
            hit = self._reach.get(key)
            if hit is not None:
                return hit
        n = part.nnfa
        i = part.index
        finals = frozenset(part.finals)
        bound = len(self.inds) * len(n.states_of(i)) + 1
        info: dict = self._at.setdefault((n.uid, i, finals), {}) if self.memo else {}

        def at(c):
            got = info.get(c)
            if got is None:
                tc = self.type_of(c)
                gam = self._gamma(n, i, c)
                loops = self._loops_at(n, i, tc, gam)
                fl = self._floops_at(n, tc, finals, gam) if finals else frozenset()
                got = info[c] = (tc, loops, fl)
            return got

        start = (a, part.start)
        dist = {start: 0}
        queue = deque([start])
        named: dict = {}
        anon = False
        longest = 0
        while queue:
            c, u = queue.popleft()
            d0 = dist[(c, u)]
            tc, loops, fl = at(c)
            if u in finals and c not in named:
                named[c] = d0
                longest = max(longest, d0)
            if u in fl and not anon:
                anon = True
                longest = max(longest, d0)
            nxt = []
            for lab, v in n.out[u]:
                if isinstance(lab, Role):
                    nxt += [(d, v) for d in self.ar.successors(lab, c)]
                elif isinstance(lab, ConceptTest):
                    if lab.name in tc:
                        nxt.append((c, v))
                elif isinstance(lab, NominalTest):
                    raise ValueError("nominal tests must be eliminated first")
            nxt += [(c, v) for v in loops[u]]
            for node in nxt:
                if node not in dist:
                    dist[node] = d0 + 1
                    queue.append(node)
        if longest > bound:
            raise InvariantError(f"accepted search path of length {longest} exceeds the bound {bound}")
        self.stats.searches += 1
        if longest > self.stats.longest:
            self.stats.longest = longest
            self.stats.bound_at_longest = bound
        res = Reach(frozenset(named), anon, longest, bound)
        if self.memo:
            self._reach[key] = res
        return res

    def eval_atom(self, part: NNFAPart, a: str, b: str | None = ANON) -> bool:
        """Decide (a, b) in the atom's answers; b = ANON asks for any end point."""
        if not self.consistent:
            raise InconsistentKBError("eval_atom needs a consistent KB")
        part = reduce_part(part)
        if a not in self.ar.inds:
            return False
        r = self._search(part, a)
        return r.anon if b is ANON else b in r.named

    def _anon_ok(self, part: NNFAPart, c: str) -> bool:
        if not self.memo:
            return self.reach(part, c).anon
        part = reduce_part(part)
        good = self._good_states(part.nnfa, part.index, frozenset(part.finals))
        return part.start in good.get(c, ())

    def _starts_to(self, part: NNFAPart, names: frozenset) -> frozenset:
        """Individuals c with (c, d) an answer of the part for some d whose
        type contains `names`; one backward pass for all c."""
        part = reduce_part(part)
        key = (part.key(), names)
        hit = self._starts.get(key)
        if hit is None:
            ends = [d for d in self.inds if names <= self.type_of(d)]
            seeds = [(d, f) for d in ends for f in part.finals]
            res = self._close_back(part.nnfa, part.index, seeds)
            hit = frozenset(c for c, st in res.items() if part.start in st)
            self._starts[key] = hit
        return hit

    def reach(self, part: NNFAPart, a: str) -> Reach:
        return self._search(reduce_part(part), a)

    # ------------------------------------------------------------ queries

    def _matches(self, q: CN2RPQ, first_only: bool):
        inds = self.inds
        atoms = _semi_joins(q) if self.memo else list(q.atoms)

        def val(t, env):
            return t.name if isinstance(t, Ind) else env.get(t)

        def rank(a, env):
            free = sum(1 for t in a.terms() if val(t, env) is None)
            return (free, 0 if isinstance(a, ConceptAtom) else 1)

        def go(rest, env):
            if not rest:
                yield env
                return
            rest = sorted(rest, key=lambda a: rank(a, env))
            a, others = rest[0], rest[1:]
            if isinstance(a, ConceptAtom):
                v = val(a.term, env)
                cands = [v] if v is not None else inds
                for c in cands:
                    if a.name in self.type_of(c):
                        yield from go(others, _bind(env, a.term, c))
            elif isinstance(a, _SemiJoin):
                v = val(a.left, env)
                cands = [v] if v is not None else inds
                starts = self._starts_to(a.atom.part, a.names)
                for c in cands:
                    if c in starts:
                        yield from go(others, _bind(env, a.left, c))
            elif isinstance(a, ExistTestAtom):
                v = val(a.term, env)
                cands = [v] if v is not None else inds
                for c in cands:
                    if c in self.ar.inds and self._anon_ok(a.part, c):
                        yield from go(others, _bind(env, a.term, c))
            else:
                lv, rv = val(a.left, env), val(a.right, env)
                lefts = [lv] if lv is not None else inds
                for c in lefts:
                    if c not in self.ar.inds:
                        continue
                    ends = self.reach(a.part, c).named
                    if rv is not None:
                        if rv in ends:
                            yield from go(others, _bind(env, a.left, c))
                    else:
                        e1 = _bind(env, a.left, c)
                        for d in sorted(ends):
                            e2 = _bind(e1, a.right, d)
                            if e2 is not None:
                                yield from go(others, e2)

        yield from (e for e in go(atoms, {}) if e is not None)

    def eval_query(self, q: CN2RPQ) -> bool:
        """Entailment of a Boolean query (answer variables must be absent)."""
        if q.answer_vars:
            raise ValueError("eval_query expects a Boolean query")
        if not self.consistent:
            return True
        for q2 in self.rewriter.rewrite(q):
            for _ in self._matches(q2, True):
                return True
        return False

    def certain_answers(self, q: CN2RPQ, rewritten: list | None = None) -> set[tuple]:
        names = sorted(self.ar.inds)
        k = len(q.answer_vars)
        if not self.consistent:
            return set(itertools.product(names, repeat=k))
        qs = rewritten if rewritten is not None else self.rewriter.rewrite(q)
        self.stats.rewritten = len(qs)
        out: set[tuple] = set()
        for q2 in qs:
            for env in self._matches(q2, False):
                out.add(tuple(env[v] for v in q.answer_vars))
                if not k:
                    return out
        return out


@dataclass(frozen=True)
class _SemiJoin:
    """A role atom whose right variable is used nowhere else except in
    concept atoms; only the left end matters."""

    atom: RoleAtom
    names: frozenset

    @property
    def left(self):
        return self.atom.left

    def terms(self) -> tuple:
        return (self.atom.left,)


def _semi_joins(q: CN2RPQ) -> list:
    atoms = list(q.atoms)
    for v in sorted(q.existential_vars(), key=lambda x: x.name):
        occ = [a for a in atoms if v in a.terms()]
        roles = [a for a in occ if isinstance(a, RoleAtom)]
        if len(roles) != 1 or roles[0].right != v or roles[0].left == v:
            continue
        rest = [a for a in occ if a is not roles[0]]
        if not all(isinstance(a, ConceptAtom) for a in rest):
            continue
        atoms = [a for a in atoms if a not in occ]
        atoms.append(_SemiJoin(roles[0], frozenset(a.name for a in rest)))
    return atoms


def _bind(env: dict | None, t, c: str):
    if env is None:
        return None
    if isinstance(t, Ind):
        return env if t.name == c else None
    cur = env.get(t)
    if cur is None:
        e = dict(env)
        e[t] = c
        return e
    return env if cur == c else None


# ---------------------------------------------------------------- KB entry points

def prepare(q: CN2RPQ, kb, memo: bool = True) -> tuple[CN2RPQ, Evaluator]:
    """Normalize the KB, eliminate nominal tests and build an evaluator."""
    if isinstance(kb, KnowledgeBase):
        t, a = normalize_kb(kb)
    else:
        t, a = kb
    q2, ext = eliminate_nominal_tests(q)
    if ext:
        a = a.extend(concepts=ext)
    return q2, Evaluator(t, a, q.individuals(), memo)


def eval_query(q: CN2RPQ, kb, memo: bool = True) -> bool:
    q2, ev = prepare(q, kb, memo)
    return ev.eval_query(q2)


def certain_answers(q: CN2RPQ, kb, memo: bool = True) -> set[tuple]:
    q2, ev = prepare(q, kb, memo)
    return ev.certain_answers(q2)


def eval_atom(part: NNFAPart, kb, a: str, b: str | None = ANON) -> bool:
    if isinstance(kb, KnowledgeBase):
        t, ab = normalize_kb(kb)
    else:
        t, ab = kb
    return Evaluator(t, ab).eval_atom(part, a, b)


# ---------------------------------------------------------------- finite interpretations

def _sat_sets(n: NNFA, i: FiniteInterpretation) -> dict:
    """Sat_j = objects where <α_j> holds, for every automaton, highest index first."""
    sat: dict[int, frozenset] = {}
    for a in reversed(n.automata):
        good = _backward(n, a.index, a.finals, i, sat)
        sat[a.index] = frozenset(o for o, s in good if s == a.initial)
    return sat


def _step_ok(lab, o, i: FiniteInterpretation, sat: dict) -> list:
    """Objects reachable from o in one step over lab."""
    if isinstance(lab, Role):
        return list(i.succ(lab, o))
    if isinstance(lab, ConceptTest):
        return [o] if o in i.ext(lab.name) else []
    if isinstance(lab, NominalTest):
        return [o] if i.inds.get(lab.ind) == o else []
    if isinstance(lab, NestedTest):
        return [o] if all(o in sat[j] for j in lab.indices) else []
    raise TypeError(lab)


def _backward(n: NNFA, idx: int, finals: Iterable[int], i: FiniteInterpretation, sat: dict) -> set:
    """Pairs (o, s) of automaton idx from which a final state is reachable."""
    pred: dict = {}
    for o in i.domain:
        for s in n.states_of(idx):
            for lab, v in n.out[s]:
                for o2 in _step_ok(lab, o, i, sat):
                    pred.setdefault((o2, v), []).append((o, s))
    good = {(o, f) for o in i.domain for f in finals}
    work = list(good)
    while work:
        node = work.pop()
        for p in pred.get(node, ()):
            if p not in good:
                good.add(p)
                work.append(p)
    return good


def _with_inds(i: FiniteInterpretation, names: Iterable[str]) -> FiniteInterpretation:
    missing = [x for x in names if x not in i.inds]
    if not missing:
        return i
    j = FiniteInterpretation(set(i.domain), dict(i.concepts), dict(i.roles), dict(i.inds))
    for x in missing:
        j.add_individual(x)
    return j


def eval_on_interpretation(part: NNFAPart, i: FiniteInterpretation) -> set[tuple]:
    """All (o, o') connected by a path of the part in a finite interpretation."""
    n = part.nnfa
    sat = _sat_sets(n, i)
    out = set()
    for o in i.domain:
        seen = {(o, part.start)}
        stack = [(o, part.start)]
        while stack:
            x, s = stack.pop()
            if s in part.finals:
                out.add((o, x))
            for lab, v in n.out[s]:
                for x2 in _step_ok(lab, x, i, sat):
                    if (x2, v) not in seen:
                        seen.add((x2, v))
                        stack.append((x2, v))
    return out


def exist_test_objects(part: NNFAPart, i: FiniteInterpretation) -> frozenset:
    """Objects from which the part accepts somewhere."""
    sat = _sat_sets(part.nnfa, i)
    good = _backward(part.nnfa, part.index, part.finals, i, sat)
    return frozenset(o for o, s in good if s == part.start)


def answers_on_interpretation(q: CN2RPQ, i: FiniteInterpretation) -> set[tuple]:
    """All π(x) over matches π of q in a finite interpretation."""
    i = _with_inds(i, sorted(q.individuals()))
    rel: dict = {}
    for k, a in enumerate(q.atoms):
        if isinstance(a, RoleAtom):
            pairs = eval_on_interpretation(a.part, i)
            fwd: dict = {}
            for x, y in pairs:
                fwd.setdefault(x, set()).add(y)
            rel[k] = (pairs, fwd)
        elif isinstance(a, ExistTestAtom):
            rel[k] = exist_test_objects(a.part, i)
        else:
            rel[k] = i.ext(a.name)
    domain = sorted(i.domain, key=str)

    def val(t, env):
        return i.inds[t.name] if isinstance(t, Ind) else env.get(t)

    out: set[tuple] = set()

    def go(rest, env):
        if not rest:
            out.add(tuple(env[v] for v in q.answer_vars))
            return
        rest = sorted(rest, key=lambda k: sum(1 for t in q.atoms[k].terms() if val(t, env) is None))
        k, others = rest[0], rest[1:]
        a = q.atoms[k]
        if isinstance(a, RoleAtom):
            pairs, fwd = rel[k]
            lv, rv = val(a.left, env), val(a.right, env)
            lefts = [lv] if lv is not None else domain
            for x in lefts:
                for y in ([rv] if rv is not None else sorted(fwd.get(x, ()), key=str)):
                    if y not in fwd.get(x, ()):
                        continue
                    e = _bind_obj(env, a.left, x, i)
                    e = _bind_obj(e, a.right, y, i)
                    if e is not None:
                        go(others, e)
        else:
            t = a.term
            v = val(t, env)
            for x in ([v] if v is not None else domain):
                if x in rel[k]:
                    e = _bind_obj(env, t, x, i)
                    if e is not None:
                        go(others, e)

    go(list(range(len(q.atoms))), {})
    return out


def _bind_obj(env, t, o, i: FiniteInterpretation):
    if env is None:
        return None
    if isinstance(t, Ind):
        return env if i.inds.get(t.name) == o else None
    cur = env.get(t)
    if cur is None:
        e = dict(env)
        e[t] = o
        return e
    return env if cur == o else None
