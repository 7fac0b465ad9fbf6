"""Query rewriting into queries matched entirely on named individuals.

One pass picks a non-empty set Leaf of existential variables, all mapped
to the same anonymous element o, merges them into y, and replaces every
atom on y by atoms that talk about o's parent instead. The pass is fixed by
a triple (D, r, C): the parent satisfies D, the edge to o is an r-edge and
o has type C. Paths through o are cut at each visit of o; the pieces
either stay below o (discharged through Loop/FLoop) or step up to the
parent and come back down. Applying passes until nothing new appears
gives a finite set, since no pass adds terms and all atoms come from a
fixed set of state pairs.

Internally atoms are tuples:
    ("C", name, term)
    ("E", uid, start, finals, term)
    ("R", uid, start, finals, left, right)
with terms ("i", name) for individuals and ("v", name) for variables, and
finals a sorted tuple.
"""

from __future__ import annotations

import itertools
from collections import deque
from typing import Iterable

from .kb import NormalizedTBox, Role
from .loops import LoopTables
from .query import (CN2RPQ, NNFA, ConceptAtom, ExistTestAtom, Ind, NNFAPart,
                    NominalTest, RoleAtom, Var)
from .reasoner import SaturatedTBox


# ---------------------------------------------------------------- conversion

def _term(t) -> tuple:
    return ("i", t.name) if isinstance(t, Ind) else ("v", t.name)


def _unterm(t: tuple):
    return Ind(t[1]) if t[0] == "i" else Var(t[1])


class _Registry:
    def __init__(self):
        self.nnfas: dict[str, NNFA] = {}

    def atom(self, a) -> tuple:
        if isinstance(a, ConceptAtom):
            return ("C", a.name, _term(a.term))
        n = a.part.nnfa
        self.nnfas[n.uid] = n
        fin = tuple(sorted(a.part.finals))
        if isinstance(a, RoleAtom):
            return ("R", n.uid, a.part.start, fin, _term(a.left), _term(a.right))
        return ("E", n.uid, a.part.start, fin, _term(a.term))

    def unatom(self, t: tuple, nre_of: dict):
        if t[0] == "C":
            return ConceptAtom(t[1], _unterm(t[2]))
        part = NNFAPart(self.nnfas[t[1]], t[2], frozenset(t[3]))
        if t[0] == "R":
            return RoleAtom(part, _unterm(t[4]), _unterm(t[5]), nre_of.get(t[:4]))
        return ExistTestAtom(part, _unterm(t[4]), nre_of.get(t[:4]))


def _terms_of(a: tuple) -> tuple:
    if a[0] == "C":
        return (a[2],)
    if a[0] == "E":
        return (a[4],)
    return (a[4], a[5])


def _rename(a: tuple, m: dict) -> tuple:
    if a[0] == "C":
        return ("C", a[1], m.get(a[2], a[2]))
    if a[0] == "E":
        return a[:4] + (m.get(a[4], a[4]),)
    return a[:4] + (m.get(a[4], a[4]), m.get(a[5], a[5]))


# ---------------------------------------------------------------- canonical form

def _canon(answer: tuple, atoms: frozenset) -> tuple:
    """Minimum over renamings of the existential variables of the sorted atom tuple."""
    fixed = {("v", x) for x in answer}
    ex = sorted({t for a in atoms for t in _terms_of(a) if t[0] == "v" and t not in fixed})
    if not ex:
        return (answer, tuple(sorted(atoms)))
    best = None
    names = [("v", f"_{k}") for k in range(len(ex))]
    for perm in itertools.permutations(names):
        m = dict(zip(ex, perm))
        key = tuple(sorted(_rename(a, m) for a in atoms))
        if best is None or key < best:
            best = key
    return (answer, best)


def canonical_query_form(q: CN2RPQ) -> tuple:
    """A key invariant under atom order and renaming of existential variables."""
    reg = _Registry()
    atoms = frozenset(reg.atom(a) for a in q.atoms)
    return _canon(tuple(v.name for v in q.answer_vars), atoms)


# ---------------------------------------------------------------- candidates

def candidate_triples(sat: SaturatedTBox) -> list[tuple]:
    """All (D, r, C) with T |= D <= exists r.C that the canonical model realizes.

    For an axiom A <= exists r.B, the child's type is the closure of B plus
    the names Y pushed down from the parent. Each Y needs some X in the
    parent with exists s.X <= Y and r- <= s, so D is A plus one such X per Y.
    """
    t = sat.tbox
    out = set()
    for a, r, b in sorted(t.exists_rhs):
        just: dict[str, list] = {}
        for x, ys in sat.up(r.inverse()).items():
            for y in ys:
                just.setdefault(y, []).append(x)
        heads = sorted(just)
        for k in range(len(heads) + 1):
            for ps in itertools.combinations(heads, k):
                ctx = sat.context({b} | set(ps))
                if ctx.unsat:
                    continue
                c = frozenset(ctx.H)
                for xs in itertools.product(*(sorted(just[y]) for y in ps)):
                    d = frozenset({a} | set(xs))
                    if sat.is_unsat(d) or r in sat.bad_roles:
                        continue
                    # the chosen D must actually produce at least {B} ∪ P below it
                    if not sat.entails_existential(d, r, c):
                        continue
                    out.add((d, r, c))
    return sorted(out, key=lambda x: (sorted(x[0]), x[1], sorted(x[2])))


# ---------------------------------------------------------------- the rewriter

def _minimal(sets: Iterable[frozenset]) -> list[frozenset]:
    """Inclusion-minimal members of a family of atom sets."""
    out: list[frozenset] = []
    for s in sorted(set(sets), key=len):
        if not any(o <= s for o in out):
            out.append(s)
    return out


class Rewriter:
    """Rewrites queries w.r.t. one normalized TBox; caches are shared across queries."""

    def __init__(self, t: NormalizedTBox, tables: LoopTables | None = None):
        self.tbox = t
        self.tables = tables or LoopTables(t)
        self.sat = SaturatedTBox(t)
        self.triples = candidate_triples(self.sat)
        self.reg = _Registry()
        self._empty: dict = {}
        self.passes = 0

    # ---------------------------------------------------- automata helpers

    def _moves(self, n: NNFA, r: Role) -> tuple[dict, dict]:
        """ups[u]: states after moving from o to its parent; downs[w]: states
        at the parent from which a step down to o lands in w."""
        ups: dict[int, set] = {}
        downs: dict[int, set] = {}
        for a in n.automata:
            for s, lab, d in a.transitions:
                if not isinstance(lab, Role):
                    continue
                if lab.inverse() in self.sat.sup(r):
                    ups.setdefault(s, set()).add(d)
                if lab in self.sat.sup(r):
                    downs.setdefault(d, set()).add(s)
        return ups, downs

    def empty_language(self, n: NNFA, s: int, finals: Iterable[int]) -> bool:
        """No path from s reaches finals in the transition graph (tests ignored)."""
        key = (n.uid, s, tuple(sorted(finals)))
        hit = self._empty.get(key)
        if hit is None:
            fin = set(finals)
            seen = {s}
            stack = [s]
            hit = True
            while stack:
                u = stack.pop()
                if u in fin:
                    hit = False
                    break
                for _, d in n.out[u]:
                    if d not in seen:
                        seen.add(d)
                        stack.append(d)
            self._empty[key] = hit
        return hit

    def _dead(self, a: tuple) -> bool:
        if a[0] == "C":
            return False
        return self.empty_language(self.reg.nnfas[a[1]], a[2], a[3])

    # ---------------------------------------------------- per-atom options

    def _atom_options(self, a: tuple, y: tuple, r: Role, c: frozenset) -> list[frozenset]:
        n = self.reg.nnfas[a[1]]
        uid = n.uid
        i = n.owner[a[2]]
        states = n.states_of(i)
        fin = frozenset(a[3])
        ups, downs = self._moves(n, r)
        tables = self.tables
        lift_ok = [g for j in sorted(n.referenced(i)) for g in n.states_of(j) if ups.get(g)]

        def lift(gamma: frozenset) -> list[frozenset]:
            # every Γ leaf at o must be continued from the parent
            choices = []
            for g in sorted(gamma):
                k = n.owner[g]
                fk = tuple(sorted(n.finals(k)))
                choices.append([("E", uid, v, fk, y) for v in sorted(ups.get(g, ()))])
            return [frozenset(p) for p in itertools.product(*choices)]

        def mid(u: int, ws: frozenset) -> list[frozenset]:
            """o in state u back to o in a state of ws."""
            opts: list[frozenset] = []
            for w in sorted(ws):
                for g in tables.minimal_gammas(n, c, u, w, candidates=lift_ok):
                    opts += lift(g)
            vs = sorted(ups.get(u, ()))
            v2 = sorted({v for w in ws for v in downs.get(w, ())})
            opts += [frozenset([("R", uid, v, (v_,), y, y)]) for v in vs for v_ in v2]
            return _minimal(opts)

        def first(t: tuple, u: int, ws: frozenset) -> list[frozenset]:
            """From t (not y) in state u down into o in a state of ws."""
            v2 = sorted({v for w in ws for v in downs.get(w, ())})
            return [frozenset([("R", uid, u, (v,), t, y)]) for v in v2]

        if a[0] == "E":
            def end(u: int) -> list[frozenset]:
                opts: list[frozenset] = []
                for g in tables.minimal_gammas(n, c, u, fin, floop=True, candidates=lift_ok):
                    opts += lift(g)
                opts += [frozenset([("E", uid, v, a[3], y)]) for v in sorted(ups.get(u, ()))]
                return _minimal(opts)
            left, right = y, None
        else:
            left, right = a[4], a[5]
            if right == y:
                def end(u: int) -> list[frozenset]:
                    return mid(u, fin)
            else:
                def end(u: int) -> list[frozenset]:
                    return [frozenset([("R", uid, v, a[3], y, right)]) for v in sorted(ups.get(u, ()))]

        # tail[u]: options for the rest of the path, standing at o in state u
        tail: dict[int, list] = {u: end(u) for u in states}
        mids = {(u, w): mid(u, frozenset([w])) for u in states for w in states}
        changed = True
        while changed:
            changed = False
            for u in states:
                new = list(tail[u])
                for w in states:
                    if not tail[w]:
                        continue
                    for m in mids[(u, w)]:
                        for x in tail[w]:
                            new.append(m | x)
                new = _minimal(new)
                if set(new) != set(tail[u]):
                    tail[u] = new
                    changed = True
        if left == y:
            return tail[a[2]]
        out: list[frozenset] = []
        for w in states:
            if not tail[w]:
                continue
            for f in first(left, a[2], frozenset([w])):
                for x in tail[w]:
                    out.append(f | x)
        return _minimal(out)

    # ---------------------------------------------------- one pass

    def _step(self, answer: tuple, atoms: frozenset) -> set[frozenset]:
        fixed = {("v", x) for x in answer}
        ex = sorted({t for a in atoms for t in _terms_of(a) if t[0] == "v" and t not in fixed})
        out: set[frozenset] = set()
        for k in range(1, len(ex) + 1):
            for leaf in itertools.combinations(ex, k):
                y = leaf[0]
                m = {v: y for v in leaf}
                merged = frozenset(_rename(a, m) for a in atoms)
                on_y = [a for a in merged if y in _terms_of(a)]
                concepts = {a[1] for a in on_y if a[0] == "C"}
                paths = sorted(a for a in on_y if a[0] != "C")
                rest = merged.difference(on_y)
                for d, r, c in self.triples:
                    if not concepts <= c:
                        continue
                    per_atom = []
                    for a in paths:
                        opts = self._atom_options(a, y, r, c)
                        if not opts:
                            break
                        per_atom.append(opts)
                    else:
                        added = frozenset(("C", name, y) for name in d)
                        for combo in itertools.product(*per_atom):
                            q2 = rest | added | frozenset().union(*combo)
                            if not any(self._dead(x) for x in q2):
                                out.add(q2)
        return out

    def rewrite_step(self, q: CN2RPQ) -> list[CN2RPQ]:
        answer = tuple(v.name for v in q.answer_vars)
        atoms = frozenset(self.reg.atom(a) for a in q.atoms)
        _check_no_nominals(q)
        return [self._to_query(q, answer, a2, {}) for a2 in
                sorted(self._step(answer, atoms), key=lambda s: _canon(answer, s))]

    def rewrite(self, q: CN2RPQ, limit: int | None = None) -> list[CN2RPQ]:
        """All queries reachable by passes from q, deduplicated, sorted by key."""
        _check_no_nominals(q)
        answer = tuple(v.name for v in q.answer_vars)
        nre_of = {}
        for a in q.atoms:
            t = self.reg.atom(a)
            if t[0] != "C" and a.nre is not None:
                nre_of[t[:4]] = a.nre
        start = frozenset(self.reg.atom(a) for a in q.atoms)
        seen = {_canon(answer, start): start}
        queue = deque([start])
        while queue:
            cur = queue.popleft()
            self.passes += 1
            for nxt in self._step(answer, cur):
                key = _canon(answer, nxt)
                if key not in seen:
                    seen[key] = nxt
                    queue.append(nxt)
                    if limit is not None and len(seen) > limit:
                        raise RuntimeError(f"rewriting exceeded {limit} queries")
        return [self._to_query(q, answer, seen[k], nre_of) for k in sorted(seen)]

    def _to_query(self, q: CN2RPQ, answer: tuple, atoms: frozenset, nre_of: dict) -> CN2RPQ:
        order = sorted(atoms)
        return CN2RPQ(q.answer_vars, tuple(self.reg.unatom(a, nre_of) for a in order), q.name)


def _check_no_nominals(q: CN2RPQ) -> None:
    for n in q.nnfas():
        for a in n.automata:
            if any(isinstance(l, NominalTest) for _, l, _ in a.transitions):
                raise ValueError("nominal tests must be eliminated before rewriting")


def rewrite(q: CN2RPQ, t: NormalizedTBox, tables: LoopTables | None = None) -> list[CN2RPQ]:
    return Rewriter(t, tables).rewrite(q)


def rewrite_step(q: CN2RPQ, t: NormalizedTBox, tables: LoopTables | None = None) -> list[CN2RPQ]:
    return Rewriter(t, tables).rewrite_step(q)
