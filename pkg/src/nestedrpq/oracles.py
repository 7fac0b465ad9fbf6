"""Independent reference procedures and random instance generators.

Nothing here is used by the engines. The test suite compares the engines
against these on small random inputs.
"""

from __future__ import annotations

import random
from itertools import product

from .kb import DisjointRoles, NormalizedABox, NormalizedTBox, Role, make_abox
from .query import (CN2RPQ, EPS, NNFA, NRE, ConceptAtom, ConceptTest, Concat, Eps, ExistTestAtom,
                    NestedTest, NominalTest, RoleAtom, Star, Sym, Test, Union_, Var, compile_nre,
                    nre_depth)
from .reasoner import FiniteInterpretation, SaturatedTBox

# ---------------------------------------------------------------- NRE semantics


def nre_pairs(e: NRE, i: FiniteInterpretation) -> set:
    """Pairs of objects related by e, straight from the recursive definition."""
    if isinstance(e, Eps):
        return {(o, o) for o in i.domain}
    if isinstance(e, Sym):
        s = e.symbol
        if isinstance(s, Role):
            return i.pairs(s)
        if isinstance(s, ConceptTest):
            return {(o, o) for o in i.ext(s.name)}
        if isinstance(s, NominalTest):
            o = i.inds.get(s.ind)
            return set() if o is None else {(o, o)}
        raise TypeError(s)
    if isinstance(e, Test):
        return {(o, o) for o, _ in nre_pairs(e.inner, i)}
    if isinstance(e, Union_):
        return nre_pairs(e.left, i) | nre_pairs(e.right, i)
    if isinstance(e, Concat):
        left, right = nre_pairs(e.left, i), nre_pairs(e.right, i)
        by_src: dict = {}
        for b, c in right:
            by_src.setdefault(b, set()).add(c)
        return {(a, c) for a, b in left for c in by_src.get(b, ())}
    if isinstance(e, Star):
        step = nre_pairs(e.inner, i)
        out = {(o, o) for o in i.domain}
        frontier = set(out)
        while frontier:
            by_src: dict = {}
            for b, c in step:
                by_src.setdefault(b, set()).add(c)
            new = {(a, c) for a, b in frontier for c in by_src.get(b, ())} - out
            out |= new
            frontier = new
        return out
    raise TypeError(e)


# ---------------------------------------------------------------- chase


def _role_closure(t: NormalizedTBox) -> dict:
    """r -> all s with r ⊑ s, closed under inverses."""
    sup: dict = {}
    roles = {r for pair in t.role_inclusions for r in pair}
    roles |= {r.inverse() for r in roles}
    for r in roles:
        sup[r] = {r}
    changed = True
    while changed:
        changed = False
        for r, s in t.role_inclusions:
            for a, b in ((r, s), (r.inverse(), s.inverse())):
                for x in roles:
                    if a in sup[x] and b not in sup[x]:
                        sup[x].add(b)
                        changed = True
    return sup


def chase(t: NormalizedTBox, abox: NormalizedABox, depth: int) -> tuple[FiniteInterpretation, bool]:
    """Oblivious chase cut at `depth` anonymous levels. Returns (interpretation, consistent).

    Every fact in the result holds in every model of the KB.
    """
    i = FiniteInterpretation.from_abox(abox)
    level = {a: 0 for a in i.domain}
    sup = _role_closure(t)
    fired: set = set()
    fresh = 0

    def add_edge(r: Role, a, b) -> bool:
        new = False
        for s in sup.get(r, {r}):
            pair = (b, a) if s.inverted else (a, b)
            ext = i.roles.setdefault(s.name, set())
            if pair not in ext:
                ext.add(pair)
                new = True
        return new

    def add(name: str, o) -> bool:
        ext = i.concepts.setdefault(name, set())
        if o in ext:
            return False
        ext.add(o)
        return True

    # ABox role assertions are closed under role inclusions too
    for p, ps in list(i.roles.items()):
        for a, b in list(ps):
            add_edge(Role(p), a, b)
    changed = True
    while changed:
        changed = False
        i._adj = {}
        for o in list(i.domain):
            for a in t.top:
                changed |= add(a, o)
        for b1, b2, a in t.conj:
            for o in list(i.ext(b1) & i.ext(b2)):
                changed |= add(a, o)
        for r, b, a in t.exists_lhs:
            for o, o2 in list(i.pairs(r)):
                if o2 in i.ext(b):
                    changed |= add(a, o)
        for a, r, b in sorted(t.exists_rhs):
            for o in sorted(i.ext(a), key=str):
                if (o, a, r, b) in fired or level[o] >= depth:
                    continue
                fired.add((o, a, r, b))
                fresh += 1
                c = f"_n{fresh}"
                i.domain.add(c)
                level[c] = level[o] + 1
                add(b, c)
                add_edge(r, o, c)
                changed = True
    i._adj = {}
    ok = not any(i.ext(a) for a in t.bottom)
    for d in t.disjoint_roles:
        if i.pairs(d.first) & i.pairs(d.second):
            ok = False
    return i, ok


def chase_entails(t: NormalizedTBox, names, goal: str, depth: int = 4) -> bool:
    """Sound check of T |= C ⊑ goal (or C unsatisfiable) by chasing {C(a)}."""
    i, ok = chase(t, make_abox([(n, "a") for n in names], (), ["a"]), depth)
    return not ok or "a" in i.ext(goal)


# ---------------------------------------------------------------- countermodels


def is_model(t: NormalizedTBox, i: FiniteInterpretation) -> bool:
    if any(i.ext(a) for a in t.bottom):
        return False
    if any(not i.ext(a) >= i.domain for a in t.top):
        return False
    for b1, b2, a in t.conj:
        if not (i.ext(b1) & i.ext(b2)) <= i.ext(a):
            return False
    for r, b, a in t.exists_lhs:
        if any(o2 in i.ext(b) and o not in i.ext(a) for o, o2 in i.pairs(r)):
            return False
    for a, r, b in t.exists_rhs:
        for o in i.ext(a):
            if not any(o2 in i.ext(b) for o2 in i.succ(r, o)):
                return False
    for r, s in t.role_inclusions:
        if not i.pairs(r) <= i.pairs(s):
            return False
    for d in t.disjoint_roles:
        if i.pairs(d.first) & i.pairs(d.second):
            return False
    return True


def find_countermodel(t: NormalizedTBox, names, goal: str, max_size: int = 2) -> FiniteInterpretation | None:
    """A model of T with an object in every name of C but not in goal, if one of size <= max_size exists."""
    concepts = sorted(t.concept_names() | set(names) | {goal})
    roles = sorted(t.role_names())
    for size in range(1, max_size + 1):
        dom = list(range(size))
        cells = [(c, o) for c in concepts for o in dom]
        edges = [(r, a, b) for r in roles for a in dom for b in dom]
        for cbits in product((0, 1), repeat=len(cells)):
            ext: dict = {}
            for bit, (c, o) in zip(cbits, cells):
                if bit:
                    ext.setdefault(c, set()).add(o)
            witness = [o for o in dom if all(o in ext.get(n, ()) for n in names) and o not in ext.get(goal, ())]
            if not witness:
                continue
            for rbits in product((0, 1), repeat=len(edges)):
                rel: dict = {}
                for bit, (r, a, b) in zip(rbits, edges):
                    if bit:
                        rel.setdefault(r, set()).add((a, b))
                i = FiniteInterpretation(set(dom), ext, rel, {})
                if is_model(t, i):
                    return i
    return None


# ---------------------------------------------------------------- partial runs


def _run_problem(n: NNFA, root, s1: int, target, gamma, floop: bool):
    i = n.owner[s1]
    gamma = frozenset(gamma)

    def leaf(o, s) -> bool:
        j = n.owner[s]
        if j == i:
            return (s in target) if floop else (o == root and s == target)
        return s in n.finals(j) or (o == root and s in gamma)

    return i, leaf


def _children(n: NNFA, interp: FiniteInterpretation, o, s):
    """Each way to expand node (o, s): a list of child labels."""
    for lab, d in n.out[s]:
        if isinstance(lab, Role):
            for o2 in sorted(interp.succ(lab, o), key=str):
                yield [(o2, d)]
        elif isinstance(lab, ConceptTest):
            if o in interp.ext(lab.name):
                yield [(o, d)]
        elif isinstance(lab, NominalTest):
            if interp.inds.get(lab.ind) == o:
                yield [(o, d)]
        elif isinstance(lab, NestedTest):
            yield [(o, d)] + [(o, n.initial(j)) for j in lab.indices]


def find_run(n: NNFA, interp: FiniteInterpretation, root, s1: int, target, gamma=(),
             floop: bool = False):
    """A partial run from (root, s1) meeting the Loop (or FLoop) leaf conditions, or None.

    The run is a tree (object, state, [subtrees]). Search goes by increasing height.
    """
    _, leaf = _run_problem(n, root, s1, target, gamma, floop)
    labels = [(o, s) for o in interp.domain for s in n.all_states()]
    memo: dict = {}

    def prove(o, s, h):
        key = (o, s, h)
        if key in memo:
            return memo[key]
        memo[key] = None
        out = None
        if leaf(o, s):
            out = (o, s, [])
        elif h > 0:
            for kids in _children(n, interp, o, s):
                sub = [prove(o2, s2, h - 1) for o2, s2 in kids]
                if all(x is not None for x in sub):
                    out = (o, s, sub)
                    break
        memo[key] = out
        return out

    for h in range(len(labels) + 1):
        r = prove(root, s1, h)
        if r is not None:
            return r
    return None


def check_run(n: NNFA, interp: FiniteInterpretation, run, root, s1: int, target, gamma=(),
              floop: bool = False) -> bool:
    """Literal check of a run tree against the transition relation and the leaf conditions."""
    _, leaf = _run_problem(n, root, s1, target, gamma, floop)
    if run[0] != root or run[1] != s1:
        return False

    def ok(node) -> bool:
        o, s, kids = node
        if not kids:
            return leaf(o, s)
        labels = [(k[0], k[1]) for k in kids]
        if not any(sorted(labels, key=str) == sorted(c, key=str) for c in _children(n, interp, o, s)):
            return False
        return all(ok(k) for k in kids)

    return ok(run)


def run_fixpoint(n: NNFA, interp: FiniteInterpretation, root, s1: int, target, gamma=(),
                 floop: bool = False) -> bool:
    """The same question answered by a bottom-up least fixpoint over (object, state)."""
    _, leaf = _run_problem(n, root, s1, target, gamma, floop)
    good = {(o, s) for o in interp.domain for s in n.all_states() if leaf(o, s)}
    changed = True
    while changed:
        changed = False
        for o in interp.domain:
            for s in n.all_states():
                if (o, s) in good:
                    continue
                if any(all(k in good for k in kids) for kids in _children(n, interp, o, s)):
                    good.add((o, s))
                    changed = True
    return (root, s1) in good


# ---------------------------------------------------------------- acyclicity


def existential_depth(sat: SaturatedTBox, types) -> int | None:
    """Longest chain of anonymous successors from the given types; None if unbounded."""
    memo: dict = {}
    active: set = set()

    def depth(core: frozenset) -> int | None:
        if core in memo:
            return memo[core]
        if core in active:
            return None
        active.add(core)
        best = 0
        for _, child in sat.existentials(sat.supers(core)):
            d = depth(frozenset(child))
            if d is None:
                active.discard(core)
                memo[core] = None
                return None
            best = max(best, d + 1)
        active.discard(core)
        memo[core] = best
        return best

    out = 0
    for names in types:
        best = 0
        for _, child in sat.existentials(names):
            d = depth(frozenset(child))
            if d is None:
                return None
            best = max(best, d + 1)
        out = max(out, best)
    return out


# ---------------------------------------------------------------- generators

NAMES = ("A", "B", "C")
ROLES = ("r", "s")


def _role(rng: random.Random, roles, inverses: bool) -> Role:
    return Role(rng.choice(roles), inverses and rng.random() < 0.35)


def random_tbox(rng: random.Random, n_axioms: int, names=NAMES, roles=ROLES, inverses: bool = True,
                bottom: bool = True, role_incl: bool = True) -> NormalizedTBox:
    kinds = ["rhs", "rhs", "conj", "conj", "lhs", "lhs", "top"]
    if bottom:
        kinds += ["bot", "disj"]
    if role_incl:
        kinds += ["ri"]
    ax: dict = {k: set() for k in ("bottom", "exists_rhs", "top", "conj", "exists_lhs",
                                   "role_inclusions", "disjoint_roles")}
    for _ in range(n_axioms):
        k = rng.choice(kinds)
        if k == "rhs":
            ax["exists_rhs"].add((rng.choice(names), _role(rng, roles, inverses), rng.choice(names)))
        elif k == "conj":
            b1, b2 = rng.choice(names), rng.choice(names)
            a = rng.choice([n for n in names if n not in (b1, b2)] or list(names))
            ax["conj"].add((b1, b2, a))
        elif k == "lhs":
            ax["exists_lhs"].add((_role(rng, roles, inverses), rng.choice(names), rng.choice(names)))
        elif k == "top":
            ax["top"].add(rng.choice(names))
        elif k == "bot":
            ax["bottom"].add(rng.choice(names))
        elif k == "disj":
            ax["disjoint_roles"].add(DisjointRoles(_role(rng, roles, inverses), _role(rng, roles, inverses)))
        else:
            r, s = _role(rng, roles, inverses), _role(rng, roles, inverses)
            if r != s:
                ax["role_inclusions"].add((r, s))
    return NormalizedTBox().extend(**ax)


def random_abox(rng: random.Random, n_inds: int, names=NAMES, roles=ROLES,
                n_concepts: int | None = None, n_roles: int | None = None) -> NormalizedABox:
    inds = [f"i{k}" for k in range(n_inds)]
    nc = rng.randint(0, n_inds) if n_concepts is None else n_concepts
    nr = rng.randint(0, 2 * n_inds) if n_roles is None else n_roles
    concepts = [(rng.choice(names), rng.choice(inds)) for _ in range(nc)]
    rs = [(rng.choice(roles), rng.choice(inds), rng.choice(inds)) for _ in range(nr)]
    return make_abox(concepts, rs, inds)


def random_graph(rng: random.Random, n_objs: int, names=NAMES, roles=ROLES,
                 density: float = 0.2) -> FiniteInterpretation:
    objs = [f"o{k}" for k in range(n_objs)]
    rs = [(p, a, b) for p in roles for a in objs for b in objs if rng.random() < density / len(roles)]
    cs = [(c, o) for c in names for o in objs if rng.random() < 0.3]
    return FiniteInterpretation.from_abox(make_abox(cs, rs, objs))


def random_nre(rng: random.Random, ops: int, names=NAMES, roles=ROLES, depth: int = 2,
               inverses: bool = True, nominals=()) -> NRE:
    """A random NRE with at most `ops` operators and test nesting at most `depth`."""

    def atom() -> NRE:
        x = rng.random()
        if nominals and x < 0.08:
            return Sym(NominalTest(rng.choice(list(nominals))))
        if x < 0.3:
            return Sym(ConceptTest(rng.choice(names)))
        if x < 0.33:
            return EPS
        return Sym(_role(rng, roles, inverses))

    def go(budget: int, d: int) -> NRE:
        if budget <= 0:
            return atom()
        k = rng.choice(["cat", "cat", "union", "star", "test", "sym"] if d > 0 else
                       ["cat", "cat", "union", "star", "sym"])
        if k == "sym":
            return atom()
        if k == "star":
            return Star(go(budget - 1, d))
        if k == "test":
            return Test(go(budget - 1, d - 1))
        left = rng.randint(0, budget - 1)
        l, r = go(left, d), go(budget - 1 - left, d)
        return Concat(l, r) if k == "cat" else Union_(l, r)

    return go(rng.randint(0, ops), depth)


def random_small_nre(rng: random.Random, max_states: int = 6, depth: int = 2, **kw) -> NRE:
    """A random NRE whose compiled NNFA has at most `max_states` states in total."""
    while True:
        e = random_nre(rng, rng.randint(2, 8), depth=depth, **kw)
        if nre_depth(e) <= depth and compile_nre(e).nnfa.state_count() <= max_states:
            return e


def random_query(rng: random.Random, max_atoms: int = 3, depth: int = 2, names=NAMES, roles=ROLES,
                 ops: int = 4) -> CN2RPQ:
    vs = [Var("x"), Var("y"), Var("z")]
    atoms = []
    for _ in range(rng.randint(1, max_atoms)):
        k = rng.random()
        if k < 0.15:
            atoms.append(ConceptAtom(rng.choice(names), rng.choice(vs)))
        elif k < 0.3:
            e = random_nre(rng, ops, names, roles, max(depth - 1, 0))
            atoms.append(ExistTestAtom(compile_nre(e), rng.choice(vs), e))
        else:
            e = random_nre(rng, ops, names, roles, depth)
            atoms.append(RoleAtom(compile_nre(e), rng.choice(vs), rng.choice(vs), e))
    used = sorted({t for a in atoms for t in a.terms()}, key=lambda v: v.name)
    answer = tuple(v for v in used if rng.random() < 0.6)
    return CN2RPQ(answer, tuple(atoms))
