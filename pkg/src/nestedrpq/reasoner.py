"""Consequence-based reasoning for normalized ELHI-bot.

Saturation works on contexts. A context stands for an element of a
canonical model and is identified by its core, the set of concept names it
is known to have before any reasoning. Its closure H contains every name
the element must satisfy. An axiom A <= exists r.B firing in a context
spawns a child context whose core is B plus every name the parent forces
on its r-successors through an inverse role (exists s.X <= Y with r- <= s
and X in H). Names flow back from children through exists s.X <= Y with
r <= s. A context is unsatisfiable if it derives a name declared empty, if
a child is unsatisfiable, or if its generating role violates a role
disjointness axiom.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable

from .errors import InconsistentKBError
from .kb import NormalizedABox, NormalizedTBox, Role, make_abox


class _Context:
    __slots__ = ("core", "H", "unsat", "succ", "children", "parents", "queued")

    def __init__(self, core: frozenset):
        self.core = core
        self.H: set = set(core)
        self.unsat = False
        self.succ: dict = {}            # (A, r, B) -> current child context
        self.children: set = set()      # (r, child), stale ones kept (still sound)
        self.parents: set = set()       # (parent, r)
        self.queued = False


class SaturatedTBox:
    """A normalized TBox with on-demand saturation of conjunctions."""

    def __init__(self, t: NormalizedTBox):
        self.tbox = t
        self._contexts: dict[frozenset, _Context] = {}
        self._queue: deque = deque()

        # role hierarchy, closed under inversion
        graph: dict[Role, set] = defaultdict(set)
        roles: set = set()
        for r, s in t.role_inclusions:
            graph[r].add(s)
            graph[r.inverse()].add(s.inverse())
            roles.update((r, s, r.inverse(), s.inverse()))
        for _, r, _ in t.exists_rhs:
            roles.update((r, r.inverse()))
        for r, _, _ in t.exists_lhs:
            roles.update((r, r.inverse()))
        for d in t.disjoint_roles:
            roles.update((d.first, d.second, d.first.inverse(), d.second.inverse()))
        self.roles = frozenset(roles)
        self._sup: dict[Role, frozenset] = {}
        for r in roles:
            seen = {r}
            stack = [r]
            while stack:
                x = stack.pop()
                for y in graph.get(x, ()):
                    if y not in seen:
                        seen.add(y)
                        stack.append(y)
            self._sup[r] = frozenset(seen)
        self._sub: dict[Role, set] = defaultdict(set)
        for r, ups in self._sup.items():
            for s in ups:
                self._sub[s].add(r)

        disjoint = set()
        for d in t.disjoint_roles:
            for a, b in ((d.first, d.second), (d.first.inverse(), d.second.inverse())):
                disjoint.add((a, b))
                disjoint.add((b, a))
        self.disjoint = frozenset(disjoint)
        self.bad_roles = frozenset(r for r in roles
                                   if any((p, q) in disjoint for p in self._sup[r] for q in self._sup[r]))

        self.top_names = frozenset(t.top)
        self.bottom_names = frozenset(t.bottom)
        self._conj: dict[str, list] = defaultdict(list)
        for b1, b2, a in t.conj:
            self._conj[b1].append((b2, a))
            if b2 != b1:
                self._conj[b2].append((b1, a))
        self._exists: dict[str, list] = defaultdict(list)
        for a, r, b in sorted(t.exists_rhs):
            self._exists[a].append((r, b))
        # exact[s][X] = {Y : exists s.X <= Y}
        self.exact_lhs: dict[Role, dict[str, set]] = defaultdict(lambda: defaultdict(set))
        for s, x, y in t.exists_lhs:
            self.exact_lhs[s][x].add(y)
        # up[r][X] = {Y : exists s.X <= Y, r <= s}
        self._up: dict[Role, dict[str, set]] = {}

    # ------------------------------------------------------------ roles

    def sup(self, r: Role) -> frozenset:
        """All s with T |= r <= s (reflexive)."""
        return self._sup.get(r) or frozenset([r])

    def entails_role_inclusion(self, r: Role, s: Role) -> bool:
        return s in self.sup(r)

    def up(self, r: Role) -> dict:
        """X -> names Y a predecessor gets when its r-successor has X."""
        u = self._up.get(r)
        if u is None:
            u = defaultdict(set)
            for s in self.sup(r):
                for x, ys in self.exact_lhs.get(s, {}).items():
                    u[x] |= ys
            self._up[r] = u
        return u

    def back(self, r: Role, names: Iterable[str]) -> set:
        """Names forced on every r-successor of an element with `names`."""
        u = self.up(r.inverse())
        out: set = set()
        for x in names:
            ys = u.get(x)
            if ys:
                out |= ys
        return out

    # ------------------------------------------------------------ contexts

    def _get(self, core: frozenset) -> _Context:
        ctx = self._contexts.get(core)
        if ctx is None:
            ctx = _Context(core)
            ctx.H |= self.top_names
            self._contexts[core] = ctx
            self._enqueue(ctx)
        return ctx

    def _enqueue(self, ctx: _Context) -> None:
        if not ctx.queued:
            ctx.queued = True
            self._queue.append(ctx)

    def _run(self) -> None:
        while self._queue:
            ctx = self._queue.popleft()
            ctx.queued = False
            self._process(ctx)

    def _close(self, ctx: _Context, new: list) -> None:
        H = ctx.H
        while new:
            x = new.pop()
            if x in self.bottom_names:
                ctx.unsat = True
            for other, head in self._conj.get(x, ()):
                if other in H and head not in H:
                    H.add(head)
                    new.append(head)

    def _process(self, ctx: _Context) -> None:
        before = (len(ctx.H), ctx.unsat)
        self._close(ctx, list(ctx.H))
        while True:
            size = len(ctx.H)
            for a in sorted(ctx.H):
                for r, b in self._exists.get(a, ()):
                    core = frozenset({b} | self.back(r, ctx.H))
                    child = ctx.succ.get((a, r, b))
                    if child is None or child.core != core:
                        child = self._get(core)
                        ctx.succ[(a, r, b)] = child
                        ctx.children.add((r, child))
                        child.parents.add((ctx, r))
            new: list = []
            for r, child in list(ctx.children):
                if child.unsat or r in self.bad_roles:
                    ctx.unsat = True
                u = self.up(r)
                for x in list(child.H):
                    for y in u.get(x, ()):
                        if y not in ctx.H:
                            ctx.H.add(y)
                            new.append(y)
            self._close(ctx, new)
            if len(ctx.H) == size:
                break
        if (len(ctx.H), ctx.unsat) != before:
            for parent, _ in ctx.parents:
                self._enqueue(parent)

    def context(self, names: Iterable[str]) -> _Context:
        ctx = self._get(frozenset(names))
        self._run()
        return ctx

    # ------------------------------------------------------------ queries

    def supers(self, names: Iterable[str]) -> frozenset:
        """All concept names entailed by the conjunction of `names`."""
        return frozenset(self.context(names).H)

    def is_unsat(self, names: Iterable[str]) -> bool:
        return self.context(names).unsat

    def entails_subsumption(self, c: Iterable[str], d: Iterable[str]) -> bool:
        ctx = self.context(c)
        return ctx.unsat or set(d) <= ctx.H

    def existentials(self, names: Iterable[str]) -> list[tuple[Role, frozenset]]:
        """Generated successors (r, child core) of an element with `names`,
        using the maximal cores, deduplicated and sorted."""
        ctx = self.context(names)
        out = {(r, child.core) for (a, r, b), child in ctx.succ.items()}
        return sorted(out, key=lambda rc: (rc[0], sorted(rc[1])))

    def entails_existential(self, c: Iterable[str], r: Role, d: Iterable[str]) -> bool:
        """T |= C <= exists r.D for conjunctions C, D."""
        ctx = self.context(c)
        if ctx.unsat:
            return True
        d = set(d)
        for (a, s, b), child in list(ctx.succ.items()):
            if r in self.sup(s) and d <= child.H:
                return True
        return False

    def context_count(self) -> int:
        return len(self._contexts)


def saturate(t: NormalizedTBox) -> SaturatedTBox:
    return SaturatedTBox(t)


def entails_subsumption(s: SaturatedTBox, c: Iterable[str], d: Iterable[str]) -> bool:
    return s.entails_subsumption(c, d)


def entails_role_inclusion(s: SaturatedTBox, r: Role, r2: Role) -> bool:
    return s.entails_role_inclusion(r, r2)


# ---------------------------------------------------------------- ABox level

class ABoxReasoner:
    """Types of named individuals, entailed role edges and consistency."""

    def __init__(self, sat: SaturatedTBox, abox: NormalizedABox, extra_inds: Iterable[str] = ()):
        self.sat = sat
        self.abox = abox
        self.inds = frozenset(abox.inds) | frozenset(extra_inds)
        # closed edges: role -> ind -> set of inds
        out: dict[Role, dict[str, set]] = defaultdict(lambda: defaultdict(set))
        for p, a, b in abox.roles:
            for s in sat.sup(Role(p)):
                out[s][a].add(b)
                out[s.inverse()][b].add(a)
        self.edges = out
        core: dict[str, set] = {a: set() for a in self.inds}
        for name, a in abox.concepts:
            core[a].add(name)
        # neighbours: (s, b) pairs with edge s(a, b) for roles s with lhs axioms
        lhs_roles = [s for s in out if s in sat.exact_lhs]
        nbrs: dict[str, list] = defaultdict(list)
        for s in lhs_roles:
            for a, bs in out[s].items():
                for b in bs:
                    nbrs[a].append((s, b))
        rev: dict[str, set] = defaultdict(set)
        for a, lst in nbrs.items():
            for _, b in lst:
                rev[b].add(a)
        self.types: dict[str, frozenset] = {}
        self._unsat_inds: set = set()
        work = deque(sorted(self.inds))
        queued = set(self.inds)
        while work:
            a = work.popleft()
            queued.discard(a)
            ctx = sat.context(core[a])
            t = frozenset(ctx.H)
            if ctx.unsat:
                self._unsat_inds.add(a)
            grew = False
            if self.types.get(a) != t:
                self.types[a] = t
                grew = True
            # pull pushes from neighbours into a's core
            added = False
            for s, b in nbrs.get(a, ()):
                tb = self.types.get(b)
                if tb is None:
                    continue
                ex = sat.exact_lhs[s]
                for x in tb:
                    for y in ex.get(x, ()):
                        if y not in core[a]:
                            core[a].add(y)
                            added = True
            if added and a not in queued:
                work.append(a)
                queued.add(a)
            if grew:
                for c in rev.get(a, ()):
                    if c not in queued:
                        work.append(c)
                        queued.add(c)
        self.cores = {a: frozenset(c) for a, c in core.items()}
        self.consistent = not self._unsat_inds and not self._role_clash()

    def _role_clash(self) -> bool:
        if not self.sat.disjoint:
            return False
        for p, q in self.sat.disjoint:
            for a, bs in self.edges.get(p, {}).items():
                other = self.edges.get(q, {}).get(a)
                if other and bs & other:
                    return True
        return False

    def type_of(self, ind: str) -> frozenset:
        t = self.types.get(ind)
        if t is None:
            return frozenset(self.sat.supers(()))
        return t

    def entails_assertion(self, name: str, ind: str) -> bool:
        if not self.consistent:
            raise InconsistentKBError("instance checking over an inconsistent KB")
        return name in self.type_of(ind)

    def successors(self, r: Role, a: str) -> set:
        return self.edges.get(r, {}).get(a, set())

    def entailed_role_edge(self, r: Role, a: str, b: str) -> bool:
        return b in self.successors(r, a)


_REASONERS: dict = {}


def abox_reasoner(s: SaturatedTBox, abox: NormalizedABox) -> ABoxReasoner:
    key = (id(s), abox)
    r = _REASONERS.get(key)
    if r is None or r.sat is not s:
        if len(_REASONERS) > 256:
            _REASONERS.clear()
        r = ABoxReasoner(s, abox)
        _REASONERS[key] = r
    return r


def is_consistent(s: SaturatedTBox, abox: NormalizedABox) -> bool:
    return abox_reasoner(s, abox).consistent


def entails_assertion(s: SaturatedTBox, abox: NormalizedABox, a: str, ind: str) -> bool:
    return abox_reasoner(s, abox).entails_assertion(a, ind)


def entailed_role_edge(s: SaturatedTBox, abox: NormalizedABox, r: Role, a: str, b: str) -> bool:
    return abox_reasoner(s, abox).entailed_role_edge(r, a, b)


# ---------------------------------------------------------------- interpretations

@dataclass
class FiniteInterpretation:
    domain: set = field(default_factory=set)
    concepts: dict = field(default_factory=dict)   # name -> set of objects
    roles: dict = field(default_factory=dict)      # role name -> set of (o, o')
    inds: dict = field(default_factory=dict)       # individual -> object

    def __post_init__(self):
        self._adj: dict = {}

    def ext(self, name: str) -> set:
        return self.concepts.get(name, set())

    def pairs(self, r: Role) -> set:
        ps = self.roles.get(r.name, set())
        if r.inverted:
            return {(b, a) for a, b in ps}
        return set(ps)

    def succ(self, r: Role, o) -> set:
        """Objects o' with (o, o') in r."""
        adj = self._adj.get(r)
        if adj is None:
            adj = defaultdict(set)
            for a, b in self.roles.get(r.name, ()):
                if r.inverted:
                    adj[b].add(a)
                else:
                    adj[a].add(b)
            self._adj[r] = adj
        return adj.get(o, set())

    def add_individual(self, name: str) -> None:
        if name not in self.inds:
            self.inds[name] = name
            self.domain.add(name)
            self._adj = {}

    @classmethod
    def from_abox(cls, abox: NormalizedABox) -> "FiniteInterpretation":
        """The ABox read as a complete finite interpretation."""
        i = cls()
        for a in abox.inds:
            i.inds[a] = a
            i.domain.add(a)
        for name, a in abox.concepts:
            i.concepts.setdefault(name, set()).add(a)
        for p, a, b in abox.roles:
            i.roles.setdefault(p, set()).add((a, b))
        return i

    def restrict(self, objs: Iterable) -> "FiniteInterpretation":
        keep = set(objs)
        return FiniteInterpretation(
            keep,
            {n: e & keep for n, e in self.concepts.items() if e & keep},
            {p: {(a, b) for a, b in e if a in keep and b in keep} for p, e in self.roles.items()},
            {k: v for k, v in self.inds.items() if v in keep},
        )

    def format(self) -> str:
        lines = [f"{n}({o})" for n in sorted(self.concepts) for o in sorted(self.concepts[n])]
        lines += [f"{p}({a}, {b})" for p in sorted(self.roles) for a, b in sorted(self.roles[p])]
        return "\n".join(lines) + ("\n" if lines else "")


def _tail_label(core: frozenset) -> str:
    if len(core) == 1:
        return next(iter(core))
    return "(" + "&".join(sorted(core)) + ")"


def materialize_canonical(s: SaturatedTBox, abox: NormalizedABox, depth: int,
                          extra_inds: Iterable[str] = ()) -> FiniteInterpretation:
    """The canonical model cut at anonymous chains of length <= depth.

    Anonymous elements are named parent·rTail, where Tail is the child core.
    """
    ar = ABoxReasoner(s, abox, extra_inds) if extra_inds else abox_reasoner(s, abox)
    if not ar.consistent:
        raise InconsistentKBError("cannot materialize an inconsistent KB")
    i = FiniteInterpretation()
    for a in ar.inds:
        i.inds[a] = a
        i.domain.add(a)
        for n in ar.type_of(a):
            i.concepts.setdefault(n, set()).add(a)
    for r, by_ind in ar.edges.items():
        if r.inverted:
            continue
        for a, bs in by_ind.items():
            for b in bs:
                i.roles.setdefault(r.name, set()).add((a, b))
    frontier = [(a, ar.type_of(a)) for a in sorted(ar.inds)]
    for _ in range(depth):
        nxt = []
        for o, names in frontier:
            for r, core in s.existentials(names):
                child = f"{o}·{r}{_tail_label(core)}"
                labels = s.supers(core)
                i.domain.add(child)
                for n in labels:
                    i.concepts.setdefault(n, set()).add(child)
                for sr in s.sup(r):
                    pair = (child, o) if sr.inverted else (o, child)
                    i.roles.setdefault(sr.name, set()).add(pair)
                nxt.append((child, labels))
        frontier = nxt
    return i


def conjunction_abox(names: Iterable[str], ind: str = "a") -> NormalizedABox:
    """The ABox {C(a)} for a conjunction C of names."""
    return make_abox([(n, ind) for n in names], (), [ind])
