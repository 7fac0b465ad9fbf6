"""Loop and FLoop tables.

(C, s1, s2, Γ) is in Loop when, in the canonical model of {C(a)}, some
partial run starts at (a, s1), ends its main branch at (a, s2), and every
other leaf is either in a final state of a higher automaton or sits at a
with a state from Γ. FLoop is the same with the main branch allowed to end
anywhere in a final state from F. Both reduce to a single subsumption in the
TBox extended with one name A_s per state, where A_s reads "a run from here
in state s can be completed".
"""

from __future__ import annotations

from itertools import combinations
from typing import Iterable

from .kb import NormalizedTBox, Role
from .query import NNFA, ConceptTest, NestedTest, NominalTest
from .reasoner import SaturatedTBox

STATE_PREFIX = "__s"


def state_name(s: int) -> str:
    return f"{STATE_PREFIX}{s}"


class StateTBox:
    """The base TBox plus the A_s axioms for automaton `focus` and all higher ones."""

    def __init__(self, n: NNFA, t: NormalizedTBox, focus: int, extra_finals: Iterable[int] = ()):
        if not n.reduced:
            raise ValueError("state TBoxes need a reduced NNFA")
        self.nnfa = n
        self.focus = focus
        self.extra_finals = frozenset(extra_finals)
        top, conj, lhs = set(), set(), set()
        for a in n.automata:
            if a.index < focus:
                continue
            if a.index > focus:
                top.update(state_name(f) for f in a.finals)
            for s, lab, d in a.transitions:
                As, Ad = state_name(s), state_name(d)
                if isinstance(lab, Role):
                    lhs.add((lab, Ad, As))
                elif isinstance(lab, ConceptTest):
                    conj.add((Ad, lab.name, As))
                elif isinstance(lab, NestedTest):
                    (j,) = lab.indices
                    conj.add((Ad, state_name(n.initial(j)), As))
                elif isinstance(lab, NominalTest):
                    raise ValueError("nominal tests must be eliminated first")
        top.update(state_name(f) for f in self.extra_finals)
        self.tbox = t.extend(top=top, conj=conj, exists_lhs=lhs)
        self.sat = SaturatedTBox(self.tbox)


class LoopTables:
    """Memoized Loop/FLoop membership for the NNFAs used with one TBox."""

    def __init__(self, t: NormalizedTBox):
        self.tbox = t
        self._tboxes: dict = {}
        self.memo: dict = {}

    def state_tbox(self, n: NNFA, focus: int, extra_finals: Iterable[int] = ()) -> StateTBox:
        key = (n, focus, frozenset(extra_finals))
        st = self._tboxes.get(key)
        if st is None:
            st = StateTBox(n, self.tbox, focus, extra_finals)
            self._tboxes[key] = st
        return st

    def _check(self, n: NNFA, s1: int, targets: Iterable[int], gamma: Iterable[int]) -> int:
        i = n.owner[s1]
        for s in targets:
            if n.owner[s] != i:
                raise ValueError("Loop keys need s1 and s2 (or F) in one automaton")
        for g in gamma:
            if n.owner[g] <= i:
                raise ValueError("Γ may only hold states of higher automata")
        return i

    # -------------------------------------------------------- single keys

    def in_loop(self, n: NNFA, c: Iterable[str], s1: int, s2: int, gamma: Iterable[int] = ()) -> bool:
        c, gamma = frozenset(c), frozenset(gamma)
        key = ("LOOP", n.uid, c, s1, s2, gamma)
        hit = self.memo.get(key)
        if hit is None:
            self._check(n, s1, [s2], gamma)
            hit = s1 in self.loop_sources(n, c, s2, gamma)
        return hit

    def in_floop(self, n: NNFA, c: Iterable[str], s1: int, finals: Iterable[int],
                 gamma: Iterable[int] = ()) -> bool:
        c, finals, gamma = frozenset(c), frozenset(finals), frozenset(gamma)
        key = ("FLOOP", n.uid, c, s1, finals, gamma)
        hit = self.memo.get(key)
        if hit is None:
            self._check(n, s1, finals, gamma)
            hit = s1 in self.floop_sources(n, c, finals, gamma)
        return hit

    # -------------------------------------------------------- bulk

    def loop_sources(self, n: NNFA, c: frozenset, s2: int, gamma: frozenset) -> frozenset:
        """All s1 of s2's automaton with (C, s1, s2, Γ) in Loop."""
        i = n.owner[s2]
        st = self.state_tbox(n, i)
        core = set(c) | {state_name(s2)} | {state_name(g) for g in gamma}
        ctx = st.sat.context(core)
        out = frozenset(s for s in n.states_of(i) if ctx.unsat or state_name(s) in ctx.H)
        for s in n.states_of(i):
            self.memo[("LOOP", n.uid, c, s, s2, gamma)] = s in out
        return out

    def floop_sources(self, n: NNFA, c: frozenset, finals: frozenset, gamma: frozenset) -> frozenset:
        """All s1 with (C, s1, F, Γ) in FLoop."""
        if not finals:
            return frozenset()
        i = n.owner[next(iter(finals))]
        st = self.state_tbox(n, i, finals)
        core = set(c) | {state_name(g) for g in gamma}
        ctx = st.sat.context(core)
        out = frozenset(s for s in n.states_of(i) if ctx.unsat or state_name(s) in ctx.H)
        for s in n.states_of(i):
            self.memo[("FLOOP", n.uid, c, s, finals, gamma)] = s in out
        return out

    def minimal_gammas(self, n: NNFA, c: Iterable[str], s1: int, target, floop: bool = False,
                       candidates: Iterable[int] | None = None) -> list[frozenset]:
        """The inclusion-minimal Γ making the key a member.

        `target` is s2 for Loop and a final set for FLoop. Candidate states
        default to the automata reachable through tests from s1's automaton.
        """
        c = frozenset(c)
        i = n.owner[s1]
        if candidates is None:
            candidates = [s for j in sorted(n.referenced(i)) for s in n.states_of(j)]
        cand = sorted(set(candidates))

        def member(g: frozenset) -> bool:
            if floop:
                return self.in_floop(n, c, s1, target, g)
            return self.in_loop(n, c, s1, target, g)

        if not member(frozenset(cand)):
            return []
        if member(frozenset()):
            return [frozenset()]
        # shrink: only states that matter can be in a minimal set
        found: list[frozenset] = []
        for k in range(1, len(cand) + 1):
            for g in combinations(cand, k):
                g = frozenset(g)
                if any(f <= g for f in found):
                    continue
                if member(g):
                    found.append(g)
        return found

    def entries(self) -> list[tuple]:
        return sorted(self.memo.items(), key=lambda kv: repr(kv[0]))


def format_entry(key: tuple, value: bool) -> str:
    kind, _, c, s1, target, gamma = key
    cs = "&".join(sorted(c)) if c else "top"
    tg = ("{" + ",".join(map(str, sorted(target))) + "}") if isinstance(target, frozenset) else str(target)
    gs = "{" + ",".join(map(str, sorted(gamma))) + "}"
    return f"{kind} {cs} {s1} {tg} {gs} -> {str(value).lower()}"


def build_state_tbox(n: NNFA, t: NormalizedTBox, focus: int, extra_finals: Iterable[int] = ()) -> StateTBox:
    return StateTBox(n, t, focus, extra_finals)


def in_loop(tables: LoopTables, n: NNFA, c, s1: int, s2: int, gamma=()) -> bool:
    return tables.in_loop(n, c, s1, s2, gamma)


def in_floop(tables: LoopTables, n: NNFA, c, s1: int, finals, gamma=()) -> bool:
    return tables.in_floop(n, c, s1, finals, gamma)
