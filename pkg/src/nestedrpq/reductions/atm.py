"""Alternating Turing machines as KBs plus one nested path query.

The TBox grows a tree whose edges are transitions of the machine together
with the head position after the move; it over-approximates, letting any
symbol be read at each step. The query walks down the tree picking one
branch at existential nodes and both at universal ones, and at every
accepting leaf launches one test automaton per tape cell. Test l walks back
to the root keeping track of the symbol in cell l and checks that the
symbols read along the way were the ones actually on the tape.

Symbols are '0', '1' and 'b' (blank). Moves are -1, 0, +1. The machine
must stay on its m = |w| cells; a move off the tape has no edge in the
tree and makes that branch fail.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from ..kb import (TOP, ConceptAssertion, ConceptInclusion, Exists, KnowledgeBase, Name, Role,
                  check_fragment)
from ..query import (CN2RPQ, NNFA, Automaton, ConceptTest, Ind, NestedTest, NNFAPart, RoleAtom,
                     reduce_nnfa)

SYMBOLS = ("0", "1", "b")


@dataclass(frozen=True)
class ATMSpec:
    states: tuple
    universal: frozenset
    delta1: dict          # (state, symbol) -> (state, symbol, move)
    delta2: dict
    init: str
    acc: str
    rej: str
    word: str
    name: str = "atm"

    @property
    def m(self) -> int:
        return len(self.word)

    def existential(self, s: str) -> bool:
        return s not in self.universal

    def delta(self, p: int) -> dict:
        return self.delta1 if p == 1 else self.delta2

    def validate(self) -> None:
        if self.init in (self.acc, self.rej):
            raise ValueError("assumption (i) violated: the initial state is a final state")
        if not self.word or any(c not in "01" for c in self.word):
            raise ValueError("the input word must be a non-empty string over {0,1}")
        if self.acc in self.universal or self.rej in self.universal:
            raise ValueError("accepting and rejecting states must be existential")
        known = set(self.states)
        for s in (self.init, self.acc, self.rej):
            if s not in known:
                raise ValueError(f"state {s} is not declared")
        for p in (1, 2):
            d = self.delta(p)
            for s in self.states:
                if s in (self.acc, self.rej):
                    continue
                for a in SYMBOLS:
                    if (s, a) not in d:
                        raise ValueError(f"assumption (iii) violated: delta{p}({s},{a}) is undefined")
                    s2, a2, mv = d[(s, a)]
                    if s2 not in known or a2 not in SYMBOLS or mv not in (-1, 0, 1):
                        raise ValueError(f"bad transition delta{p}({s},{a})")

    def format(self) -> str:
        ex = [s for s in self.states if s not in self.universal]
        lines = [f"name: {self.name}", "states: " + " ".join(self.states),
                 "existential: " + " ".join(ex), "universal: " + " ".join(sorted(self.universal)),
                 f"init: {self.init}", f"accept: {self.acc}", f"reject: {self.rej}",
                 f"word: {self.word}"]
        for p in (1, 2):
            lines.append(f"delta{p}:")
            for (s, a), (s2, a2, mv) in sorted(self.delta(p).items()):
                lines.append(f"  {s},{a} -> {s2},{a2},{mv:+d}" if mv else f"  {s},{a} -> {s2},{a2},0")
        return "\n".join(lines) + "\n"


def parse_atm(text: str) -> ATMSpec:
    fields: dict = {}
    deltas: dict = {1: {}, 2: {}}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line in ("delta1:", "delta2:"):
            section = int(line[5])
            continue
        if "->" in line:
            if section is None:
                raise ValueError(f"line {lineno}: transition outside a delta section")
            lhs, rhs = (x.strip() for x in line.split("->", 1))
            try:
                s, a = (x.strip() for x in lhs.split(","))
                s2, a2, mv = (x.strip() for x in rhs.split(","))
                move = int(mv)
            except ValueError:
                raise ValueError(f"line {lineno}: expected 's,a -> s2,a2,move'") from None
            deltas[section][(s, a)] = (s2, a2, move)
            continue
        if ":" not in line:
            raise ValueError(f"line {lineno}: expected 'key: value'")
        key, val = (x.strip() for x in line.split(":", 1))
        fields[key] = val
        section = None
    try:
        spec = ATMSpec(tuple(fields["states"].split()), frozenset(fields.get("universal", "").split()),
                       deltas[1], deltas[2], fields["init"], fields["accept"], fields["reject"],
                       fields["word"], fields.get("name", "atm"))
    except KeyError as e:
        raise ValueError(f"missing field {e.args[0]!r}") from None
    spec.validate()
    return spec


# ---------------------------------------------------------------- oracle

def simulate_atm(m: ATMSpec) -> bool:
    """Acceptance as the least fixpoint over reachable configurations."""
    m.validate()
    start = (m.init, 1, tuple(m.word))
    succ: dict = {}
    stack = [start]
    seen = {start}
    while stack:
        cfg = stack.pop()
        s, pos, tape = cfg
        if s in (m.acc, m.rej):
            if s == m.acc and any(c != "b" for c in tape):
                warnings.warn(f"{m.name}: accepting halt with a non-blank tape {''.join(tape)}; "
                              "the reduction assumes blanks before halting")
            continue
        nxt = []
        for p in (1, 2):
            s2, a2, mv = m.delta(p)[(s, tape[pos - 1])]
            p2 = pos + mv
            if not 1 <= p2 <= m.m:
                raise ValueError(f"{m.name}: the head leaves the {m.m} tape cells")
            t2 = tape[:pos - 1] + (a2,) + tape[pos:]
            c2 = (s2, p2, t2)
            nxt.append(c2)
            if c2 not in seen:
                seen.add(c2)
                stack.append(c2)
        succ[cfg] = nxt
    good = {c for c in seen if c[0] == m.acc}
    changed = True
    while changed:
        changed = False
        for cfg, nxt in succ.items():
            if cfg in good:
                continue
            ok = any(c in good for c in nxt) if m.existential(cfg[0]) else all(c in good for c in nxt)
            if ok:
                good.add(cfg)
                changed = True
    return start in good


# ---------------------------------------------------------------- generator

def _transitions(m: ATMSpec) -> list[tuple]:
    """Distinct transitions (s, a, s2, a2, d) of δ1 ∪ δ2, in a fixed order."""
    out = set()
    for p in (1, 2):
        for (s, a), (s2, a2, d) in m.delta(p).items():
            if s not in (m.acc, m.rej):
                out.add((s, a, s2, a2, d))
    return sorted(out)


def gen_atm_instance(m: ATMSpec, variant: str = "dl-lite") -> tuple[KnowledgeBase, CN2RPQ, str]:
    """KB, Boolean query and individual a with: M accepts w iff the query holds.

    `variant` is "dl-lite" (DL-Lite_core TBox) or "el".
    """
    if variant not in ("dl-lite", "el"):
        raise ValueError("variant must be 'dl-lite' or 'el'")
    m.validate()
    trans = _transitions(m)
    tid = {t: k for k, t in enumerate(trans)}
    mm = m.m

    def consistent(p, t):
        s, a, s2, a2, d = t
        return m.delta(p).get((s, a)) == (s2, a2, d)

    def role(p, t, i):
        return Role(f"r{p}_{tid[t]}_{i}")

    def filler(p, t, i):
        return Name(f"A{p}_{tid[t]}_{i}") if variant == "el" else TOP

    # roles r_{p,t,i} with the head on the tape before and after the move
    roles = [(p, t, i) for t in trans for p in (1, 2) if consistent(p, t)
             for i in range(1, mm + 1) if 1 <= i - t[4] <= mm]

    def back(p, t, i):
        """Left-hand side standing for 'has an incoming r_{p,t,i} edge'."""
        if variant == "el":
            return filler(p, t, i)
        return Exists(role(p, t, i).inverse(), TOP)

    def starts(s: str, i: int):
        """(p, t, i') for the moves out of state s with the head at i."""
        out = []
        for a in SYMBOLS:
            for p in (1, 2):
                s2, a2, d = m.delta(p)[(s, a)]
                t = (s, a, s2, a2, d)
                if 1 <= i + d <= mm:
                    out.append((p, t, i + d))
        return out

    tbox: list = []
    for p, t, i in starts(m.init, 1):
        tbox.append(ConceptInclusion(Name("A_init"), Exists(role(p, t, i), filler(p, t, i))))
    for p, t, i in roles:
        s2 = t[2]
        if s2 not in (m.acc, m.rej):
            for p2, t2, i2 in starts(s2, i):
                tbox.append(ConceptInclusion(back(p, t, i), Exists(role(p2, t2, i2), filler(p2, t2, i2))))
        if s2 == m.acc:
            label = "A_final"
        elif s2 == m.rej:
            label = None
        else:
            label = "A_ex" if m.existential(s2) else "A_all"
        if label:
            tbox.append(ConceptInclusion(back(p, t, i), Name(label)))
    tbox = list(dict.fromkeys(tbox))
    root = "A_ex" if m.existential(m.init) else "A_all"
    abox = (ConceptAssertion(Name("A_init"), "a"), ConceptAssertion(Name(root), "a"))
    kb = KnowledgeBase(tuple(tbox), abox, "dl-lite-core" if variant == "dl-lite" else "el")
    check_fragment(kb)

    # automaton 1 selects a computation; automaton l+1 checks tape cell l
    ids = iter(range(10 ** 6))
    down, cl, cr, up, updown, test, fin = (next(ids) for _ in range(7))
    tr = [(down, ConceptTest("A_ex"), cl), (down, ConceptTest("A_ex"), cr),
          (down, ConceptTest("A_all"), cl), (down, ConceptTest("A_final"), test),
          (test, NestedTest(tuple(range(2, mm + 2))), up),
          (updown, ConceptTest("A_all"), cr), (updown, ConceptTest("A_ex"), up),
          (up, ConceptTest("A_init"), fin)]
    if m.existential(m.init):
        tr.append((updown, ConceptTest("A_init"), fin))
    for p, t, i in roles:
        r = role(p, t, i)
        tr.append((cl if p == 1 else cr, r, down))
        tr.append((up, r.inverse(), updown if p == 1 else up))
    automata = [Automaton(1, (down, cl, cr, up, updown, test, fin), down, frozenset([fin]), tuple(tr))]
    for l in range(1, mm + 1):
        sym = {a: next(ids) for a in SYMBOLS}
        done = next(ids)
        tl = []
        for p, t, i in roles:
            rinv = role(p, t, i).inverse()
            s, a, s2, a2, d = t
            if l != i - d:
                tl += [(sym[x], rinv, sym[x]) for x in SYMBOLS]
            else:
                tl.append((sym[a2], rinv, sym[a]))
        tl.append((sym[m.word[l - 1]], ConceptTest("A_init"), done))
        automata.append(Automaton(l + 1, tuple(sym[x] for x in SYMBOLS) + (done,), sym["b"],
                                  frozenset([done]), tuple(tl)))
    n = reduce_nnfa(NNFA(automata))
    part = NNFAPart(n, down, frozenset([fin]))
    q = CN2RPQ((), (RoleAtom(part, Ind("a"), Ind("a")),), "accepts")
    return kb, q, "a"


# ---------------------------------------------------------------- corpus

def _det(states_moves: dict) -> dict:
    """Expand {(s, a): (s2, a2, d)} entries given per symbol or with a '*' wildcard."""
    out = {}
    for (s, a), v in states_moves.items():
        for x in (SYMBOLS if a == "*" else (a,)):
            s2, a2, d = v
            out[(s, x)] = (s2, x if a2 == "=" else a2, d)
    return out


def _machine(name, states, universal, d1, d2, word, init="init", acc="acc", rej="rej") -> ATMSpec:
    return ATMSpec(tuple(states), frozenset(universal), _det(d1), _det(d2), init, acc, rej, word, name)


def corpus() -> list[tuple[ATMSpec, bool]]:
    """Small machines (m <= 2, <= 6 states) with their expected acceptance."""
    out = []
    # write a blank and accept (or reject)
    d = {("init", "*"): ("wb", "=", 0), ("wb", "*"): ("acc", "b", 0)}
    out.append((_machine("accept", ["init", "wb", "acc", "rej"], [], d, d, "1"), True))
    d = {("init", "*"): ("wb", "=", 0), ("wb", "*"): ("rej", "b", 0)}
    out.append((_machine("reject", ["init", "wb", "acc", "rej"], [], d, d, "1"), False))
    # check both cells hold 1 (universal) or one of them does (existential)
    check = {("c1", "1"): ("z", "b", 1), ("c1", "0"): ("rej", "=", 0), ("c1", "b"): ("rej", "=", 0),
             ("c2", "1"): ("z", "b", -1), ("c2", "0"): ("rej", "=", 0), ("c2", "b"): ("rej", "=", 0),
             ("z", "*"): ("acc", "b", 0)}
    states = ["init", "c1", "c2", "z", "acc", "rej"]
    d1 = {**check, ("init", "*"): ("c1", "=", 0)}
    d2 = {**check, ("init", "*"): ("c2", "=", 1)}
    for w, exp in (("11", True), ("10", False), ("01", False)):
        out.append((_machine(f"and-{w}", states, ["init"], d1, d2, w), exp))
    for w, exp in (("10", True), ("01", True), ("00", False)):
        out.append((_machine(f"or-{w}", states, [], d1, d2, w), exp))
    # an existential choice between looping forever and accepting
    d1 = {("init", "*"): ("init", "=", 0), ("wb", "*"): ("acc", "b", 0)}
    d2 = {("init", "*"): ("wb", "=", 0), ("wb", "*"): ("acc", "b", 0)}
    out.append((_machine("loop-or-accept", ["init", "wb", "acc", "rej"], [], d1, d2, "1"), True))
    out.append((_machine("loop-and-accept", ["init", "wb", "acc", "rej"], ["init"], d1, d2, "1"), False))
    d = {("init", "*"): ("init", "=", 0)}
    out.append((_machine("loop", ["init", "acc", "rej"], [], d, d, "0"), False))
    return out
