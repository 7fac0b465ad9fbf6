"""Nested regular expressions, conjunctive queries over them, and nested NFAs.

Automata of an NNFA are indexed from 1. State identifiers are integers that
are unique across all automata of one NNFA.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Union

from .errors import ParseError
from .kb import Role
from .lexer import TokenStream, tokenize


# ---------------------------------------------------------------- symbols

@dataclass(frozen=True, order=True)
class ConceptTest:
    name: str

    def __str__(self) -> str:
        return f"{self.name}?"


@dataclass(frozen=True, order=True)
class NominalTest:
    ind: str

    def __str__(self) -> str:
        return f"{{{self.ind}}}?"


@dataclass(frozen=True, order=True)
class NestedTest:
    indices: tuple

    def __str__(self) -> str:
        return "<" + ",".join(map(str, self.indices)) + ">"


Symbol = Union[Role, ConceptTest, NominalTest]
Label = Union[Role, ConceptTest, NominalTest, NestedTest]


def label_key(lab: Label) -> tuple:
    if isinstance(lab, Role):
        return (0, lab.name, lab.inverted)
    if isinstance(lab, ConceptTest):
        return (1, lab.name)
    if isinstance(lab, NominalTest):
        return (2, lab.ind)
    return (3,) + tuple(lab.indices)


# ---------------------------------------------------------------- NRE

class NRE:
    __slots__ = ()


@dataclass(frozen=True)
class Sym(NRE):
    symbol: Symbol


@dataclass(frozen=True)
class Concat(NRE):
    left: NRE
    right: NRE


@dataclass(frozen=True)
class Union_(NRE):
    left: NRE
    right: NRE


@dataclass(frozen=True)
class Star(NRE):
    inner: NRE


@dataclass(frozen=True)
class Test(NRE):
    inner: NRE


@dataclass(frozen=True)
class Eps(NRE):
    """The empty path; written `()`."""


EPS = Eps()


def nre_size(e: NRE) -> int:
    """Number of operators (concatenation, union, star, test)."""
    if isinstance(e, (Concat, Union_)):
        return 1 + nre_size(e.left) + nre_size(e.right)
    if isinstance(e, (Star, Test)):
        return 1 + nre_size(e.inner)
    return 0


def nre_depth(e: NRE) -> int:
    """Nesting depth of tests."""
    if isinstance(e, (Concat, Union_)):
        return max(nre_depth(e.left), nre_depth(e.right))
    if isinstance(e, Star):
        return nre_depth(e.inner)
    if isinstance(e, Test):
        return 1 + nre_depth(e.inner)
    return 0


def nre_symbols(e: NRE) -> Iterable[Symbol]:
    if isinstance(e, Sym):
        yield e.symbol
    elif isinstance(e, (Concat, Union_)):
        yield from nre_symbols(e.left)
        yield from nre_symbols(e.right)
    elif isinstance(e, (Star, Test)):
        yield from nre_symbols(e.inner)


def map_symbols(e: NRE, f) -> NRE:
    if isinstance(e, Sym):
        return Sym(f(e.symbol))
    if isinstance(e, Concat):
        return Concat(map_symbols(e.left, f), map_symbols(e.right, f))
    if isinstance(e, Union_):
        return Union_(map_symbols(e.left, f), map_symbols(e.right, f))
    if isinstance(e, Star):
        return Star(map_symbols(e.inner, f))
    if isinstance(e, Test):
        return Test(map_symbols(e.inner, f))
    return e


def format_nre(e: NRE, prec: int = 0) -> str:
    """Print with precedence: union 0 < concatenation 1 < star 2 < base 3."""
    if isinstance(e, Sym):
        s = e.symbol
        return str(s)
    if isinstance(e, Eps):
        return "()"
    if isinstance(e, Test):
        return "<" + format_nre(e.inner) + ">"
    if isinstance(e, Star):
        inner = format_nre(e.inner, 3)
        if isinstance(e.inner, Star):
            inner = f"({inner})"
        return inner + "*"
    if isinstance(e, Concat):
        out = format_nre(e.left, 1) + " . " + format_nre(e.right, 2)
        return f"({out})" if prec > 1 else out
    if isinstance(e, Union_):
        out = format_nre(e.left, 0) + " | " + format_nre(e.right, 1)
        return f"({out})" if prec > 0 else out
    raise TypeError(e)


def _parse_nre(ts: TokenStream) -> NRE:
    e = _parse_seq(ts)
    while ts.at("|"):
        ts.next()
        e = Union_(e, _parse_seq(ts))
    return e


def _parse_seq(ts: TokenStream) -> NRE:
    e = _parse_star(ts)
    while ts.at("."):
        ts.next()
        e = Concat(e, _parse_star(ts))
    return e


def _parse_star(ts: TokenStream) -> NRE:
    e = _parse_base(ts)
    if ts.at("*"):
        ts.next()
        e = Star(e)
    return e


def _parse_base(ts: TokenStream) -> NRE:
    t = ts.peek()
    if t is None:
        raise ts.error("expected a path expression")
    if t.text == "(":
        ts.next()
        if ts.at(")"):
            ts.next()
            return EPS
        e = _parse_nre(ts)
        ts.expect(")")
        return e
    if t.text == "<":
        ts.next()
        e = _parse_nre(ts)
        ts.expect(">")
        return Test(e)
    if t.text == "{":
        ts.next()
        ind = ts.expect_ident().text
        ts.expect("}")
        ts.expect("?")
        return Sym(NominalTest(ind))
    if t.kind == "ident":
        ts.next()
        if ts.at("?"):
            ts.next()
            return Sym(ConceptTest(t.text))
        if ts.at("-"):
            ts.next()
            return Sym(Role(t.text, True))
        return Sym(Role(t.text))
    raise ts.error("expected a path expression")


def parse_nre(text: str, allow_internal: bool = False) -> NRE:
    ts = TokenStream(tokenize(text, 1, allow_internal, arrows=()), 1)
    e = _parse_nre(ts)
    if not ts.done():
        raise ts.error("unexpected token")
    return e


# ---------------------------------------------------------------- NNFA

@dataclass(frozen=True)
class Automaton:
    index: int
    states: tuple
    initial: int
    finals: frozenset
    transitions: tuple   # (src, label, dst)


class NNFA:
    """An indexed family of automata; tests on automaton l reference indices > l."""

    def __init__(self, automata: Iterable[Automaton]):
        self.automata: tuple = tuple(automata)
        self.owner: dict[int, int] = {}
        self.out: dict[int, list] = {}
        for a in self.automata:
            for s in a.states:
                if s in self.owner:
                    raise ValueError(f"state {s} occurs in two automata")
                self.owner[s] = a.index
                self.out[s] = []
        for k, a in enumerate(self.automata, start=1):
            if a.index != k:
                raise ValueError("automata must be indexed 1..n in order")
            for src, lab, dst in a.transitions:
                if self.owner.get(src) != k or self.owner.get(dst) != k:
                    raise ValueError(f"transition {src}->{dst} leaves automaton {k}")
                if isinstance(lab, NestedTest):
                    if not lab.indices or any(j <= k or j > len(self.automata) for j in lab.indices):
                        raise ValueError(f"test {lab} on automaton {k} violates the index order")
                self.out[src].append((lab, dst))
        self.reduced = all(len(lab.indices) == 1 for a in self.automata
                           for _, lab, _ in a.transitions if isinstance(lab, NestedTest))
        self.uid = hashlib.sha1(repr(self._structure()).encode()).hexdigest()[:12]

    def _structure(self) -> tuple:
        return tuple((a.index, tuple(sorted(a.states)), a.initial, tuple(sorted(a.finals)),
                      tuple(sorted(((s, label_key(l), d) for s, l, d in a.transitions))))
                     for a in self.automata)

    def __eq__(self, other) -> bool:
        return isinstance(other, NNFA) and self.uid == other.uid and self._structure() == other._structure()

    def __hash__(self) -> int:
        return hash(self.uid)

    def __repr__(self) -> str:
        return f"NNFA({self.uid}, {len(self.automata)} automata)"

    def __len__(self) -> int:
        return len(self.automata)

    def automaton(self, i: int) -> Automaton:
        return self.automata[i - 1]

    def states_of(self, i: int) -> tuple:
        return self.automata[i - 1].states

    def initial(self, i: int) -> int:
        return self.automata[i - 1].initial

    def finals(self, i: int) -> frozenset:
        return self.automata[i - 1].finals

    def all_states(self) -> list[int]:
        return [s for a in self.automata for s in a.states]

    def state_count(self) -> int:
        return len(self.owner)

    def part(self, i: int = 1) -> "NNFAPart":
        return NNFAPart(self, self.initial(i), self.finals(i))

    def referenced(self, i: int) -> set[int]:
        """Indices of automata transitively reachable from α_i through tests."""
        seen: set[int] = set()
        stack = [i]
        while stack:
            k = stack.pop()
            for _, lab, _ in self.automaton(k).transitions:
                if isinstance(lab, NestedTest):
                    for j in lab.indices:
                        if j not in seen:
                            seen.add(j)
                            stack.append(j)
        return seen

    def map_labels(self, f) -> "NNFA":
        return NNFA(Automaton(a.index, a.states, a.initial, a.finals,
                              tuple((s, f(l), d) for s, l, d in a.transitions))
                    for a in self.automata)


@dataclass(frozen=True)
class NNFAPart:
    """The NNFA with start state `start` and final states `finals`, both in one automaton."""

    nnfa: NNFA
    start: int
    finals: frozenset

    def __post_init__(self):
        i = self.nnfa.owner.get(self.start)
        if i is None or any(self.nnfa.owner.get(f) != i for f in self.finals):
            raise ValueError("start and finals of a part must lie in one automaton")

    @property
    def index(self) -> int:
        return self.nnfa.owner[self.start]

    def key(self) -> tuple:
        return (self.nnfa.uid, self.start, tuple(sorted(self.finals)))

    def with_(self, start: int | None = None, finals: Iterable[int] | None = None) -> "NNFAPart":
        return NNFAPart(self.nnfa, self.start if start is None else start,
                        self.finals if finals is None else frozenset(finals))


# ---------------------------------------------------------------- compilation

class _Builder:
    def __init__(self):
        self.next_state = 0
        self.automata: dict[int, Automaton] = {}
        self.next_index = 1

    def new_state(self) -> int:
        s = self.next_state
        self.next_state += 1
        return s

    def compile(self, e: NRE) -> int:
        """Compile e into a fresh automaton (Glushkov construction); return its index."""
        index = self.next_index
        self.next_index += 1
        positions: list = []          # label per position
        pending_tests: list = []      # (position, inner NRE)

        def lin(x: NRE):
            # returns (nullable, first, last) and fills follow
            if isinstance(x, Eps):
                return True, frozenset(), frozenset()
            if isinstance(x, (Sym, Test)):
                p = len(positions)
                if isinstance(x, Sym):
                    positions.append(x.symbol)
                else:
                    positions.append(None)
                    pending_tests.append((p, x.inner))
                follow.append(set())
                return False, frozenset([p]), frozenset([p])
            if isinstance(x, Union_):
                n1, f1, l1 = lin(x.left)
                n2, f2, l2 = lin(x.right)
                return n1 or n2, f1 | f2, l1 | l2
            if isinstance(x, Concat):
                n1, f1, l1 = lin(x.left)
                n2, f2, l2 = lin(x.right)
                for p in l1:
                    follow[p].update(f2)
                return (n1 and n2, f1 | f2 if n1 else f1, l1 | l2 if n2 else l2)
            if isinstance(x, Star):
                n1, f1, l1 = lin(x.inner)
                for p in l1:
                    follow[p].update(f1)
                return True, f1, l1
            raise TypeError(x)

        follow: list[set] = []
        nullable, first, last = lin(e)
        # tests get their automaton indices in left-to-right order
        for p, inner in pending_tests:
            positions[p] = NestedTest((self.compile(inner),))
        init = self.new_state()
        pos_state = [self.new_state() for _ in positions]
        trans = [(init, positions[p], pos_state[p]) for p in sorted(first)]
        for p, fs in enumerate(follow):
            trans += [(pos_state[p], positions[q], pos_state[q]) for q in sorted(fs)]
        finals = {pos_state[p] for p in last}
        if nullable:
            finals.add(init)
        self.automata[index] = Automaton(index, tuple([init] + pos_state), init,
                                         frozenset(finals), tuple(trans))
        return index

    def build(self) -> NNFA:
        return NNFA(self.automata[i] for i in sorted(self.automata))


def compile_nre(e: NRE) -> NNFAPart:
    """Compile an NRE into a reduced NNFA without epsilon transitions."""
    b = _Builder()
    b.compile(e)
    n = b.build()
    return n.part(1)


def reduce_nnfa(n: NNFA) -> NNFA:
    """Split every multi-index test <j1..jk> into a chain of single tests."""
    if n.reduced:
        return n
    next_state = max(n.owner) + 1 if n.owner else 0
    automata = []
    for a in n.automata:
        states = list(a.states)
        trans = []
        for s, lab, d in a.transitions:
            if isinstance(lab, NestedTest) and len(lab.indices) > 1:
                chain = [s]
                for _ in lab.indices[:-1]:
                    chain.append(next_state)
                    states.append(next_state)
                    next_state += 1
                chain.append(d)
                for k, j in enumerate(lab.indices):
                    trans.append((chain[k], NestedTest((j,)), chain[k + 1]))
            else:
                trans.append((s, lab, d))
        automata.append(Automaton(a.index, tuple(states), a.initial, a.finals, tuple(trans)))
    return NNFA(automata)


def reduce_part(p: NNFAPart) -> NNFAPart:
    r = reduce_nnfa(p.nnfa)
    return p if r is p.nnfa else NNFAPart(r, p.start, p.finals)


def level_of(n: NNFA) -> dict[int, int]:
    """level(j) = 0 without tests, else 1 + max level of the referenced automata."""
    levels: dict[int, int] = {}
    for a in reversed(n.automata):
        refs = [j for _, lab, _ in a.transitions if isinstance(lab, NestedTest) for j in lab.indices]
        levels[a.index] = 1 + max(levels[j] for j in refs) if refs else 0
    return dict(sorted(levels.items()))


# ---------------------------------------------------------------- back to NRE

def _union(a: NRE | None, b: NRE | None) -> NRE | None:
    if a is None:
        return b
    if b is None or a == b:
        return a
    return Union_(a, b)


def _concat(a: NRE, b: NRE) -> NRE:
    if isinstance(a, Eps):
        return b
    if isinstance(b, Eps):
        return a
    return Concat(a, b)


def _star(a: NRE) -> NRE:
    if isinstance(a, (Eps, Star)):
        return a
    return Star(a)


def part_to_nre(part: NNFAPart, _memo: dict | None = None) -> NRE | None:
    """State elimination; None if no final state is reachable at all."""
    n = part.nnfa
    memo = {} if _memo is None else _memo
    i = part.index
    a = n.automaton(i)

    def lab_nre(lab: Label) -> NRE | None:
        if isinstance(lab, NestedTest):
            out: NRE = EPS
            for j in lab.indices:
                if j not in memo:
                    memo[j] = part_to_nre(n.part(j), memo)
                inner = memo[j]
                if inner is None:
                    return None
                out = _concat(out, Test(inner))
            return out
        return Sym(lab)

    # prune to states on some start -> final path
    fwd = {part.start}
    stack = [part.start]
    while stack:
        s = stack.pop()
        for _, d in n.out[s]:
            if d not in fwd:
                fwd.add(d)
                stack.append(d)
    back = set(f for f in part.finals if f in fwd)
    if not back:
        return None
    changed = True
    while changed:
        changed = False
        for s, _, d in a.transitions:
            if d in back and s in fwd and s not in back:
                back.add(s)
                changed = True
    live = fwd & back
    S, T = "S", "T"
    edges: dict = {}

    def add(u, v, e):
        if e is not None:
            edges[(u, v)] = _union(edges.get((u, v)), e)

    add(S, part.start, EPS)
    for f in part.finals:
        if f in live:
            add(f, T, EPS)
    for s, lab, d in sorted(a.transitions, key=lambda t: (t[0], label_key(t[1]), t[2])):
        if s in live and d in live:
            add(s, d, lab_nre(lab))
    remaining = sorted(live)
    while remaining:
        def cost(k):
            ins = sum(1 for (u, v) in edges if v == k and u != k)
            outs = sum(1 for (u, v) in edges if u == k and v != k)
            return (ins * outs, k)
        k = min(remaining, key=cost)
        remaining.remove(k)
        loop = edges.pop((k, k), None)
        ins = [(u, e) for (u, v), e in edges.items() if v == k]
        outs = [(v, e) for (u, v), e in edges.items() if u == k]
        for u, _ in ins:
            del edges[(u, k)]
        for v, _ in outs:
            del edges[(k, v)]
        mid = _star(loop) if loop is not None else EPS
        for u, e1 in ins:
            for v, e2 in outs:
                add(u, v, _concat(_concat(e1, mid), e2))
    return edges.get((S, T))


# ---------------------------------------------------------------- queries

@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class Ind:
    name: str

    def __str__(self) -> str:
        return f"'{self.name}'"


Term = Union[Var, Ind]


@dataclass(frozen=True)
class ConceptAtom:
    name: str
    term: Term

    def terms(self) -> tuple:
        return (self.term,)


@dataclass(frozen=True)
class RoleAtom:
    part: NNFAPart
    left: Term
    right: Term
    nre: NRE | None = field(default=None, compare=False, hash=False)

    def terms(self) -> tuple:
        return (self.left, self.right)


@dataclass(frozen=True)
class ExistTestAtom:
    part: NNFAPart
    term: Term
    nre: NRE | None = field(default=None, compare=False, hash=False)

    def terms(self) -> tuple:
        return (self.term,)


QueryAtom = Union[ConceptAtom, RoleAtom, ExistTestAtom]


@dataclass(frozen=True)
class CN2RPQ:
    answer_vars: tuple
    atoms: tuple
    name: str = field(default="q", compare=False)

    @property
    def boolean(self) -> bool:
        return not self.answer_vars

    def terms(self) -> set:
        return {t for a in self.atoms for t in a.terms()}

    def variables(self) -> set:
        return {t for t in self.terms() if isinstance(t, Var)}

    def existential_vars(self) -> set:
        return self.variables() - set(self.answer_vars)

    def individuals(self) -> set:
        out = {t.name for t in self.terms() if isinstance(t, Ind)}
        for a in self.atoms:
            if isinstance(a, (RoleAtom, ExistTestAtom)):
                for au in a.part.nnfa.automata:
                    out.update(l.ind for _, l, _ in au.transitions if isinstance(l, NominalTest))
        return out

    def nnfas(self) -> list:
        out = []
        for a in self.atoms:
            if isinstance(a, (RoleAtom, ExistTestAtom)) and a.part.nnfa not in out:
                out.append(a.part.nnfa)
        return out


def single_atom_query(e: NRE, answer: bool = True) -> CN2RPQ:
    """q(x,y) <- E(x,y)."""
    x, y = Var("x"), Var("y")
    atom = RoleAtom(compile_nre(e), x, y, e)
    return CN2RPQ((x, y) if answer else (), (atom,))


def _parse_term(ts: TokenStream) -> Term:
    t = ts.next()
    if t.kind == "ident":
        return Var(t.text)
    if t.kind == "quoted":
        name = t.text[1:-1]
        if not name or not name[0].isalpha() or not all(ch.isalnum() or ch == "_" for ch in name):
            raise ParseError(f"bad individual name {t.text}", t.line, t.col)
        return Ind(name)
    raise ParseError(f"expected a term, found {t.text!r}", t.line, t.col)


def parse_query(text: str, allow_internal: bool = False) -> CN2RPQ:
    """Read `q(x1,...,xk) <- atom, ..., atom`."""
    toks = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks += tokenize(raw, lineno, allow_internal, arrows=("<-",))
    if not toks:
        raise ParseError("empty query", 1, 1)
    ts = TokenStream(toks, toks[0].line)
    name = ts.expect_ident().text
    ts.expect("(")
    head: list[Var] = []
    if not ts.at(")"):
        while True:
            t = ts.peek()
            term = _parse_term(ts)
            if not isinstance(term, Var):
                raise ParseError("answer positions must be variables", t.line, t.col)
            if term in head:
                raise ParseError(f"answer variable {term} repeated", t.line, t.col)
            head.append(term)
            if ts.at(","):
                ts.next()
                continue
            break
    ts.expect(")")
    ts.expect("<-")
    atoms: list = []
    while True:
        start = ts.peek()
        e = _parse_nre(ts)
        ts.expect("(")
        terms = [_parse_term(ts)]
        if ts.at(","):
            ts.next()
            terms.append(_parse_term(ts))
        ts.expect(")")
        if len(terms) == 1:
            if isinstance(e, Sym) and isinstance(e.symbol, Role) and not e.symbol.inverted:
                atoms.append(ConceptAtom(e.symbol.name, terms[0]))
            elif isinstance(e, Test):
                atoms.append(ExistTestAtom(compile_nre(e.inner), terms[0], e.inner))
            else:
                raise ParseError("a one-term atom must be a concept name or a test <E>",
                                 start.line, start.col)
        else:
            atoms.append(RoleAtom(compile_nre(e), terms[0], terms[1], e))
        if ts.at(","):
            ts.next()
            continue
        break
    if not ts.done():
        raise ts.error("unexpected token")
    q = CN2RPQ(tuple(head), tuple(atoms), name)
    used = q.variables()
    for v in head:
        if v not in used:
            raise ParseError(f"answer variable {v} does not occur in the body", toks[0].line, 1)
    return q


def parse_queries(text: str, allow_internal: bool = False) -> list[CN2RPQ]:
    """One query per non-empty line."""
    out = []
    for raw in text.splitlines():
        if raw.split("#", 1)[0].strip():
            out.append(parse_query(raw, allow_internal))
    return out


def atom_nre(atom) -> NRE:
    if atom.nre is not None:
        return atom.nre
    e = part_to_nre(atom.part)
    if e is None:
        raise ValueError("atom has an empty language and no NRE form")
    return e


def format_atom(a) -> str:
    if isinstance(a, ConceptAtom):
        return f"{a.name}({a.term})"
    if isinstance(a, RoleAtom):
        return f"{format_nre(atom_nre(a), 2)}({a.left}, {a.right})"
    return f"<{format_nre(atom_nre(a))}>({a.term})"


def format_query(q: CN2RPQ) -> str:
    head = ", ".join(v.name for v in q.answer_vars)
    return f"{q.name}({head}) <- " + ", ".join(format_atom(a) for a in q.atoms)


# ---------------------------------------------------------------- nominals

NOMINAL_PREFIX = "__o_"


def eliminate_nominal_tests(q: CN2RPQ, abox=None) -> tuple[CN2RPQ, list]:
    """Replace each {a}? by A_a? and return the assertions A_a(a) to add.

    `abox` is accepted for interface symmetry; the extension depends only on q.
    """
    fresh: dict[str, str] = {}

    def swap(lab):
        if isinstance(lab, NominalTest):
            fresh.setdefault(lab.ind, NOMINAL_PREFIX + lab.ind)
            return ConceptTest(fresh[lab.ind])
        return lab

    cache: dict = {}
    atoms = []
    for a in q.atoms:
        if isinstance(a, ConceptAtom):
            atoms.append(a)
            continue
        n = a.part.nnfa
        if not any(isinstance(l, NominalTest) for au in n.automata for _, l, _ in au.transitions):
            atoms.append(a)
            continue
        if n not in cache:
            cache[n] = n.map_labels(swap)
        part = NNFAPart(cache[n], a.part.start, a.part.finals)
        nre = map_symbols(a.nre, swap) if a.nre is not None else None
        if isinstance(a, RoleAtom):
            atoms.append(RoleAtom(part, a.left, a.right, nre))
        else:
            atoms.append(ExistTestAtom(part, a.term, nre))
    if not fresh:
        return q, []
    ext = sorted((name, ind) for ind, name in fresh.items())
    return CN2RPQ(q.answer_vars, tuple(atoms), q.name), ext
