"""ELHI-bot knowledge bases: syntax, text format, fragments and normal form."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

from .errors import FragmentError, ParseError
from .lexer import TokenStream, tokenize

FRESH_PREFIX = "__n"

FRAGMENTS = ("elhi-bot", "elhi", "elh", "eli", "el", "dl-lite-r", "dl-lite-core", "plain")


# ---------------------------------------------------------------- roles

@dataclass(frozen=True, order=True)
class Role:
    name: str
    inverted: bool = False

    def inverse(self) -> "Role":
        return Role(self.name, not self.inverted)

    def __str__(self) -> str:
        return self.name + ("-" if self.inverted else "")


# ---------------------------------------------------------------- concepts

class Concept:
    """Base class of concept expressions. Instances are immutable."""

    __slots__ = ()

    def subconcepts(self) -> Iterable["Concept"]:
        yield self


class _Top(Concept):
    __slots__ = ()

    def __repr__(self) -> str:
        return "Top"

    def __reduce__(self):
        return (_top, ())


class _Bot(Concept):
    __slots__ = ()

    def __repr__(self) -> str:
        return "Bot"

    def __reduce__(self):
        return (_bot, ())


TOP = _Top()
BOT = _Bot()


def _top() -> Concept:
    return TOP


def _bot() -> Concept:
    return BOT


@dataclass(frozen=True)
class Name(Concept):
    name: str

    def __repr__(self) -> str:
        return f"Name({self.name})"


@dataclass(frozen=True)
class Exists(Concept):
    role: Role
    filler: Concept

    def subconcepts(self):
        yield self
        yield from self.filler.subconcepts()


class And(Concept):
    """Binary conjunction. Equality is modulo associativity, commutativity
    and idempotence: two conjunctions are equal iff their flattened sets of
    conjuncts are equal."""

    __slots__ = ("left", "right", "_key")

    def __init__(self, left: Concept, right: Concept):
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "_key", frozenset(self.conjuncts()))

    def __setattr__(self, name, value):
        raise AttributeError("And is immutable")

    def conjuncts(self) -> list[Concept]:
        out: list[Concept] = []
        stack: list[Concept] = [self]
        while stack:
            c = stack.pop()
            if isinstance(c, And):
                stack.append(c.right)
                stack.append(c.left)
            else:
                out.append(c)
        return out

    def subconcepts(self):
        yield self
        yield from self.left.subconcepts()
        yield from self.right.subconcepts()

    def __eq__(self, other) -> bool:
        return isinstance(other, And) and self._key == other._key

    def __hash__(self) -> int:
        return hash(("And", self._key))

    def __repr__(self) -> str:
        return f"And({self.left!r}, {self.right!r})"

    def __reduce__(self):
        return (And, (self.left, self.right))


def conj(parts: list[Concept]) -> Concept:
    """Left-nested conjunction of a non-empty list."""
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


# ---------------------------------------------------------------- axioms

@dataclass(frozen=True)
class ConceptInclusion:
    lhs: Concept
    rhs: Concept


@dataclass(frozen=True)
class RoleInclusion:
    sub: Role
    sup: Role


class DisjointRoles:
    """r & s <= bot, stored unordered."""

    __slots__ = ("first", "second")

    def __init__(self, first: Role, second: Role):
        a, b = sorted((first, second))
        object.__setattr__(self, "first", a)
        object.__setattr__(self, "second", b)

    def __setattr__(self, name, value):
        raise AttributeError("DisjointRoles is immutable")

    def __eq__(self, other) -> bool:
        return isinstance(other, DisjointRoles) and (self.first, self.second) == (other.first, other.second)

    def __hash__(self) -> int:
        return hash(("DisjointRoles", self.first, self.second))

    def __repr__(self) -> str:
        return f"DisjointRoles({self.first}, {self.second})"

    def __reduce__(self):
        return (DisjointRoles, (self.first, self.second))


TBoxAxiom = Union[ConceptInclusion, RoleInclusion, DisjointRoles]


@dataclass(frozen=True)
class ConceptAssertion:
    concept: Concept
    ind: str


@dataclass(frozen=True)
class RoleAssertion:
    role: Role
    subj: str
    obj: str


ABoxAssertion = Union[ConceptAssertion, RoleAssertion]


@dataclass(frozen=True)
class KnowledgeBase:
    tbox: tuple = ()
    abox: tuple = ()
    fragment: str = "elhi-bot"

    def individuals(self) -> set[str]:
        out: set[str] = set()
        for a in self.abox:
            if isinstance(a, ConceptAssertion):
                out.add(a.ind)
            else:
                out.update((a.subj, a.obj))
        return out


# ---------------------------------------------------------------- parsing

def _parse_role(ts: TokenStream) -> Role:
    name = ts.expect_ident().text
    if ts.at("-"):
        ts.next()
        return Role(name, True)
    return Role(name)


def _parse_concept(ts: TokenStream) -> Concept:
    c = _parse_primary(ts)
    while ts.at("&"):
        ts.next()
        c = And(c, _parse_primary(ts))
    return c


def _parse_primary(ts: TokenStream) -> Concept:
    t = ts.peek()
    if t is None:
        raise ts.error("expected a concept")
    if t.text == "(":
        ts.next()
        c = _parse_concept(ts)
        ts.expect(")")
        return c
    if t.kind != "ident":
        raise ts.error("expected a concept")
    ts.next()
    if t.text == "top":
        return TOP
    if t.text == "bot":
        return BOT
    if t.text == "exists":
        r = _parse_role(ts)
        ts.expect(".")
        return Exists(r, _parse_primary(ts))
    return Name(t.text)


def _simplify(c: Concept) -> Concept:
    """Drop top from conjunctions and fold bot."""
    if isinstance(c, Exists):
        f = _simplify(c.filler)
        return BOT if f is BOT else Exists(c.role, f)
    if isinstance(c, And):
        parts = [_simplify(p) for p in c.conjuncts()]
        if any(p is BOT for p in parts):
            return BOT
        parts = [p for p in parts if p is not TOP]
        if not parts:
            return TOP
        return conj(parts)
    return c


def _is_role_line(ts: TokenStream) -> bool:
    """A side of '<=' that is a bare role: NAME or NAME-."""
    toks = ts.toks
    return (len(toks) in (1, 2) and toks[0].kind == "ident"
            and toks[0].text not in ("top", "bot", "exists")
            and (len(toks) == 1 or toks[1].text == "-"))


def _split(tokens, sep: str):
    for i, t in enumerate(tokens):
        if t.text == sep:
            return tokens[:i], tokens[i + 1:]
    return None


def parse_kb(text: str, allow_internal: bool = False) -> KnowledgeBase:
    """Read the line-oriented KB format into surface (unnormalized) axioms."""
    fragment = "elhi-bot"
    lines: list[tuple[int, list]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = tokenize(raw, lineno, allow_internal)
        if not toks:
            continue
        if toks[0].text == "fragment" and len(toks) >= 2 and not any(t.text in ("<=", "(") for t in toks):
            tag = "".join(t.text for t in toks[1:])
            if tag not in FRAGMENTS or tag == "plain":
                raise ParseError(f"unknown fragment {tag!r}", lineno, toks[1].col)
            if lines:
                raise ParseError("fragment header must precede axioms", lineno, 1)
            fragment = tag
            continue
        lines.append((lineno, toks))

    # First pass: collect names whose kind is evident from the syntax.
    roles: set[str] = set()
    concepts: set[str] = set()
    for lineno, toks in lines:
        for i, t in enumerate(toks):
            if t.kind != "ident":
                continue
            if i > 0 and toks[i - 1].text == "exists":
                roles.add(t.text)
            elif i + 1 < len(toks) and toks[i + 1].text == "-":
                roles.add(t.text)
        if _split(toks, "<=") is None and len(toks) >= 4 and toks[1].text in ("(", "-"):
            if "," in (t.text for t in toks):
                roles.add(toks[0].text)
            else:
                concepts.add(toks[0].text)
        sides = _split(toks, "<=")
        complex_line = any(t.text in ("exists", "top", "(") for t in toks) or (
            sides is not None and any(t.text == "bot" for t in sides[0]))
        if sides is not None and complex_line:
            for i, t in enumerate(toks):
                if (t.kind == "ident" and t.text not in ("top", "bot", "exists")
                        and not (i > 0 and toks[i - 1].text == "exists")
                        and not (i + 1 < len(toks) and toks[i + 1].text == "-")):
                    concepts.add(t.text)

    def looks_like_role(name: str) -> bool:
        if name in roles:
            return True
        if name in concepts:
            return False
        return name[:1].islower()

    tbox: list = []
    abox: list = []
    for lineno, toks in lines:
        sides = _split(toks, "<=")
        try:
            if sides is None:
                abox.append(_parse_assertion(TokenStream(toks, lineno)))
                continue
            left, right = sides
            if not left or not right:
                raise ParseError("empty side of '<='", lineno, toks[0].col)
            lts, rts = TokenStream(left, lineno), TokenStream(right, lineno)
            # role disjointness: r & s <= bot
            amp = _split(left, "&")
            if (len(right) == 1 and right[0].text == "bot" and amp is not None
                    and _is_role_line(TokenStream(amp[0])) and _is_role_line(TokenStream(amp[1]))
                    and (any(t.text == "-" for t in left)
                         or all(looks_like_role(x[0].text) for x in amp))):
                a, b = TokenStream(amp[0], lineno), TokenStream(amp[1], lineno)
                tbox.append(DisjointRoles(_parse_role(a), _parse_role(b)))
                continue
            if _is_role_line(lts) and _is_role_line(rts) and (
                    any(t.text == "-" for t in toks)
                    or looks_like_role(left[0].text) or looks_like_role(right[0].text)):
                tbox.append(RoleInclusion(_parse_role(lts), _parse_role(rts)))
                continue
            lhs = _parse_concept(lts)
            if not lts.done():
                raise lts.error("unexpected token")
            rhs = _parse_concept(rts)
            if not rts.done():
                raise rts.error("unexpected token")
            tbox.append(ConceptInclusion(lhs, rhs))
        except ParseError:
            raise
    kb = KnowledgeBase(tuple(tbox), tuple(abox), fragment)
    check_fragment(kb)
    return kb


def _parse_assertion(ts: TokenStream) -> ABoxAssertion:
    if ts.at("("):
        # complex concept assertion: (C)(a)
        ts.next()
        c = _parse_concept(ts)
        ts.expect(")")
        ts.expect("(")
        ind = ts.expect_ident().text
        ts.expect(")")
        if not ts.done():
            raise ts.error("unexpected token")
        return ConceptAssertion(c, ind)
    name = ts.expect_ident()
    inverted = False
    if ts.at("-"):
        ts.next()
        inverted = True
    ts.expect("(")
    a = ts.expect_ident().text
    if ts.at(","):
        ts.next()
        b = ts.expect_ident().text
        ts.expect(")")
        if not ts.done():
            raise ts.error("unexpected token")
        return RoleAssertion(Role(name.text, inverted), a, b)
    ts.expect(")")
    if not ts.done():
        raise ts.error("unexpected token")
    if inverted:
        raise ParseError("a concept assertion cannot use an inverse", name.line, name.col)
    if name.text in ("top", "bot"):
        return ConceptAssertion(TOP if name.text == "top" else BOT, a)
    return ConceptAssertion(Name(name.text), a)


# ---------------------------------------------------------------- fragments

def _is_basic(c: Concept) -> bool:
    return isinstance(c, Name) or (isinstance(c, Exists) and c.filler is TOP)


def _roles_of(c: Concept):
    for s in c.subconcepts():
        if isinstance(s, Exists):
            yield s.role


def _has_bot(c: Concept) -> bool:
    return any(s is BOT for s in c.subconcepts())


def check_fragment(kb: KnowledgeBase) -> None:
    """Raise FragmentError naming the first axiom outside kb.fragment."""
    frag = kb.fragment
    if frag in ("elhi-bot", "plain"):
        if frag == "plain" and kb.tbox:
            raise FragmentError(f"plain graphs have no TBox: {format_axiom(kb.tbox[0])}")
        return
    dl_lite = frag.startswith("dl-lite")
    no_inverse = frag in ("elh", "el")
    no_role_incl = frag in ("eli", "el", "dl-lite-core")
    no_bot = frag in ("elhi", "elh", "eli", "el")
    for ax in kb.tbox:
        bad = None
        if isinstance(ax, RoleInclusion):
            if no_role_incl:
                bad = "role inclusions are not allowed"
            elif no_inverse and (ax.sub.inverted or ax.sup.inverted):
                bad = "inverse roles are not allowed"
        elif isinstance(ax, DisjointRoles):
            if no_bot or frag == "dl-lite-core":
                bad = "negative role inclusions are not allowed"
            elif no_inverse and (ax.first.inverted or ax.second.inverted):
                bad = "inverse roles are not allowed"
        else:
            lhs, rhs = ax.lhs, ax.rhs
            if no_bot and (_has_bot(lhs) or _has_bot(rhs)):
                bad = "bottom is not allowed"
            elif no_inverse and any(r.inverted for c in (lhs, rhs) for r in _roles_of(c)):
                bad = "inverse roles are not allowed"
            elif dl_lite:
                ok = (_is_basic(lhs) and _is_basic(rhs)) or (
                    rhs is BOT and isinstance(lhs, And)
                    and len(lhs.conjuncts()) == 2 and all(_is_basic(x) for x in lhs.conjuncts()))
                if not ok:
                    bad = "DL-Lite allows only B1 <= B2 and B1 & B2 <= bot with basic B"
        if bad:
            raise FragmentError(f"{bad} in fragment {frag}: {format_axiom(ax)}")
    for a in kb.abox:
        if isinstance(a, ConceptAssertion) and no_bot and _has_bot(a.concept):
            raise FragmentError(f"bottom is not allowed in fragment {frag}: {format_assertion(a)}")


# ---------------------------------------------------------------- printing

def format_concept(c: Concept) -> str:
    if c is TOP:
        return "top"
    if c is BOT:
        return "bot"
    if isinstance(c, Name):
        return c.name
    if isinstance(c, Exists):
        f = format_concept(c.filler)
        if isinstance(c.filler, And):
            f = f"({f})"
        return f"exists {c.role}.{f}"
    if isinstance(c, And):
        left = format_concept(c.left)
        right = format_concept(c.right)
        if isinstance(c.right, And):
            right = f"({right})"
        return f"{left} & {right}"
    raise TypeError(c)


def format_axiom(ax) -> str:
    if isinstance(ax, ConceptInclusion):
        return f"{format_concept(ax.lhs)} <= {format_concept(ax.rhs)}"
    if isinstance(ax, RoleInclusion):
        return f"{ax.sub} <= {ax.sup}"
    if isinstance(ax, DisjointRoles):
        return f"{ax.first} & {ax.second} <= bot"
    raise TypeError(ax)


def format_assertion(a) -> str:
    if isinstance(a, RoleAssertion):
        return f"{a.role}({a.subj}, {a.obj})"
    if isinstance(a.concept, (Name, _Top, _Bot)):
        return f"{format_concept(a.concept)}({a.ind})"
    return f"({format_concept(a.concept)})({a.ind})"


def format_kb(kb: KnowledgeBase) -> str:
    lines = []
    if kb.fragment not in ("elhi-bot", "plain"):
        lines.append(f"fragment {kb.fragment}")
    lines += [format_axiom(a) for a in kb.tbox]
    lines += [format_assertion(a) for a in kb.abox]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- normal form

@dataclass(frozen=True)
class NormalizedTBox:
    """A TBox restricted to the five normal-form concept shapes.

    bottom:      A <= bot
    exists_rhs:  A <= exists r.B     as (A, r, B)
    top:         top <= A
    conj:        B1 & B2 <= A        as (B1, B2, A); atomic A <= B is (A, A, B)
    exists_lhs:  exists r.B <= A     as (r, B, A)
    """

    bottom: frozenset = frozenset()
    exists_rhs: frozenset = frozenset()
    top: frozenset = frozenset()
    conj: frozenset = frozenset()
    exists_lhs: frozenset = frozenset()
    role_inclusions: frozenset = frozenset()
    disjoint_roles: frozenset = frozenset()
    registry: tuple = ()

    def extend(self, *, bottom=(), exists_rhs=(), top=(), conj=(), exists_lhs=(),
               role_inclusions=(), disjoint_roles=(), registry=()) -> "NormalizedTBox":
        return NormalizedTBox(
            self.bottom | frozenset(bottom),
            self.exists_rhs | frozenset(exists_rhs),
            self.top | frozenset(top),
            self.conj | frozenset(conj),
            self.exists_lhs | frozenset(exists_lhs),
            self.role_inclusions | frozenset(role_inclusions),
            self.disjoint_roles | frozenset(disjoint_roles),
            self.registry + tuple(registry),
        )

    def union(self, other: "NormalizedTBox") -> "NormalizedTBox":
        return self.extend(bottom=other.bottom, exists_rhs=other.exists_rhs, top=other.top,
                           conj=other.conj, exists_lhs=other.exists_lhs,
                           role_inclusions=other.role_inclusions,
                           disjoint_roles=other.disjoint_roles, registry=other.registry)

    def concept_names(self) -> set[str]:
        out = set(self.bottom) | set(self.top)
        for a, _, b in self.exists_rhs:
            out.update((a, b))
        for b1, b2, a in self.conj:
            out.update((b1, b2, a))
        for _, b, a in self.exists_lhs:
            out.update((b, a))
        return out

    def role_names(self) -> set[str]:
        out = {r.name for _, r, _ in self.exists_rhs} | {r.name for r, _, _ in self.exists_lhs}
        for r, s in self.role_inclusions:
            out.update((r.name, s.name))
        for d in self.disjoint_roles:
            out.update((d.first.name, d.second.name))
        return out

    def axiom_count(self) -> int:
        return (len(self.bottom) + len(self.exists_rhs) + len(self.top) + len(self.conj)
                + len(self.exists_lhs) + len(self.role_inclusions) + len(self.disjoint_roles))

    def axioms(self) -> list:
        """Surface axioms, in a deterministic order."""
        out: list = []
        out += [ConceptInclusion(Name(a), BOT) for a in sorted(self.bottom)]
        out += [ConceptInclusion(Name(a), Exists(r, Name(b)))
                for a, r, b in sorted(self.exists_rhs)]
        out += [ConceptInclusion(TOP, Name(a)) for a in sorted(self.top)]
        out += [ConceptInclusion(And(Name(b1), Name(b2)), Name(a))
                for b1, b2, a in sorted(self.conj)]
        out += [ConceptInclusion(Exists(r, Name(b)), Name(a))
                for r, b, a in sorted(self.exists_lhs)]
        out += [RoleInclusion(r, s) for r, s in sorted(self.role_inclusions)]
        out += sorted(self.disjoint_roles, key=lambda d: (d.first, d.second))
        return out

    def format(self) -> str:
        return "\n".join(format_axiom(a) for a in self.axioms()) + ("\n" if self.axiom_count() else "")


@dataclass(frozen=True)
class NormalizedABox:
    concepts: frozenset = frozenset()   # (A, a)
    roles: frozenset = frozenset()      # (p, a, b) with p a role name
    inds: frozenset = frozenset()

    def individuals(self) -> frozenset:
        return self.inds

    def extend(self, concepts=(), roles=(), inds=()) -> "NormalizedABox":
        concepts = frozenset(concepts)
        roles = frozenset(roles)
        new = set(inds) | {a for _, a in concepts} | {x for _, a, b in roles for x in (a, b)}
        return NormalizedABox(self.concepts | concepts, self.roles | roles, self.inds | new)

    def format(self) -> str:
        lines = [f"{a}({i})" for a, i in sorted(self.concepts)]
        lines += [f"{p}({a}, {b})" for p, a, b in sorted(self.roles)]
        return "\n".join(lines) + ("\n" if lines else "")


def make_abox(concepts=(), roles=(), inds=()) -> NormalizedABox:
    return NormalizedABox().extend(concepts, roles, inds)


class _Normalizer:
    def __init__(self, start: int = 0, prefix: str = FRESH_PREFIX):
        self.counter = start
        self.prefix = prefix
        self.names: dict[Concept, str] = {}
        self.emitted: set[tuple[str, str]] = set()   # (name, "lhs"|"rhs")
        self.registry: list[tuple[str, Concept]] = []
        self.bottom: set = set()
        self.exists_rhs: set = set()
        self.top: set = set()
        self.conj: set = set()
        self.exists_lhs: set = set()

    def fresh_for(self, c: Concept) -> str:
        if c not in self.names:
            self.counter += 1
            n = f"{self.prefix}{self.counter}"
            self.names[c] = n
            self.registry.append((n, c))
        return self.names[c]

    # name X with C <= X
    def lname(self, c: Concept) -> str:
        if isinstance(c, Name):
            return c.name
        x = self.fresh_for(c)
        if (x, "lhs") not in self.emitted:
            self.emitted.add((x, "lhs"))
            self.emit_lhs(c, x)
        return x

    # name X with X <= C
    def rname(self, c: Concept) -> str:
        if isinstance(c, Name):
            return c.name
        x = self.fresh_for(c)
        if (x, "rhs") not in self.emitted:
            self.emitted.add((x, "rhs"))
            self.add_ci(Name(x), c)
        return x

    def emit_lhs(self, c: Concept, a: str) -> None:
        """Emit axioms for C <= A with A a concept name."""
        if c is BOT:
            return
        if c is TOP:
            self.top.add(a)
        elif isinstance(c, Name):
            if c.name != a:
                self.conj.add((c.name, c.name, a))
        elif isinstance(c, Exists):
            self.exists_lhs.add((c.role, self.lname(c.filler), a))
        elif isinstance(c, And):
            parts = [self.lname(p) for p in c.conjuncts()]
            parts = sorted(set(parts), key=parts.index)
            if len(parts) == 1:
                if parts[0] != a:
                    self.conj.add((parts[0], parts[0], a))
                return
            acc = parts[0]
            for i, p in enumerate(parts[1:], start=1):
                if i == len(parts) - 1:
                    self.conj.add((acc, p, a))
                else:
                    nxt = self.fresh_for(conj([Name(x) for x in parts[: i + 1]]))
                    if (nxt, "lhs") not in self.emitted:
                        self.emitted.add((nxt, "lhs"))
                        self.conj.add((acc, p, nxt))
                    acc = nxt
        else:
            raise TypeError(c)

    def add_ci(self, lhs: Concept, rhs: Concept) -> None:
        lhs, rhs = _simplify(lhs), _simplify(rhs)
        if lhs is BOT or rhs is TOP:
            return
        if isinstance(rhs, And):
            parts = rhs.conjuncts()
            if not isinstance(lhs, Name) and len(parts) > 1:
                lhs = Name(self.lname(lhs))
            for p in parts:
                self.add_ci(lhs, p)
            return
        if isinstance(rhs, Name):
            self.emit_lhs(lhs, rhs.name)
            return
        a = lhs.name if isinstance(lhs, Name) else self.lname(lhs)
        if rhs is BOT:
            self.bottom.add(a)
        elif isinstance(rhs, Exists):
            b = self.rname(rhs.filler) if rhs.filler is not TOP else self.top_name()
            self.exists_rhs.add((a, rhs.role, b))
        else:
            raise TypeError(rhs)

    def top_name(self) -> str:
        x = self.fresh_for(TOP)
        if (x, "lhs") not in self.emitted:
            self.emitted.add((x, "lhs"))
            self.top.add(x)
        return x


def normalize(tbox: Iterable, abox: Iterable = ()) -> tuple[NormalizedTBox, NormalizedABox]:
    """Normal form of a TBox plus atomic ABox.

    Complex subconcepts are abbreviated by fresh names with the reserved
    prefix; each fresh name is registered with the concept it stands for.
    The output is a model-conservative extension of the input.
    """
    nz = _Normalizer()
    roles_incl: set = set()
    disjoint: set = set()
    for ax in tbox:
        if isinstance(ax, ConceptInclusion):
            nz.add_ci(ax.lhs, ax.rhs)
        elif isinstance(ax, RoleInclusion):
            if ax.sub != ax.sup:
                roles_incl.add((ax.sub, ax.sup))
        elif isinstance(ax, DisjointRoles):
            disjoint.add(ax)
        else:
            raise TypeError(ax)
    concepts: set = set()
    roles: set = set()
    inds: set = set()
    for a in abox:
        if isinstance(a, RoleAssertion):
            p = a.role
            if p.inverted:
                roles.add((p.name, a.obj, a.subj))
            else:
                roles.add((p.name, a.subj, a.obj))
        else:
            c = _simplify(a.concept)
            inds.add(a.ind)
            if c is TOP:
                continue
            concepts.add((nz.rname(c), a.ind))
    nt = NormalizedTBox(frozenset(nz.bottom), frozenset(nz.exists_rhs), frozenset(nz.top),
                        frozenset(nz.conj), frozenset(nz.exists_lhs), frozenset(roles_incl),
                        frozenset(disjoint), tuple(nz.registry))
    return nt, make_abox(concepts, roles, inds)


def normalize_kb(kb: KnowledgeBase) -> tuple[NormalizedTBox, NormalizedABox]:
    check_fragment(kb)
    return normalize(kb.tbox, kb.abox)


def sub_concept_occurrences(tbox: Iterable, abox: Iterable = ()) -> int:
    n = 0
    for ax in tbox:
        if isinstance(ax, ConceptInclusion):
            n += sum(1 for _ in ax.lhs.subconcepts()) + sum(1 for _ in ax.rhs.subconcepts())
        else:
            n += 1
    for a in abox:
        if isinstance(a, ConceptAssertion):
            n += sum(1 for _ in a.concept.subconcepts())
    return n
