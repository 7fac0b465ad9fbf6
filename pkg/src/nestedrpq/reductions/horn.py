"""Propositional Horn entailment as nested path queries over a plain graph.

Every rule v_1 & ... & v_m -> v_{m+1} becomes a chain
    e_{m+1} -p_{v_{m+1}}-> e_m -> ... -p_{v_1}-> e_0 -s-> f
and a t-edge links the point before each body variable to the start of
every chain whose head is that variable. A proof tree of depth k for g is
then a path matched by the k-th query of the family below, starting at
the first chain.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from ..errors import ParseError
from ..kb import NormalizedABox, Role, make_abox
from ..lexer import TokenStream, tokenize
from ..query import NRE, Concat, Star, Sym, Test, Union_


@dataclass(frozen=True)
class HornTheory:
    vars: frozenset
    rules: tuple        # (body tuple, head)
    goal: str

    def normalized(self) -> "HornTheory":
        """The same theory with g -> g as its first rule."""
        first = ((self.goal,), self.goal)
        rest = tuple(r for r in self.rules if r != first)
        return HornTheory(self.vars | {self.goal}, (first,) + rest, self.goal)

    def format(self) -> str:
        lines = [f"goal {self.goal}"]
        for body, head in self.rules:
            lines.append((" & ".join(body) + " " if body else "") + f"-> {head}")
        return "\n".join(lines) + "\n"


def parse_horn(text: str) -> HornTheory:
    goal = None
    rules = []
    names: set = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = tokenize(raw, lineno, arrows=("->",))
        if not toks:
            continue
        ts = TokenStream(toks, lineno)
        if ts.at("goal"):
            ts.next()
            if goal is not None:
                raise ParseError("goal declared twice", lineno, 1)
            goal = ts.expect_ident().text
            if not ts.done():
                raise ts.error("unexpected token")
            continue
        body = []
        if not ts.at("->"):
            body.append(ts.expect_ident().text)
            while ts.at("&"):
                ts.next()
                body.append(ts.expect_ident().text)
        ts.expect("->")
        head = ts.expect_ident().text
        if not ts.done():
            raise ts.error("unexpected token")
        rules.append((tuple(body), head))
        names.update(body)
        names.add(head)
    if goal is None:
        raise ParseError("missing 'goal' line", 1, 1)
    names.add(goal)
    return HornTheory(frozenset(names), tuple(rules), goal)


def horn_entails(h: HornTheory) -> bool:
    """Forward chaining to the least model."""
    known: set = set()
    changed = True
    while changed:
        changed = False
        for body, head in h.rules:
            if head not in known and all(v in known for v in body):
                known.add(head)
                changed = True
    return h.goal in known


def _p(v: str) -> NRE:
    return Sym(Role(f"p_{v}"))


def _any_p(vs: list) -> NRE:
    out = _p(vs[0])
    for v in vs[1:]:
        out = Union_(out, _p(v))
    return out


def horn_query(vs: list, depth: int) -> NRE:
    """E_depth of the inductive family."""
    t, s = Sym(Role("t")), Sym(Role("s"))
    head = _any_p_t_p(vs, t)
    e = Concat(head, s)
    for _ in range(2, depth + 1):
        e = Concat(Concat(head, Star(Concat(Test(e), _any_p(vs)))), s)
    return e


def _any_p_t_p(vs: list, t: NRE) -> NRE:
    out = None
    for v in vs:
        x = Concat(Concat(_p(v), t), _p(v))
        out = x if out is None else Union_(out, x)
    return out


def gen_horn_instance(h: HornTheory) -> tuple[NormalizedABox, NRE, tuple[str, str]]:
    """ABox, query and pair (e^1_1, f) with: h entails its goal iff the pair is an answer."""
    if not h.rules and not h.goal:
        raise ValueError("malformed Horn theory")
    for body, head in h.rules:
        if head not in h.vars or any(v not in h.vars for v in body):
            raise ValueError("rule mentions an undeclared variable")
    h = h.normalized()
    roles = set()

    def e(i: int, k: int) -> str:
        return f"e{i}_{k}"

    for i, (body, head) in enumerate(h.rules, start=1):
        chain = list(body) + [head]
        for k in range(len(chain), 0, -1):
            roles.add((f"p_{chain[k - 1]}", e(i, k), e(i, k - 1)))
        roles.add(("s", e(i, 0), "f"))
    for i, (body, _) in enumerate(h.rules, start=1):
        for l, v in enumerate(body, start=1):
            for j, (body2, head2) in enumerate(h.rules, start=1):
                if head2 == v:
                    roles.add(("t", e(i, l - 1), e(j, len(body2) + 1)))
    abox = make_abox((), roles, ())
    vs = sorted(h.vars)
    return abox, horn_query(vs, len(vs)), (e(1, 1), "f")


def random_horn(rng: random.Random, max_vars: int = 6, max_rules: int = 8) -> HornTheory:
    nv = rng.randint(1, max_vars)
    names = ["g"] + [f"v{k}" for k in range(1, nv)]
    rules = []
    for _ in range(rng.randint(1, max_rules)):
        k = min(rng.choice([0, 1, 1, 2, 2, 3]), len(names))
        body = tuple(sorted(rng.sample(names, k)))
        rules.append((body, rng.choice(names)))
    return HornTheory(frozenset(names), tuple(rules), "g")
