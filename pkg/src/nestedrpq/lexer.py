"""A small tokenizer used by the KB, query, Horn and ATM readers."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError

INTERNAL_PREFIX = "__"

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<arrow><-|->|<=)
  | (?P<ident>_*[A-Za-z][A-Za-z0-9_]*)
  | (?P<quoted>'[^']*'|"[^"]*")
  | (?P<num>[+-]?[0-9]+)
  | (?P<punct>[-()<>{}.,&|*?:;=+])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str, line: int = 1, allow_internal: bool = False,
             arrows: tuple[str, ...] = ("<-", "->", "<=")) -> list[Token]:
    """Split one logical line into tokens; '#' starts a comment.

    Arrow tokens not listed in `arrows` are split into their characters, so
    that e.g. `<r->` lexes as '<', 'r', '-', '>' inside queries.
    """
    out: list[Token] = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos] == "#":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos + 1)
        kind = m.lastgroup
        tok = m.group(kind)
        if kind == "ident" and tok.startswith("_"):
            if not (allow_internal and tok.startswith(INTERNAL_PREFIX)):
                raise ParseError(f"identifier {tok!r} uses the reserved '__' prefix", line, pos + 1)
        if kind == "arrow" and tok not in arrows:
            out.append(Token("punct", tok[0], line, pos + 1))
            out.append(Token("punct", tok[1], line, pos + 2))
        elif kind != "ws":
            out.append(Token(kind, tok, line, pos + 1))
        pos = m.end()
    return out


class TokenStream:
    def __init__(self, tokens: list[Token], line: int = 0):
        self.toks = tokens
        self.i = 0
        self.line = line

    def peek(self, k: int = 0) -> Token | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t is not None and t.text == text

    def at_kind(self, kind: str) -> bool:
        t = self.peek()
        return t is not None and t.kind == kind

    def next(self) -> Token:
        t = self.peek()
        if t is None:
            raise self.error("unexpected end of input")
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t is None or t.text != text:
            raise self.error(f"expected {text!r}")
        self.i += 1
        return t

    def expect_ident(self) -> Token:
        t = self.peek()
        if t is None or t.kind != "ident":
            raise self.error("expected an identifier")
        self.i += 1
        return t

    def done(self) -> bool:
        return self.i >= len(self.toks)

    def error(self, message: str) -> ParseError:
        t = self.peek()
        if t is None:
            last = self.toks[-1] if self.toks else None
            col = last.col + len(last.text) if last else 1
            return ParseError(message + " (at end of line)", self.line, col)
        return ParseError(f"{message}, found {t.text!r}", t.line, t.col)
