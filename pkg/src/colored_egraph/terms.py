"""Terms, patterns and the s-expression syntax they are written in.

    term    := atom | '(' atom term* ')'
    pattern := term, where atoms spelled ``?name`` are holes

Comments run from ``;`` to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, List, NamedTuple, Tuple, Union


class ParseError(ValueError):
    pass


class MalformedTermError(ValueError):
    """A symbol was used with two different arities."""


class ENode(NamedTuple):
    op: str
    children: Tuple[int, ...] = ()

    def __repr__(self) -> str:
        if not self.children:
            return self.op
        return f"{self.op}({', '.join(map(str, self.children))})"


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return "?" + self.name


@dataclass(frozen=True)
class App:
    op: str
    args: Tuple["Pattern", ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.op
        return "(" + " ".join([self.op, *map(str, self.args)]) + ")"


Pattern = Union[Var, App]
# a ground term is an App without holes
Term = App

SExpr = Union[str, List["SExpr"]]

_TOKEN = re.compile(r"\s+|;[^\n]*|(\()|(\))|([^\s();]+)")


def tokenize(text: str) -> Iterator[str]:
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r} at offset {pos}")
        pos = m.end()
        tok = m.group(1) or m.group(2) or m.group(3)
        if tok:
            yield tok


def parse_sexprs(text: str) -> List[SExpr]:
    stack: List[List[SExpr]] = [[]]
    for tok in tokenize(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise ParseError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise ParseError("missing ')'")
    return stack[0]


def parse_sexpr(text: str) -> SExpr:
    forms = parse_sexprs(text)
    if len(forms) != 1:
        raise ParseError(f"expected exactly one s-expression, got {len(forms)}")
    return forms[0]


def to_pattern(sx: SExpr) -> Pattern:
    if isinstance(sx, str):
        if sx.startswith("?"):
            if len(sx) == 1:
                raise ParseError("empty hole name")
            return Var(sx[1:])
        return App(sx)
    if not sx:
        raise ParseError("empty application ()")
    head, *rest = sx
    if not isinstance(head, str) or head.startswith("?"):
        raise ParseError(f"operator must be a plain atom, got {head!r}")
    return App(head, tuple(to_pattern(a) for a in rest))


def to_term(sx: SExpr) -> Term:
    pat = to_pattern(sx)
    if not is_ground(pat):
        raise ParseError(f"holes are not allowed in a term: {pat}")
    return pat  # type: ignore[return-value]


def parse_pattern(text: str) -> Pattern:
    """Parse ``text`` such as ``(* (+ ?v1 1) ?v2)`` into a pattern tree."""
    return to_pattern(parse_sexpr(text))


def parse_term(text: str) -> Term:
    return to_term(parse_sexpr(text))


def is_ground(p: Pattern) -> bool:
    if isinstance(p, Var):
        return False
    return all(is_ground(a) for a in p.args)


def holes(p: Pattern) -> set:
    if isinstance(p, Var):
        return {p.name}
    out: set = set()
    for a in p.args:
        out |= holes(a)
    return out


def symbols(p: Pattern) -> Iterator[Tuple[str, int]]:
    if isinstance(p, App):
        yield p.op, len(p.args)
        for a in p.args:
            yield from symbols(a)


def term_size(t: Pattern) -> int:
    if isinstance(t, Var):
        return 1
    return 1 + sum(term_size(a) for a in t.args)
