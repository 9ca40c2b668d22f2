"""Ranked signatures, terms and positions.

Terms are immutable values; equality is structural.  Positions are tuples of
1-based child indexes, the empty tuple being the root.  The printable form of
the root position is "@" since the empty string is unusable in files.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

from .errors import ParseError, PositionError, SignatureError

Position = tuple[int, ...]

ROOT: Position = ()

_IDENT = re.compile(r"[A-Za-z0-9_@#]+")


@dataclass(frozen=True)
class Term:
    symbol: str
    children: tuple["Term", ...] = ()

    def __repr__(self) -> str:
        return f"Term({format_term(self)!r})"


@dataclass(frozen=True)
class Signature:
    """Finite set of function symbols with arities."""

    symbols: tuple[tuple[str, int], ...]

    def __post_init__(self):
        names = [name for name, _ in self.symbols]
        if len(set(names)) != len(names):
            raise SignatureError(f"duplicate symbol in signature: {names}")
        for name, arity in self.symbols:
            if not _IDENT.fullmatch(name):
                raise SignatureError(f"bad symbol name: {name!r}")
            if arity < 0:
                raise SignatureError(f"negative arity for {name}")
        if not any(arity == 0 for _, arity in self.symbols):
            raise SignatureError("signature has no constant; no finite term exists")

    @property
    def arities(self) -> dict[str, int]:
        return dict(self.symbols)

    def arity(self, symbol: str) -> int:
        try:
            return self.arities[symbol]
        except KeyError:
            raise SignatureError(f"symbol {symbol!r} not in signature") from None

    @property
    def constants(self) -> tuple[str, ...]:
        return tuple(name for name, arity in self.symbols if arity == 0)

    @property
    def max_arity(self) -> int:
        return max(arity for _, arity in self.symbols)

    def contains(self, symbol: str, arity: int) -> bool:
        return self.arities.get(symbol) == arity

    def check_term(self, t: Term) -> None:
        """Raise unless every node of t respects the declared arities."""
        stack = [t]
        while stack:
            node = stack.pop()
            if self.arity(node.symbol) != len(node.children):
                raise SignatureError(
                    f"symbol {node.symbol!r} used with arity {len(node.children)}, "
                    f"declared {self.arity(node.symbol)}"
                )
            stack.extend(node.children)


def sig(*decls: tuple[str, int]) -> Signature:
    return Signature(tuple(decls))


def positions(t: Term) -> set[Position]:
    """Pos(t): the empty tuple plus i.p for every child i and p in Pos(child)."""
    out: set[Position] = set()
    stack: list[tuple[Position, Term]] = [((), t)]
    while stack:
        p, node = stack.pop()
        out.add(p)
        for i, child in enumerate(node.children, start=1):
            stack.append((p + (i,), child))
    return out


def subterm(t: Term, p: Position) -> Term:
    node = t
    for step in p:
        if step < 1 or step > len(node.children):
            raise PositionError(f"position {format_position(p)} not in term")
        node = node.children[step - 1]
    return node


def replace(t: Term, p: Position, s: Term) -> Term:
    if not p:
        return s
    step = p[0]
    if step < 1 or step > len(t.children):
        raise PositionError(f"position {format_position(p)} not in term")
    kids = list(t.children)
    kids[step - 1] = replace(kids[step - 1], p[1:], s)
    return Term(t.symbol, tuple(kids))


def height(t: Term) -> int:
    if not t.children:
        return 0
    return 1 + max(height(c) for c in t.children)


def size(t: Term) -> int:
    return 1 + sum(size(c) for c in t.children)


def is_prefix(p: Position, q: Position) -> bool:
    return len(p) <= len(q) and q[: len(p)] == p


def is_parallel(p: Position, q: Position) -> bool:
    return not is_prefix(p, q) and not is_prefix(q, p)


def position_diff(q: Position, p: Position) -> Position:
    """q - p, defined exactly when p <= q."""
    if not is_prefix(p, q):
        raise PositionError(f"{format_position(p)} is not a prefix of {format_position(q)}")
    return q[len(p):]


def format_position(p: Position) -> str:
    return "@" if not p else ".".join(str(i) for i in p)


def parse_position(text: str) -> Position:
    text = text.strip()
    if text == "@":
        return ()
    parts = text.split(".")
    try:
        steps = tuple(int(x) for x in parts)
    except ValueError:
        raise ParseError(f"bad position {text!r}") from None
    if any(s < 1 for s in steps):
        raise ParseError(f"position steps must be >= 1: {text!r}")
    return steps


def format_term(t: Term) -> str:
    if not t.children:
        return t.symbol
    return f"{t.symbol}({','.join(format_term(c) for c in t.children)})"


def parse_term(text: str) -> Term:
    """Parse `f(t1,...,tn)` syntax; constants are written bare."""
    term, rest = _parse_term(text.strip())
    if rest.strip():
        raise ParseError(f"trailing input after term: {rest!r}")
    return term


def _parse_term(text: str) -> tuple[Term, str]:
    text = text.lstrip()
    m = _IDENT.match(text)
    if not m:
        raise ParseError(f"expected symbol at {text[:20]!r}")
    symbol = m.group(0)
    rest = text[m.end():].lstrip()
    if not rest.startswith("("):
        return Term(symbol), rest
    rest = rest[1:]
    children: list[Term] = []
    while True:
        child, rest = _parse_term(rest)
        children.append(child)
        rest = rest.lstrip()
        if rest.startswith(","):
            rest = rest[1:]
            continue
        if rest.startswith(")"):
            return Term(symbol, tuple(children)), rest[1:]
        raise ParseError(f"expected ',' or ')' at {rest[:20]!r}")


@lru_cache(maxsize=None)
def _terms_upto(signature: Signature, max_height: int) -> tuple[Term, ...]:
    if max_height == 0:
        return tuple(Term(c) for c in signature.constants)
    smaller = _terms_upto(signature, max_height - 1)
    out = list(smaller)
    import itertools

    for name, arity in signature.symbols:
        if arity == 0:
            continue
        for combo in itertools.product(smaller, repeat=arity):
            t = Term(name, combo)
            if height(t) == max_height:
                out.append(t)
    return tuple(out)


def enumerate_terms(signature: Signature, max_height: int):
    """All terms over the signature of height <= max_height (test oracle)."""
    return _terms_upto(signature, max_height)
