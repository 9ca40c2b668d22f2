"""Flat equational theories and the decision procedure for s =_E t.

A flat equation has sides of equal height <= 1 over constants and variables,
with identical variable sets on both sides.  Rewriting with such equations
preserves term height, which is what makes the decision procedure below work:
the congruence index processes the subterm universe level by level (by
height), and classes built at one level are final before the next one starts.

Nodes are keyed by (symbol, tuple of child class ids).  Saturation matches
each node against both orientations of every equation, instantiating
variables with the node's child classes; right-hand sides not present in the
universe are created lazily, capped by a node budget.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import BudgetError, ParseError, SignatureError
from .terms import Signature, Term, height

DEFAULT_NODE_BUDGET = 10**6


@dataclass(frozen=True)
class FlatEquation:
    """l ~ r with h(l) = h(r) <= 1 and equal variable sets.

    Sides are Terms whose leaves are either constants of the signature or
    names from `variables`.
    """

    left: Term
    right: Term
    variables: frozenset[str]

    def side_vars(self, side: Term) -> set[str]:
        if side.symbol in self.variables:
            return {side.symbol}
        return {c.symbol for c in side.children if c.symbol in self.variables}


@dataclass(frozen=True)
class FlatTheory:
    signature: Signature
    equations: tuple[FlatEquation, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not self.equations

    def same_theory(self, other: "FlatTheory") -> bool:
        return (
            set(self.signature.symbols) == set(other.signature.symbols)
            and _eq_keys(self) == _eq_keys(other)
        )


def _eq_keys(theory: FlatTheory) -> set[frozenset[str]]:
    from .terms import format_term

    return {frozenset({format_term(e.left), format_term(e.right)}) for e in theory.equations}


def flat_equation(left: Term, right: Term, variables: set[str], signature: Signature) -> FlatEquation | None:
    """Validate one equation; returns None for the trivial x ~ x form."""
    vs = frozenset(variables)

    def check_side(side: Term) -> int:
        if side.symbol in vs:
            if side.children:
                raise ParseError("variable applied to arguments in flat equation")
            return 0
        if signature.arity(side.symbol) != len(side.children):
            raise SignatureError(f"arity mismatch for {side.symbol} in equation")
        for c in side.children:
            if c.symbol in vs:
                if c.children:
                    raise ParseError("variable applied to arguments in flat equation")
            else:
                if c.children or signature.arity(c.symbol) != 0:
                    raise ParseError("flat equation sides must have height <= 1")
        return 0 if not side.children else 1

    hl, hr = check_side(left), check_side(right)
    if hl != hr:
        raise ParseError("flat equation sides must have equal height")
    left_is_var = left.symbol in vs
    right_is_var = right.symbol in vs
    if left_is_var or right_is_var:
        if left_is_var and right_is_var and left.symbol == right.symbol:
            return None  # x ~ x carries no content
        raise ParseError("bare-variable equation must be x ~ x")
    if left == right:
        return None  # identical sides rewrite nothing
    eq = FlatEquation(left, right, vs)
    if eq.side_vars(left) != eq.side_vars(right):
        raise ParseError("flat equation sides must use the same variables")
    return eq


class _UnionFind:
    def __init__(self) -> None:
        self.parent: list[int] = []

    def make(self) -> int:
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, x: int) -> int:
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


@dataclass
class CongruenceIndex:
    """Saturated partition of a subterm universe into =_E classes.

    `levels` records, per height, which node ids were saturated there; it is
    kept mostly as a frontier/debugging record.  A completed index is
    immutable by convention and safe to share.
    """

    theory: FlatTheory
    budget: int = DEFAULT_NODE_BUDGET
    _nodes: dict[tuple, int] = field(default_factory=dict)  # key -> node id
    _key_by_id: dict[int, tuple] = field(default_factory=dict)
    _uf: _UnionFind = field(default_factory=_UnionFind)
    _level: dict[int, int] = field(default_factory=dict)  # node id -> height
    _term_class: dict[Term, int] = field(default_factory=dict)
    levels: dict[int, list[int]] = field(default_factory=dict)

    def class_id(self, t: Term) -> int:
        """Class of a term previously indexed via build/extend."""
        if t not in self._term_class:
            self.extend([t])
        return self._term_class[t]

    def equal(self, s: Term, t: Term) -> bool:
        return self.class_id(s) == self.class_id(t)

    # -- construction ------------------------------------------------------

    def _node(self, symbol: str, child_classes: tuple[int, ...], level: int) -> int:
        key = (symbol, child_classes)
        nid = self._nodes.get(key)
        if nid is None:
            if len(self._nodes) >= self.budget:
                raise BudgetError(f"congruence saturation exceeded {self.budget} nodes")
            nid = self._uf.make()
            self._nodes[key] = nid
            self._key_by_id[nid] = key
            self._level[nid] = level
            self.levels.setdefault(level, []).append(nid)
        return nid

    def _saturate_level(self, level: int, fresh: list[int]) -> None:
        """Close `fresh` node ids of this level under all equation steps."""
        queue = deque(fresh)
        seen = set(fresh)
        while queue:
            nid = queue.popleft()
            symbol, child_classes = self._key_by_id[nid]
            for eq in self.theory.equations:
                for lhs, rhs in ((eq.left, eq.right), (eq.right, eq.left)):
                    other = self._apply(eq, lhs, rhs, symbol, child_classes, level)
                    if other is None:
                        continue
                    if other not in seen:
                        seen.add(other)
                        queue.append(other)
                    self._uf.union(nid, other)

    def _apply(
        self,
        eq: FlatEquation,
        lhs: Term,
        rhs: Term,
        symbol: str,
        child_classes: tuple[int, ...],
        level: int,
    ) -> int | None:
        if level == 0:
            # height-0 equations relate bare constants only
            if lhs.children or lhs.symbol != symbol or rhs.children:
                return None
            return self._node(rhs.symbol, (), 0)
        if lhs.symbol != symbol or len(lhs.children) != len(child_classes):
            return None
        binding: dict[str, int] = {}
        for arg, cls in zip(lhs.children, child_classes):
            cls = self._uf.find(cls)
            if arg.symbol in eq.variables:
                if binding.setdefault(arg.symbol, cls) != cls:
                    return None
            else:
                if self._constant_class(arg.symbol) != cls:
                    return None
        rhs_children = []
        for arg in rhs.children:
            if arg.symbol in eq.variables:
                rhs_children.append(binding[arg.symbol])
            else:
                rhs_children.append(self._constant_class(arg.symbol))
        return self._node(rhs.symbol, tuple(rhs_children), level)

    def _constant_class(self, name: str) -> int:
        return self._uf.find(self._nodes[(name, ())])

    def extend(self, roots) -> None:
        """Index every subterm of the given roots (and re-saturate)."""
        by_height: dict[int, set[Term]] = {}
        stack = list(roots)
        seen: set[Term] = set()
        while stack:
            t = stack.pop()
            if t in seen:
                continue
            seen.add(t)
            by_height.setdefault(height(t), set()).add(t)
            stack.extend(t.children)
        for c in self.theory.signature.constants:
            by_height.setdefault(0, set()).add(Term(c))
        top = max(by_height) if by_height else -1
        for level in range(top + 1):
            fresh: list[int] = []
            for t in sorted(by_height.get(level, ()), key=_term_key):
                child_classes = tuple(self._uf.find(self._term_class[c]) for c in t.children)
                before = len(self._nodes)
                nid = self._node(t.symbol, child_classes, level)
                self._term_class[t] = nid
                if len(self._nodes) > before:
                    fresh.append(nid)
            if fresh and not self.theory.is_empty:
                self._saturate_level(level, fresh)
        # canonicalize stored term classes
        for t, nid in self._term_class.items():
            self._term_class[t] = self._uf.find(nid)


def _term_key(t: Term):
    from .terms import format_term

    return format_term(t)


def class_index(theory: FlatTheory, roots, budget: int = DEFAULT_NODE_BUDGET) -> CongruenceIndex:
    """Build a congruence index covering every subterm of the roots."""
    ix = CongruenceIndex(theory, budget=budget)
    ix.extend(list(roots))
    return ix


def eq_modulo(theory: FlatTheory, s: Term, t: Term, budget: int = DEFAULT_NODE_BUDGET) -> bool:
    """Decide s =_E t.  False outright when heights differ."""
    theory.signature.check_term(s)
    theory.signature.check_term(t)
    if height(s) != height(t):
        return False
    if s == t:
        return True
    if theory.is_empty:
        return False
    ix = class_index(theory, [s, t], budget=budget)
    return ix.equal(s, t)


# -- test oracle: the derivation-chain definition, executed literally --------


def _match(pattern: Term, variables: frozenset[str], t: Term) -> dict[str, Term] | None:
    if pattern.symbol in variables:
        return {pattern.symbol: t}
    if pattern.symbol != t.symbol or len(pattern.children) != len(t.children):
        return None
    binding: dict[str, Term] = {}
    for parg, targ in zip(pattern.children, t.children):
        if parg.symbol in variables:
            if binding.setdefault(parg.symbol, targ) != targ:
                return None
        else:
            if parg != targ:
                return None
    return binding


def _instantiate(pattern: Term, binding: dict[str, Term], variables: frozenset[str]) -> Term:
    if pattern.symbol in variables:
        return binding[pattern.symbol]
    return Term(
        pattern.symbol,
        tuple(_instantiate(c, binding, variables) for c in pattern.children),
    )


def _one_step_rewrites(theory: FlatTheory, t: Term):
    from .terms import positions, replace, subterm

    for p in positions(t):
        sub = subterm(t, p)
        for eq in theory.equations:
            for lhs, rhs in ((eq.left, eq.right), (eq.right, eq.left)):
                binding = _match(lhs, eq.variables, sub)
                if binding is not None:
                    yield replace(t, p, _instantiate(rhs, binding, eq.variables))


def oracle_eq_modulo(theory: FlatTheory, s: Term, t: Term, budget: int) -> bool | None:
    """Breadth-first search over single equation steps from s.

    Returns True/False when decided within `budget` distinct explored terms,
    None when the budget runs out first (callers treat None as a skip).
    """
    if height(s) != height(t):
        return False
    if s == t:
        return True
    seen = {s}
    frontier = deque([s])
    while frontier:
        cur = frontier.popleft()
        for nxt in _one_step_rewrites(theory, cur):
            if nxt == t:
                return True
            if nxt in seen:
                continue
            if len(seen) >= budget:
                return None
            seen.add(nxt)
            frontier.append(nxt)
    return False
