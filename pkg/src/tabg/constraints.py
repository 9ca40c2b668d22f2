"""Global constraint formulas over automaton states.

Atoms are q ~ q' (all subterms reaching q and q' pairwise equal modulo E),
q !~ q' (pairwise disequal), and linear inequalities over occurrence counts
|q| or class counts ||q||.  Note that !(q ~ q') and q !~ q' mean different
things: both atom forms carry a universal quantifier over position pairs.

A linear atom whose coefficients mix signs is INTEGER-classified: it can be
evaluated against a run but poisons reduction and emptiness (those problems
are undecidable for it).  Normalization brings every other arithmetic atom to
the positive form a1*x1 + ... + an*xn (cmp) k with ai > 0, k >= 0 and cmp in
{<=, >=, =}.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Union

from .errors import BudgetError, ParseError, ShapeError

OCC = "occ"
CLS = "cls"

DEFAULT_DNF_CAP = 4096


@dataclass(frozen=True)
class EqAtom:
    left: str
    right: str


@dataclass(frozen=True)
class NeqAtom:
    left: str
    right: str


@dataclass(frozen=True)
class LinAtom:
    kind: str  # OCC or CLS
    terms: tuple[tuple[int, str], ...]
    cmp: str  # one of <=, >=, =, <, >
    bound: int

    def __post_init__(self):
        if self.kind not in (OCC, CLS):
            raise ShapeError(f"bad linear atom kind {self.kind!r}")
        if self.cmp not in ("<=", ">=", "=", "<", ">"):
            raise ShapeError(f"bad comparison {self.cmp!r}")
        merged: dict[str, int] = {}
        for coef, state in self.terms:
            merged[state] = merged.get(state, 0) + coef
        canon = tuple(sorted((c, s) for s, c in merged.items() if c != 0))
        canon = tuple((c, s) for c, s in sorted(canon, key=lambda x: x[1]))
        object.__setattr__(self, "terms", canon)

    @property
    def states(self) -> tuple[str, ...]:
        return tuple(s for _, s in self.terms)

    @property
    def is_integer(self) -> bool:
        """Mixed coefficient signs: not reducible, only evaluable."""
        signs = {c > 0 for c, _ in self.terms}
        return len(signs) > 1


@dataclass(frozen=True)
class Bool:
    value: bool


TRUE = Bool(True)
FALSE = Bool(False)


@dataclass(frozen=True)
class Not:
    item: "Formula"


@dataclass(frozen=True)
class And:
    items: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    items: tuple["Formula", ...]


Atom = Union[EqAtom, NeqAtom, LinAtom]
Formula = Union[Bool, Not, And, Or, EqAtom, NeqAtom, LinAtom]


def conj(items: Iterable[Formula]) -> Formula:
    """Conjunction with folding: drops TRUE, collapses on FALSE."""
    flat: list[Formula] = []
    for it in items:
        if isinstance(it, And):
            flat.extend(it.items)
        elif it == FALSE:
            return FALSE
        elif it != TRUE:
            flat.append(it)
    deduped = tuple(dict.fromkeys(flat))
    if not deduped:
        return TRUE
    if len(deduped) == 1:
        return deduped[0]
    return And(deduped)


def disj(items: Iterable[Formula]) -> Formula:
    flat: list[Formula] = []
    for it in items:
        if isinstance(it, Or):
            flat.extend(it.items)
        elif it == TRUE:
            return TRUE
        elif it != FALSE:
            flat.append(it)
    deduped = tuple(dict.fromkeys(flat))
    if not deduped:
        return FALSE
    if len(deduped) == 1:
        return deduped[0]
    return Or(deduped)


def atoms_of(formula: Formula):
    stack = [formula]
    while stack:
        node = stack.pop()
        if isinstance(node, (And, Or)):
            stack.extend(node.items)
        elif isinstance(node, Not):
            stack.append(node.item)
        elif isinstance(node, (EqAtom, NeqAtom, LinAtom)):
            yield node


def states_of(formula: Formula) -> set[str]:
    out: set[str] = set()
    for atom in atoms_of(formula):
        if isinstance(atom, LinAtom):
            out.update(atom.states)
        else:
            out.update((atom.left, atom.right))
    return out


def map_states(formula: Formula, rename) -> Formula:
    """Apply a state-renaming function through the formula tree."""
    if isinstance(formula, Bool):
        return formula
    if isinstance(formula, Not):
        return Not(map_states(formula.item, rename))
    if isinstance(formula, And):
        return And(tuple(map_states(i, rename) for i in formula.items))
    if isinstance(formula, Or):
        return Or(tuple(map_states(i, rename) for i in formula.items))
    if isinstance(formula, EqAtom):
        return EqAtom(rename(formula.left), rename(formula.right))
    if isinstance(formula, NeqAtom):
        return NeqAtom(rename(formula.left), rename(formula.right))
    return LinAtom(formula.kind, tuple((c, rename(s)) for c, s in formula.terms), formula.cmp, formula.bound)


# -- run statistics and evaluation -------------------------------------------


@dataclass
class RunStats:
    """Occurrence and =_E-class counts per state for one run."""

    occ: dict[str, int]
    class_table: dict[str, Counter]

    @classmethod
    def from_run(cls, run, index) -> "RunStats":
        occ: dict[str, int] = {}
        table: dict[str, Counter] = {}
        for p in run.positions():
            q = run.state_at(p)
            occ[q] = occ.get(q, 0) + 1
            table.setdefault(q, Counter())[index.class_id(run.subterm_at(p))] += 1
        return cls(occ, table)

    def occurrences(self, state: str) -> int:
        return self.occ.get(state, 0)

    def classes(self, state: str) -> int:
        return len(self.class_table.get(state, ()))

    def class_ids(self, state: str) -> set[int]:
        return set(self.class_table.get(state, ()))


def eval_atom_stats(atom: Atom, stats: RunStats) -> bool:
    if isinstance(atom, EqAtom):
        q1, q2 = atom.left, atom.right
        if q1 == q2:
            return stats.classes(q1) <= 1
        if stats.occurrences(q1) == 0 or stats.occurrences(q2) == 0:
            return True
        return len(stats.class_ids(q1) | stats.class_ids(q2)) == 1
    if isinstance(atom, NeqAtom):
        q1, q2 = atom.left, atom.right
        if q1 == q2:
            return all(n == 1 for n in stats.class_table.get(q1, Counter()).values())
        return not (stats.class_ids(q1) & stats.class_ids(q2))
    total = 0
    for coef, state in atom.terms:
        value = stats.occurrences(state) if atom.kind == OCC else stats.classes(state)
        total += coef * value
    return _compare(total, atom.cmp, atom.bound)


def _compare(lhs: int, cmp: str, rhs: int) -> bool:
    if cmp == "<=":
        return lhs <= rhs
    if cmp == ">=":
        return lhs >= rhs
    if cmp == "=":
        return lhs == rhs
    if cmp == "<":
        return lhs < rhs
    return lhs > rhs


def eval_formula_stats(formula: Formula, stats: RunStats) -> bool:
    if isinstance(formula, Bool):
        return formula.value
    if isinstance(formula, Not):
        return not eval_formula_stats(formula.item, stats)
    if isinstance(formula, And):
        return all(eval_formula_stats(i, stats) for i in formula.items)
    if isinstance(formula, Or):
        return any(eval_formula_stats(i, stats) for i in formula.items)
    return eval_atom_stats(formula, stats)


def eval_atom(atom: Atom, run, index) -> bool:
    return eval_atom_stats(atom, RunStats.from_run(run, index))


def eval_constraint(formula: Formula, run, index) -> bool:
    return eval_formula_stats(formula, RunStats.from_run(run, index))


# -- normalization ------------------------------------------------------------


def canon_lin(atom: LinAtom) -> Formula:
    """Positive form with non-strict comparison, or a Boolean constant.

    Integer-signed atoms keep their mixed coefficients (only strictness is
    removed); they are still rejected later by the reduction pipeline.
    """
    terms, cmp, bound = atom.terms, atom.cmp, atom.bound
    if cmp == "<":
        cmp, bound = "<=", bound - 1
    elif cmp == ">":
        cmp, bound = ">=", bound + 1
    if not terms:
        return TRUE if _compare(0, cmp, bound) else FALSE
    if all(c < 0 for c, _ in terms):
        terms = tuple((-c, s) for c, s in terms)
        bound = -bound
        cmp = {"<=": ">=", ">=": "<=", "=": "="}[cmp]
    if any(c < 0 for c, _ in terms):
        return LinAtom(atom.kind, terms, cmp, bound)
    if bound < 0:
        return TRUE if cmp == ">=" else FALSE
    if cmp == ">=" and bound == 0:
        return TRUE
    return LinAtom(atom.kind, terms, cmp, bound)


def negate_lin(atom: LinAtom) -> Formula:
    terms, cmp, bound = atom.terms, atom.cmp, atom.bound
    if cmp == "<":
        return canon_lin(LinAtom(atom.kind, terms, ">=", bound))
    if cmp == ">":
        return canon_lin(LinAtom(atom.kind, terms, "<=", bound))
    if cmp == "<=":
        return canon_lin(LinAtom(atom.kind, terms, ">=", bound + 1))
    if cmp == ">=":
        return canon_lin(LinAtom(atom.kind, terms, "<=", bound - 1))
    return disj(
        [
            canon_lin(LinAtom(atom.kind, terms, "<=", bound - 1)),
            canon_lin(LinAtom(atom.kind, terms, ">=", bound + 1)),
        ]
    )


def _nnf(formula: Formula, negated: bool) -> Formula:
    if isinstance(formula, Bool):
        return Bool(formula.value != negated)
    if isinstance(formula, Not):
        return _nnf(formula.item, not negated)
    if isinstance(formula, And):
        parts = tuple(_nnf(i, negated) for i in formula.items)
        return disj(parts) if negated else conj(parts)
    if isinstance(formula, Or):
        parts = tuple(_nnf(i, negated) for i in formula.items)
        return conj(parts) if negated else disj(parts)
    if isinstance(formula, LinAtom):
        return negate_lin(formula) if negated else canon_lin(formula)
    # Eq/Neq atoms: negation is kept literal, it is not the dual atom
    return Not(formula) if negated else formula


def _dnf(formula: Formula, cap: int) -> list[tuple[Formula, ...]] | Bool:
    """List of conjuncts (literal tuples); Bool for trivial formulas."""
    if isinstance(formula, Bool):
        return formula
    if isinstance(formula, (EqAtom, NeqAtom, LinAtom, Not)):
        return [(formula,)]
    if isinstance(formula, Or):
        out: list[tuple[Formula, ...]] = []
        for item in formula.items:
            sub = _dnf(item, cap)
            if sub == TRUE:
                return TRUE
            if sub == FALSE:
                continue
            out.extend(sub)
            if len(out) > cap:
                raise BudgetError(f"DNF blowup beyond {cap} conjuncts")
        return out if out else FALSE
    # And: distribute
    factor_lists: list[list[tuple[Formula, ...]]] = []
    for item in formula.items:
        sub = _dnf(item, cap)
        if sub == FALSE:
            return FALSE
        if sub == TRUE:
            continue
        factor_lists.append(sub)
    if not factor_lists:
        return TRUE
    out = [()]
    for factor in factor_lists:
        out = [a + b for a in out for b in factor]
        if len(out) > cap:
            raise BudgetError(f"DNF blowup beyond {cap} conjuncts")
    return [tuple(dict.fromkeys(c)) for c in out]


def normalize(formula: Formula, cap: int = DEFAULT_DNF_CAP) -> Formula:
    """True, False, or a disjunction of conjunctions of literals.

    Every arithmetic literal in the result is in positive form; negation
    survives only directly on ~ / !~ atoms.
    """
    nnf = _nnf(formula, False)
    dnf = _dnf(nnf, cap)
    if isinstance(dnf, Bool):
        return dnf
    return disj([conj(c) for c in dnf])


def disjuncts(formula: Formula) -> list[Formula]:
    """Disjuncts of a normalized formula (FALSE has one: itself)."""
    if isinstance(formula, Or):
        return list(formula.items)
    return [formula]


def conjunct_literals(formula: Formula) -> list[Formula]:
    """Literals of a normalized conjunctive formula."""
    if isinstance(formula, Bool):
        return [] if formula.value else [FALSE]
    if isinstance(formula, And):
        for item in formula.items:
            if isinstance(item, (And, Or, Bool)):
                raise ShapeError("formula is not a flat conjunction of literals")
        return list(formula.items)
    if isinstance(formula, Or):
        raise ShapeError("formula is not conjunctive")
    return [formula]


def is_positive_conjunctive(formula: Formula) -> bool:
    """Conjunction of positive ~ / !~ atoms (Boolean constants allowed)."""
    try:
        lits = conjunct_literals(formula)
    except ShapeError:
        return False
    return all(isinstance(l, (EqAtom, NeqAtom)) or l == FALSE for l in lits)


# -- the termination measure --------------------------------------------------


@dataclass(frozen=True, order=True)
class Measure:
    negatives: int
    class_weight: int

    def __add__(self, other: "Measure") -> "Measure":
        return Measure(self.negatives + other.negatives, self.class_weight + other.class_weight)


def literal_measure(literal: Formula) -> Measure:
    if isinstance(literal, Bool) or isinstance(literal, (EqAtom, NeqAtom)):
        return Measure(0, 0)
    if isinstance(literal, Not):
        if not isinstance(literal.item, (EqAtom, NeqAtom)):
            raise ShapeError("negation of a non ~/!~ atom in a normalized constraint")
        return Measure(1, 0)
    if isinstance(literal, LinAtom):
        if literal.kind == CLS:
            return Measure(0, len(literal.terms) + literal.bound)
        return Measure(0, 0)
    raise ShapeError(f"not a literal: {literal!r}")


def measure(formula: Formula) -> Measure:
    """Measure of a normalized conjunctive constraint (additive)."""
    total = Measure(0, 0)
    for literal in conjunct_literals(formula):
        total = total + literal_measure(literal)
    return total


# -- text grammar -------------------------------------------------------------

_STATE = r"[A-Za-z0-9_'^#]+"
_TOKEN = re.compile(
    rf"\s*(\|\|{_STATE}\|\||\|{_STATE}\||!~|<=|>=|<|>|=|~|!|&|\||\(|\)|\+|-|\*|{_STATE})"
)


def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise ParseError(f"bad constraint syntax at {text[pos:pos+20]!r}")
            break
        tokens.append(m.group(1))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, expected: str | None = None) -> str:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of constraint")
        if expected is not None and tok != expected:
            raise ParseError(f"expected {expected!r}, got {tok!r}")
        self.pos += 1
        return tok

    def formula(self) -> Formula:
        parts = [self.conjunction()]
        while self.peek() == "|":
            self.take()
            parts.append(self.conjunction())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conjunction(self) -> Formula:
        parts = [self.unary()]
        while self.peek() == "&":
            self.take()
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def unary(self) -> Formula:
        tok = self.peek()
        if tok == "!":
            self.take()
            return Not(self.unary())
        if tok == "(":
            self.take()
            inner = self.formula()
            self.take(")")
            return inner
        return self.atom()

    def atom(self) -> Formula:
        tok = self.peek()
        if tok == "true":
            self.take()
            return TRUE
        if tok == "false":
            self.take()
            return FALSE
        if tok is None:
            raise ParseError("unexpected end of constraint")
        if tok.startswith("|") or tok.isdigit() or tok == "-":
            return self.linear()
        left = self.take()
        op = self.take()
        if op not in ("~", "!~"):
            raise ParseError(f"expected ~ or !~ after state {left!r}")
        right = self.take()
        return EqAtom(left, right) if op == "~" else NeqAtom(left, right)

    def linear(self) -> Formula:
        terms: list[tuple[int, str]] = []
        kind = None
        sign = 1
        while True:
            coef = sign
            tok = self.peek()
            if tok == "-":
                self.take()
                coef = -sign
                tok = self.peek()
            if tok is not None and tok.isdigit():
                coef *= int(self.take())
                if self.peek() == "*":
                    self.take()
            tok = self.take()
            if tok.startswith("||") and tok.endswith("||"):
                this_kind, state = CLS, tok[2:-2]
            elif tok.startswith("|") and tok.endswith("|"):
                this_kind, state = OCC, tok[1:-1]
            else:
                raise ParseError(f"expected |state| or ||state||, got {tok!r}")
            if kind is None:
                kind = this_kind
            elif kind != this_kind:
                raise ParseError("a linear atom cannot mix |.| and ||.||")
            terms.append((coef, state))
            nxt = self.peek()
            if nxt == "+":
                self.take()
                sign = 1
                continue
            if nxt == "-":
                self.take()
                sign = -1
                continue
            break
        cmp = self.take()
        if cmp not in ("<=", ">=", "=", "<", ">"):
            raise ParseError(f"expected comparison, got {cmp!r}")
        neg = False
        if self.peek() == "-":
            self.take()
            neg = True
        bound_tok = self.take()
        if not bound_tok.isdigit():
            raise ParseError(f"expected integer bound, got {bound_tok!r}")
        bound = -int(bound_tok) if neg else int(bound_tok)
        return LinAtom(kind, tuple(terms), cmp, bound)


def parse_constraint(text: str) -> Formula:
    parser = _Parser(_tokenize(text))
    formula = parser.formula()
    if parser.peek() is not None:
        raise ParseError(f"trailing constraint input at token {parser.peek()!r}")
    return formula


def format_constraint(formula: Formula) -> str:
    return _fmt(formula, top=True)


def _fmt(formula: Formula, top: bool = False) -> str:
    if isinstance(formula, Bool):
        return "true" if formula.value else "false"
    if isinstance(formula, EqAtom):
        return f"{formula.left} ~ {formula.right}"
    if isinstance(formula, NeqAtom):
        return f"{formula.left} !~ {formula.right}"
    if isinstance(formula, LinAtom):
        parts = []
        for i, (coef, state) in enumerate(formula.terms):
            bars = f"||{state}||" if formula.kind == CLS else f"|{state}|"
            mag = f"{abs(coef)}*{bars}" if abs(coef) != 1 else bars
            if i == 0:
                parts.append(f"-{mag}" if coef < 0 else mag)
            else:
                parts.append(f"- {mag}" if coef < 0 else f"+ {mag}")
        return f"{' '.join(parts)} {formula.cmp} {formula.bound}"
    if isinstance(formula, Not):
        return f"!({_fmt(formula.item)})"
    if isinstance(formula, And):
        body = " & ".join(
            f"({_fmt(i)})" if isinstance(i, Or) else _fmt(i) for i in formula.items
        )
        return body
    if isinstance(formula, Or):
        body = " | ".join(_fmt(i) for i in formula.items)
        return body if top else f"({body})"
    raise ShapeError(f"cannot format {formula!r}")
