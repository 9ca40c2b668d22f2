"""Compiling set-variable constraints plus an annotated TA into a TAG.

The input automaton runs over an annotated signature whose symbols carry one
bit per set variable X1..Xn (written f#101).  Shifting the bits into the
states gives a TA over the plain signature whose runs are in bijection with
pairs (variable assignment, annotated run); equality/disequality and
occurrence-count atoms over variables then become global constraints over
the bit-carrying states, exactly as in the source construction.

Class-count atoms are the exception: summing ||state|| over the bit-1 states
over-counts a class that reaches two different states in one run, so those
atoms are compiled exactly instead, through auxiliary existentially-chosen
bit planes:

  ||Xi|| >= c   <->  some witness plane R inside Xi holds pairwise-disequal
                     members and |R| >= c;
  ||Xi|| <= c   <->  c cover planes Z1..Zc jointly contain every Xi position
                     and each plane's members form one equality class.

Multi-variable sums split into finitely many per-variable threshold cases.

Rewritten equality atoms range over every pair of bit-carrying states with
the right bits set, including pairs sharing the underlying state: dropping
those would weaken the constraint, so atom counts grow quadratically in the
compiled state count.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .automata import Automaton, Rule
from .constraints import (
    CLS,
    FALSE,
    OCC,
    TRUE,
    And,
    Bool,
    EqAtom,
    Formula,
    LinAtom,
    NeqAtom,
    Not,
    Or,
    _compare,
    conj,
    disj,
    negate_lin,
    parse_constraint,
)
from .errors import BudgetError, ParseError, ShapeError, SignatureError
from .terms import Position, Signature, Term, positions as term_positions
from .theory import FlatTheory

DEFAULT_COMPILE_RULE_CAP = 200_000


def split_symbol(symbol: str) -> tuple[str, str]:
    if "#" in symbol:
        base, bits = symbol.rsplit("#", 1)
        return base, bits
    return symbol, ""


def annotate_symbol(base: str, bits: str) -> str:
    return f"{base}#{bits}" if bits else base


@dataclass(frozen=True)
class AnnotatedTA:
    """A plain TA over Sigma x {0,1}^n, symbols written base#bits."""

    automaton: Automaton
    width: int

    def __post_init__(self):
        if self.automaton.classification != "TA":
            raise ShapeError("annotated automaton must be a plain TA")
        bases: dict[str, int] = {}
        for name, arity in self.automaton.signature.symbols:
            base, bits = split_symbol(name)
            if len(bits) != self.width or (bits and set(bits) - {"0", "1"}):
                raise SignatureError(f"symbol {name!r} does not carry {self.width} bits")
            if bases.setdefault(base, arity) != arity:
                raise SignatureError(f"base symbol {base!r} declared with two arities")

    @property
    def base_signature(self) -> Signature:
        bases: dict[str, int] = {}
        for name, arity in self.automaton.signature.symbols:
            base, _ = split_symbol(name)
            bases.setdefault(base, arity)
        return Signature(tuple(sorted(bases.items())))


def annotated_width(signature: Signature) -> int:
    widths = {len(split_symbol(name)[1]) for name, _ in signature.symbols}
    if len(widths) != 1:
        raise SignatureError(f"inconsistent annotation widths {widths}")
    return widths.pop()


def product_term(t: Term, sigma: dict[int, set[Position]], width: int) -> Term:
    """t (x) sigma: relabel each position with its membership bit vector."""

    def build(node: Term, p: Position) -> Term:
        bits = "".join("1" if p in sigma.get(i, set()) else "0" for i in range(1, width + 1))
        return Term(
            annotate_symbol(node.symbol, bits),
            tuple(build(c, p + (k,)) for k, c in enumerate(node.children, start=1)),
        )

    return build(t, ())


def all_assignments(t: Term, width: int):
    """Every sigma: {X1..Xn} -> subsets of Pos(t) (exhaustive oracle)."""
    posns = sorted(term_positions(t))
    for combo in itertools.product(range(2 ** len(posns)), repeat=width):
        sigma = {}
        for i in range(1, width + 1):
            mask = combo[i - 1]
            sigma[i] = {p for k, p in enumerate(posns) if mask >> k & 1}
        yield sigma


# -- the variable-constraint language -------------------------------------------


def parse_variable_constraint(text: str, width: int) -> Formula:
    """Conjunction of literals over X1..Xn, reusing the constraint grammar."""
    formula = parse_constraint(text)
    check_variable_constraint(formula, width)
    return formula


def _var_index(name: str, width: int | None = None) -> int:
    if not name.startswith("X"):
        raise ParseError(f"variables are X1..Xn, got {name!r}")
    try:
        idx = int(name[1:])
    except ValueError:
        raise ParseError(f"variables are X1..Xn, got {name!r}") from None
    if width is not None and not 1 <= idx <= width:
        raise ParseError(f"variable {name!r} out of range 1..{width}")
    return idx


def check_variable_constraint(formula: Formula, width: int) -> None:
    if isinstance(formula, And):
        for item in formula.items:
            check_variable_constraint(item, width)
        return
    if isinstance(formula, Not):
        inner = formula.item
        if isinstance(inner, (EqAtom, NeqAtom, LinAtom)):
            return check_variable_constraint(inner, width)
        raise ShapeError("only literals may be negated in a variable constraint")
    if isinstance(formula, (EqAtom, NeqAtom)):
        _var_index(formula.left, width)
        _var_index(formula.right, width)
        return
    if isinstance(formula, LinAtom):
        for _, state in formula.terms:
            _var_index(state, width)
        return
    if isinstance(formula, Bool):
        return
    raise ShapeError("variable constraint must be a conjunction of literals")


def holds(t: Term, sigma: dict[int, set[Position]], phi: Formula) -> bool:
    """Satisfaction of a variable constraint by a term and an assignment."""
    if isinstance(phi, Bool):
        return phi.value
    if isinstance(phi, And):
        return all(holds(t, sigma, item) for item in phi.items)
    if isinstance(phi, Or):
        return any(holds(t, sigma, item) for item in phi.items)
    if isinstance(phi, Not):
        return not holds(t, sigma, phi.item)
    from .terms import subterm

    if isinstance(phi, (EqAtom, NeqAtom)):
        want_equal = isinstance(phi, EqAtom)
        left = sorted(sigma.get(_var_index(phi.left), set()))
        right = sorted(sigma.get(_var_index(phi.right), set()))
        for p in left:
            for q in right:
                if p == q:
                    continue
                if (subterm(t, p) == subterm(t, q)) != want_equal:
                    return False
        return True
    total = 0
    for coef, name in phi.terms:
        posns = sigma.get(_var_index(name), set())
        if phi.kind == OCC:
            total += coef * len(posns)
        else:
            total += coef * len({subterm(t, p) for p in posns})
    return _compare(total, phi.cmp, phi.bound)


# -- bit planes -----------------------------------------------------------------


@dataclass(frozen=True)
class _PlaneLayout:
    """Bit layout of compiled states: n base bits, then per-variable planes."""

    width: int
    ge_vars: tuple[int, ...]  # variables owning a witness plane
    cover: tuple[tuple[int, int], ...]  # (variable, cover plane count)

    @property
    def total_bits(self) -> int:
        return self.width + len(self.ge_vars) + sum(c for _, c in self.cover)

    def base_bit(self, bits: str, i: int) -> bool:
        return bits[i - 1] == "1"

    def ge_bit(self, bits: str, i: int) -> bool:
        return bits[self.width + self.ge_vars.index(i)] == "1"

    def cover_bits(self, bits: str, i: int) -> str:
        offset = self.width + len(self.ge_vars)
        for var, count in self.cover:
            if var == i:
                return bits[offset : offset + count]
            offset += count
        return ""

    def patterns(self, base: str) -> list[str]:
        """All valid plane extensions of one base bit vector."""
        options: list[list[str]] = []
        for i in self.ge_vars:
            options.append(["0", "1"] if self.base_bit(base, i) else ["0"])
        for var, count in self.cover:
            if not self.base_bit(base, var):
                options.append(["0" * count])
            else:
                covers = [
                    "".join(bits)
                    for bits in itertools.product("01", repeat=count)
                    if "1" in bits
                ]
                options.append(covers)
        return [base + "".join(combo) for combo in itertools.product(*options)]


def _class_cases(literal: LinAtom) -> list[dict[int, tuple[str, int]]]:
    """Split a ||.|| literal into per-variable threshold cases.

    Each case maps a variable index to ('ge'|'le', c); the literal holds iff
    some case holds with every variable meeting its threshold.
    """
    variables = [(coef, _var_index(name)) for coef, name in literal.terms]
    cases: list[dict[int, tuple[str, int]]] = []
    if literal.cmp == "<=":
        ranges = [range(literal.bound // coef + 1) for coef, _ in variables]
        for combo in itertools.product(*ranges):
            if sum(c * v for (c, _), v in zip(variables, combo)) <= literal.bound:
                cases.append(
                    {var: ("le", v) for (_, var), v in zip(variables, combo)}
                )
    elif literal.cmp == ">=":
        ranges = [range(-(-literal.bound // coef) + 1) for coef, _ in variables]
        for combo in itertools.product(*ranges):
            if sum(c * v for (c, _), v in zip(variables, combo)) >= literal.bound:
                cases.append(
                    {var: ("ge", v) for (_, var), v in zip(variables, combo)}
                )
    else:
        ranges = [range(literal.bound // coef + 1) for coef, _ in variables]
        for combo in itertools.product(*ranges):
            if sum(c * v for (c, _), v in zip(variables, combo)) == literal.bound:
                case: dict[int, tuple[str, int]] = {}
                for (_, var), v in zip(variables, combo):
                    case[var] = ("eq", v)
                cases.append(case)
    return cases


# -- the construction -----------------------------------------------------------


def shift_bits(annotated: AnnotatedTA) -> Automaton:
    """Move symbol bit vectors into the states: states Q x {0,1}^n."""
    return _shift(annotated, _PlaneLayout(annotated.width, (), ()), DEFAULT_COMPILE_RULE_CAP)


def _state_name(q: str, bits: str) -> str:
    return f"{q}#{bits}" if bits else q


def _pattern_list(layout: _PlaneLayout) -> list[str]:
    base_vectors = ["".join(b) for b in itertools.product("01", repeat=layout.width)]
    patterns: list[str] = []
    for base in base_vectors:
        patterns.extend(layout.patterns(base))
    return sorted(dict.fromkeys(patterns))


def _shift(annotated: AnnotatedTA, layout: _PlaneLayout, rule_cap: int) -> Automaton:
    a = annotated.automaton
    n = annotated.width
    base_sig = annotated.base_signature
    patterns = _pattern_list(layout)
    states = tuple(_state_name(q, bits) for q in a.states for bits in patterns)
    finals = frozenset(_state_name(q, bits) for q in a.final for bits in patterns)
    by_base: dict[str, list[str]] = {}
    for bits in patterns:
        by_base.setdefault(bits[:n] if n else "", []).append(bits)

    predicted = 0
    for rule in a.rules:
        child_choices = 1
        for _ in rule.lhs:
            child_choices *= len(patterns)
        _, bits = split_symbol(rule.symbol)
        predicted += child_choices * len(by_base.get(bits, ()))
        if predicted > rule_cap:
            raise BudgetError(f"compiled rule count exceeds {rule_cap}")

    rules = []
    for rule in a.rules:
        base, bits = split_symbol(rule.symbol)
        for parent_bits in by_base.get(bits, ()):
            for combo in itertools.product(patterns, repeat=len(rule.lhs)):
                rules.append(
                    Rule(
                        base,
                        tuple(_state_name(q, b) for q, b in zip(rule.lhs, combo)),
                        _state_name(rule.rhs, parent_bits),
                    )
                )
    return Automaton(
        states,
        base_sig,
        finals,
        tuple(dict.fromkeys(rules)),
        FlatTheory(base_sig),
        TRUE,
    )


def compile_query(
    annotated: AnnotatedTA,
    phi: Formula,
    rule_cap: int = DEFAULT_COMPILE_RULE_CAP,
) -> Automaton:
    """TAG over the base signature accepting { t | exists sigma, run and phi }."""
    n = annotated.width
    check_variable_constraint(phi, n)
    literals = list(phi.items) if isinstance(phi, And) else [phi]

    # fold arithmetic negations right away; they stay literal-shaped or split in two
    folded: list[Formula] = []
    for lit in literals:
        if isinstance(lit, Not) and isinstance(lit.item, LinAtom):
            folded.append(negate_lin(lit.item))
        elif isinstance(lit, LinAtom):
            from .constraints import canon_lin

            folded.append(canon_lin(lit))
        else:
            folded.append(lit)

    def class_literals(formula: Formula):
        if isinstance(formula, LinAtom) and formula.kind == CLS:
            yield formula
        elif isinstance(formula, (And, Or)):
            for item in formula.items:
                yield from class_literals(item)

    ge_vars: set[int] = set()
    cover_max: dict[int, int] = {}
    case_cache: dict[LinAtom, list] = {}
    for lit in folded:
        for cls_lit in class_literals(lit):
            cases = _class_cases(cls_lit)
            case_cache[cls_lit] = cases
            for case in cases:
                for var, (kind, c) in case.items():
                    if kind in ("ge", "eq") and c >= 1:
                        ge_vars.add(var)
                    if kind in ("le", "eq") and c >= 1:
                        cover_max[var] = max(cover_max.get(var, 0), c)

    layout = _PlaneLayout(
        n, tuple(sorted(ge_vars)), tuple(sorted(cover_max.items()))
    )
    shifted = _shift(annotated, layout, rule_cap)
    patterns = _pattern_list(layout)
    full_states = [
        (_state_name(q, bits), bits)
        for q in annotated.automaton.states
        for bits in patterns
    ]

    def states_with(pred) -> list[str]:
        return [s for s, bits in full_states if bits and pred(bits)]

    def base_states(i: int) -> list[str]:
        return states_with(lambda bits: layout.base_bit(bits, i))

    def rewrite_eq(atom, make) -> Formula:
        i, j = _var_index(atom.left, n), _var_index(atom.right, n)
        left, right = base_states(i), base_states(j)
        out = []
        seen = set()
        for s1 in left:
            for s2 in right:
                key = frozenset((s1, s2))
                if key in seen:
                    continue
                seen.add(key)
                out.append(make(s1, s2))
        return conj(out)

    def rewrite_occ(atom: LinAtom) -> Formula:
        terms = []
        for coef, name in atom.terms:
            for s in base_states(_var_index(name, n)):
                terms.append((coef, s))
        if not terms:
            return TRUE if _compare(0, atom.cmp, atom.bound) else FALSE
        return LinAtom(OCC, tuple(terms), atom.cmp, atom.bound)

    def primitive(var: int, kind: str, c: int) -> Formula:
        if kind == "eq":
            return conj([primitive(var, "ge", c), primitive(var, "le", c)])
        if kind == "ge":
            if c == 0:
                return TRUE
            witnesses = states_with(lambda bits: layout.ge_bit(bits, var))
            atoms: list[Formula] = [
                LinAtom(OCC, tuple((1, s) for s in witnesses), ">=", c)
            ]
            seen = set()
            for s1 in witnesses:
                for s2 in witnesses:
                    key = frozenset((s1, s2))
                    if key in seen:
                        continue
                    seen.add(key)
                    atoms.append(NeqAtom(s1, s2))
            return conj(atoms)
        # 'le': c == 0 forbids the variable outright; otherwise force every
        # member into the first c cover planes, each plane one class
        if c == 0:
            members = base_states(var)
            if not members:
                return TRUE
            return LinAtom(OCC, tuple((1, s) for s in members), "=", 0)
        count = dict(layout.cover).get(var, 0)
        if count < c:
            raise ShapeError("cover planes missing for a <= threshold")
        atoms: list[Formula] = []
        for j in range(1, count + 1):
            plane = states_with(lambda bits, j=j: layout.cover_bits(bits, var)[j - 1] == "1")
            if j <= c:
                seen = set()
                for s1 in plane:
                    for s2 in plane:
                        key = frozenset((s1, s2))
                        if key in seen:
                            continue
                        seen.add(key)
                        atoms.append(EqAtom(s1, s2))
            elif plane:
                atoms.append(LinAtom(OCC, tuple((1, s) for s in plane), "=", 0))
        return conj(atoms)

    def rewrite_cls(atom: LinAtom) -> Formula:
        cases = case_cache[atom]
        options = []
        for case in cases:
            options.append(conj([primitive(v, kind, c) for v, (kind, c) in sorted(case.items())]))
        return disj(options)

    def rewrite(formula: Formula) -> Formula:
        if isinstance(formula, Bool):
            return formula
        if isinstance(formula, Not):
            return Not(rewrite(formula.item))
        if isinstance(formula, And):
            return conj([rewrite(i) for i in formula.items])
        if isinstance(formula, Or):
            return disj([rewrite(i) for i in formula.items])
        if isinstance(formula, EqAtom):
            return rewrite_eq(formula, EqAtom)
        if isinstance(formula, NeqAtom):
            return rewrite_eq(formula, NeqAtom)
        if formula.kind == OCC:
            return rewrite_occ(formula)
        return rewrite_cls(formula)

    constraint = conj([rewrite(lit) for lit in folded])
    return Automaton(
        shifted.states,
        shifted.signature,
        shifted.final,
        shifted.rules,
        shifted.theory,
        constraint,
    )
