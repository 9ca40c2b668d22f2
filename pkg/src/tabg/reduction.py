"""Reduction of arbitrary global constraints to positive conjunctive form.

The pipeline normalizes the constraint to a disjunction of conjunctions,
subdivides (one automaton per disjunct), then repeatedly rewrites each
conjunctive automaton until its measure hits <0,0>:

  * a negated ~ / !~ literal is removed by cloning its two states into
    "synonym" states forced to carry exactly one class each, disequal
    (resp. equal) to one another;
  * a class-counting literal is removed by cloning its first state and
    splitting on whether the clone is unused (both class counts zero) or
    carries exactly one class disequal from the original.

The measure (negated-literal count, then total class-literal weight) drops
lexicographically at every step, so the loop terminates.  Occurrence-count
literals are then compiled away into tally-annotated states, and the final
conjunctive automata are folded with the disjoint union.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .automata import Automaton, Rule, Run, union
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
    Measure,
    NeqAtom,
    Not,
    Or,
    atoms_of,
    conj,
    conjunct_literals,
    disj,
    disjuncts,
    format_constraint,
    measure,
    normalize,
)
from .errors import BudgetError, NamingError, ShapeError, UnsupportedConstraintError

DEFAULT_STATE_CAP = 10**5
DEFAULT_RULE_CAP = 10**6


@dataclass(frozen=True)
class SynonymPlan:
    source: str
    fresh: str
    source2: str | None = None
    fresh2: str | None = None

    def __post_init__(self):
        if (self.source2 is None) != (self.fresh2 is None):
            raise ShapeError("second synonym pair must give both states")
        if self.fresh2 is not None and self.fresh == self.fresh2:
            raise NamingError("fresh synonym states must differ")


class _FreshNames:
    """Deterministic q^syn<n> allocator, skipping taken names."""

    def __init__(self, taken) -> None:
        self.taken = set(taken)
        self.counter = 0

    def take(self) -> str:
        while True:
            name = f"q^syn{self.counter}"
            self.counter += 1
            if name not in self.taken:
                self.taken.add(name)
                return name


def _variants(q: str, source: str, fresh: str) -> tuple[str, ...]:
    return (q, fresh) if q == source else (q,)


def _substituted_rules(rules, source: str, fresh: str) -> tuple[Rule, ...]:
    """All rules obtained by replacing occurrences of source by fresh."""
    out: list[Rule] = []
    for rule in rules:
        slots = [_variants(q, source, fresh) for q in rule.lhs + (rule.rhs,)]
        for combo in itertools.product(*slots):
            out.append(Rule(rule.symbol, combo[:-1], combo[-1], rule.constraint))
    return tuple(dict.fromkeys(out))


def _replace_literal(literal: Formula, source: str, fresh: str) -> Formula:
    """The five replacement bullets of the synonym definition."""
    if isinstance(literal, EqAtom) or isinstance(literal, NeqAtom):
        make = EqAtom if isinstance(literal, EqAtom) else NeqAtom
        return conj(
            [
                make(l, r)
                for l in _variants(literal.left, source, fresh)
                for r in _variants(literal.right, source, fresh)
            ]
        )
    if isinstance(literal, Not):
        inner = literal.item
        if not isinstance(inner, (EqAtom, NeqAtom)):
            raise ShapeError("negation of non ~/!~ atom during synonym replacement")
        make = EqAtom if isinstance(inner, EqAtom) else NeqAtom
        return disj(
            [
                Not(make(l, r))
                for l in _variants(inner.left, source, fresh)
                for r in _variants(inner.right, source, fresh)
            ]
        )
    if isinstance(literal, LinAtom):
        terms = []
        for coef, state in literal.terms:
            terms.append((coef, state))
            if state == source:
                terms.append((coef, fresh))
        return LinAtom(literal.kind, tuple(terms), literal.cmp, literal.bound)
    if isinstance(literal, Bool):
        return literal
    raise ShapeError(f"not a literal: {literal!r}")


def _replace_formula(formula: Formula, source: str, fresh: str) -> Formula:
    """Literal-wise replacement through a normalized formula tree."""
    if isinstance(formula, And):
        return conj([_replace_formula(i, source, fresh) for i in formula.items])
    if isinstance(formula, Or):
        return disj([_replace_formula(i, source, fresh) for i in formula.items])
    return _replace_literal(formula, source, fresh)


def _synonym_core(a: Automaton, source: str, fresh: str):
    if fresh in a.states:
        raise NamingError(f"fresh state {fresh!r} already declared")
    if source not in a.states:
        raise ShapeError(f"source state {source!r} not declared")
    states = a.states + (fresh,)
    final = a.final | ({fresh} if source in a.final else frozenset())
    rules = _substituted_rules(a.rules, source, fresh)
    return states, final, rules


def _cls_eq(state: str, k: int) -> LinAtom:
    return LinAtom(CLS, ((1, state),), "=", k)


def apply_synonym(a: Automaton, plan: SynonymPlan) -> Automaton:
    """The synonym construction, including its guard prefix.

    The returned automaton's constraint is
      ((||src||=0 & ||new||=0) | (||new||=1 & src !~ new)) & C'
    with C' the literal-replaced normalization of the old constraint.  For a
    double plan the construction is applied twice, in order.
    """
    out = _apply_synonym_once(a, plan.source, plan.fresh)
    if plan.source2 is not None:
        out = _apply_synonym_once(out, plan.source2, plan.fresh2)
    return out


def _apply_synonym_once(a: Automaton, source: str, fresh: str) -> Automaton:
    states, final, rules = _synonym_core(a, source, fresh)
    replaced = _replace_formula(normalize(a.global_constraint), source, fresh)
    prefix = disj(
        [
            conj([_cls_eq(source, 0), _cls_eq(fresh, 0)]),
            conj([_cls_eq(fresh, 1), NeqAtom(source, fresh)]),
        ]
    )
    return Automaton(states, a.signature, final, rules, a.theory, conj([prefix, replaced]))


def subdivide(a: Automaton) -> list[Automaton]:
    """One automaton per disjunct of the (normalized) global constraint."""
    parts = disjuncts(a.global_constraint)
    return [
        Automaton(a.states, a.signature, a.final, a.rules, a.theory, part)
        for part in parts
    ]


def _conjunct_split(formula: Formula):
    literals = conjunct_literals(formula)
    negated = [l for l in literals if isinstance(l, Not)]
    class_lits = [l for l in literals if isinstance(l, LinAtom) and l.kind == CLS]
    return literals, negated, class_lits


def eliminate_negative(a: Automaton, fresh: _FreshNames | None = None) -> list[Automaton]:
    """Remove the leftmost negated literal; outputs have strictly fewer."""
    literals, negated, _ = _conjunct_split(a.global_constraint)
    if not negated:
        raise ShapeError("no negated ~ / !~ literal to eliminate")
    target = negated[0]
    inner = target.item
    rest = [l for l in literals if l is not target]
    fresh = fresh or _FreshNames(a.states)
    hat, hat2 = fresh.take(), fresh.take()

    states, final, rules = _synonym_core(a, inner.left, hat)
    b = Automaton(states, a.signature, final, rules, a.theory, TRUE)
    states, final, rules = _synonym_core(b, inner.right, hat2)

    replaced = conj([_replace_formula(l, inner.left, hat) for l in rest])
    replaced = _replace_formula(replaced, inner.right, hat2)
    bridge = NeqAtom(hat, hat2) if isinstance(inner, EqAtom) else EqAtom(hat, hat2)
    constraint = conj([_cls_eq(hat, 1), _cls_eq(hat2, 1), bridge, replaced])
    out = Automaton(states, a.signature, final, rules, a.theory, normalize(constraint))
    return subdivide(out)


def _substitute_cls(formula: Formula, state: str, value: int) -> Formula:
    """C_{||state|| ~> value}: replace the class count by a constant."""
    if isinstance(formula, And):
        return conj([_substitute_cls(i, state, value) for i in formula.items])
    if isinstance(formula, Or):
        return disj([_substitute_cls(i, state, value) for i in formula.items])
    if isinstance(formula, LinAtom) and formula.kind == CLS:
        coef = dict((s, c) for c, s in formula.terms).get(state)
        if coef is None:
            return formula
        terms = tuple((c, s) for c, s in formula.terms if s != state)
        lowered = LinAtom(CLS, terms, formula.cmp, formula.bound - coef * value)
        from .constraints import canon_lin

        return canon_lin(lowered)
    return formula


def eliminate_class_literal(a: Automaton, fresh: _FreshNames | None = None) -> list[Automaton]:
    """Remove weight from the leftmost ||.|| literal.

    The one-state forms ||q||=1 and ||q||=0 rewrite directly (|q|>=1 & q~q
    with the count substituted by 1, resp. |q|=0 with it substituted by 0);
    anything else goes through the synonym split into a zero branch and a
    one-fresh-class branch.
    """
    literals, negated, class_lits = _conjunct_split(a.global_constraint)
    if negated:
        raise ShapeError("negated literals must be eliminated first")
    if not class_lits:
        raise ShapeError("no ||.|| literal to eliminate")
    target = class_lits[0]
    if len(target.terms) == 1 and target.terms[0][0] == 1 and target.cmp == "=" and target.bound in (0, 1):
        state = target.states[0]
        rest = [l for l in literals if l is not target]
        if target.bound == 1:
            head: list[Formula] = [LinAtom(OCC, ((1, state),), ">=", 1), EqAtom(state, state)]
        else:
            head = [LinAtom(OCC, ((1, state),), "=", 0)]
        body = [_substitute_cls(l, state, target.bound) for l in rest]
        out = Automaton(
            a.states, a.signature, a.final, a.rules, a.theory, normalize(conj(head + body))
        )
        return [out]
    source = target.states[0]
    fresh = fresh or _FreshNames(a.states)
    hat = fresh.take()

    states, final, rules = _synonym_core(a, source, hat)
    replaced = [_replace_formula(l, source, hat) for l in literals]

    zero_branch = conj(
        [LinAtom(OCC, ((1, source),), "=", 0), LinAtom(OCC, ((1, hat),), "=", 0)]
        + [_substitute_cls(_substitute_cls(l, source, 0), hat, 0) for l in replaced]
    )
    one_branch = conj(
        [
            LinAtom(OCC, ((1, hat),), ">=", 1),
            EqAtom(hat, hat),
            NeqAtom(source, hat),
        ]
        + [_substitute_cls(l, hat, 1) for l in replaced]
    )
    out = []
    for branch in (zero_branch, one_branch):
        out.append(Automaton(states, a.signature, final, rules, a.theory, normalize(branch)))
    return out


# -- occurrence counting --------------------------------------------------------


def _occ_literals(formula: Formula) -> list[LinAtom]:
    return [l for l in conjunct_literals(formula) if isinstance(l, LinAtom) and l.kind == OCC]


def _tally_name(state: str, tally: tuple[int, ...]) -> str:
    return f"{state}#{'_'.join(str(v) for v in tally)}"


@dataclass(frozen=True)
class CountingMap:
    """Shared data of the tally construction, used to map runs both ways."""

    tracked: tuple[str, ...]
    saturation: int

    def zero(self) -> tuple[int, ...]:
        return (0,) * len(self.tracked)

    def unit(self, state: str) -> tuple[int, ...]:
        return tuple(min(1, self.saturation) if q == state else 0 for q in self.tracked)

    def add(self, a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(min(x + y, self.saturation) for x, y in zip(a, b))

    def all_tallies(self):
        return itertools.product(range(self.saturation + 1), repeat=len(self.tracked))

    def satisfies(self, tally: tuple[int, ...], literal: LinAtom) -> bool:
        from .constraints import _compare

        value = dict(zip(self.tracked, tally))
        total = sum(coef * value[state] for coef, state in literal.terms)
        return _compare(total, literal.cmp, literal.bound)


def counting_map(a: Automaton) -> CountingMap:
    lits = _occ_literals(a.global_constraint)
    tracked = tuple(sorted({s for l in lits for s in l.states}))
    max_constant = max((l.bound for l in lits), default=0)
    return CountingMap(tracked, max_constant + 1)


def eliminate_counting(
    a: Automaton,
    state_cap: int = DEFAULT_STATE_CAP,
    rule_cap: int = DEFAULT_RULE_CAP,
) -> Automaton:
    """Compile |.| literals into tally-annotated states.

    Tallies track the states that occur in |.| literals, saturating at one
    plus the largest constant compared against (beyond that the comparisons
    cannot change).  Finals keep only tallies satisfying every literal; the
    global constraint keeps the ~ / !~ atoms, expanded over all tallies.
    """
    literals, negated, class_lits = _conjunct_split(a.global_constraint)
    if negated or class_lits:
        raise ShapeError("eliminate_counting needs a measure-<0,0> conjunct")
    cmap = counting_map(a)
    occ_lits = _occ_literals(a.global_constraint)
    tallies = list(cmap.all_tallies())
    if len(a.states) * len(tallies) > state_cap:
        raise BudgetError(
            f"counting construction needs {len(a.states) * len(tallies)} states (cap {state_cap})"
        )
    predicted_rules = sum(len(tallies) ** len(r.lhs) for r in a.rules)
    if predicted_rules > rule_cap:
        raise BudgetError(
            f"counting construction needs {predicted_rules} rules (cap {rule_cap})"
        )

    states = tuple(_tally_name(q, m) for q in a.states for m in tallies)
    final = frozenset(
        _tally_name(q, m)
        for q in a.final
        for m in tallies
        if all(cmap.satisfies(m, l) for l in occ_lits)
    )
    rules = []
    for rule in a.rules:
        for combo in itertools.product(tallies, repeat=len(rule.lhs)):
            total = cmap.unit(rule.rhs)
            for m in combo:
                total = cmap.add(total, m)
            rules.append(
                Rule(
                    rule.symbol,
                    tuple(_tally_name(q, m) for q, m in zip(rule.lhs, combo)),
                    _tally_name(rule.rhs, total),
                    rule.constraint,
                )
            )
    kept = []
    for literal in literals:
        if isinstance(literal, (EqAtom, NeqAtom)):
            make = type(literal)
            kept.extend(
                make(_tally_name(literal.left, m1), _tally_name(literal.right, m2))
                for m1 in tallies
                for m2 in tallies
            )
        elif literal == FALSE:
            kept.append(FALSE)
    return Automaton(
        states, a.signature, final, tuple(rules), a.theory, conj(kept)
    )


def run_to_counting(a: Automaton, run: Run) -> Run:
    """Annotate a run of A with tallies (the language-preserving bijection)."""
    cmap = counting_map(a)
    counted = eliminate_counting(a)
    by_key = {(r.symbol, r.lhs, r.rhs, r.constraint): r for r in counted.rules}

    tallies: dict = {}

    def fill(p) -> tuple[int, ...]:
        node = run.subterm_at(p)
        total = cmap.unit(run.state_at(p))
        for i in range(1, len(node.children) + 1):
            total = cmap.add(total, fill(p + (i,)))
        tallies[p] = total
        return total

    fill(())
    mapping = {}
    for p in run.positions():
        rule = run.rule_at[p]
        node = run.subterm_at(p)
        lhs = tuple(
            _tally_name(rule.lhs[i - 1], tallies[p + (i,)])
            for i in range(1, len(node.children) + 1)
        )
        mapping[p] = by_key[(rule.symbol, lhs, _tally_name(rule.rhs, tallies[p]), rule.constraint)]
    return Run(run.term, mapping)


def discharge_zero_occurrences(a: Automaton) -> Automaton:
    """Replace |q|=0 style literals by deleting the states' rules.

    A literal sum(a_i |q_i|) <= 0 (or = 0) with positive coefficients says the
    q_i never occur; runs of the automaton without their rules are exactly the
    runs satisfying it.  Keeping such states out of the tally construction is
    what keeps eliminate_counting at desk scale after long synonym chains.
    """
    zero_states: set[str] = set()
    kept: list[Formula] = []
    for literal in conjunct_literals(a.global_constraint):
        if (
            isinstance(literal, LinAtom)
            and literal.kind == OCC
            and literal.bound == 0
            and literal.cmp in ("=", "<=")
            and all(c > 0 for c, _ in literal.terms)
        ):
            zero_states.update(literal.states)
        else:
            kept.append(literal)
    if not zero_states:
        return a
    from .constraints import canon_lin

    rewritten: list[Formula] = []
    for literal in kept:
        if isinstance(literal, LinAtom) and set(literal.states) & zero_states:
            terms = tuple((c, s) for c, s in literal.terms if s not in zero_states)
            rewritten.append(canon_lin(LinAtom(literal.kind, terms, literal.cmp, literal.bound)))
        else:
            rewritten.append(literal)
    rules = tuple(
        r for r in a.rules if zero_states.isdisjoint(r.lhs) and r.rhs not in zero_states
    )
    return Automaton(a.states, a.signature, a.final, rules, a.theory, conj(rewritten))


def run_from_counting(a: Automaton, counted_run: Run) -> Run:
    """Erase tallies: each state q#... maps back to q."""
    by_key = {(r.symbol, r.lhs, r.rhs, r.constraint): r for r in a.rules}

    def erase(name: str) -> str:
        return name.rsplit("#", 1)[0]

    mapping = {}
    for p, rule in counted_run.rule_at.items():
        key = (
            rule.symbol,
            tuple(erase(q) for q in rule.lhs),
            erase(rule.rhs),
            rule.constraint,
        )
        mapping[p] = by_key[key]
    return Run(counted_run.term, mapping)


# -- the full pipeline ----------------------------------------------------------


@dataclass(frozen=True)
class TraceEntry:
    step: str
    detail: str
    before: Measure | None
    after: tuple[Measure, ...]

    def __str__(self) -> str:
        afters = ", ".join(f"<{m.negatives},{m.class_weight}>" for m in self.after)
        before = f"<{self.before.negatives},{self.before.class_weight}>" if self.before else "-"
        return f"{self.step}: {self.detail} measure {before} -> [{afters}]"


@dataclass(frozen=True)
class ReductionResult:
    automaton: Automaton
    trace: tuple[TraceEntry, ...]


def reduce_with_trace(
    a: Automaton,
    state_cap: int = DEFAULT_STATE_CAP,
    rule_cap: int = DEFAULT_RULE_CAP,
    dnf_cap: int | None = None,
) -> ReductionResult:
    """Full pipeline: normalize, subdivide, descend the measure, fold unions."""
    from .constraints import DEFAULT_DNF_CAP

    for atom in atoms_of(a.global_constraint):
        if isinstance(atom, LinAtom) and atom.is_integer:
            raise UnsupportedConstraintError(
                f"integer-signed atom {format_constraint(atom)} cannot be reduced"
            )
    trace: list[TraceEntry] = []
    normalized = Automaton(
        a.states, a.signature, a.final, a.rules, a.theory,
        normalize(a.global_constraint, cap=dnf_cap if dnf_cap is not None else DEFAULT_DNF_CAP),
    )
    queue = subdivide(normalized)
    if len(queue) > 1:
        trace.append(
            TraceEntry("subdivision", f"{len(queue)} disjuncts", None,
                       tuple(measure(b.global_constraint) for b in queue))
        )
    fresh = _FreshNames(a.states)
    terminal: list[Automaton] = []
    while queue:
        b = queue.pop(0)
        m = measure(b.global_constraint)
        literals, negated, class_lits = _conjunct_split(b.global_constraint)
        if b.global_constraint == FALSE:
            terminal.append(b)
            continue
        if negated:
            outs = eliminate_negative(b, fresh)
            after = tuple(measure(o.global_constraint) for o in outs)
            if not all(x < m for x in after):
                raise ShapeError(f"measure did not drop: {m} -> {after}")
            trace.append(
                TraceEntry("remove-negated-literal", format_constraint(negated[0]), m, after)
            )
            queue.extend(outs)
            continue
        if class_lits:
            outs = eliminate_class_literal(b, fresh)
            after = tuple(measure(o.global_constraint) for o in outs)
            if not all(x < m for x in after):
                raise ShapeError(f"measure did not drop: {m} -> {after}")
            trace.append(
                TraceEntry("remove-class-literal", format_constraint(class_lits[0]), m, after)
            )
            queue.extend(outs)
            continue
        b = discharge_zero_occurrences(b)
        if _occ_literals(b.global_constraint):
            counted = eliminate_counting(b, state_cap, rule_cap)
            trace.append(
                TraceEntry(
                    "counting-states",
                    f"{len(counted.states)} tally states",
                    m,
                    (measure(counted.global_constraint),),
                )
            )
            terminal.append(counted)
        else:
            terminal.append(b)

    result = terminal[0]
    for other in terminal[1:]:
        result = union(result, other)
    if len(terminal) > 1:
        trace.append(TraceEntry("union", f"{len(terminal)} branches", None, ()))
    return ReductionResult(result, tuple(trace))


def to_positive_conjunctive(
    a: Automaton,
    state_cap: int = DEFAULT_STATE_CAP,
    rule_cap: int = DEFAULT_RULE_CAP,
) -> Automaton:
    return reduce_with_trace(a, state_cap, rule_cap).automaton
