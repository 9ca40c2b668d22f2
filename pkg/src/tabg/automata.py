"""The unified automaton model: TA, TAB, TAG, TABG.

One Automaton type covers the whole hierarchy; the classification is derived
from which constraint slots are trivial.  Rules carry local brother
constraints (equalities/disequalities between sibling subterms, interpreted
modulo the flat theory), the automaton carries one global constraint formula.

A run maps every position of a term to a rule, child states matching the
rule's left-hand side.  Membership is NP-complete in general, so `member` is
a backtracking search: per-position feasible states are computed bottom-up
with brother filtering first, then rules are assigned in post-order with
eager conflict detection on the positive ~ / !~ conjuncts of the global
constraint (an Eq state accruing two classes, or a Neq state repeating one,
can never recover).
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass

from .constraints import (
    FALSE,
    TRUE,
    And,
    Bool,
    EqAtom,
    Formula,
    LinAtom,
    NeqAtom,
    Not,
    Or,
    RunStats,
    atoms_of,
    conj,
    eval_formula_stats,
    format_constraint,
    is_positive_conjunctive,
    map_states,
    states_of,
)
from .errors import BudgetError, ShapeError, SignatureError
from .terms import Position, Signature, Term, format_position, height, subterm
from .theory import CongruenceIndex, FlatTheory, class_index

DEFAULT_SEARCH_BUDGET = 10**6


@dataclass(frozen=True)
class BrotherAtom:
    i: int
    j: int
    equal: bool

    def __str__(self) -> str:
        return f"{self.i}{'~' if self.equal else '!~'}{self.j}"


@dataclass(frozen=True)
class BrotherConstraint:
    atoms: tuple[BrotherAtom, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not self.atoms

    def __str__(self) -> str:
        return ",".join(str(a) for a in self.atoms)


EMPTY_BROTHER = BrotherConstraint()


def brother(*atoms: tuple[int, int, bool]) -> BrotherConstraint:
    return BrotherConstraint(tuple(BrotherAtom(i, j, eq) for i, j, eq in atoms))


@dataclass(frozen=True)
class Rule:
    symbol: str
    lhs: tuple[str, ...]
    rhs: str
    constraint: BrotherConstraint = EMPTY_BROTHER

    def __str__(self) -> str:
        lhs = f"({','.join(self.lhs)})" if self.lhs else ""
        guard = f" [{self.constraint}]" if not self.constraint.is_empty else ""
        return f"{self.symbol}{lhs}{guard} -> {self.rhs}"


@dataclass(frozen=True)
class Automaton:
    states: tuple[str, ...]
    signature: Signature
    final: frozenset[str]
    rules: tuple[Rule, ...]
    theory: FlatTheory
    global_constraint: Formula = TRUE

    def __post_init__(self):
        declared = set(self.states)
        if len(declared) != len(self.states):
            raise ShapeError("duplicate state declaration")
        if not self.final <= declared:
            raise ShapeError(f"final states {set(self.final) - declared} not declared")
        arities = self.signature.arities
        for rule in self.rules:
            if rule.symbol not in arities:
                raise SignatureError(f"rule symbol {rule.symbol!r} not in signature")
            if arities[rule.symbol] != len(rule.lhs):
                raise SignatureError(f"rule {rule} has wrong arity for {rule.symbol}")
            for q in rule.lhs + (rule.rhs,):
                if q not in declared:
                    raise ShapeError(f"rule {rule} uses undeclared state {q!r}")
            for atom in rule.constraint.atoms:
                if not (1 <= atom.i <= len(rule.lhs) and 1 <= atom.j <= len(rule.lhs)):
                    raise ShapeError(f"brother atom {atom} out of range in {rule}")
        if not states_of(self.global_constraint) <= declared:
            raise ShapeError("global constraint mentions undeclared states")

    # -- derived classification ------------------------------------------

    @property
    def has_brother_constraints(self) -> bool:
        return any(not r.constraint.is_empty for r in self.rules)

    @property
    def is_positive_conjunctive(self) -> bool:
        return is_positive_conjunctive(self.global_constraint)

    @property
    def classification(self) -> str:
        local = self.has_brother_constraints or not self.theory.is_empty
        global_trivial = self.global_constraint == TRUE
        if global_trivial:
            return "TAB" if local else "TA"
        return "TABG" if local else "TAG"

    def ta_projection(self) -> "Automaton":
        """ta(A): drop every constraint and the theory."""
        rules = tuple(Rule(r.symbol, r.lhs, r.rhs) for r in self.rules)
        return Automaton(self.states, self.signature, self.final, rules,
                         FlatTheory(self.signature), TRUE)

    def tab_projection(self) -> "Automaton":
        """tab(A): keep local constraints and the theory, drop the global one."""
        return Automaton(self.states, self.signature, self.final, self.rules,
                         self.theory, TRUE)


class Run:
    """A term plus a mapping from its positions to the rules fired there."""

    def __init__(self, term: Term, rule_at: dict[Position, Rule]):
        self.term = term
        self.rule_at = dict(rule_at)

    def positions(self) -> list[Position]:
        return sorted(self.rule_at)

    def state_at(self, p: Position) -> str:
        return self.rule_at[p].rhs

    @property
    def root_state(self) -> str:
        return self.rule_at[()].rhs

    def subterm_at(self, p: Position) -> Term:
        return subterm(self.term, p)

    def height(self) -> int:
        return height(self.term)

    def subrun(self, p: Position) -> "Run":
        sub = subterm(self.term, p)
        mapping = {
            q[len(p):]: rule for q, rule in self.rule_at.items() if q[: len(p)] == p
        }
        return Run(sub, mapping)

    def replace_at(self, p: Position, other: "Run") -> "Run":
        from .terms import replace

        term = replace(self.term, p, other.term)
        mapping = {q: r for q, r in self.rule_at.items() if q[: len(p)] != p}
        for q, r in other.rule_at.items():
            mapping[p + q] = r
        return Run(term, mapping)

    def __eq__(self, other) -> bool:
        return isinstance(other, Run) and self.term == other.term and self.rule_at == other.rule_at

    def __repr__(self) -> str:
        from .terms import format_term

        return f"Run({format_term(self.term)})"


def run_index(automaton: Automaton, run: Run, budget: int | None = None) -> CongruenceIndex:
    kwargs = {} if budget is None else {"budget": budget}
    return class_index(automaton.theory, [run.term], **kwargs)


def validate_run(automaton: Automaton, run: Run, index: CongruenceIndex | None = None) -> list[str]:
    """Empty list iff run is a run of the automaton; else named violations."""
    violations: list[str] = []
    rule_set = set(automaton.rules)
    term_positions = set()
    stack: list[tuple[Position, Term]] = [((), run.term)]
    while stack:
        p, node = stack.pop()
        term_positions.add(p)
        for i, child in enumerate(node.children, start=1):
            stack.append((p + (i,), child))
    if set(run.rule_at) != term_positions:
        violations.append("rule mapping domain differs from Pos(t)")
        return violations
    if index is None:
        index = run_index(automaton, run)
    for p in run.positions():
        rule = run.rule_at[p]
        node = run.subterm_at(p)
        where = format_position(p)
        if rule not in rule_set:
            violations.append(f"at {where}: rule {rule} is not a rule of the automaton")
            continue
        if rule.symbol != node.symbol:
            violations.append(f"at {where}: rule symbol {rule.symbol} != term symbol {node.symbol}")
            continue
        child_states = tuple(run.state_at(p + (i,)) for i in range(1, len(node.children) + 1))
        if child_states != rule.lhs:
            violations.append(f"at {where}: child states {child_states} do not match {rule.lhs}")
        for atom in rule.constraint.atoms:
            left = subterm(node, (atom.i,))
            right = subterm(node, (atom.j,))
            holds = index.equal(left, right) == atom.equal
            if not holds:
                violations.append(f"at {where}: brother atom {atom} violated")
    stats = RunStats.from_run(run, index)
    if not eval_formula_stats(automaton.global_constraint, stats):
        violations.append(
            f"global: constraint {format_constraint(automaton.global_constraint)} violated"
        )
    return violations


def reachable_states(automaton: Automaton) -> set[str]:
    """States reachable in ta(A) (constraints ignored), bottom-up fixpoint."""
    reached: set[str] = set()
    changed = True
    while changed:
        changed = False
        for rule in automaton.rules:
            if rule.rhs not in reached and all(q in reached for q in rule.lhs):
                reached.add(rule.rhs)
                changed = True
    return reached


def min_heights(automaton: Automaton) -> dict[str, int]:
    """Minimal height of a ta(A)-run reaching each reachable state."""
    best: dict[str, int] = {}
    changed = True
    while changed:
        changed = False
        for rule in automaton.rules:
            if all(q in best for q in rule.lhs):
                h = 0 if not rule.lhs else 1 + max(best[q] for q in rule.lhs)
                if h < best.get(rule.rhs, h + 1):
                    best[rule.rhs] = h
                    changed = True
    return best


# -- membership ----------------------------------------------------------------


def _mandatory_atoms(formula: Formula) -> list[EqAtom | NeqAtom]:
    """Positive ~ / !~ atoms that are top-level conjuncts (safe to prune on)."""
    if isinstance(formula, (EqAtom, NeqAtom)):
        return [formula]
    if isinstance(formula, And):
        out: list[EqAtom | NeqAtom] = []
        for item in formula.items:
            if isinstance(item, (EqAtom, NeqAtom)):
                out.append(item)
        return out
    return []


class _ClassTracker:
    """Incremental per-state class tables with monotone conflict detection."""

    def __init__(self, atoms: list[EqAtom | NeqAtom]):
        self.occ: Counter = Counter()
        self.table: dict[str, Counter] = {}
        self.by_state: dict[str, list] = {}
        for atom in atoms:
            self.by_state.setdefault(atom.left, []).append(atom)
            if atom.right != atom.left:
                self.by_state.setdefault(atom.right, []).append(atom)

    def push(self, state: str, cls: int) -> bool:
        """Record one position; False when a mandatory atom is now dead."""
        self.occ[state] += 1
        self.table.setdefault(state, Counter())[cls] += 1
        for atom in self.by_state.get(state, ()):
            if isinstance(atom, EqAtom):
                left = self.table.get(atom.left) or {}
                if atom.left == atom.right:
                    if len(left) > 1:
                        return False
                    continue
                right = self.table.get(atom.right) or {}
                # vacuous while either side is unoccupied
                if left and right and len(set(left) | set(right)) > 1:
                    return False
            else:
                if atom.left == atom.right:
                    if self.table[state][cls] > 1:
                        return False
                else:
                    other = atom.right if state == atom.left else atom.left
                    if cls in self.table.get(other, ()):
                        return False
        return True

    def pop(self, state: str, cls: int) -> None:
        self.occ[state] -= 1
        table = self.table[state]
        table[cls] -= 1
        if table[cls] == 0:
            del table[cls]

    def stats(self) -> RunStats:
        occ = {q: n for q, n in self.occ.items() if n}
        table = {q: Counter({c: n for c, n in t.items() if n}) for q, t in self.table.items()}
        return RunStats(occ, {q: t for q, t in table.items() if t})


def _post_order(t: Term) -> list[tuple[Position, Term]]:
    out: list[tuple[Position, Term]] = []

    def walk(p: Position, node: Term) -> None:
        for i, child in enumerate(node.children, start=1):
            walk(p + (i,), child)
        out.append((p, node))

    walk((), t)
    return out


def _feasible_states(
    automaton: Automaton, t: Term, index: CongruenceIndex
) -> tuple[dict[Position, set[str]], dict[tuple[Position, BrotherConstraint], bool]]:
    """Bottom-up per-position feasible states under local constraints only."""
    rules_by_symbol: dict[str, list[Rule]] = {}
    rules_by_key: dict[tuple[str, tuple[str, ...]], list[Rule]] = {}
    for rule in automaton.rules:
        rules_by_symbol.setdefault(rule.symbol, []).append(rule)
        rules_by_key.setdefault((rule.symbol, rule.lhs), []).append(rule)
    feasible: dict[Position, set[str]] = {}
    brother_ok: dict[tuple[Position, BrotherConstraint], bool] = {}

    def guard_ok(p: Position, node: Term, rule: Rule) -> bool:
        key = (p, rule.constraint)
        if key not in brother_ok:
            brother_ok[key] = all(
                index.equal(node.children[a.i - 1], node.children[a.j - 1]) == a.equal
                for a in rule.constraint.atoms
            )
        return brother_ok[key]

    for p, node in _post_order(t):
        states: set[str] = set()
        child_sets = [feasible[p + (i,)] for i in range(1, len(node.children) + 1)]
        combos = 1
        for s in child_sets:
            combos *= len(s)
        symbol_rules = rules_by_symbol.get(node.symbol, ())
        if combos <= len(symbol_rules):
            # dense rule sets (tally products): walk child-state combinations
            for combo in itertools.product(*child_sets):
                for rule in rules_by_key.get((node.symbol, combo), ()):
                    if rule.rhs not in states and guard_ok(p, node, rule):
                        states.add(rule.rhs)
        else:
            for rule in symbol_rules:
                if rule.rhs in states:
                    continue
                if any(q not in child_sets[i] for i, q in enumerate(rule.lhs)):
                    continue
                if guard_ok(p, node, rule):
                    states.add(rule.rhs)
        feasible[p] = states
    return feasible, brother_ok


def member(
    automaton: Automaton,
    t: Term,
    budget: int = DEFAULT_SEARCH_BUDGET,
    require_final: bool = True,
) -> tuple[bool, Run | None]:
    """Does some successful run on t exist?  Returns (accepted, witness)."""
    automaton.signature.check_term(t)
    if automaton.global_constraint == FALSE:
        return False, None
    index = class_index(automaton.theory, [t])
    feasible, brother_ok = _feasible_states(automaton, t, index)
    targets = feasible[()] & automaton.final if require_final else feasible[()]
    if not targets:
        return False, None

    if automaton.global_constraint == TRUE:
        # local feasibility already decides; build one witness greedily
        rules_by_rhs_symbol: dict[tuple[str, str], list[Rule]] = {}
        for rule in automaton.rules:
            rules_by_rhs_symbol.setdefault((rule.symbol, rule.rhs), []).append(rule)

        def pick(p: Position, node: Term, state: str, out: dict[Position, Rule]) -> bool:
            for rule in rules_by_rhs_symbol.get((node.symbol, state), ()):
                if any(
                    rule.lhs[i - 1] not in feasible[p + (i,)]
                    for i in range(1, len(node.children) + 1)
                ):
                    continue
                # the guard was evaluated bottom-up for every rule whose
                # left-hand side is feasible
                if not brother_ok[(p, rule.constraint)]:
                    continue
                out[p] = rule
                if all(
                    pick(p + (i,), child, rule.lhs[i - 1], out)
                    for i, child in enumerate(node.children, start=1)
                ):
                    return True
            return False

        chosen: dict[Position, Rule] = {}
        if not pick((), t, sorted(targets)[0], chosen):
            raise AssertionError("feasible state without a constructible run")
        return True, Run(t, chosen)

    order = _post_order(t)
    rules_by_key: dict[tuple[str, tuple[str, ...]], list[Rule]] = {}
    for rule in automaton.rules:
        rules_by_key.setdefault((rule.symbol, rule.lhs), []).append(rule)

    tracker = _ClassTracker(_mandatory_atoms(automaton.global_constraint))
    assignment: dict[Position, Rule] = {}
    classes = {p: index.class_id(node) for p, node in order}
    spent = 0

    def assign(idx: int) -> Run | None:
        nonlocal spent
        if idx == len(order):
            stats = tracker.stats()
            if eval_formula_stats(automaton.global_constraint, stats):
                return Run(t, assignment)
            return None
        p, node = order[idx]
        spent += 1
        if spent > budget:
            raise BudgetError(f"membership search exceeded {budget} assignments")
        child_states = tuple(
            assignment[p + (i,)].rhs for i in range(1, len(node.children) + 1)
        )
        for rule in rules_by_key.get((node.symbol, child_states), ()):
            if rule.rhs not in feasible[p]:
                continue
            if p == () and require_final and rule.rhs not in automaton.final:
                continue
            if not brother_ok[(p, rule.constraint)]:
                continue
            ok = tracker.push(rule.rhs, classes[p])
            if ok:
                assignment[p] = rule
                found = assign(idx + 1)
                if found is not None:
                    return found
                del assignment[p]
            tracker.pop(rule.rhs, classes[p])
        return None

    witness = assign(0)
    return (witness is not None), witness


# -- Boolean closure ------------------------------------------------------------


def _disjoint_renames(a1: Automaton, a2: Automaton):
    shared = set(a1.states) & set(a2.states)
    if not shared:
        return (lambda q: q), (lambda q: q)
    return (lambda q: f"{q}_1"), (lambda q: f"{q}_2")


def _rename_automaton(a: Automaton, rename) -> Automaton:
    rules = tuple(
        Rule(r.symbol, tuple(rename(q) for q in r.lhs), rename(r.rhs), r.constraint)
        for r in a.rules
    )
    return Automaton(
        tuple(rename(q) for q in a.states),
        a.signature,
        frozenset(rename(q) for q in a.final),
        rules,
        a.theory,
        map_states(a.global_constraint, rename),
    )


def union(a1: Automaton, a2: Automaton) -> Automaton:
    """Disjoint union; sound for positive conjunctive constraints only."""
    if set(a1.signature.symbols) != set(a2.signature.symbols):
        raise ShapeError("union requires identical signatures")
    if not a1.theory.same_theory(a2.theory):
        raise ShapeError("union requires identical flat theories")
    if not (a1.is_positive_conjunctive and a2.is_positive_conjunctive):
        raise ShapeError("union is defined for positive conjunctive automata")
    if a1.global_constraint == FALSE:
        return a2
    if a2.global_constraint == FALSE:
        return a1
    r1, r2 = _disjoint_renames(a1, a2)
    b1, b2 = _rename_automaton(a1, r1), _rename_automaton(a2, r2)
    return Automaton(
        b1.states + b2.states,
        a1.signature,
        b1.final | b2.final,
        b1.rules + b2.rules,
        a1.theory,
        conj([b1.global_constraint, b2.global_constraint]),
    )


def _pair_name(q1: str, q2: str) -> str:
    return f"{q1}__{q2}"


def intersect(a1: Automaton, a2: Automaton) -> Automaton:
    """Cartesian product with constraint re-targeting over pair states.

    Defined for ~ / !~ global atoms; arithmetic atoms are rejected
    (expanding ||q|| over pair states would over-count classes reaching
    several of them).  Brother constraints of paired rules are conjoined,
    forced by run projection.
    """
    if set(a1.signature.symbols) != set(a2.signature.symbols):
        raise ShapeError("intersection requires identical signatures")
    if not a1.theory.same_theory(a2.theory):
        raise ShapeError("intersection requires identical flat theories")
    for a in (a1, a2):
        if any(isinstance(atom, LinAtom) for atom in atoms_of(a.global_constraint)):
            raise ShapeError("intersection does not support arithmetic atoms")

    states = tuple(_pair_name(q1, q2) for q1 in a1.states for q2 in a2.states)
    if len(set(states)) != len(states):
        raise ShapeError("pair state naming collision; rename source states")
    rules = []
    by_symbol2: dict[str, list[Rule]] = {}
    for r in a2.rules:
        by_symbol2.setdefault(r.symbol, []).append(r)
    for r1 in a1.rules:
        for r2 in by_symbol2.get(r1.symbol, ()):
            lhs = tuple(_pair_name(q1, q2) for q1, q2 in zip(r1.lhs, r2.lhs))
            guard = BrotherConstraint(
                tuple(dict.fromkeys(r1.constraint.atoms + r2.constraint.atoms))
            )
            rules.append(Rule(r1.symbol, lhs, _pair_name(r1.rhs, r2.rhs), guard))

    def expand(formula: Formula, left: bool) -> Formula:
        if isinstance(formula, Bool):
            return formula
        if isinstance(formula, Not):
            return Not(expand(formula.item, left))
        if isinstance(formula, And):
            return And(tuple(expand(i, left) for i in formula.items))
        if isinstance(formula, Or):
            return Or(tuple(expand(i, left) for i in formula.items))
        other = a2.states if left else a1.states
        pair = (lambda q, o: _pair_name(q, o)) if left else (lambda q, o: _pair_name(o, q))
        make = EqAtom if isinstance(formula, EqAtom) else NeqAtom
        return conj(
            [
                make(pair(formula.left, o1), pair(formula.right, o2))
                for o1 in other
                for o2 in other
            ]
        )

    constraint = conj([expand(a1.global_constraint, True), expand(a2.global_constraint, False)])
    final = frozenset(_pair_name(q1, q2) for q1 in a1.final for q2 in a2.final)
    return Automaton(states, a1.signature, final, tuple(rules), a1.theory, constraint)


# -- test oracle ---------------------------------------------------------------


def oracle_member(automaton: Automaton, t: Term) -> tuple[bool, Run | None]:
    """Exhaustive enumeration of all rule assignments (small terms only)."""
    automaton.signature.check_term(t)
    order = _post_order(t)
    index = class_index(automaton.theory, [t])
    options = []
    for p, node in order:
        options.append([r for r in automaton.rules if r.symbol == node.symbol])
    for combo in itertools.product(*options):
        run = Run(t, {p: rule for (p, _), rule in zip(order, combo)})
        if run.root_state not in automaton.final:
            continue
        if not validate_run(automaton, run, index):
            return True, run
    return False, None
