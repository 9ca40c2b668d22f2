"""Random fixture generators and brute-force oracles shared by the tests.

Everything takes an explicit random.Random so failures reproduce from the
seed written in the test.
"""

from __future__ import annotations

import itertools
import random

from tabg.automata import Automaton, BrotherAtom, BrotherConstraint, Rule, Run
from tabg.constraints import (
    CLS,
    OCC,
    And,
    EqAtom,
    LinAtom,
    NeqAtom,
    Not,
    Or,
    TRUE,
)
from tabg.terms import Signature, Term, enumerate_terms, height, sig
from tabg.theory import FlatTheory, flat_equation
from tabg.terms import parse_term


def rand_signature(rng: random.Random, max_symbols: int = 2) -> Signature:
    pool = [
        sig(("a", 0), ("f", 2)),
        sig(("a", 0), ("s", 1)),
        sig(("a", 0), ("b", 0)),
        sig(("a", 0), ("g", 1)),
        sig(("a", 0),),
    ]
    if max_symbols >= 3:
        pool += [
            sig(("a", 0), ("b", 0), ("f", 2)),
            sig(("a", 0), ("s", 1), ("g", 1)),
            sig(("a", 0), ("b", 0), ("h", 1)),
            sig(("a", 0), ("f", 2), ("g", 2)),
        ]
    return rng.choice(pool)


def rand_theory(rng: random.Random, signature: Signature, max_equations: int = 3) -> FlatTheory:
    constants = list(signature.constants)
    unary = [n for n, k in signature.symbols if k == 1]
    binary = [n for n, k in signature.symbols if k == 2]
    candidates: list[tuple[str, str]] = []
    if len(constants) >= 2:
        candidates.append((constants[0], constants[1]))
    for u in unary:
        candidates.append((f"{u}(x)", f"{u}(x)"))
        candidates.append((f"{u}({constants[0]})", f"{u}({constants[0]})"))
    for b in binary:
        candidates.append((f"{b}(x,y)", f"{b}(y,x)"))
        candidates.append((f"{b}(x,x)", f"{b}(x,x)"))
        candidates.append((f"{b}(x,{constants[0]})", f"{b}({constants[0]},x)"))
    rng.shuffle(candidates)
    equations = []
    for left, right in candidates[: rng.randrange(max_equations + 1)]:
        eq = flat_equation(parse_term(left), parse_term(right), {"x", "y"}, signature)
        if eq is not None:
            equations.append(eq)
    return FlatTheory(signature, tuple(equations))


def rand_term(rng: random.Random, signature: Signature, max_height: int) -> Term:
    constants = signature.constants
    if max_height == 0:
        return Term(rng.choice(constants))
    name, arity = rng.choice(signature.symbols)
    if arity == 0:
        return Term(name)
    return Term(name, tuple(rand_term(rng, signature, max_height - 1) for _ in range(arity)))


def rand_tab(
    rng: random.Random,
    signature: Signature | None = None,
    theory: FlatTheory | None = None,
    max_states: int = 3,
    brother_prob: float = 0.4,
) -> Automaton:
    signature = signature or rand_signature(rng)
    theory = theory or (
        rand_theory(rng, signature) if rng.random() < 0.3 else FlatTheory(signature)
    )
    states = tuple(f"q{i}" for i in range(rng.randint(1, max_states)))
    rules: list[Rule] = []
    for name, arity in signature.symbols:
        combos = list(itertools.product(states, repeat=arity))
        rng.shuffle(combos)
        for lhs in combos[: rng.randint(1, min(3, len(combos)))]:
            guard = BrotherConstraint()
            if arity >= 2 and rng.random() < brother_prob:
                i, j = rng.sample(range(1, arity + 1), 2)
                guard = BrotherConstraint((BrotherAtom(i, j, rng.random() < 0.5),))
            rules.append(Rule(name, lhs, rng.choice(states), guard))
    if not any(not r.lhs for r in rules):
        rules.append(Rule(signature.constants[0], (), states[0]))
    final = frozenset(rng.sample(states, rng.randint(1, len(states))))
    return Automaton(states, signature, final, tuple(dict.fromkeys(rules)), theory, TRUE)


def rand_literal(rng: random.Random, states):
    q1, q2 = rng.choice(states), rng.choice(states)
    kind = rng.random()
    if kind < 0.25:
        return EqAtom(q1, q2)
    if kind < 0.45:
        return NeqAtom(q1, q2)
    if kind < 0.60:
        return Not(EqAtom(q1, q2))
    if kind < 0.70:
        return Not(NeqAtom(q1, q2))
    arith = OCC if kind < 0.85 else CLS
    n_terms = rng.randint(1, 2)
    terms = tuple((rng.randint(1, 2), rng.choice(states)) for _ in range(n_terms))
    cmp = rng.choice(["<=", ">=", "="])
    return LinAtom(arith, terms, cmp, rng.randint(0, 2))


def rand_constraint(rng: random.Random, states):
    lits = [rand_literal(rng, states) for _ in range(rng.randint(1, 2))]
    if len(lits) == 1:
        return lits[0]
    return And(tuple(lits)) if rng.random() < 0.7 else Or(tuple(lits))


def rand_tabg(rng: random.Random, **kwargs) -> Automaton:
    base = rand_tab(rng, **kwargs)
    return Automaton(
        base.states,
        base.signature,
        base.final,
        base.rules,
        base.theory,
        rand_constraint(rng, base.states),
    )


def rand_valid_run(
    rng: random.Random, automaton: Automaton, max_height: int = 4, tries: int = 60
) -> Run | None:
    """Random run of tab(A) (local constraints honoured, global ignored)."""
    from tabg.theory import class_index

    by_rhs: dict[str, list[Rule]] = {}
    for rule in automaton.rules:
        by_rhs.setdefault(rule.rhs, []).append(rule)

    def build(state: str, budget: int):
        options = [r for r in by_rhs.get(state, ()) if budget > 0 or not r.lhs]
        rng.shuffle(options)
        for rule in options:
            children = []
            ok = True
            for q in rule.lhs:
                child = build(q, budget - 1)
                if child is None:
                    ok = False
                    break
                children.append(child)
            if not ok:
                continue
            term = Term(rule.symbol, tuple(c.term for c in children))
            if rule.constraint.atoms:
                index = class_index(automaton.theory, [term])
                if not all(
                    index.equal(term.children[a.i - 1], term.children[a.j - 1]) == a.equal
                    for a in rule.constraint.atoms
                ):
                    continue
            mapping = {(): rule}
            for i, child in enumerate(children, start=1):
                for p, r in child.rule_at.items():
                    mapping[(i,) + p] = r
            return Run(term, mapping)
        return None

    states = list(automaton.states)
    for _ in range(tries):
        run = build(rng.choice(states), rng.randint(0, max_height))
        if run is not None and run.height() <= max_height:
            return run
    return None


# -- brute-force oracles ----------------------------------------------------------


def brute_pump_exists(run: Run, index) -> bool:
    """Exhaustive search over all pump-injections (small runs only)."""
    from tabg.pumping import strata

    layers = strata(run)
    for i in range(layers.height, 1, -1):
        for j in range(i - 1, 0, -1):
            if _brute_injection(run, index, layers, i, j):
                return True
    return False


def _brute_injection(run, index, layers, i, j) -> bool:
    if not layers.ring[i] <= layers.ring[j]:
        return False
    sources = sorted(layers.exact[i]) + sorted(layers.checked[i])
    target_pools = [
        sorted(layers.exact[j]) if p in layers.exact[i] else sorted(layers.checked[j])
        for p in sources
    ]
    ring = sorted(layers.ring[i])
    for choice in itertools.product(*target_pools):
        if len(set(choice)) != len(choice):
            continue
        mapping = dict(zip(sources, choice))
        for p in ring:
            mapping[p] = p
        if any(run.state_at(p) != run.state_at(q) for p, q in mapping.items()):
            continue
        domain = sorted(mapping)
        ok = True
        for p1, p2 in itertools.combinations(domain, 2):
            src_eq = index.equal(run.subterm_at(p1), run.subterm_at(p2))
            dst_eq = index.equal(run.subterm_at(mapping[p1]), run.subterm_at(mapping[p2]))
            if src_eq != dst_eq:
                ok = False
                break
        if ok:
            return True
    return False


def bound_oracle(a: int, n: int, node_cap: int = 10**6) -> int:
    """Independent longest-sequence search for B(a, n), breadth first."""
    from tabg.pumping import wqo_leq

    def tuples(total):
        return [
            c
            for c in itertools.product(range(total + 1), repeat=n)
            if sum(c) == total and total > 0
        ]

    def multisets(total):
        if total == 0:
            return [()]
        out = []
        for w in range(1, total + 1):
            for item in tuples(w):
                for rest in multisets(total - w):
                    out.append(tuple(sorted((item,) + rest)))
        return sorted(set(out))

    def pairs(limit):
        out = []
        for wt in range(limit + 1):
            for t_part in multisets(wt):
                for wc in range(limit - wt + 1):
                    for c_part in multisets(wc):
                        out.append((t_part, c_part))
        return out

    start = [((t,), ()) for t in tuples(1)]
    frontier = [[s] for s in start]
    best = 0
    nodes = 0
    while frontier:
        seq = frontier.pop()
        nodes += 1
        assert nodes < node_cap, "oracle blew its node cap"
        best = max(best, len(seq))
        last = seq[-1]
        limit = a * sum(map(sum, last[0])) + sum(map(sum, last[1]))
        for item in pairs(limit):
            if any(wqo_leq(prev, item) for prev in seq):
                continue
            frontier.append(seq + [item])
    return best


def language_upto(automaton: Automaton, max_height: int, budget: int = 10**6):
    from tabg.automata import member

    out = set()
    for t in enumerate_terms(automaton.signature, max_height):
        if member(automaton, t, budget=budget)[0]:
            out.add(t)
    return out
