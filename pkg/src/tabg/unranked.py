"""Hedge automata with global constraints over unranked ordered terms.

Horizontal languages are given by word NFAs over the tree states.  Decision
problems transfer to ranked automata through currying: an unranked term
becomes a binary term over the original symbols (now constants) plus a fresh
binary application symbol, and each NFA is inlined into the rule set.
Equality atoms transfer unchanged because curried subterms at tree states
correspond exactly to whole unranked subterms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .automata import Automaton, Rule
from .constraints import Formula, LinAtom, TRUE, atoms_of, states_of
from .errors import DecodeError, NamingError, ShapeError
from .terms import Signature, Term
from .theory import FlatTheory

APPLY = "@"


@dataclass(frozen=True)
class UnrankedTerm:
    symbol: str
    children: tuple["UnrankedTerm", ...] = ()


def format_unranked(t: UnrankedTerm) -> str:
    if not t.children:
        return t.symbol
    return f"{t.symbol}({','.join(format_unranked(c) for c in t.children)})"


def parse_unranked(text: str) -> UnrankedTerm:
    from .terms import parse_term

    def convert(t: Term) -> UnrankedTerm:
        return UnrankedTerm(t.symbol, tuple(convert(c) for c in t.children))

    return convert(parse_term(text))


def unranked_size(t: UnrankedTerm) -> int:
    return 1 + sum(unranked_size(c) for c in t.children)


@dataclass(frozen=True)
class WordAutomaton:
    """NFA over the hedge automaton's tree states."""

    states: tuple[str, ...]
    initial: str
    finals: frozenset[str]
    transitions: tuple[tuple[str, str, str], ...]  # (src, letter, dst)

    def __post_init__(self):
        declared = set(self.states)
        if self.initial not in declared:
            raise ShapeError(f"initial state {self.initial!r} not declared")
        if not self.finals <= declared:
            raise ShapeError("NFA final states not declared")
        for src, _, dst in self.transitions:
            if src not in declared or dst not in declared:
                raise ShapeError("NFA transition uses undeclared state")

    def accepts(self, word) -> bool:
        current = {self.initial}
        for letter in word:
            current = {
                dst for src, lab, dst in self.transitions if src in current and lab == letter
            }
            if not current:
                return False
        return bool(current & self.finals)

    @property
    def accepts_empty(self) -> bool:
        return self.initial in self.finals


def nfa_union(automata: list[WordAutomaton], prefix: str) -> WordAutomaton:
    """Classic initial-state merge; inputs get disjoint namespaces."""
    if len(automata) == 1:
        return automata[0]
    init = f"{prefix}i"
    states = [init]
    finals = set()
    transitions = []
    accepts_empty = False
    for k, nfa in enumerate(automata):
        tag = lambda s, k=k: f"{prefix}{k}_{s}"
        states.extend(tag(s) for s in nfa.states)
        finals.update(tag(s) for s in nfa.finals)
        accepts_empty = accepts_empty or nfa.accepts_empty
        for src, lab, dst in nfa.transitions:
            transitions.append((tag(src), lab, tag(dst)))
            if src == nfa.initial:
                transitions.append((init, lab, tag(dst)))
    if accepts_empty:
        finals.add(init)
    return WordAutomaton(tuple(states), init, frozenset(finals), tuple(transitions))


@dataclass(frozen=True)
class HedgeAutomaton:
    states: tuple[str, ...]
    symbols: tuple[str, ...]  # unranked signature
    final: frozenset[str]
    transitions: tuple[tuple[str, WordAutomaton, str], ...]  # (symbol, horizontal, state)
    global_constraint: Formula = TRUE

    def __post_init__(self):
        declared = set(self.states)
        if not self.final <= declared:
            raise ShapeError("hedge final states not declared")
        for symbol, nfa, state in self.transitions:
            if symbol not in self.symbols:
                raise ShapeError(f"hedge rule symbol {symbol!r} not declared")
            if state not in declared:
                raise ShapeError(f"hedge rule state {state!r} not declared")
        if not states_of(self.global_constraint) <= declared:
            raise ShapeError("hedge global constraint mentions undeclared states")
        for atom in atoms_of(self.global_constraint):
            if isinstance(atom, LinAtom) and atom.is_integer:
                raise ShapeError("hedge constraints are restricted to natural atoms")


def curry_signature(symbols) -> Signature:
    return Signature(tuple((a, 0) for a in symbols) + ((APPLY, 2),))


def curry(t: UnrankedTerm) -> Term:
    out = Term(t.symbol)
    for child in t.children:
        out = Term(APPLY, (out, curry(child)))
    return out


def uncurry(t: Term) -> UnrankedTerm:
    """Inverse of curry; the left spine must end in a non-@ constant."""
    children: list[UnrankedTerm] = []
    node = t
    while node.symbol == APPLY:
        if len(node.children) != 2:
            raise DecodeError("@ must be binary")
        children.append(uncurry(node.children[1]))
        node = node.children[0]
    if node.children:
        raise DecodeError(f"symbol {node.symbol!r} must be a leaf under currying")
    return UnrankedTerm(node.symbol, tuple(reversed(children)))


def _merged_horizontals(h: HedgeAutomaton) -> dict[tuple[str, str], WordAutomaton]:
    """Exactly one horizontal NFA per (symbol, state) pair, by NFA union."""
    grouped: dict[tuple[str, str], list[WordAutomaton]] = {}
    for symbol, nfa, state in h.transitions:
        grouped.setdefault((symbol, state), []).append(nfa)
    merged = {}
    for idx, ((symbol, state), nfas) in enumerate(sorted(grouped.items())):
        merged[(symbol, state)] = nfa_union(nfas, prefix=f"u{idx}_")
    return merged


def hag_to_tag(h: HedgeAutomaton) -> Automaton:
    """Curry the automaton: one rule set simulating all horizontal NFAs.

    Per (symbol a, state q) with NFA A_aq:
      a -> q            when A_aq accepts the empty word
      a -> init(A_aq)
      @(s, q') -> s'    for every NFA transition s -q'-> s'
      @(s, q') -> q     when additionally s' is final in A_aq
    """
    signature = curry_signature(h.symbols)
    merged = _merged_horizontals(h)
    word_states: list[str] = []
    rules: list[Rule] = []
    for (symbol, state), nfa in sorted(merged.items()):
        tag = lambda s: f"w_{symbol}_{state}_{s}"
        word_states.extend(tag(s) for s in nfa.states)
        if nfa.accepts_empty:
            rules.append(Rule(symbol, (), state))
        rules.append(Rule(symbol, (), tag(nfa.initial)))
        for src, letter, dst in nfa.transitions:
            rules.append(Rule(APPLY, (tag(src), letter), tag(dst)))
            if dst in nfa.finals:
                rules.append(Rule(APPLY, (tag(src), letter), state))
    states = tuple(h.states) + tuple(dict.fromkeys(word_states))
    if len(set(states)) != len(states):
        raise NamingError("hedge state namespace collides with NFA namespace")
    return Automaton(
        states,
        signature,
        h.final,
        tuple(dict.fromkeys(rules)),
        FlatTheory(signature),
        h.global_constraint,
    )


def hag_member(h: HedgeAutomaton, t: UnrankedTerm, budget: int = 10**6) -> bool:
    from .automata import member

    accepted, _ = member(hag_to_tag(h), curry(t), budget=budget)
    return accepted


# -- direct hedge-run semantics (test oracle) ------------------------------------


def hedge_accepts(h: HedgeAutomaton, t: UnrankedTerm) -> bool:
    """Enumerate hedge runs directly and evaluate the global constraint."""
    from collections import Counter

    merged = _merged_horizontals(h)

    def assignments(node: UnrankedTerm):
        child_options = [list(assignments(c)) for c in node.children]
        for combo in itertools.product(*child_options):
            word = [state for state, _ in combo]
            for (symbol, state), nfa in merged.items():
                if symbol != node.symbol:
                    continue
                if nfa.accepts(word):
                    subterms = [(node, state)]
                    for _, inner in combo:
                        subterms.extend(inner)
                    yield state, subterms

    from .constraints import RunStats, eval_formula_stats

    for root_state, labelled in assignments(t):
        if root_state not in h.final:
            continue
        occ: Counter = Counter()
        table: dict[str, Counter] = {}
        for node, state in labelled:
            occ[state] += 1
            table.setdefault(state, Counter())[node] += 1
        ids: dict[UnrankedTerm, int] = {}
        for node, _ in labelled:
            ids.setdefault(node, len(ids))
        stats = RunStats(
            dict(occ),
            {q: Counter({ids[n]: c for n, c in tbl.items()}) for q, tbl in table.items()},
        )
        if eval_formula_stats(h.global_constraint, stats):
            return True
    return False
