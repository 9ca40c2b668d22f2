"""Text formats: automaton files, term files, run files, hedge automaton files.

Automaton files are one directive per line:

    sig f:2 a:0
    states q0 qf
    final qf
    vars x
    eq f(x,a) = f(a,x)
    rule a -> q0
    rule f(q0,q0) [1~2] -> qf
    global q0 ~ q0

Lines starting with '#' and anything after ' #' are comments (the space
matters: '#' also occurs inside annotated symbols like f#101).  Run files
list `position: rule-index` pairs, indexes referring to the automaton file's
rule order, root written '@'.  Hedge automaton files replace `rule` lines by
`hrule a (NAME) -> q` plus `nfa NAME: init s0; final s1; s0 -q-> s1; ...`,
and their `sig` line lists bare symbols (no arities).
"""

from __future__ import annotations

import re

from .automata import Automaton, BrotherAtom, BrotherConstraint, Rule, Run
from .constraints import TRUE, format_constraint, parse_constraint
from .errors import ParseError
from .terms import Position, Signature, Term, format_position, format_term, parse_position, parse_term
from .theory import FlatEquation, FlatTheory, flat_equation
from .unranked import HedgeAutomaton, WordAutomaton

_RULE_RE = re.compile(
    r"^(?P<sym>[A-Za-z0-9_@#]+)\s*(?:\((?P<args>[^)]*)\))?\s*"
    r"(?:\[(?P<guard>[^\]]*)\])?\s*->\s*(?P<rhs>\S+)$"
)
_HRULE_RE = re.compile(
    r"^(?P<sym>[A-Za-z0-9_@#]+)\s*\(\s*(?P<nfa>\S+)\s*\)\s*->\s*(?P<rhs>\S+)$"
)
_NFA_EDGE_RE = re.compile(r"^(?P<src>\S+)\s*-(?P<label>[^>]+)->\s*(?P<dst>\S+)$")


def _logical_lines(text: str):
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cut = line.find(" #")
        if cut >= 0:
            line = line[:cut].rstrip()
        if line:
            yield line


def _parse_guard(guard: str) -> BrotherConstraint:
    atoms = []
    for part in guard.split(","):
        part = part.strip()
        if not part:
            continue
        if "!~" in part:
            i, j = part.split("!~")
            atoms.append(BrotherAtom(int(i), int(j), False))
        elif "~" in part:
            i, j = part.split("~")
            atoms.append(BrotherAtom(int(i), int(j), True))
        else:
            raise ParseError(f"bad brother atom {part!r}")
    return BrotherConstraint(tuple(atoms))


def parse_automaton(text: str) -> Automaton:
    signature: Signature | None = None
    states: tuple[str, ...] | None = None
    final: frozenset[str] = frozenset()
    variables: set[str] = set()
    equations: list[FlatEquation] = []
    rules: list[Rule] = []
    constraint = TRUE
    for line in _logical_lines(text):
        word, _, rest = line.partition(" ")
        rest = rest.strip()
        if word == "sig":
            decls = []
            for token in rest.split():
                name, _, arity = token.partition(":")
                if not arity:
                    raise ParseError(f"signature token {token!r} needs name:arity")
                decls.append((name, int(arity)))
            signature = Signature(tuple(decls))
        elif word == "states":
            states = tuple(rest.split())
        elif word == "final":
            final = frozenset(rest.split())
        elif word == "vars":
            variables.update(rest.split())
        elif word == "eq":
            if signature is None:
                raise ParseError("eq line before sig line")
            left_text, _, right_text = rest.partition("=")
            if not right_text:
                raise ParseError(f"bad equation line {line!r}")
            eq = flat_equation(
                _parse_pattern(left_text.strip(), variables),
                _parse_pattern(right_text.strip(), variables),
                variables,
                signature,
            )
            if eq is not None:
                equations.append(eq)
        elif word == "rule":
            m = _RULE_RE.match(rest)
            if not m:
                raise ParseError(f"bad rule line {line!r}")
            args = tuple(a.strip() for a in m.group("args").split(",")) if m.group("args") else ()
            guard = _parse_guard(m.group("guard")) if m.group("guard") else BrotherConstraint()
            rules.append(Rule(m.group("sym"), args, m.group("rhs"), guard))
        elif word == "global":
            constraint = parse_constraint(rest)
        else:
            raise ParseError(f"unknown directive {word!r}")
    if signature is None:
        raise ParseError("missing sig line")
    if states is None:
        raise ParseError("missing states line")
    theory = FlatTheory(signature, tuple(equations))
    return Automaton(states, signature, final, tuple(rules), theory, constraint)


def _parse_pattern(text: str, variables: set[str]) -> Term:
    term = parse_term(text)

    def check(node: Term) -> None:
        if node.symbol in variables and node.children:
            raise ParseError(f"variable {node.symbol!r} used with arguments")
        for c in node.children:
            check(c)

    check(term)
    return term


def format_automaton(a: Automaton) -> str:
    lines = ["sig " + " ".join(f"{n}:{k}" for n, k in a.signature.symbols)]
    lines.append("states " + " ".join(a.states))
    if a.final:
        lines.append("final " + " ".join(sorted(a.final)))
    variables = sorted({v for eq in a.theory.equations for v in eq.variables})
    if variables:
        lines.append("vars " + " ".join(variables))
    for eq in a.theory.equations:
        lines.append(f"eq {format_term(eq.left)} = {format_term(eq.right)}")
    for rule in a.rules:
        lhs = f"({','.join(rule.lhs)})" if rule.lhs else ""
        guard = f" [{rule.constraint}]" if not rule.constraint.is_empty else ""
        lines.append(f"rule {rule.symbol}{lhs}{guard} -> {rule.rhs}")
    lines.append("global " + format_constraint(a.global_constraint))
    return "\n".join(lines) + "\n"


# -- run files ------------------------------------------------------------------


def parse_run(text: str, automaton: Automaton) -> Run:
    mapping: dict[Position, int] = {}
    for line in _logical_lines(text):
        pos_text, _, idx_text = line.partition(":")
        if not idx_text:
            raise ParseError(f"bad run line {line!r}")
        p = parse_position(pos_text.strip())
        try:
            idx = int(idx_text.strip())
        except ValueError:
            raise ParseError(f"bad rule index in {line!r}") from None
        if not 0 <= idx < len(automaton.rules):
            raise ParseError(f"rule index {idx} out of range")
        if p in mapping:
            raise ParseError(f"duplicate position {pos_text.strip()!r}")
        mapping[p] = idx
    if () not in mapping:
        raise ParseError("run file lacks the root position '@'")

    rule_at: dict[Position, Rule] = {}

    def build(p: Position) -> Term:
        if p not in mapping:
            raise ParseError(f"missing position {format_position(p)} in run file")
        rule = automaton.rules[mapping[p]]
        rule_at[p] = rule
        children = tuple(build(p + (i,)) for i in range(1, len(rule.lhs) + 1))
        return Term(rule.symbol, children)

    term = build(())
    if set(mapping) != set(rule_at):
        extra = {format_position(p) for p in set(mapping) - set(rule_at)}
        raise ParseError(f"run file has unreachable positions: {sorted(extra)}")
    return Run(term, rule_at)


def format_run(run: Run, automaton: Automaton) -> str:
    index_of: dict[Rule, int] = {}
    for i, rule in enumerate(automaton.rules):
        index_of.setdefault(rule, i)
    lines = []
    for p in run.positions():
        rule = run.rule_at[p]
        if rule not in index_of:
            raise ParseError(f"run uses a rule not in the automaton: {rule}")
        lines.append(f"{format_position(p)}: {index_of[rule]}")
    return "\n".join(lines) + "\n"


# -- hedge automaton files --------------------------------------------------------


def parse_hag(text: str) -> HedgeAutomaton:
    symbols: tuple[str, ...] | None = None
    states: tuple[str, ...] | None = None
    final: frozenset[str] = frozenset()
    hrules: list[tuple[str, str, str]] = []
    nfas: dict[str, WordAutomaton] = {}
    constraint = TRUE
    for line in _logical_lines(text):
        word, _, rest = line.partition(" ")
        rest = rest.strip()
        if word == "sig":
            if any(":" in token for token in rest.split()):
                raise ParseError("hedge signatures are unranked: no arities")
            symbols = tuple(rest.split())
        elif word == "states":
            states = tuple(rest.split())
        elif word == "final":
            final = frozenset(rest.split())
        elif word == "hrule":
            m = _HRULE_RE.match(rest)
            if not m:
                raise ParseError(f"bad hrule line {line!r}")
            hrules.append((m.group("sym"), m.group("nfa"), m.group("rhs")))
        elif word == "nfa":
            name, _, body = rest.partition(":")
            name = name.strip()
            initial = None
            finals: set[str] = set()
            edges: list[tuple[str, str, str]] = []
            nfa_states: list[str] = []
            for clause in body.split(";"):
                clause = clause.strip()
                if not clause:
                    continue
                if clause.startswith("init "):
                    initial = clause.split()[1]
                    nfa_states.append(initial)
                elif clause.startswith("final"):
                    finals.update(clause.split()[1:])
                else:
                    m = _NFA_EDGE_RE.match(clause)
                    if not m:
                        raise ParseError(f"bad NFA clause {clause!r}")
                    edges.append((m.group("src"), m.group("label").strip(), m.group("dst")))
            if initial is None:
                raise ParseError(f"nfa {name!r} lacks an init clause")
            for src, _, dst in edges:
                nfa_states.extend((src, dst))
            nfa_states.extend(finals)
            nfas[name] = WordAutomaton(
                tuple(dict.fromkeys(nfa_states)), initial, frozenset(finals), tuple(edges)
            )
        elif word == "global":
            constraint = parse_constraint(rest)
        else:
            raise ParseError(f"unknown hedge directive {word!r}")
    if symbols is None or states is None:
        raise ParseError("hedge automaton needs sig and states lines")
    transitions = []
    for symbol, nfa_name, state in hrules:
        if nfa_name not in nfas:
            raise ParseError(f"hrule references unknown nfa {nfa_name!r}")
        transitions.append((symbol, nfas[nfa_name], state))
    return HedgeAutomaton(states, symbols, final, tuple(transitions), constraint)


def format_hag(h: HedgeAutomaton) -> str:
    lines = ["sig " + " ".join(h.symbols), "states " + " ".join(h.states)]
    if h.final:
        lines.append("final " + " ".join(sorted(h.final)))
    for k, (symbol, nfa, state) in enumerate(h.transitions):
        name = f"L{k}"
        lines.append(f"hrule {symbol} ({name}) -> {state}")
        clauses = [f"init {nfa.initial}"]
        if nfa.finals:
            clauses.append("final " + " ".join(sorted(nfa.finals)))
        clauses.extend(f"{src} -{label}-> {dst}" for src, label, dst in nfa.transitions)
        lines.append(f"nfa {name}: " + "; ".join(clauses))
    lines.append("global " + format_constraint(h.global_constraint))
    return "\n".join(lines) + "\n"
