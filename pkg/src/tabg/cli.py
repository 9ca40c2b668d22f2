"""Command-line front end.

Exit codes: 0 definite positive answer or successful transform, 1 definite
negative, 2 bounded/inconclusive, 3 input error, 4 budget error.  Every
command is a pure function of its input files and flags; `--json` swaps the
human-readable report for one machine-readable object on stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .automata import Automaton, Run, intersect, member, union, validate_run
from .emso import AnnotatedTA, annotated_width, compile_query, parse_variable_constraint
from .errors import BudgetError, InputError, TabgError
from .fileformat import (
    format_automaton,
    format_run,
    parse_automaton,
    parse_hag,
    parse_run,
)
from .fixtures import fixtures
from .pumping import apply_pump, emptiness, find_pump, run_index, stats, strata
from .reduction import reduce_with_trace
from .terms import format_position, format_term, parse_term
from .theory import eq_modulo
from .unranked import curry, parse_unranked


@dataclass
class Verdict:
    exit_code: int
    lines: list[str] = field(default_factory=list)
    payload: dict = field(default_factory=dict)

    def render(self, as_json: bool) -> str:
        if as_json:
            return json.dumps(self.payload, indent=2, sort_keys=True)
        return "\n".join(self.lines)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _automaton(path: str) -> Automaton:
    return parse_automaton(_read(path))


def _term_arg(text: str):
    if Path(text).is_file():
        return parse_term(_read(text))
    return parse_term(text)


def _unranked_arg(text: str):
    if Path(text).is_file():
        return parse_unranked(_read(text))
    return parse_unranked(text)


def _emit(out: str | None, content: str, verdict: Verdict) -> None:
    if out:
        Path(out).write_text(content)
        verdict.lines.append(f"wrote {out}")
    else:
        verdict.lines.append(content.rstrip("\n"))


def _run_payload(run: Run, automaton: Automaton) -> dict:
    index_of: dict = {}
    for i, rule in enumerate(automaton.rules):
        index_of.setdefault(rule, i)
    return {
        "term": format_term(run.term),
        "run": [[format_position(p), index_of[run.rule_at[p]]] for p in run.positions()],
    }


def _cmd_member(args) -> Verdict:
    a = _automaton(args.automaton)
    t = _term_arg(args.term)
    accepted, witness = member(a, t, budget=args.budget)
    v = Verdict(0 if accepted else 1)
    v.payload = {"command": "member", "verdict": "accepted" if accepted else "rejected"}
    v.lines.append("accepted" if accepted else "rejected")
    if witness is not None:
        v.lines.append(format_run(witness, a).rstrip("\n"))
        v.payload["witness"] = _run_payload(witness, a)
    return v


def _cmd_check_run(args) -> Verdict:
    a = _automaton(args.automaton)
    run = parse_run(_read(args.run), a)
    problems = validate_run(a, run)
    v = Verdict(0 if not problems else 1)
    v.payload = {"command": "check-run", "verdict": "ok" if not problems else "violations",
                 "violations": problems}
    v.lines.append("ok" if not problems else "violations:")
    v.lines.extend(f"  {p}" for p in problems)
    return v


def _cmd_empty(args) -> Verdict:
    a = _automaton(args.automaton)
    reduced = False
    if not a.is_positive_conjunctive:
        a = reduce_with_trace(a, state_cap=args.state_cap).automaton
        reduced = True
    if args.certified:
        result = emptiness(a, certified=True, budget=args.budget,
                           search_budget=args.search_budget)
    else:
        result = emptiness(a, max_height=args.max_height,
                           search_budget=args.search_budget)
    code = {"NONEMPTY": 0, "EMPTY": 1, "EMPTY_UP_TO": 2}[result.verdict]
    v = Verdict(code)
    v.payload = {"command": "empty", "verdict": result.verdict, "bound": result.bound,
                 "reduced": reduced}
    if result.verdict == "EMPTY_UP_TO":
        v.lines.append(f"EMPTY_UP_TO({result.bound})")
    else:
        v.lines.append(result.verdict)
    if result.witness is not None:
        v.lines.append(f"witness: {format_term(result.witness.term)}")
        v.payload["witness_term"] = format_term(result.witness.term)
        if not reduced:
            v.payload["witness"] = _run_payload(result.witness, a)
    return v


def _cmd_reduce(args) -> Verdict:
    a = _automaton(args.automaton)
    result = reduce_with_trace(
        a, state_cap=args.state_cap, rule_cap=args.rule_cap, dnf_cap=args.dnf_cap
    )
    v = Verdict(0)
    v.payload = {
        "command": "reduce",
        "trace": [str(entry) for entry in result.trace],
        "automaton": format_automaton(result.automaton),
    }
    for entry in result.trace:
        v.lines.append(f"# {entry}")
    _emit(args.output, format_automaton(result.automaton), v)
    return v


def _cmd_pump(args) -> Verdict:
    a = _automaton(args.automaton)
    run = parse_run(_read(args.run), a)
    problems = validate_run(a, run)
    if problems:
        raise InputError(f"input run is invalid: {problems[0]}")
    index = run_index(a, run)
    plan = find_pump(run, index, state_order=tuple(a.states))
    if plan is None:
        v = Verdict(1)
        v.lines.append("no pumping exists")
        v.payload = {"command": "pump", "verdict": "none"}
        return v
    pumped = apply_pump(run, plan, index=index, automaton=a)
    v = Verdict(0)
    v.lines.append(f"i={plan.i} j={plan.j}")
    v.lines.extend(
        f"I({format_position(p)}) = {format_position(q)}" for p, q in plan.pairs()
    )
    v.lines.append(f"pumped term: {format_term(pumped.term)}")
    v.lines.append(format_run(pumped, a).rstrip("\n"))
    v.payload = {
        "command": "pump",
        "verdict": "pumped",
        "i": plan.i,
        "j": plan.j,
        "injection": [[format_position(p), format_position(q)] for p, q in plan.pairs()],
        "pumped": _run_payload(pumped, a),
    }
    return v


def _cmd_stats(args) -> Verdict:
    a = _automaton(args.automaton)
    run = parse_run(_read(args.run), a)
    problems = validate_run(a, run)
    if problems:
        raise InputError(f"input run is invalid: {problems[0]}")
    index = run_index(a, run)
    layers = strata(run)
    table = stats(run, layers, index, tuple(a.states))
    v = Verdict(0)
    v.lines.append("state order: " + " ".join(a.states))

    def fmt_posns(posns) -> str:
        return "{" + ", ".join(format_position(p) for p in sorted(posns)) + "}"

    def fmt_multiset(ms) -> str:
        return "[" + ", ".join("<" + ",".join(map(str, t)) + ">" for t in ms) + "]"

    strata_payload = {}
    stats_payload = {}
    for i in range(layers.height, 0, -1):
        v.lines.append(
            f"i={i}  H={fmt_posns(layers.exact[i])}  "
            f"checked={fmt_posns(layers.checked[i])}  ring={fmt_posns(layers.ring[i])}"
        )
        strata_payload[str(i)] = {
            "H": [format_position(p) for p in sorted(layers.exact[i])],
            "checked": [format_position(p) for p in sorted(layers.checked[i])],
            "ring": [format_position(p) for p in sorted(layers.ring[i])],
        }
    for i in range(layers.height, 0, -1):
        v.lines.append(
            f"i={i}  r_H={fmt_multiset(table.exact[i])}  "
            f"r_checked={fmt_multiset(table.checked[i])}  r_ring={fmt_multiset(table.ring[i])}"
        )
        stats_payload[str(i)] = {
            "H": [list(t) for t in table.exact[i]],
            "checked": [list(t) for t in table.checked[i]],
            "ring": [list(t) for t in table.ring[i]],
        }
    v.payload = {
        "command": "stats",
        "state_order": list(a.states),
        "height": layers.height,
        "strata": strata_payload,
        "stats": stats_payload,
    }
    return v


def _cmd_union(args) -> Verdict:
    result = union(_automaton(args.left), _automaton(args.right))
    v = Verdict(0)
    v.payload = {"command": "union", "automaton": format_automaton(result)}
    _emit(args.output, format_automaton(result), v)
    return v


def _cmd_intersect(args) -> Verdict:
    result = intersect(_automaton(args.left), _automaton(args.right))
    v = Verdict(0)
    v.payload = {"command": "intersect", "automaton": format_automaton(result)}
    _emit(args.output, format_automaton(result), v)
    return v


def _cmd_curry(args) -> Verdict:
    t = _unranked_arg(args.term)
    curried = curry(t)
    v = Verdict(0)
    v.lines.append(format_term(curried))
    v.payload = {"command": "curry", "term": format_term(curried)}
    return v


def _cmd_hag2tag(args) -> Verdict:
    from .unranked import hag_to_tag

    h = parse_hag(_read(args.hag))
    result = hag_to_tag(h)
    v = Verdict(0)
    v.payload = {"command": "hag2tag", "automaton": format_automaton(result)}
    _emit(args.output, format_automaton(result), v)
    return v


def _cmd_emso_compile(args) -> Verdict:
    from .constraints import disjuncts, normalize, parse_constraint
    from .emso import check_variable_constraint

    base = _automaton(args.automaton)
    width = annotated_width(base.signature)
    annotated = AnnotatedTA(base, width)
    text = _read(args.constraint[1:]) if args.constraint.startswith("@") else args.constraint
    # compile_query takes one conjunct; a disjunctive constraint is split
    # here and the branches folded with the reduction pipeline's union
    formula = parse_constraint(text)
    parts = disjuncts(normalize(formula))
    for part in parts:
        check_variable_constraint(part, width)
    if len(parts) == 1:
        result = compile_query(annotated, parts[0])
    else:
        from .automata import union
        from .reduction import to_positive_conjunctive

        branches = [
            to_positive_conjunctive(compile_query(annotated, part), state_cap=args.state_cap)
            for part in parts
        ]
        result = branches[0]
        for other in branches[1:]:
            result = union(result, other)
    v = Verdict(0)
    v.payload = {"command": "emso-compile", "automaton": format_automaton(result)}
    _emit(args.output, format_automaton(result), v)
    return v


def _cmd_eqmod(args) -> Verdict:
    a = _automaton(args.theory)
    s = _term_arg(args.left)
    t = _term_arg(args.right)
    equal = eq_modulo(a.theory, s, t, budget=args.budget)
    v = Verdict(0 if equal else 1)
    v.lines.append("equal" if equal else "not equal")
    v.payload = {"command": "eqmod", "verdict": "equal" if equal else "not-equal"}
    return v


def _cmd_fixtures(args) -> Verdict:
    v = Verdict(0)
    paths = {name: str(path) for name, path in fixtures().items()}
    v.payload = {"command": "fixtures", "fixtures": paths}
    v.lines.extend(f"{name}: {path}" for name, path in sorted(paths.items()))
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabg",
        description="tree automata with brother and global constraints modulo flat theories",
    )
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("member", help="decide term membership")
    p.add_argument("automaton")
    p.add_argument("term")
    p.add_argument("--budget", type=int, default=10**6,
                   help="search node cap (default 10^6)")
    p.set_defaults(func=_cmd_member)

    p = sub.add_parser("check-run", help="validate a run file")
    p.add_argument("automaton")
    p.add_argument("run")
    p.set_defaults(func=_cmd_check_run)

    p = sub.add_parser("empty", help="decide emptiness")
    p.add_argument("automaton")
    p.add_argument("--max-height", type=int, default=None)
    p.add_argument("--certified", action="store_true")
    p.add_argument("--budget", type=int, default=10**6,
                   help="sequence-tree budget for the certified bound (default 10^6)")
    p.add_argument("--search-budget", type=int, default=None,
                   help="run-search node cap; unlimited by default")
    p.add_argument("--state-cap", type=int, default=10**5,
                   help="counting-state cap when reduction is needed (default 10^5)")
    p.set_defaults(func=_cmd_empty)

    p = sub.add_parser("reduce", help="reduce to a positive conjunctive automaton")
    p.add_argument("automaton")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--state-cap", type=int, default=10**5,
                   help="counting-state cap (default 10^5)")
    p.add_argument("--rule-cap", type=int, default=10**6,
                   help="counting-rule cap (default 10^6)")
    p.add_argument("--dnf-cap", type=int, default=None,
                   help="disjunct cap for normalization (default 4096)")
    p.set_defaults(func=_cmd_reduce)

    p = sub.add_parser("pump", help="find and apply a global pumping")
    p.add_argument("automaton")
    p.add_argument("run")
    p.set_defaults(func=_cmd_pump)

    p = sub.add_parser("stats", help="print strata and statistics tables")
    p.add_argument("automaton")
    p.add_argument("run")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("union", help="union of two positive conjunctive automata")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_union)

    p = sub.add_parser("intersect", help="product intersection")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_intersect)

    p = sub.add_parser("curry", help="curry an unranked term")
    p.add_argument("term")
    p.set_defaults(func=_cmd_curry)

    p = sub.add_parser("hag2tag", help="translate a hedge automaton")
    p.add_argument("hag")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_hag2tag)

    p = sub.add_parser("emso-compile", help="compile an annotated TA plus variable constraint")
    p.add_argument("automaton")
    p.add_argument("constraint", help="constraint text, or @file; disjunctions are split")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--state-cap", type=int, default=10**5,
                   help="counting-state cap when branches need reduction (default 10^5)")
    p.set_defaults(func=_cmd_emso_compile)

    p = sub.add_parser("eqmod", help="decide equality modulo the file's flat theory")
    p.add_argument("theory", help="automaton file carrying sig/vars/eq lines")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--budget", type=int, default=10**6,
                   help="congruence node cap (default 10^6)")
    p.set_defaults(func=_cmd_eqmod)

    p = sub.add_parser("fixtures", help="list bundled fixture files")
    p.set_defaults(func=_cmd_fixtures)
    return parser


def run_command(argv) -> Verdict:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BudgetError as exc:
        return Verdict(4, [f"budget error: {exc}"], {"command": args.command, "error": str(exc)})
    except InputError as exc:
        return Verdict(3, [f"input error: {exc}"], {"command": args.command, "error": str(exc)})
    except TabgError as exc:
        return Verdict(3, [f"error: {exc}"], {"command": args.command, "error": str(exc)})


def main(argv=None) -> None:
    verdict = run_command(sys.argv[1:] if argv is None else argv)
    as_json = "--json" in (sys.argv[1:] if argv is None else argv)
    output = verdict.render(as_json)
    if output:
        print(output)
    sys.exit(verdict.exit_code)


if __name__ == "__main__":
    main()
