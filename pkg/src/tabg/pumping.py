"""Emptiness via height-stratified parallel pumping.

For a run r and each height level i, three pairwise-parallel position
families are formed: H_i (subterm height exactly i), the checked family
(children of taller nodes with height strictly between 0 and i) and the ring
family (leaf children of taller nodes).  Per level, positions are grouped by
(=_E class, state) into multisets of state-count tuples.  Domination between
two levels' (H, checked) statistics under the multiset embedding order is
equivalent to the existence of a pump-injection; applying one replaces all
mapped subruns simultaneously and yields a strictly lower valid run.

Higman's lemma makes that order a WQO, and a Koenig-style tree enumeration
turns it into a computable bound B(a, n) on how tall a minimal accepting run
can be, which gives the certified emptiness mode.  The bound explodes even
for tiny (a, n), so the practical mode searches up to a caller-chosen height
and reports EMPTY_UP_TO instead of EMPTY.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .automata import Automaton, Run, run_index, validate_run
from .constraints import FALSE
from .errors import BudgetError, PlanError, ShapeError
from .terms import Position, Term, format_position, height
from .theory import CongruenceIndex

Multiset = tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class Strata:
    """H_i, checked and ring families for i in 1..height(r)."""

    height: int
    exact: dict[int, frozenset[Position]]
    checked: dict[int, frozenset[Position]]
    ring: dict[int, frozenset[Position]]

    def family_union(self, i: int) -> frozenset[Position]:
        return self.exact[i] | self.checked[i] | self.ring[i]


def strata(run: Run) -> Strata:
    heights = {p: height(run.subterm_at(p)) for p in run.positions()}
    h = heights[()]
    exact: dict[int, set[Position]] = {i: set() for i in range(1, h + 1)}
    checked: dict[int, set[Position]] = {i: set() for i in range(1, h + 1)}
    ring: dict[int, set[Position]] = {i: set() for i in range(1, h + 1)}
    for p, hp in heights.items():
        if 0 < hp <= h:
            exact[hp].add(p)
        if p:
            parent = p[:-1]
            hparent = heights[parent]
            for i in range(1, h + 1):
                if hparent > i:
                    if 0 < hp < i:
                        checked[i].add(p)
                    elif hp == 0:
                        ring[i].add(p)
    return Strata(
        h,
        {i: frozenset(exact[i]) for i in exact},
        {i: frozenset(checked[i]) for i in checked},
        {i: frozenset(ring[i]) for i in ring},
    )


def _class_groups(run: Run, index: CongruenceIndex, posns) -> dict[int, dict[str, list[Position]]]:
    groups: dict[int, dict[str, list[Position]]] = {}
    for p in sorted(posns):
        cls = index.class_id(run.subterm_at(p))
        groups.setdefault(cls, {}).setdefault(run.state_at(p), []).append(p)
    return groups


def _group_tuple(group: dict[str, list[Position]], state_order) -> tuple[int, ...]:
    return tuple(len(group.get(q, ())) for q in state_order)


def _family_multiset(run: Run, index, posns, state_order) -> Multiset:
    groups = _class_groups(run, index, posns)
    return tuple(sorted(_group_tuple(g, state_order) for g in groups.values()))


@dataclass(frozen=True)
class StrataStats:
    state_order: tuple[str, ...]
    exact: dict[int, Multiset]
    checked: dict[int, Multiset]
    ring: dict[int, Multiset]


def stats(run: Run, layers: Strata, index: CongruenceIndex, state_order) -> StrataStats:
    order = tuple(state_order)
    return StrataStats(
        order,
        {i: _family_multiset(run, index, layers.exact[i], order) for i in layers.exact},
        {i: _family_multiset(run, index, layers.checked[i], order) for i in layers.checked},
        {i: _family_multiset(run, index, layers.ring[i], order) for i in layers.ring},
    )


# -- the multiset embedding order ----------------------------------------------


def _dominates(x: tuple[int, ...], y: tuple[int, ...]) -> bool:
    return all(a <= b for a, b in zip(x, y))


def _multiset_match(src, dst) -> list[int] | None:
    """Injection src[i] -> dst[match[i]] with coordinatewise domination."""
    adjacency = [[j for j, d in enumerate(dst) if _dominates(s, d)] for s in src]
    match_of_dst: dict[int, int] = {}

    def augment(i: int, seen: set[int]) -> bool:
        for j in adjacency[i]:
            if j in seen:
                continue
            seen.add(j)
            if j not in match_of_dst or augment(match_of_dst[j], seen):
                match_of_dst[j] = i
                return True
        return False

    for i in range(len(src)):
        if not augment(i, set()):
            return None
    out = [0] * len(src)
    for j, i in match_of_dst.items():
        out[i] = j
    return out


def multiset_leq(src: Multiset, dst: Multiset) -> bool:
    return _multiset_match(list(src), list(dst)) is not None


def wqo_leq(x: tuple[Multiset, Multiset], y: tuple[Multiset, Multiset]) -> bool:
    """Pairwise multiset embedding: the well quasi-order driving pumping."""
    return multiset_leq(x[0], y[0]) and multiset_leq(x[1], y[1])


# -- pump plans -----------------------------------------------------------------


@dataclass
class PumpPlan:
    i: int
    j: int
    injection: dict[Position, Position]

    def pairs(self):
        return sorted(self.injection.items())

    def __str__(self) -> str:
        pairs = ", ".join(
            f"I({format_position(a)})={format_position(b)}" for a, b in self.pairs()
        )
        return f"pump {self.i}->{self.j}: {pairs}"


def _family_injection(run, index, src_positions, dst_positions, state_order):
    """Class-respecting position injection src -> dst, or None."""
    src_groups = _class_groups(run, index, src_positions)
    dst_groups = _class_groups(run, index, dst_positions)
    src_keys = sorted(src_groups, key=lambda c: (_group_tuple(src_groups[c], state_order), c))
    dst_keys = sorted(dst_groups, key=lambda c: (_group_tuple(dst_groups[c], state_order), c))
    src_tuples = [_group_tuple(src_groups[c], state_order) for c in src_keys]
    dst_tuples = [_group_tuple(dst_groups[c], state_order) for c in dst_keys]
    match = _multiset_match(src_tuples, dst_tuples)
    if match is None:
        return None
    injection: dict[Position, Position] = {}
    for si, di in enumerate(match):
        sgroup = src_groups[src_keys[si]]
        dgroup = dst_groups[dst_keys[di]]
        for state, sposns in sgroup.items():
            targets = sorted(dgroup[state])
            for k, p in enumerate(sorted(sposns)):
                injection[p] = targets[k]
    return injection


def find_pump(run: Run, index: CongruenceIndex, state_order=None) -> PumpPlan | None:
    """First (i, j) pair, scanning i then j downward, whose statistics embed.

    The j-descending scan is what reproduces the published menu example
    (i=4, j=3); j-ascending would legally return (4, 2) instead.
    """
    if state_order is None:
        state_order = tuple(sorted({run.state_at(p) for p in run.positions()}))
    layers = strata(run)
    st = stats(run, layers, index, state_order)
    for i in range(layers.height, 1, -1):
        for j in range(i - 1, 0, -1):
            if not wqo_leq(
                (st.exact[i], st.checked[i]), (st.exact[j], st.checked[j])
            ):
                continue
            inj_exact = _family_injection(run, index, layers.exact[i], layers.exact[j], state_order)
            inj_checked = _family_injection(
                run, index, layers.checked[i], layers.checked[j], state_order
            )
            if inj_exact is None or inj_checked is None:
                continue
            injection = dict(inj_exact)
            injection.update(inj_checked)
            for p in layers.ring[i]:
                injection[p] = p
            return PumpPlan(i, j, injection)
    return None


def check_plan(run: Run, plan: PumpPlan, index: CongruenceIndex | None = None) -> None:
    """Raise PlanError unless the plan satisfies conditions C1-C3 on run."""
    layers = strata(run)
    if not (1 <= plan.j < plan.i <= layers.height):
        raise PlanError(f"bad indexes {plan.i}, {plan.j} for height {layers.height}")
    domain = layers.family_union(plan.i)
    if set(plan.injection) != set(domain):
        raise PlanError("injection domain is not the level-i family union")
    targets = list(plan.injection.values())
    if len(set(targets)) != len(targets):
        raise PlanError("injection is not injective")
    for p, q in plan.injection.items():
        if p in layers.exact[plan.i] and q not in layers.exact[plan.j]:
            raise PlanError(f"C1: {format_position(p)} must map into H_{plan.j}")
        if p in layers.checked[plan.i] and q not in layers.checked[plan.j]:
            raise PlanError(f"C1: {format_position(p)} must map into the checked family")
        if p in layers.ring[plan.i] and q != p:
            raise PlanError(f"C1: {format_position(p)} must map to itself")
        if run.state_at(p) != run.state_at(q):
            raise PlanError(f"C2: state changes at {format_position(p)}")
    if index is not None:
        posns = sorted(plan.injection)
        for p1, p2 in itertools.combinations(posns, 2):
            src_eq = index.equal(run.subterm_at(p1), run.subterm_at(p2))
            dst_eq = index.equal(
                run.subterm_at(plan.injection[p1]), run.subterm_at(plan.injection[p2])
            )
            if src_eq != dst_eq:
                raise PlanError(
                    f"C3: equality pattern broken at {format_position(p1)},{format_position(p2)}"
                )


def apply_pump(
    run: Run,
    plan: PumpPlan,
    index: CongruenceIndex | None = None,
    automaton: Automaton | None = None,
) -> Run:
    """Simultaneous replacement r[r|_I(p1)]_p1 ... [r|_I(pn)]_pn."""
    check_plan(run, plan, index)
    out = run
    for p, q in plan.pairs():
        if p != q:
            out = out.replace_at(p, run.subrun(q))
    if automaton is not None:
        problems = validate_run(automaton, out)
        if problems:
            raise PlanError(f"pumped run is invalid: {problems[:3]}")
    return out


# -- the computable bound B(a, n) ----------------------------------------------


def _all_tuples_of_weight(weight: int, n: int) -> list[tuple[int, ...]]:
    if weight == 0:
        return []
    out = set()
    for combo in itertools.product(range(weight + 1), repeat=n):
        if sum(combo) == weight:
            out.add(combo)
    return sorted(out)


def _multisets_of_weight(weight: int, n: int, floor=None):
    """Multisets of nonzero n-tuples with total coordinate sum == weight."""
    if weight == 0:
        yield ()
        return
    for w in range(1, weight + 1):
        for item in _all_tuples_of_weight(w, n):
            if floor is not None and item < floor:
                continue
            for rest in _multisets_of_weight(weight - w, n, floor=item):
                yield (item,) + rest


def _pairs_up_to(weight: int, n: int):
    for wt in range(weight + 1):
        for t_part in _multisets_of_weight(wt, n):
            for wc in range(weight - wt + 1):
                for c_part in _multisets_of_weight(wc, n):
                    yield (t_part, c_part)


def compute_bound(a: int, n: int, budget: int) -> int:
    """Longest sequence of statistics pairs satisfying the four conditions.

    Condition (1): no all-zero tuple; (2) the first pair has weights (1, 0);
    (3) a * sum(T_i) + sum(C_i) >= sum(T_{i+1}) + sum(C_{i+1}); (4) no earlier
    element embeds into a later one.  Any accepting run strictly taller than
    the result admits a global pumping.
    """
    if a < 1 or n < 1:
        raise ShapeError("compute_bound requires a, n >= 1")
    visited = 0

    def weight(ms: Multiset) -> int:
        return sum(sum(t) for t in ms)

    def spend() -> None:
        nonlocal visited
        visited += 1
        if visited > budget:
            raise BudgetError(f"bound enumeration exceeded {budget} sequence nodes")

    def extend(seq: list[tuple[Multiset, Multiset]]) -> int:
        spend()
        last = seq[-1]
        allowance = a * weight(last[0]) + weight(last[1])
        best = len(seq)
        for pair in _pairs_up_to(allowance, n):
            spend()  # candidate enumeration counts too: allowances can explode
            if any(wqo_leq(prev, pair) for prev in seq):
                continue
            best = max(best, extend(seq + [pair]))
        return best

    if budget <= 0:
        raise BudgetError("bound enumeration exceeded 0 sequence nodes")
    best = 0
    for start_tuple in _all_tuples_of_weight(1, n):
        best = max(best, extend([((start_tuple,), ())]))
    return best


# -- emptiness ------------------------------------------------------------------


@dataclass(frozen=True)
class EmptinessResult:
    verdict: str  # EMPTY | NONEMPTY | EMPTY_UP_TO
    witness: Run | None = None
    bound: int | None = None

    @property
    def nonempty(self) -> bool:
        return self.verdict == "NONEMPTY"


def _search_accepting_run(
    automaton: Automaton, max_height: int, budget: int | None = None
) -> Run | None:
    """Complete search for an accepting run of height <= max_height.

    Term skeletons are enumerated by exact height; each candidate goes
    through the membership search, whose bottom-up feasibility pass prunes
    far more than goal-driven run enumeration would.  The first accepted
    term (at the lowest height) yields the witness.
    """
    from .automata import member, reachable_states

    if automaton.global_constraint == FALSE:
        return None
    if not (set(automaton.final) & reachable_states(automaton)):
        return None
    member_budget = budget if budget is not None else 10**9
    usable_symbols = _usable_symbols(automaton)
    spent = 0
    below: list[Term] = []
    exact: list[Term] = [Term(name) for name, arity in usable_symbols if arity == 0]
    for h in range(max_height + 1):
        if h > 0:
            if not exact and h > 1:
                break  # no taller term exists
            nxt = []
            pool = below + exact
            import itertools

            exact_set = set(exact)
            for name, arity in usable_symbols:
                if arity == 0:
                    continue
                for combo in itertools.product(pool, repeat=arity):
                    if any(child in exact_set for child in combo):
                        nxt.append(Term(name, combo))
            below = pool
            exact = nxt
        for term in exact:
            spent += 1
            if budget is not None and spent > budget:
                raise BudgetError(f"emptiness search exceeded {budget} candidate terms")
            accepted, witness = member(automaton, term, budget=member_budget)
            if accepted:
                return witness
    return None


def _usable_symbols(automaton: Automaton) -> list[tuple[str, int]]:
    """Symbols that appear in rules over ta-reachable states only."""
    from .automata import reachable_states

    reached = reachable_states(automaton)
    usable = {
        (r.symbol, len(r.lhs))
        for r in automaton.rules
        if r.rhs in reached and all(q in reached for q in r.lhs)
    }
    return sorted(usable)


def minimize_witness(automaton: Automaton, run: Run) -> Run:
    """Pump until no level pair embeds; height strictly drops each step."""
    order = tuple(automaton.states)
    while True:
        index = run_index(automaton, run)
        plan = find_pump(run, index, state_order=order)
        if plan is None:
            return run
        run = apply_pump(run, plan, index=index, automaton=automaton)


def emptiness(
    automaton: Automaton,
    max_height: int | None = None,
    certified: bool = False,
    budget: int = 10**5,
    search_budget: int | None = None,
) -> EmptinessResult:
    """Bounded mode (max_height) or certified mode (bound from B(a, n))."""
    if not automaton.is_positive_conjunctive:
        raise ShapeError(
            "emptiness requires a positive conjunctive automaton; reduce first"
        )
    from .automata import reachable_states

    if not (set(automaton.final) & reachable_states(automaton)):
        return EmptinessResult("EMPTY")  # no run ends final: definitive either mode
    if certified:
        arity = automaton.signature.max_arity
        if arity == 0:
            bound = 0
        else:
            bound = compute_bound(arity, len(automaton.states), budget)
        witness = _search_accepting_run(automaton, bound, budget=search_budget)
        if witness is None:
            return EmptinessResult("EMPTY", bound=bound)
        return EmptinessResult("NONEMPTY", minimize_witness(automaton, witness), bound)
    if max_height is None:
        raise ShapeError("bounded emptiness needs max_height")
    witness = _search_accepting_run(automaton, max_height, budget=search_budget)
    if witness is None:
        return EmptinessResult("EMPTY_UP_TO", bound=max_height)
    return EmptinessResult("NONEMPTY", minimize_witness(automaton, witness), max_height)
