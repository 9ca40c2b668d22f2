import random

import pytest

from tabg.automata import Automaton, member, validate_run
from tabg.errors import BudgetError, PlanError, ShapeError
from tabg.fixtures import load_automaton, menu_automaton, menu_run
from tabg.pumping import (
    apply_pump,
    compute_bound,
    emptiness,
    find_pump,
    multiset_leq,
    run_index,
    stats,
    strata,
    wqo_leq,
)
from tabg.constraints import TRUE, parse_constraint
from tabg.terms import format_position, format_term, parse_term
from tabg.theory import class_index

from helpers import (
    bound_oracle,
    brute_pump_exists,
    language_upto,
    rand_tab,
    rand_tabg,
    rand_valid_run,
)

MENU_ORDER = ("q_d", "q_N", "q_id", "q_t", "q_L", "q_M")


def menu_setup():
    a = menu_automaton()
    run = menu_run()
    return a, run, run_index(a, run)


def positions(texts):
    from tabg.terms import parse_position

    return frozenset(parse_position(t) for t in texts)


def test_strata_menu_matches_figure():
    _, run, _ = menu_setup()
    layers = strata(run)
    assert layers.height == 5
    assert layers.exact[5] == positions(["@"])
    assert layers.checked[5] == frozenset()
    assert layers.ring[5] == frozenset()
    assert layers.exact[4] == positions(["3"])
    assert layers.checked[4] == positions(["2"])
    assert layers.ring[4] == positions(["1"])
    assert layers.exact[3] == positions(["3.3"])
    assert layers.checked[3] == positions(["2", "3.2"])
    assert layers.ring[3] == positions(["1", "3.1"])
    assert layers.exact[2] == positions(["3.3.3"])
    assert layers.checked[2] == positions(["2", "3.2", "3.3.2"])
    assert layers.ring[2] == positions(["1", "3.1", "3.3.1"])
    assert layers.exact[1] == positions(["2", "3.2", "3.3.2", "3.3.3.2"])
    assert layers.checked[1] == frozenset()
    assert layers.ring[1] == positions(["1", "3.1", "3.3.1", "3.3.3.1"])


def test_strata_families_parallel_and_covering():
    from tabg.terms import is_parallel, is_prefix

    rng = random.Random(61)
    checked = 0
    while checked < 60:
        a = rand_tab(rng)
        run = rand_valid_run(rng, a)
        if run is None or run.height() == 0:
            continue
        layers = strata(run)
        for i in range(1, layers.height + 1):
            family = sorted(layers.family_union(i))
            for x in range(len(family)):
                for y in range(x + 1, len(family)):
                    assert is_parallel(family[x], family[y])
            for p in run.positions():
                assert any(is_prefix(p, q) or is_prefix(q, p) for q in family)
        checked += 1


def test_strata_degenerate_leaf_run():
    a = load_automaton("FTT_TAB")
    _, run = member(a, parse_term("a"), require_final=False)
    layers = strata(run)
    assert layers.height == 0
    assert layers.exact == {}


def test_stats_menu_matches_figure():
    a, run, index = menu_setup()
    table = stats(run, strata(run), index, MENU_ORDER)
    assert table.exact[5] == ((0, 0, 0, 0, 0, 1),)
    assert table.checked[5] == ()
    assert table.ring[5] == ()
    assert table.exact[4] == ((0, 0, 0, 0, 1, 0),)
    assert table.checked[4] == ((0, 0, 0, 1, 0, 0),)
    assert table.ring[4] == ((0, 0, 1, 0, 0, 0),)
    assert table.exact[3] == ((0, 0, 0, 0, 1, 0),)
    assert table.checked[3] == ((0, 0, 0, 2, 0, 0),)
    assert table.ring[3] == ((0, 0, 1, 0, 0, 0),) * 2
    assert table.exact[2] == ((0, 0, 0, 0, 1, 0),)
    assert table.checked[2] == ((0, 0, 0, 3, 0, 0),)
    assert table.ring[2] == ((0, 0, 1, 0, 0, 0),) * 3
    assert table.exact[1] == ((0, 0, 0, 4, 0, 0),)
    assert table.checked[1] == ()
    assert table.ring[1] == ((0, 0, 1, 0, 0, 0),) * 4


def test_stats_sums_match_family_sizes():
    rng = random.Random(62)
    checked = 0
    while checked < 60:
        a = rand_tab(rng)
        run = rand_valid_run(rng, a)
        if run is None or run.height() == 0:
            continue
        index = run_index(a, run)
        layers = strata(run)
        table = stats(run, layers, index, tuple(a.states))
        for i in range(1, layers.height + 1):
            assert sum(sum(t) for t in table.exact[i]) == len(layers.exact[i])
            assert sum(sum(t) for t in table.checked[i]) == len(layers.checked[i])
            for family in (table.exact[i], table.checked[i], table.ring[i]):
                assert all(any(v > 0 for v in t) for t in family)
        checked += 1


def test_wqo_basic():
    assert wqo_leq((((1, 0),), ()), (((2, 0),), ()))
    assert not multiset_leq(((1, 1),), ((2, 0),))
    assert multiset_leq((), ((1,),))
    assert not multiset_leq(((1,), (1,)), ((2,),))


def test_wqo_menu_example():
    a, run, index = menu_setup()
    table = stats(run, strata(run), index, MENU_ORDER)
    assert wqo_leq(
        (table.exact[4], table.checked[4]), (table.exact[3], table.checked[3])
    )


def test_wqo_reflexive_transitive():
    rng = random.Random(63)
    for _ in range(200):
        def rand_pair():
            def ms():
                return tuple(
                    tuple(rng.randint(0, 2) for _ in range(2))
                    for _ in range(rng.randint(0, 3))
                )
            return (ms(), ms())

        x, y, z = rand_pair(), rand_pair(), rand_pair()
        assert wqo_leq(x, x)
        if wqo_leq(x, y) and wqo_leq(y, z):
            assert wqo_leq(x, z)


def test_wqo_singleton_coincides_with_multiset_order():
    # on 1-tuples the order is just multiset embedding over naturals
    assert multiset_leq(((1,), (2,)), ((2,), (3,)))
    assert not multiset_leq(((3,),), ((2,), (2,)))


def test_find_pump_menu_plan():
    a, run, index = menu_setup()
    plan = find_pump(run, index, state_order=MENU_ORDER)
    assert plan is not None
    assert (plan.i, plan.j) == (4, 3)
    mapping = {format_position(p): format_position(q) for p, q in plan.injection.items()}
    assert mapping == {"1": "1", "2": "2", "3": "3.3"}


def test_find_pump_none_on_minimal_run():
    a = load_automaton("FTT_TAB")
    accepted, run = member(a, parse_term("f(a,a)"))
    assert accepted
    index = run_index(a, run)
    assert find_pump(run, index) is None


def test_find_pump_agrees_with_brute_force():
    rng = random.Random(64)
    checked = 0
    while checked < 150:
        a = rand_tab(rng)
        run = rand_valid_run(rng, a)
        if run is None or len(run.positions()) > 12 or run.height() < 2:
            continue
        index = run_index(a, run)
        plan = find_pump(run, index, state_order=tuple(a.states))
        assert (plan is not None) == brute_pump_exists(run, index)
        checked += 1


def test_apply_pump_menu():
    a, run, index = menu_setup()
    plan = find_pump(run, index, state_order=MENU_ORDER)
    pumped = apply_pump(run, plan, index=index, automaton=a)
    assert format_term(pumped.term) == "M(1,N(2,0),L(3,N(2,0),L0(4,N(2,0))))"
    assert pumped.height() == 4 < 5
    assert pumped.root_state == run.root_state
    assert validate_run(a, pumped) == []


def test_apply_pump_rejects_bad_plan():
    a, run, index = menu_setup()
    plan = find_pump(run, index, state_order=MENU_ORDER)
    plan.injection[(1,)] = (2,)  # breaks injectivity and identity on the ring
    with pytest.raises(PlanError):
        apply_pump(run, plan, index=index)


def test_apply_pump_random_properties():
    rng = random.Random(65)
    pumped_count = 0
    tries = 0
    while pumped_count < 120 and tries < 4000:
        tries += 1
        a = rand_tab(rng)
        run = rand_valid_run(rng, a)
        if run is None or run.height() < 2:
            continue
        index = run_index(a, run)
        plan = find_pump(run, index, state_order=tuple(a.states))
        if plan is None:
            continue
        pumped = apply_pump(run, plan, index=index)
        assert pumped.height() < run.height()
        assert pumped.root_state == run.root_state
        # local constraints must still hold (tab-run validity)
        local = Automaton(a.states, a.signature, a.final, a.rules, a.theory, a.global_constraint)
        assert validate_run(local, pumped) == []
        pumped_count += 1
    assert pumped_count >= 120


def test_pump_preserves_equalities_on_prefixes():
    rng = random.Random(66)
    checked = 0
    while checked < 60:
        a = rand_tab(rng)
        run = rand_valid_run(rng, a)
        if run is None or run.height() < 2:
            continue
        index = run_index(a, run)
        plan = find_pump(run, index, state_order=tuple(a.states))
        if plan is None:
            continue
        pumped = apply_pump(run, plan, index=index)
        new_index = run_index(a, pumped)
        prefixes = sorted(
            {p[:k] for p in plan.injection for k in range(len(p) + 1)}
        )
        for x in range(len(prefixes)):
            for y in range(x + 1, len(prefixes)):
                p1, p2 = prefixes[x], prefixes[y]
                before = index.equal(run.subterm_at(p1), run.subterm_at(p2))
                after = new_index.equal(pumped.subterm_at(p1), pumped.subterm_at(p2))
                assert before == after
        checked += 1


def test_stratum_balance_inequality():
    rng = random.Random(67)
    checked = 0
    while checked < 100:
        a = rand_tab(rng)
        run = rand_valid_run(rng, a)
        if run is None or run.height() < 2:
            continue
        arity = a.signature.max_arity
        layers = strata(run)
        for i in range(2, layers.height + 1):
            assert arity * len(layers.exact[i]) + len(layers.checked[i]) >= len(
                layers.exact[i - 1]
            ) + len(layers.checked[i - 1])
        assert len(layers.exact[layers.height]) == 1
        assert len(layers.checked[layers.height]) == 0
        checked += 1


def test_compute_bound_small_values():
    assert compute_bound(1, 1, 10**5) == bound_oracle(1, 1) == 3
    assert compute_bound(1, 2, 10**6) == bound_oracle(1, 2)
    assert compute_bound(2, 1, 10**6) == bound_oracle(2, 1)


def test_compute_bound_monotone_spot_check():
    assert compute_bound(1, 1, 10**5) <= compute_bound(2, 1, 10**6)


def test_compute_bound_budget():
    with pytest.raises(BudgetError):
        compute_bound(1, 1, 0)
    with pytest.raises(BudgetError):
        compute_bound(3, 3, 100)


def test_pump_completeness_above_bound():
    # any (1,1)-automaton run taller than B(1,1)=3 admits a pumping
    rng = random.Random(68)
    from tabg.terms import sig
    from tabg.automata import Rule
    from tabg.theory import FlatTheory

    signature = sig(("a", 0), ("s", 1))
    a = Automaton(
        ("q",), signature, frozenset({"q"}),
        (Rule("a", (), "q"), Rule("s", ("q",), "q")),
        FlatTheory(signature), TRUE,
    )
    bound = compute_bound(1, 1, 10**5)
    for extra in (1, 2, 3):
        term = parse_term("s(" * (bound + extra) + "a" + ")" * (bound + extra))
        accepted, run = member(a, term)
        assert accepted
        index = run_index(a, run)
        assert find_pump(run, index, state_order=a.states) is not None


def test_emptiness_requires_positive_conjunctive():
    a = load_automaton("FTT_TAG")
    negated = Automaton(
        a.states, a.signature, a.final, a.rules, a.theory,
        parse_constraint("!(q1 ~ q1)"),
    )
    with pytest.raises(ShapeError):
        emptiness(negated, max_height=2)


def test_emptiness_examples():
    ftt = load_automaton("FTT_TAG")
    res = emptiness(ftt, max_height=3)
    assert res.verdict == "NONEMPTY"
    assert format_term(res.witness.term) == "f(a,a)"
    assert validate_run(ftt, res.witness) == []

    menu = menu_automaton()
    res = emptiness(menu, max_height=4)
    assert res.verdict == "NONEMPTY"
    assert res.witness.height() <= 2  # a single-dish menu suffices

    # no final state at all: definitive EMPTY in both modes, no bound needed
    dead = Automaton(ftt.states, ftt.signature, frozenset(), ftt.rules, ftt.theory,
                     ftt.global_constraint)
    assert emptiness(dead, max_height=4).verdict == "EMPTY"
    assert emptiness(dead, certified=True, budget=10**6).verdict == "EMPTY"
    # reachable finals but a (2,3)-sized bound: the certified mode is honest
    # about the blowup and raises its budget error
    with pytest.raises(BudgetError):
        emptiness(ftt, certified=True, budget=10**4)


def test_emptiness_certified_unary():
    from tabg.terms import sig
    from tabg.automata import Rule
    from tabg.theory import FlatTheory
    from tabg.constraints import parse_constraint

    signature = sig(("a", 0), ("s", 1))
    reach = Automaton(
        ("q",), signature, frozenset({"q"}),
        (Rule("a", (), "q"), Rule("s", ("q",), "q")),
        FlatTheory(signature), parse_constraint("q !~ q"),
    )
    res = emptiness(reach, certified=True, budget=10**5)
    assert res.verdict == "NONEMPTY" and res.bound == 3

    impossible = Automaton(
        ("q",), signature, frozenset({"q"}),
        (Rule("s", ("q",), "q"),),  # no leaf rule: nothing is accepted
        FlatTheory(signature), parse_constraint("q ~ q"),
    )
    res = emptiness(impossible, certified=True, budget=10**5)
    assert res.verdict == "EMPTY"


def test_emptiness_bounded_agrees_with_enumeration():
    rng = random.Random(69)
    checked = 0
    while checked < 40:
        a = rand_tab(rng, brother_prob=0.3)
        pc = Automaton(
            a.states, a.signature, a.final, a.rules, a.theory,
            rand_pc_constraint(rng, a.states),
        )
        res = emptiness(pc, max_height=3)
        want = bool(language_upto(pc, 3))
        assert (res.verdict == "NONEMPTY") == want
        if res.witness is not None:
            assert validate_run(pc, res.witness) == []
        checked += 1


def rand_pc_constraint(rng, states):
    from tabg.constraints import And, EqAtom, NeqAtom, TRUE

    lits = []
    for _ in range(rng.randint(0, 2)):
        q1, q2 = rng.choice(states), rng.choice(states)
        lits.append(EqAtom(q1, q2) if rng.random() < 0.5 else NeqAtom(q1, q2))
    if not lits:
        return TRUE
    return lits[0] if len(lits) == 1 else And(tuple(lits))


def test_minimize_witness_from_menu_run():
    from tabg.pumping import minimize_witness

    a = menu_automaton()
    run = menu_run()
    minimal = minimize_witness(a, run)
    assert validate_run(a, minimal) == []
    assert minimal.height() < run.height()
    assert minimal.root_state == "q_M"
    index = run_index(a, minimal)
    assert find_pump(minimal, index, state_order=tuple(a.states)) is None


def test_multiset_leq_matches_permutation_search():
    import itertools as it

    rng = random.Random(610)

    def brute_leq(src, dst):
        if len(src) > len(dst):
            return False
        for choice in it.permutations(range(len(dst)), len(src)):
            if all(
                all(a <= b for a, b in zip(src[i], dst[j]))
                for i, j in enumerate(choice)
            ):
                return True
        return False

    for _ in range(300):
        n = rng.randint(1, 3)
        src = tuple(
            tuple(rng.randint(0, 2) for _ in range(n)) for _ in range(rng.randint(0, 4))
        )
        dst = tuple(
            tuple(rng.randint(0, 2) for _ in range(n)) for _ in range(rng.randint(0, 4))
        )
        assert multiset_leq(src, dst) == brute_leq(src, dst), (src, dst)
