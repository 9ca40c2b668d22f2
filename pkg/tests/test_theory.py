import random

import pytest

from tabg.errors import BudgetError, ParseError
from tabg.terms import Term, height, parse_term, sig
from tabg.theory import (
    FlatTheory,
    class_index,
    eq_modulo,
    flat_equation,
    oracle_eq_modulo,
)

from helpers import rand_signature, rand_term, rand_theory

SIG = sig(("a", 0), ("b", 0), ("c", 0), ("f", 2), ("g", 2), ("h", 1))


def theory(*eqs, variables=("x", "y")):
    parsed = []
    for left, right in eqs:
        eq = flat_equation(parse_term(left), parse_term(right), set(variables), SIG)
        if eq is not None:
            parsed.append(eq)
    return FlatTheory(SIG, tuple(parsed))


def t(text):
    return parse_term(text)


def test_reflexivity_empty_theory():
    empty = theory()
    term = t("f(a,b)")
    assert eq_modulo(empty, term, term)
    assert not eq_modulo(empty, t("a"), t("b"))


def test_constant_equation():
    th = theory(("a", "b"))
    assert eq_modulo(th, t("f(a,b)"), t("f(b,a)"))
    assert not eq_modulo(th, t("f(a,b)"), t("f(c,a)"))


def test_variable_swap_equation():
    th = theory(("f(x,y)", "g(y,x)"))
    assert eq_modulo(th, t("f(a,b)"), t("g(b,a)"))
    assert not eq_modulo(th, t("f(a,b)"), t("g(a,b)"))  # needs a =E b


def test_variable_swap_with_constant_merge():
    th = theory(("f(x,y)", "g(y,x)"), ("a", "b"))
    assert eq_modulo(th, t("f(a,b)"), t("g(a,b)"))


def test_transitive_constants():
    th = theory(("a", "b"), ("b", "c"))
    assert eq_modulo(th, t("a"), t("c"))


def test_height_mismatch_fast_path():
    th = theory(("a", "b"))
    assert not eq_modulo(th, t("a"), t("f(a,a)"))


def test_congruence():
    th = theory(("a", "b"))
    assert eq_modulo(th, t("f(a,f(b,a))"), t("f(b,f(a,b))"))


def test_nonlinear_side():
    th = theory(("f(x,x)", "h(x)"))
    assert eq_modulo(th, t("f(a,a)"), t("h(a)"))
    assert not eq_modulo(th, t("f(a,b)"), t("h(a)"))
    th2 = theory(("f(x,x)", "h(x)"), ("a", "b"))
    assert eq_modulo(th2, t("f(a,b)"), t("h(b)"))


def test_lazy_intermediate_terms():
    # chain must pass through g(a), absent from both sides
    local = sig(("a", 0), ("f", 1), ("g", 1), ("h", 1))
    eqs = tuple(
        e
        for e in (
            flat_equation(t("f(x)"), t("g(x)"), {"x"}, local),
            flat_equation(t("g(x)"), t("h(x)"), {"x"}, local),
        )
        if e
    )
    th = FlatTheory(local, eqs)
    assert eq_modulo(th, t("f(a)"), t("h(a)"))


def test_bare_variable_equations():
    assert flat_equation(t("x"), t("x"), {"x"}, SIG) is None
    with pytest.raises(ParseError):
        flat_equation(t("x"), t("y"), {"x", "y"}, SIG)


def test_mismatched_variable_sets_rejected():
    with pytest.raises(ParseError):
        flat_equation(t("f(x,y)"), t("f(x,x)"), {"x", "y"}, SIG)


def test_unequal_heights_rejected():
    with pytest.raises(ParseError):
        flat_equation(t("a"), t("h(a)"), set(), SIG)


def test_class_index_counts():
    empty = theory()
    ix = class_index(empty, [t("f(a,a)")])
    assert ix.class_id(t("a")) != ix.class_id(t("f(a,a)"))
    th = theory(("a", "b"))
    ix = class_index(th, [t("f(a,b)")])
    assert ix.class_id(t("a")) == ix.class_id(t("b"))


def test_class_index_menu_subterms():
    from tabg.fixtures import menu_automaton, menu_term

    menu = menu_automaton()
    ix = class_index(menu.theory, [menu_term()])
    n20 = parse_term("N(2,0)")
    ids = {ix.class_id(n20)}
    assert len(ids) == 1  # the four identical cooking-time subterms share a class


def test_budget_error():
    with pytest.raises(BudgetError):
        class_index(theory(("a", "b")), [t("f(a,b)")], budget=2)


def test_oracle_basics():
    empty = theory()
    assert oracle_eq_modulo(empty, t("a"), t("a"), 10) is True
    th = theory(("a", "b"), ("b", "c"))
    assert oracle_eq_modulo(th, t("a"), t("c"), 10) is True
    assert oracle_eq_modulo(th, t("a"), t("f(a,a)"), 10) is False
    tiny = oracle_eq_modulo(th, t("f(a,f(a,a))"), t("f(c,f(c,c))"), 2)
    assert tiny in (True, None)


def test_agreement_with_oracle():
    rng = random.Random(123)
    checked = skipped = 0
    while checked < 400:
        signature = rand_signature(rng, max_symbols=3)
        th = rand_theory(rng, signature)
        s = rand_term(rng, signature, 3)
        u = rand_term(rng, signature, 3)
        verdict = oracle_eq_modulo(th, s, u, budget=400)
        if verdict is None:
            skipped += 1
            continue
        assert eq_modulo(th, s, u) == verdict, (th, s, u)
        checked += 1
    assert skipped < checked


def test_equivalence_relation_properties():
    rng = random.Random(124)
    for _ in range(60):
        signature = rand_signature(rng)
        th = rand_theory(rng, signature)
        xs = [rand_term(rng, signature, 2) for _ in range(3)]
        for x in xs:
            assert eq_modulo(th, x, x)
        for x in xs:
            for y in xs:
                assert eq_modulo(th, x, y) == eq_modulo(th, y, x)
        x, y, z = xs
        if eq_modulo(th, x, y) and eq_modulo(th, y, z):
            assert eq_modulo(th, x, z)


def test_height_preservation_property():
    rng = random.Random(125)
    for _ in range(100):
        signature = rand_signature(rng)
        th = rand_theory(rng, signature)
        s = rand_term(rng, signature, 3)
        u = rand_term(rng, signature, 3)
        if eq_modulo(th, s, u):
            assert height(s) == height(u)


def _replacement_quadruple(rng):
    """s, t, s', t' satisfying the three replacement hypotheses."""
    signature = rand_signature(rng)
    if signature.max_arity == 0:
        return None
    th = rand_theory(rng, signature)
    s = rand_term(rng, signature, 3)
    u = rand_term(rng, signature, 3)
    if not s.children or not u.children:
        return None
    pool = [rand_term(rng, signature, 2) for _ in range(6)]

    def variants(node):
        out = []
        for child in node.children:
            if not child.children:  # constants must stay =E-equal constants
                opts = [c for c in pool if not c.children and eq_modulo(th, c, child)]
                out.append(rng.choice(opts) if opts and rng.random() < 0.5 else child)
            else:
                opts = [c for c in pool if c.children]
                out.append(rng.choice(opts) if opts and rng.random() < 0.4 else child)
        return Term(node.symbol, tuple(out))

    s2, u2 = variants(s), variants(u)
    for i, (si, si2) in enumerate(zip(s.children, s2.children)):
        if bool(si.children) != bool(si2.children):
            return None
        for uj, uj2 in zip(u.children, u2.children):
            if eq_modulo(th, si2, uj2) != eq_modulo(th, si, uj):
                return None
    for uj, uj2 in zip(u.children, u2.children):
        if bool(uj.children) != bool(uj2.children):
            return None
        if not uj.children and not eq_modulo(th, uj, uj2):
            return None
    for si, si2 in zip(s.children, s2.children):
        if not si.children and not eq_modulo(th, si, si2):
            return None
    return th, s, u, s2, u2


def test_replacement_property():
    # like-for-like child swaps never change root equivalence
    rng = random.Random(126)
    found = 0
    while found < 250:
        quad = _replacement_quadruple(rng)
        if quad is None:
            continue
        th, s, u, s2, u2 = quad
        assert eq_modulo(th, s, u) == eq_modulo(th, s2, u2)
        found += 1


def test_incremental_extend_matches_fresh_index():
    # the emptiness search extends one composed term at a time; the classes
    # must match a from-scratch index at every step
    rng = random.Random(127)
    for _ in range(40):
        signature = rand_signature(rng)
        th = rand_theory(rng, signature)
        terms = [rand_term(rng, signature, 3) for _ in range(8)]
        incremental = class_index(th, [])
        for k, term in enumerate(terms):
            incremental.extend([term])
            fresh = class_index(th, terms[: k + 1])
            for x in terms[: k + 1]:
                for y in terms[: k + 1]:
                    assert incremental.equal(x, y) == fresh.equal(x, y)
