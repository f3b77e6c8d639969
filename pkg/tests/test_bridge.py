import math
import random
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdts.bridge import (
    DimensionMismatch, WorldTable, ZeroWeight, canonical_mln, dtn_table, dtn_to_mln, mln_table,
    mln_to_dtn, simplify, verify_translation,
)
from pdts.dtn import parse_dtn, query_exact
from pdts.logic import Atom, Bottom, Implies, Not, TConst, show
from pdts.mln import Mln, parse_mln

A = Atom("A", (TConst("c1"),))


def one_atom(w):
    return parse_mln(f"predicate A/1\nconstant c1\n{w!r} :: A(c1)\n")


def random_mln(rng: random.Random) -> Mln:
    """At most three ground atoms and four weighted ground formulas."""
    n_atoms = rng.randint(1, 3)
    names = ["P", "Q", "R"][:n_atoms]
    lines = [f"predicate {p}/1" for p in names] + ["constant c1"]
    lits = [f"{p}(c1)" for p in names]
    for _ in range(rng.randint(0, 4)):
        a = rng.choice(lits)
        b = rng.choice(lits)
        shape = rng.choice(["{a}", "~{a}", "{a} -> {b}", "{a} & {b}", "{a} | ~{b}", "~({a} & {b})"])
        w = rng.choice([-1, 1]) * rng.uniform(0.01, 2.0)
        lines.append(f"{w!r} :: " + shape.format(a=a, b=b))
    return parse_mln("\n".join(lines))


def test_positive_weight_example():
    w = 0.9
    (f,) = mln_to_dtn(one_atom(w)).formulas
    assert f.formula == Implies(Not(A), Bottom())
    assert f.p == pytest.approx(1 - math.exp(-w))


def test_negative_weight_example():
    w = 0.9
    (f,) = mln_to_dtn(one_atom(-w)).formulas
    assert f.formula == Implies(A, Bottom())
    assert f.p == pytest.approx(1 - math.exp(-w))


def test_empty_mln_gives_uniform():
    spec = mln_to_dtn(parse_mln("predicate A/1\nconstant c1 c2\n"))
    assert spec.formulas == []
    assert np.allclose(dtn_table(spec).probs, 0.25)


def test_zero_weight_is_dropped():
    with pytest.warns(ZeroWeight):
        spec = mln_to_dtn(one_atom(0.0))
    assert spec.formulas == []


def test_simplified_form():
    (f,) = mln_to_dtn(one_atom(1.0), simplified=True).formulas
    assert f.formula == A
    (f,) = mln_to_dtn(one_atom(-1.0), simplified=True).formulas
    assert f.formula == Not(A)
    assert simplify(Not(Not(Not(A)))) == Not(A)


def test_dtn_to_mln_example():
    spec = parse_dtn("domain 1\nunary B\nformula f : B(c1) @ 0.5\n")
    m = dtn_to_mln(spec)
    ((g, w),) = m.weighted
    assert show(g) == "~B(c1)" and w == pytest.approx(math.log(0.5))
    probs = mln_table(m).probs
    # world weights: B=1 -> 1, B=0 -> 0.5
    assert probs[1] / probs[0] == pytest.approx(2.0)


def test_example_one_round_trip():
    ln2 = math.log(2)
    m = parse_mln(f"predicate B1/1\npredicate B2/1\nconstant c1\n"
                  f"{ln2!r} :: B1(x) -> B2(x)\n{ln2!r} :: B1(c1)\n")
    spec = mln_to_dtn(m)
    assert abs(query_exact(spec, "B2(c1)") - 0.6) < 1e-12
    back = dtn_to_mln(spec)
    assert verify_translation(mln_table(m), mln_table(back)).max_dev < 1e-12


def test_empty_dtn_to_mln():
    m = dtn_to_mln(parse_dtn("domain 1\nunary B C\n"))
    assert m.weighted == []
    assert np.allclose(mln_table(m).probs, 0.25)


def test_verify_examples():
    t = WorldTable(["A"], np.array([0.3, 0.7]))
    assert verify_translation(t, t).max_dev == 0
    bad = WorldTable(["A"], np.array([0.31, 0.69]))
    assert verify_translation(t, bad).max_dev == pytest.approx(0.01)
    with pytest.raises(DimensionMismatch):
        verify_translation(t, WorldTable(["A", "B"], np.full(4, 0.25)))


def test_verify_aligns_atom_order():
    src = WorldTable(["A", "B"], np.array([0.1, 0.2, 0.3, 0.4]))
    dst = WorldTable(["B", "A"], np.array([0.1, 0.3, 0.2, 0.4]))
    assert verify_translation(src, dst).max_dev == 0


def test_corrupted_weight_is_detected():
    m = random_mln(random.Random(1))
    while not m.weighted:
        m = random_mln(random.Random(len(m.sig.predicates) + 7))
    spec = mln_to_dtn(m)
    f = spec.formulas[0]
    spec.formulas[0] = type(f)(f.name, f.formula, f.p * 0.5)
    assert verify_translation(mln_table(m), dtn_table(spec)).max_dev > 1e-6


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_round_trip_preserves_worlds(seed):
    m = random_mln(random.Random(seed))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ZeroWeight)
        d = mln_to_dtn(m)
        d2 = mln_to_dtn(m, simplified=True)
    back = dtn_to_mln(d)
    src = mln_table(m)
    assert verify_translation(src, dtn_table(d)).max_dev < 1e-9
    assert verify_translation(src, dtn_table(d2)).max_dev < 1e-9
    assert verify_translation(src, mln_table(back)).max_dev < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 3), st.integers(0, 2**32))
def test_universality(n, seed):
    rng = np.random.default_rng(seed)
    target = rng.dirichlet(np.ones(1 << n)) + 1e-9
    target /= target.sum()
    m = canonical_mln(target)
    assert np.allclose(mln_table(m).probs, target, atol=1e-12)
    assert np.max(np.abs(dtn_table(mln_to_dtn(m)).probs - target)) < 1e-6


def test_canonical_rejects_zero_mass():
    with pytest.raises(ValueError):
        canonical_mln([0.5, 0.5, 0.0, 0.0])
