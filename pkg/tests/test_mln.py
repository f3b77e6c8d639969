import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdts.logic import parse_formula
from pdts.mln import (
    MlnSyntaxError, TooManyWorlds, eval_formula, format_mln, ground, parse_mln, query_prob,
    world_distribution, world_log_weights, world_weight,
)


def implication_mln(w1, w2):
    return parse_mln(f"predicate A/1\npredicate B/1\nconstant c1\n"
                     f"{w1!r} :: A(x) -> B(x)\n{w2!r} :: A(c1)\n")


def exists_mln(w):
    return parse_mln(f"predicate A/1\nconstant c1 c2\n{w!r} :: A(x)\n")


def implication_closed(w1, w2):
    a, b = math.exp(w1), math.exp(w2)
    return a * (1 + b) / (a * (2 + b) + b)


def exists_closed(w):
    a = math.exp(w)
    return a * (2 + a) / (a * (2 + a) + 1)


# examples -----------------------------------------------------------------

def test_ground_examples():
    n = ground(exists_mln(1.0))
    assert len(n.formulas) == 2 and list(n.weights) == [1.0, 1.0]
    n = ground(parse_mln("predicate A/1\nconstant c1\n0.5 :: A(c1)\n"))
    assert len(n.formulas) == 1 and n.n_atoms == 1
    n = ground(parse_mln("predicate R/2\nconstant c1 c2\n"))
    assert n.n_atoms == 4


def test_eval_examples():
    m = implication_mln(1.0, 1.0)
    n = ground(m)
    a, ab = (parse_formula(s, m.sig) for s in ("A(c1)", "A(c1) -> B(c1)"))
    assert eval_formula(a, (1, 0), n.index)
    assert not eval_formula(ab, (1, 0), n.index)
    m9 = exists_mln(1.0)
    n9 = ground(m9)
    assert eval_formula(parse_formula("A(c1) | A(c2)", m9.sig), (1, 0), n9.index)


def test_world_weight_examples():
    w1, w2 = 0.7, 1.3
    assert world_weight(ground(implication_mln(w1, w2)), (1, 1)) == pytest.approx(math.exp(w1 + w2))
    empty = ground(parse_mln("predicate A/1\nconstant c1\n"))
    assert world_weight(empty, (0,)) == 1.0
    assert world_weight(ground(exists_mln(w1)), (1, 0)) == pytest.approx(math.exp(w1))


@pytest.mark.parametrize("w1, w2", [(0.5, 0.5), (1, 1), (2, 2), (0.5, 2), (2, 0.5)])
def test_implication_closed_form(w1, w2):
    n = ground(implication_mln(w1, w2))
    assert abs(query_prob(n, "B(c1)") - implication_closed(w1, w2)) < 1e-12


def test_implication_at_ln2():
    n = ground(implication_mln(math.log(2), math.log(2)))
    assert abs(query_prob(n, "B(c1)") - 0.6) < 1e-12


@pytest.mark.parametrize("w", [0.5, 1, 2])
def test_exists_closed_form(w):
    n = ground(exists_mln(w))
    assert abs(query_prob(n, "exists x A(x)") - exists_closed(w)) < 1e-12
    assert abs(query_prob(n, "A(c1) | A(c2)") - exists_closed(w)) < 1e-12


def test_evidence():
    n = ground(implication_mln(1.0, 1.0))
    assert query_prob(n, "B(c1)", "A(c1)") == pytest.approx(math.e / (1 + math.e))
    with pytest.raises(ValueError):
        query_prob(n, "B(c1)", "A(c1) & ~A(c1)")


def test_cap():
    m = parse_mln("predicate R/2\nconstant a b c d e\n1 :: R(x, y)\n")
    with pytest.raises(TooManyWorlds):
        world_log_weights(ground(m), cap=20)


def test_functions():
    m = parse_mln("predicate A/1\nconstant c1 c2\nfunction g/1 { c1 -> c2; c2 -> c1 }\n"
                  "1.5 :: A(g(c1))\n")
    assert query_prob(ground(m), "A(c2)") == pytest.approx(math.exp(1.5) / (1 + math.exp(1.5)))
    assert query_prob(ground(m), "A(c1)") == pytest.approx(0.5)


def test_syntax_errors():
    for bad in ("predicate A\n", "constant c1\n1 :: B(c1)\n", "constant c1\nnonsense\n",
                "predicate A/1\n1 :: A(c1)\n"):
        with pytest.raises(MlnSyntaxError):
            parse_mln(bad)


def test_format_round_trip():
    m = implication_mln(0.25, -1.5)
    again = parse_mln(format_mln(m))
    assert np.allclose(world_distribution(ground(m)), world_distribution(ground(again)))


# invariants ---------------------------------------------------------------

def test_normalization_and_brute_force():
    m = parse_mln("predicate A/1\npredicate R/2\nconstant c1 c2\n"
                  "0.8 :: A(x) -> R(x, x)\n-0.4 :: forall y (R(x, y) | A(y))\n1.1 :: A(c1)\n")
    n = ground(m)
    probs = world_distribution(n)
    assert abs(math.fsum(probs) - 1) < 1e-12
    brute = np.array([world_weight(n, w) for w in itertools.product((0, 1), repeat=n.n_atoms)])
    assert np.allclose(probs, brute / brute.sum(), atol=1e-14)


def test_monotone_limit():
    grid = [0.5 * k for k in range(1, 17)]
    for w2 in (0.5, 3.0):
        vals = [query_prob(ground(implication_mln(w, w2)), "B(c1)") for w in grid]
        assert all(b > a for a, b in zip(vals, vals[1:]))
    for w1 in (0.5, 3.0):
        vals = [query_prob(ground(implication_mln(w1, w)), "B(c1)") for w in grid]
        assert all(b > a for a, b in zip(vals, vals[1:]))
    assert query_prob(ground(implication_mln(12, 12)), "B(c1)") > 0.999


def test_unmentioned_atom_is_half():
    m = parse_mln("predicate A/1\npredicate C/1\nconstant c1 c2\n2 :: A(x)\n")
    assert abs(query_prob(ground(m), "C(c2)") - 0.5) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(st.sampled_from("PQRS"), st.integers(1, 2), min_size=1, max_size=3),
       st.integers(1, 3))
def test_ground_atom_count(preds, n_const):
    lines = [f"predicate {p}/{a}" for p, a in preds.items()]
    lines.append("constant " + " ".join(f"k{i}" for i in range(n_const)))
    n = ground(parse_mln("\n".join(lines)))
    assert n.n_atoms == sum(n_const ** a for a in preds.values())
