import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import DetGen, TYPES, det_corpus
from derivation import derives
from derivation import norm as innermost
import random

from pdts.kernel import (
    FuelExhausted, NotTypable, UnboundVariable, beta_equiv, check_judgment, infer_type,
    normalize, size, step_beta,
)
from pdts.syntax import (
    BOOL, EMPTY, FALSE, TRUE, UNIT, Context, Sort, Var, alpha_eq, parse, pretty,
)

CORPUS = det_corpus(400, seed=3, depth=4)


def P(s):
    return parse(s)


# examples -----------------------------------------------------------------

@pytest.mark.parametrize("src, out", [
    ("fst (pair(true, false) : Bool * Bool)", "true"),
    ("if true then false else unit", "false"),
    ("(\\x:Bool. x) true", "true"),
])
def test_step_beta_examples(src, out):
    assert step_beta(P(src)) == P(out)


@pytest.mark.parametrize("src, out", [
    ("(\\x:Bool. if x then false else true) true", "false"),
    ("snd (pair(unit, true) : Unit * Bool)", "true"),
    ("true", "true"),
])
def test_normalize_examples(src, out):
    assert normalize(P(src), 100) == P(out)


def test_normal_form_has_no_step():
    assert step_beta(TRUE) is None


@pytest.mark.parametrize("src, ty", [
    ("true", "Bool"),
    ("\\x:Bool. x", "Pi x:Bool. Bool"),
    ("\\x:Bool. if x then true else unit", "Pi x:Bool. if x then Bool else Unit"),
])
def test_infer_examples(src, ty):
    assert alpha_eq(infer_type(EMPTY, P(src)), P(ty))


def test_dependent_if_agrees_with_derivation_oracle():
    e = P("\\x:Bool. if x then true else unit")
    ty = P("Pi x:Bool. if x then Bool else Unit")
    rules = derives((), e, ty)
    assert rules is not None and "if" in rules and rules[-1] == "abstraction"
    assert derives((), e, P("Pi x:Bool. Bool")) is None
    assert alpha_eq(infer_type(EMPTY, e), ty)


@pytest.mark.parametrize("a, b, eq", [
    ("(\\x:Bool. x) true", "true", True),
    ("Bool", "if true then Bool else Unit", True),
    ("Bool", "Unit", False),
])
def test_beta_equiv_examples(a, b, eq):
    assert beta_equiv(P(a), P(b)) is eq


def test_check_judgment_examples():
    assert check_judgment(EMPTY, TRUE, BOOL)
    assert not check_judgment(EMPTY, TRUE, UNIT)
    ctx = Context([("A", Sort("*")), ("c", Var("A"))])
    assert check_judgment(ctx, Var("c"), Var("A"))


@pytest.mark.parametrize("src, rule", [
    ("true false", "application"),
    ("if unit then true else false", "if"),
    ("fst true", "projection"),
    ("\\x:true. x", "abstraction"),
])
def test_ill_typed(src, rule):
    with pytest.raises(NotTypable):
        infer_type(EMPTY, P(src))


def test_unbound():
    with pytest.raises(UnboundVariable):
        infer_type(EMPTY, Var("q"))


def test_fuel():
    e = P("(\\x:Bool. (\\y:Bool. y) x) true")
    with pytest.raises(FuelExhausted):
        normalize(e, 1)
    assert normalize(e, 2) == TRUE


def test_pair_condition_blocks_substitution():
    # substituting an application into a pair component is not a redex
    e = P("(\\x:Bool. pair(x, x) : Bool * Bool) ((\\y:Bool. y) true)")
    t = infer_type(EMPTY, e)
    assert alpha_eq(t, P("Bool * Bool"))
    assert normalize(e, 100) == P("pair(true, true) : Bool * Bool")


# properties over the generated corpus -------------------------------------

def test_corpus_is_typable():
    for e in CORPUS:
        infer_type(EMPTY, e)


def test_preservation():
    for e in CORPUS:
        t = infer_type(EMPTY, e)
        while (e2 := step_beta(e)) is not None:
            t2 = infer_type(EMPTY, e2)
            assert beta_equiv(t, t2), pretty(e)
            e = e2


def test_progress():
    for e in CORPUS:
        n = normalize(e, 10_000)
        assert step_beta(n) is None
        if not alpha_eq(n, e):
            assert step_beta(e) is not None


def test_uniqueness_against_innermost():
    for e in CORPUS:
        lo = normalize(e, 10_000, strong=True)
        assert alpha_eq(lo, innermost(e)), pretty(e)


def test_fuel_bound():
    for e in CORPUS:
        normalize(e, 10 * size(e) ** 2, strong=True)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(TYPES))
def test_generated_terms_have_requested_type(seed, ty):
    e = DetGen(random.Random(seed)).term(ty, (), 3)
    assert beta_equiv(infer_type(EMPTY, e), ty)
    assert derives((), e, ty) is not None


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_normal_forms_of_booleans_are_constants(seed):
    e = DetGen(random.Random(seed)).term(BOOL, (), 4)
    assert normalize(e, 10_000, strong=True) in (TRUE, FALSE)
