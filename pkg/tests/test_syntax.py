import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdts.syntax import (
    BOOL, BOX, FALSE, ONE, STAR, TRUE, UNIT, App, Const, Dispatch, If, Lam, Pair,
    PairSubstitutionViolation, ParseError, Pi, Proj, Random, Sigma, Var, alpha_eq,
    free_vars, parse, parse_program, pretty, substitute,
)

NAMES = ("x", "y", "z", "_u")


values = st.sampled_from([TRUE, FALSE, ONE, BOOL]) | st.sampled_from(NAMES).map(Var)


exprs = st.recursive(
    st.sampled_from([TRUE, FALSE, ONE, BOOL, UNIT, STAR, BOX]) | st.sampled_from(NAMES).map(Var),
    lambda ch: st.one_of(
        st.builds(App, ch, ch),
        st.builds(Lam, st.sampled_from(NAMES), ch, ch),
        st.builds(Pi, st.sampled_from(NAMES), ch, ch),
        st.builds(Sigma, st.sampled_from(NAMES), ch, ch),
        st.builds(If, ch, ch, ch),
        st.builds(Proj, st.sampled_from((1, 2)), ch),
        st.builds(Pair, values, values, ch),
        st.builds(Random, st.floats(0.001, 0.999), ch),
        st.builds(lambda x, cs, a: Dispatch(x, cs, a), st.sampled_from(NAMES),
                  st.lists(st.tuples(ch, ch), min_size=1, max_size=3), ch),
    ),
    max_leaves=12,
)


# examples -----------------------------------------------------------------

def test_parse_constant():
    assert parse("true") == TRUE


def test_parse_identity():
    assert parse("\\x:Bool. x") == Lam("x", BOOL, Var("x"))


def test_parse_random():
    e = parse("random[0.3](\\x:Bool. if x then true else false)")
    assert e == Random(0.3, Lam("x", BOOL, If(Var("x"), TRUE, FALSE)))


def test_free_vars_examples():
    assert free_vars(TRUE) == frozenset()
    assert free_vars(Lam("x", BOOL, Var("x"))) == frozenset()
    assert free_vars(App(Var("f"), Var("x"))) == {"f", "x"}


def test_alpha_examples():
    assert alpha_eq(parse("\\x:Bool. x"), parse("\\y:Bool. y"))
    assert not alpha_eq(parse("\\x:Bool. x"), parse("\\x:Bool. true"))
    assert alpha_eq(parse("Pi x:Bool. Bool"), parse("Pi z:Bool. Bool"))


def test_substitute_examples():
    assert substitute(Var("x"), "x", TRUE) == TRUE
    out = substitute(Lam("y", BOOL, Var("x")), "x", Var("y"))
    assert isinstance(out, Lam) and out.var != "y" and out.body == Var("y")
    with pytest.raises(PairSubstitutionViolation):
        substitute(Pair(Var("x"), Var("x"), parse("Bool * Bool")), "x", App(Var("f"), Var("a")))


def test_sugar():
    assert alpha_eq(parse("Bool -> Unit"), Pi("x", BOOL, UNIT))
    assert pretty(parse("Bool -> Bool * Unit")) == "Bool -> Bool * Unit"
    assert pretty(parse("Pi x:Bool. Bool")) == "Pi x:Bool. Bool"


def test_case_syntax():
    e = parse("case x {Bool => true; Unit => false}(unit)")
    assert isinstance(e, Dispatch) and e.arg == ONE and len(e.cases) == 2


def test_parse_errors():
    for bad in ("\\x. x", "pair(true, false)", "random[2](true)", "if true then", ")"):
        with pytest.raises(ParseError):
            parse(bad)


def test_pair_components_must_be_values():
    with pytest.raises(ParseError, match="values"):
        parse("pair((\\x:Bool. x) true, true) : Bool * Bool")


def test_program_assumptions():
    ctx, e = parse_program("assume A : *\nassume c : A\n# comment\nc\n")
    assert ctx.names() == {"A", "c"} and e == Var("c")


def test_program_error_line():
    with pytest.raises(ParseError) as ei:
        parse_program("assume A : *\n\n(true")
    assert ei.value.line == 3


# properties ---------------------------------------------------------------

@settings(max_examples=300, deadline=None)
@given(exprs)
def test_round_trip(e):
    assert alpha_eq(parse(pretty(e)), e)


@settings(max_examples=200, deadline=None)
@given(exprs, st.sampled_from(NAMES))
def test_substitute_identity(e, x):
    assert alpha_eq(substitute(e, x, Var(x)), e)


@settings(max_examples=200, deadline=None)
@given(exprs, st.sampled_from(NAMES), st.sampled_from([TRUE, Var("w"), Const("Bool")]))
def test_free_vars_after_substitution(e, x, v):
    if x not in free_vars(e):
        return
    try:
        out = substitute(e, x, v)
    except PairSubstitutionViolation:
        return
    assert free_vars(out) == (free_vars(e) - {x}) | free_vars(v)


@settings(max_examples=150, deadline=None)
@given(exprs, exprs, exprs)
def test_alpha_is_equivalence(a, b, c):
    assert alpha_eq(a, a)
    assert alpha_eq(a, b) == alpha_eq(b, a)
    if alpha_eq(a, b) and alpha_eq(b, c):
        assert alpha_eq(a, c)


@settings(max_examples=150, deadline=None)
@given(exprs, st.sampled_from(NAMES), st.sampled_from(("p", "q")))
def test_renamed_binders_are_alpha_equal(body, x, y):
    lhs = Lam(x, BOOL, body)
    if y in free_vars(body):
        return
    rhs = Lam(y, BOOL, substitute(body, x, Var(y)))
    assert alpha_eq(lhs, rhs)
