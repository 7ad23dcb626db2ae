from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from momentinvar.algebra import (
    CFinite, NPoly, ParamPoly, RatFunc, cf_add, cf_delay, cf_eval, cf_mul, cf_scale,
    cf_shift, formula_eq, parse_cfinite, ratfunc_eq, ratfunc_eval, render_cfinite,
)
from momentinvar.errors import DenominatorZero, ParseError

d = RatFunc.symbol("d")
p = RatFunc.symbol("p")


def test_ratfunc_eq_examples():
    assert ratfunc_eq((d ** 2 + 3) / 3, (3 + d ** 2) / 3)
    assert ratfunc_eq(RatFunc(ParamPoly.symbol("p") ** 2, ParamPoly.symbol("p")), p)
    assert ratfunc_eq(RatFunc.const(Fraction(1, 2)), RatFunc.const(Fraction(2, 4)))
    assert not ratfunc_eq(p, p + 1)


def test_ratfunc_eval_examples():
    assert ratfunc_eval((d ** 2 + 3) / 3, {"d": 1}) == Fraction(4, 3)
    assert ratfunc_eval(p, {"p": Fraction(1, 2)}) == Fraction(1, 2)
    with pytest.raises(DenominatorZero):
        ratfunc_eval(1 / (p - 1), {"p": 1})


def test_ratfunc_normalizes_common_factors():
    r = (p ** 2 - 1) / (p - 1)
    assert r.den.is_constant()
    assert ratfunc_eq(r, p + 1)
    assert r.render() == "p + 1"


def test_unbound_parameter_is_reported():
    with pytest.raises(KeyError):
        ratfunc_eval(p + d, {"p": 1})


def test_cf_add_and_mul_examples():
    n = CFinite.n()
    half = CFinite.geometric(Fraction(1, 2))
    assert render_cfinite(cf_add(cf_scale(n, Fraction(3, 4)), CFinite.const(1))) == "3/4*n + 1"
    assert render_cfinite(cf_mul(half, half)) == "(1/4)^n"
    assert render_cfinite(cf_mul(n, n)) == "n^2"


def test_cf_eval_examples():
    c = CFinite([(RatFunc.const(1), NPoly.const(1)), (RatFunc.const(Fraction(1, 2)), NPoly.const(-1))])
    assert cf_eval(c, 3) == Fraction(7, 8)
    assert cf_eval(cf_scale(CFinite.n(), Fraction(1, 2)), 4) == 2
    shifted = CFinite([(RatFunc.const(1), NPoly([-1, 1]))], 1, [0])
    assert cf_eval(shifted, 0) == 0
    assert cf_eval(shifted, 5) == 4


def test_cf_shift_examples():
    n = CFinite.n()
    assert render_cfinite(cf_shift(n * n, 1)) == "n^2 + 2*n + 1"
    assert render_cfinite(cf_shift(CFinite.geometric(2), 1)) == "2*2^n"
    assert render_cfinite(cf_shift(cf_mul(n, CFinite.geometric(3)), 1)) == "(3*n + 3)*3^n"


def test_cf_delay_puts_first_value_in_prefix():
    a = cf_delay(CFinite.n(), 7)
    assert a.validity_start == 1
    assert [cf_eval(a, i) for i in range(5)] == [7, 0, 1, 2, 3]


def test_zero_bases_and_duplicate_bases_are_merged():
    c = CFinite([(RatFunc.const(Fraction(1, 2)), NPoly.const(1)),
                 (RatFunc.const(Fraction(2, 4)), NPoly.const(2))])
    assert len(c.terms) == 1
    with pytest.raises(ValueError):
        CFinite([(RatFunc.const(0), NPoly.const(1))])


def test_parse_cfinite_round_trip():
    for text in ["(2^n - 1)/2^n", "9/16*n^2 + (4*d^2 - 21)/16*n + 1", "n^6 + 15*n^5 - 2*n",
                 "(1 + 3/2*n)*2^n", "0", "p^2*n^2 + n*p*(1 - p)"]:
        a = parse_cfinite(text)
        assert formula_eq(parse_cfinite(render_cfinite(a)), a), text


def test_parse_cfinite_rejects_nonsense():
    for bad in ["n^n", "1/(n+1)", "2 +", "(1"]:
        with pytest.raises(ParseError):
            parse_cfinite(bad)


def test_rendering_is_canonical():
    a = parse_cfinite("(3+d^2)/3 * n + 1 - (1/2)^n + 2^n")
    # bases after 1 sort by their rendered text, so "(1/2)" precedes "2"
    assert render_cfinite(a) == "(1/3*d^2 + 1)*n + 1 - (1/2)^n + 2^n"


# ---------------------------------------------------------------------------
# properties

small = st.fractions(min_value=-5, max_value=5, max_denominator=6)
params = st.fixed_dictionaries({"p": small, "d": small})


@st.composite
def ratfuncs(draw):
    def poly():
        acc = RatFunc.const(0)
        for _ in range(draw(st.integers(0, 3))):
            c = draw(small)
            e1, e2 = draw(st.integers(0, 2)), draw(st.integers(0, 2))
            acc = acc + p ** e1 * d ** e2 * c
        return acc
    num = poly()
    den = poly()
    if den.is_zero():
        den = RatFunc.const(1)
    return num / den


@st.composite
def cfinites(draw):
    bases = [Fraction(1), Fraction(1, 2), Fraction(-1), Fraction(3)]
    terms = []
    for b in draw(st.lists(st.sampled_from(bases), max_size=3, unique=True)):
        coeffs = draw(st.lists(small, min_size=1, max_size=3))
        terms.append((RatFunc.const(b), NPoly(coeffs)))
    vs = draw(st.integers(0, 2))
    prefix = [RatFunc.const(draw(small)) for _ in range(vs)]
    return CFinite(terms, vs, prefix)


def _nonzero_den(r, b):
    return r.den.eval(b) != 0


@settings(max_examples=60, deadline=None)
@given(ratfuncs(), ratfuncs(), st.lists(params, min_size=3, max_size=3))
def test_ratfunc_eq_agrees_with_evaluation(a, b, bindings):
    usable = [x for x in bindings if _nonzero_den(a, x) and _nonzero_den(b, x)]
    if ratfunc_eq(a, b):
        assert all(ratfunc_eval(a, x) == ratfunc_eval(b, x) for x in usable)
    c = a + b - b
    assert ratfunc_eq(a, c)


@settings(max_examples=60, deadline=None)
@given(cfinites(), cfinites(), cfinites())
def test_cf_operations_are_pointwise(a, b, c):
    for n in range(21):
        assert cf_eval(cf_add(a, b), n) == cf_eval(a, n) + cf_eval(b, n)
        assert cf_eval(cf_mul(a, b), n) == cf_eval(a, n) * cf_eval(b, n)
    assert cf_add(a, b).semantic_eq(cf_add(b, a))
    assert cf_mul(a, b).semantic_eq(cf_mul(b, a))
    assert cf_add(cf_add(a, b), c).semantic_eq(cf_add(a, cf_add(b, c)))
    assert cf_mul(cf_mul(a, b), c).semantic_eq(cf_mul(a, cf_mul(b, c)))


@settings(max_examples=60, deadline=None)
@given(cfinites(), st.integers(0, 3))
def test_cf_shift_matches_evaluation(a, s):
    shifted = cf_shift(a, s)
    for n in range(21):
        assert cf_eval(shifted, n) == cf_eval(a, n + s)


@settings(max_examples=40, deadline=None)
@given(cfinites(), cfinites())
def test_constructed_bases_stay_distinct(a, b):
    for c in (cf_add(a, b), cf_mul(a, b)):
        bases = [base for base, _ in c.terms]
        for i, x in enumerate(bases):
            assert not x.is_zero()
            for y in bases[i + 1:]:
                assert not ratfunc_eq(x, y)
