import random
import zlib
from fractions import Fraction

import pytest

from momentinvar.algebra import CFinite, NPoly, RatFunc, cf_eval, formula_eq, parse_cfinite
from momentinvar.cli import corpus
from momentinvar.engine import build_system, RecurrenceSystem
from momentinvar.errors import DenominatorZero
from momentinvar.frontend import load
from momentinvar.solver import solve_first_order, solve_system

def same(form, text):
    return formula_eq(form, parse_cfinite(text))


def unroll(c, gamma, x0, count, bindings=None):
    xs = [Fraction(x0)]
    for n in range(count - 1):
        xs.append(c * xs[-1] + cf_eval(gamma, n, bindings))
    return xs


def test_first_order_examples():
    assert same(solve_first_order(1, CFinite.const(Fraction(9, 4)), 0), "9/4*n")
    coupon = solve_first_order(Fraction(1, 2), CFinite.const(Fraction(1, 2)), 0)
    assert same(coupon, "1 - (1/2)^n")
    gamma = parse_cfinite("3/2*(3/4*n - 1) + (d^2 + 3)/4")
    assert same(solve_first_order(1, gamma, 1), "9/16*n^2 + (4*d^2 - 21)/16*n + 1")


def test_resonance_unrolling():
    form = solve_first_order(2, CFinite.geometric(2, 3), 1)
    assert same(form, "(1 + 3/2*n)*2^n")
    assert [cf_eval(form, n) for n in range(5)] == [1, 5, 16, 44, 112]


def test_zero_self_coefficient_uses_a_prefix():
    # x(n+1) = n^2 with x(0) = 5
    form = solve_first_order(0, parse_cfinite("n^2"), 5)
    assert form.validity_start == 1
    assert [cf_eval(form, n) for n in range(5)] == [5, 0, 1, 4, 9]


def test_zero_self_coefficient_compacts_when_formula_fits():
    # x(n+1) = n + 1 with x(0) = 0 is just n
    form = solve_first_order(0, parse_cfinite("n + 1"), 0)
    assert form.validity_start == 0
    assert same(form, "n")


def test_prefix_of_gamma_propagates():
    gamma = CFinite([(RatFunc.const(1), NPoly.const(1))], 2, [7, -3])
    form = solve_first_order(Fraction(1, 3), gamma, 2)
    assert [cf_eval(form, n) for n in range(10)] == unroll(Fraction(1, 3), gamma, 2, 10)


def test_system_examples():
    vp = load(dict(corpus())["StutteringA"])
    forms = solve_system(build_system(vp, [(("s", 1),), (("s", 2),)]))
    assert same(forms[(("s", 1),)], "9/4*n")
    assert same(forms[(("s", 2),)], "81/16*n^2 + (20*d^2 + 27)/16*n")
    vp = load(dict(corpus())["Binomial"])
    forms = solve_system(build_system(vp, [(("x", 1),), (("x", 2),)]))
    assert same(forms[(("x", 1),)], "n*p")
    assert same(forms[(("x", 2),)], "n^2*p^2 + n*p*(1 - p)")
    assert len(solve_system(RecurrenceSystem([], {}))) == 0


@pytest.mark.parametrize("name", [n for n, _ in corpus()])
def test_recurrence_residual(name):
    vp = load(dict(corpus())[name], name)
    sys = build_system(vp, [((v, j),) for v in vp.order for j in (1, 2, 3)])
    forms = solve_system(sys)
    rng = random.Random(zlib.crc32(name.encode()))
    for _ in range(3):
        bindings = {p: Fraction(rng.randint(1, 9), rng.randint(2, 11)) for p in vp.params}
        for r in sys.recurrences:
            f = forms[r.target]
            assert cf_eval(f, 0, bindings) == sys.initials[r.target].eval(bindings)
            c = r.self_coeff.eval(bindings)
            k = r.const.eval(bindings)
            lin = [(c_.eval(bindings), forms[m]) for m, c_ in r.lin.items()]
            for n in range(16):
                rhs = c * cf_eval(f, n, bindings) + k
                rhs += sum(w * cf_eval(g, n, bindings) for w, g in lin)
                assert cf_eval(f, n + 1, bindings) == rhs


def test_random_resonance_instances():
    rng = random.Random(7)
    for _ in range(20):
        c = Fraction(rng.choice([-3, -2, -1, 2, 3, 5]), rng.choice([1, 2, 3]))
        q = NPoly([Fraction(rng.randint(-5, 5), rng.randint(1, 4)) for _ in range(rng.randint(1, 3))])
        gamma = CFinite([(RatFunc.const(c), q),
                         (RatFunc.const(1), NPoly.const(rng.randint(-3, 3)))])
        x0 = Fraction(rng.randint(-5, 5), rng.randint(1, 3))
        form = solve_first_order(c, gamma, x0)
        expect = unroll(c, gamma, x0, 12)
        assert [cf_eval(form, n) for n in range(12)] == expect
        # resonance raises the degree attached to the base c by one
        if not q.is_zero():
            assert form.term_poly(RatFunc.const(c)).degree() == q.degree() + 1


def test_symbolic_resonance_reports_parameter_denominators():
    # x(n+1) = p x(n) + p^n, so x(n) = x0 p^n + n p^(n-1)
    p = RatFunc.symbol("p")
    form = solve_first_order(p, CFinite.geometric(p), 1)
    for pv in (Fraction(1, 2), Fraction(3), Fraction(-2, 5)):
        b = {"p": pv}
        assert [cf_eval(form, n, b) for n in range(8)] == [pv ** n + n * pv ** (n - 1) for n in range(8)]
    with pytest.raises(DenominatorZero):
        cf_eval(form, 3, {"p": 0})
