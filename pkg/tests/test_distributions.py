from fractions import Fraction

import numpy as np
import pytest

from momentinvar.algebra import RatFunc, ratfunc_eq, ratfunc_eval
from momentinvar.distributions import (
    Bernoulli, DiscreteFinite, Normal, Uniform, raw_moment, sample, support,
)
from momentinvar.errors import InvalidSupport

d = RatFunc.symbol("d")
p = RatFunc.symbol("p")
s2 = RatFunc.symbol("s2")
R = RatFunc.const


def test_raw_moment_examples():
    assert ratfunc_eq(raw_moment(Uniform(1 - d, 1 + d), 2), (d ** 2 + 3) / 3)
    assert ratfunc_eq(raw_moment(Uniform(2 - 2 * d, 2 + 2 * d), 2), (d ** 2 + 3) * Fraction(4, 3))
    assert raw_moment(Normal(R(0), s2), 3).is_zero()
    assert ratfunc_eq(raw_moment(Normal(R(0), s2), 4), s2 ** 2 * 3)
    assert raw_moment(Uniform(R(0), R(1)), 2) == R(Fraction(1, 3))
    assert raw_moment(Bernoulli(p), 7) == p
    assert raw_moment(Uniform(R(5), R(9)), 0) == R(1)


def test_uniform_has_no_singularity_at_a_equal_b():
    assert ratfunc_eval(raw_moment(Uniform(d, d), 3), {"d": 2}) == 8


def test_discrete_matches_bernoulli():
    disc = DiscreteFinite(((R(1), p), (R(0), 1 - p)))
    for k in range(7):
        assert ratfunc_eq(raw_moment(disc, k), raw_moment(Bernoulli(p), k))


def test_degenerate_samples():
    rng = np.random.default_rng(1)
    assert np.all(sample(Bernoulli(R(1)), {}, rng, 50) == 1)
    assert np.all(sample(Uniform(R(2), R(2)), {}, rng, 50) == 2)
    assert np.all(sample(Normal(R(0), R(0)), {}, rng, 50) == 0)
    assert sample(Bernoulli(R(0)), {}, rng) == 0.0


def test_invalid_support():
    rng = np.random.default_rng(0)
    with pytest.raises(InvalidSupport):
        sample(Uniform(R(3), R(1)), {}, rng)
    with pytest.raises(InvalidSupport):
        sample(Bernoulli(p), {"p": 2}, rng)
    with pytest.raises(InvalidSupport):
        sample(Normal(R(0), s2), {"s2": -1}, rng)


def test_support():
    assert support(Bernoulli(p), {"p": Fraction(1, 4)}) == [(1, Fraction(1, 4)), (0, Fraction(3, 4))]
    assert support(Uniform(R(0), R(1)), {}) is None
    assert support(Uniform(R(2), R(2)), {}) == [(2, 1)]
    disc = DiscreteFinite(((R(-1), R(Fraction(1, 2))), (R(1), R(Fraction(1, 2)))))
    assert sorted(support(disc, {})) == [(-1, Fraction(1, 2)), (1, Fraction(1, 2))]


CASES = [
    ("uniform", Uniform(1 - d, 1 + d), {"d": Fraction(1, 2)}),
    ("uniform-wide", Uniform(R(-3), R(5)), {}),
    ("normal", Normal(R(Fraction(1, 2)), s2), {"s2": Fraction(9, 4)}),
    ("bernoulli", Bernoulli(p), {"p": Fraction(1, 3)}),
    ("discrete", DiscreteFinite(((R(-2), R(Fraction(1, 4))), (R(1), R(Fraction(1, 4))),
                                 (R(3), R(Fraction(1, 2))))), {}),
]


@pytest.mark.parametrize("name,dist,bindings", CASES, ids=[c[0] for c in CASES])
def test_empirical_moments_within_five_standard_errors(name, dist, bindings):
    rng = np.random.default_rng(20240611)
    x = sample(dist, bindings, rng, 200_000)
    for k in range(1, 5):
        vals = x ** k
        se = vals.std(ddof=1) / np.sqrt(len(vals))
        exact = float(ratfunc_eval(raw_moment(dist, k), bindings))
        assert abs(vals.mean() - exact) <= 5 * se + 1e-12, (k, vals.mean(), exact, se)
