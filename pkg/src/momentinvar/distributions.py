"""Raw moments and sampling for the supported distributions."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .algebra import ONE, ZERO, RatFunc, ratfunc_eval
from .errors import InvalidSupport


@dataclass(frozen=True, eq=False)
class Uniform:
    a: RatFunc
    b: RatFunc


@dataclass(frozen=True, eq=False)
class Normal:
    mu: RatFunc
    sigma2: RatFunc


@dataclass(frozen=True, eq=False)
class Bernoulli:
    p: RatFunc


@dataclass(frozen=True, eq=False)
class DiscreteFinite:
    outcomes: tuple  # of (value: RatFunc, prob: RatFunc)


DistSpec = Uniform | Normal | Bernoulli | DiscreteFinite


def check_discrete(d: DiscreteFinite):
    """Numeric probability lists must sum to one; symbolic ones are left alone."""
    probs = [p for _, p in d.outcomes]
    if all(p.is_constant() for p in probs):
        total = sum((p.constant_value() for p in probs), Fraction(0))
        if total != 1:
            raise InvalidSupport(f"discrete probabilities sum to {total}, not 1")


def raw_moment(d: DistSpec, k: int) -> RatFunc:
    """E[D**k] as an exact rational function of the distribution arguments."""
    if k < 0:
        raise ValueError("moment order must be non-negative")
    if k == 0:
        return ONE
    if isinstance(d, Uniform):
        # (b^(k+1) - a^(k+1)) / ((k+1)(b-a)) written without the division
        acc = ZERO
        for i in range(k + 1):
            acc = acc + d.a ** i * d.b ** (k - i)
        return acc * Fraction(1, k + 1)
    if isinstance(d, Normal):
        prev, cur = ONE, d.mu
        for j in range(2, k + 1):
            prev, cur = cur, d.mu * cur + d.sigma2 * prev * (j - 1)
        return cur
    if isinstance(d, Bernoulli):
        return d.p
    if isinstance(d, DiscreteFinite):
        acc = ZERO
        for v, p in d.outcomes:
            acc = acc + p * v ** k
        return acc
    raise TypeError(f"unknown distribution {d!r}")


def support(d: DistSpec, bindings) -> list[tuple[Fraction, Fraction]] | None:
    """Exact finite support as (value, probability) pairs, or None if continuous."""
    if isinstance(d, Bernoulli):
        p = ratfunc_eval(d.p, bindings)
        _check_prob(p)
        return [(v, q) for v, q in ((Fraction(1), p), (Fraction(0), 1 - p)) if q]
    if isinstance(d, DiscreteFinite):
        out = {}
        for v, p in d.outcomes:
            pv = ratfunc_eval(p, bindings)
            _check_prob(pv)
            if pv:
                vv = ratfunc_eval(v, bindings)
                out[vv] = out.get(vv, Fraction(0)) + pv
        if sum(out.values()) != 1:
            raise InvalidSupport("discrete probabilities do not sum to 1 under the bindings")
        return list(out.items())
    if isinstance(d, Uniform):
        a, b = ratfunc_eval(d.a, bindings), ratfunc_eval(d.b, bindings)
        if a == b:
            return [(a, Fraction(1))]
        return None
    if isinstance(d, Normal):
        if ratfunc_eval(d.sigma2, bindings) == 0:
            return [(ratfunc_eval(d.mu, bindings), Fraction(1))]
        return None
    raise TypeError(f"unknown distribution {d!r}")


def _check_prob(p):
    if not 0 <= p <= 1:
        raise InvalidSupport(f"probability {p} outside [0, 1]")


def sample(d: DistSpec, bindings, rng: np.random.Generator, size=None):
    """Draw from ``d``; a float when ``size`` is None, else an ndarray."""
    if isinstance(d, Uniform):
        a, b = float(ratfunc_eval(d.a, bindings)), float(ratfunc_eval(d.b, bindings))
        if a > b:
            raise InvalidSupport(f"uniform bounds out of order: {a} > {b}")
        return rng.uniform(a, b, size) if a < b else _full(a, size)
    if isinstance(d, Normal):
        mu, s2 = float(ratfunc_eval(d.mu, bindings)), float(ratfunc_eval(d.sigma2, bindings))
        if s2 < 0:
            raise InvalidSupport(f"negative variance {s2}")
        return rng.normal(mu, np.sqrt(s2), size) if s2 > 0 else _full(mu, size)
    if isinstance(d, Bernoulli):
        p = ratfunc_eval(d.p, bindings)
        _check_prob(p)
        u = rng.random(size)
        return (u < float(p)).astype(float) if size is not None else float(u < float(p))
    if isinstance(d, DiscreteFinite):
        pairs = support(d, bindings)
        values = np.array([float(v) for v, _ in pairs])
        probs = np.array([float(p) for _, p in pairs])
        idx = rng.choice(len(values), size=size, p=probs / probs.sum())
        return values[idx] if size is not None else float(values[idx])
    raise TypeError(f"unknown distribution {d!r}")


def _full(v, size):
    return float(v) if size is None else np.full(size, float(v))
