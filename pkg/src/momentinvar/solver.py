"""Closed forms for triangular systems of first-order moment recurrences."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

from .algebra import ZERO, CFinite, NPoly, RatFunc, as_ratfunc, cf_add, cf_delay, cf_scale, ratfunc_eq
from .engine import RecurrenceSystem


@dataclass
class ClosedFormSet:
    forms: dict = field(default_factory=dict)      # EMonomial -> CFinite

    def __getitem__(self, m):
        return self.forms[m]

    def __contains__(self, m):
        return m in self.forms

    def __len__(self):
        return len(self.forms)

    def items(self):
        return self.forms.items()


def _particular(theta: RatFunc, q: NPoly, c: RatFunc) -> NPoly:
    """R with theta*R(n+1) - c*R(n) = Q(n), by back substitution."""
    deg = q.degree()
    if not ratfunc_eq(theta, c):
        r = [ZERO] * (deg + 1)
        gap = theta - c
        for j in range(deg, -1, -1):
            acc = q.coeff(j)
            for i in range(j + 1, deg + 1):
                acc = acc - theta * r[i] * comb(i, j)
            r[j] = acc / gap
        return NPoly(r)
    # resonance: theta*(R(n+1) - R(n)) = Q(n), deg R = deg Q + 1, R(0) = 0
    r = [ZERO] * (deg + 2)
    for j in range(deg, -1, -1):
        acc = q.coeff(j)
        for i in range(j + 2, deg + 2):
            acc = acc - theta * r[i] * comb(i, j)
        r[j + 1] = acc / (theta * (j + 1))
    return NPoly(r)


def solve_first_order(c, gamma: CFinite, x0) -> CFinite:
    """The sequence with x(0) = x0 and x(n+1) = c*x(n) + gamma(n)."""
    c = as_ratfunc(c)
    x0 = as_ratfunc(x0)
    if c.is_zero():
        return cf_delay(gamma, x0).compact()
    g0 = gamma.validity_start
    # iterate through gamma's prefix explicitly
    values = [x0]
    for i in range(g0):
        values.append(c * values[-1] + gamma.prefix[i])
    terms = [(theta, _particular(theta, q, c)) for theta, q in gamma.terms]
    part = CFinite(terms)
    a = (values[g0] - part.formula_at(g0)) / c ** g0
    terms.append((c, NPoly.const(a)))
    return CFinite(terms, g0, values[:g0]).compact()


def assemble_gamma(rec, forms) -> CFinite:
    gamma = CFinite.const(rec.const)
    for m, coeff in rec.lin.items():
        gamma = cf_add(gamma, cf_scale(forms[m], coeff))
    return gamma


def solve_system(sys: RecurrenceSystem) -> ClosedFormSet:
    out = ClosedFormSet()
    for rec in sys.recurrences:
        gamma = assemble_gamma(rec, out.forms)
        out.forms[rec.target] = solve_first_order(rec.self_coeff, gamma, sys.initials[rec.target])
    return out

