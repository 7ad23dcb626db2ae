"""Exact scalar and sequence arithmetic.

Scalars are rational functions in symbolic parameters with ``Fraction``
coefficients.  Sequences in the loop counter ``n`` are C-finite
expressions: finite sums of ``poly(n) * base**n`` with an explicit
validity threshold and the values before it.
"""
from __future__ import annotations

import re
from fractions import Fraction
from math import comb
from typing import Iterable, Mapping

from .errors import DenominatorZero, ParseError

COUNTER = "n"


# ---------------------------------------------------------------------------
# sparse polynomial helpers (shared by ParamPoly and Poly)
#
# A monomial is a tuple of (atom, exponent) pairs sorted by atom.  A term map
# is a dict monomial -> coefficient with no zero coefficients.


def mono_mul(a, b):
    if not a:
        return b
    if not b:
        return a
    out = dict(a)
    for k, e in b:
        out[k] = out.get(k, 0) + e
    return tuple(sorted(out.items()))


def mono_pow(a, e):
    return tuple((k, x * e) for k, x in a)


def mono_degree(a):
    return sum(e for _, e in a)


def _terms_add(a, b, sign=1):
    out = dict(a)
    for m, c in b.items():
        v = out.get(m)
        if v is None:
            out[m] = c if sign == 1 else -c
        else:
            v = v + c if sign == 1 else v - c
            if v:
                out[m] = v
            else:
                del out[m]
    return out


def _terms_mul(a, b):
    out = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            m = mono_mul(ma, mb)
            v = out.get(m)
            v = ca * cb if v is None else v + ca * cb
            if v:
                out[m] = v
            else:
                out.pop(m, None)
    return out


def _terms_scale(a, s):
    if not s:
        return {}
    return {m: c * s for m, c in a.items()}


def _mono_sort_key(m):
    # graded, then lexicographic with earlier atoms at higher exponent first
    return (-mono_degree(m), tuple((str(k), -e) for k, e in m))


# ---------------------------------------------------------------------------
# ParamPoly


class ParamPoly:
    """Multivariate polynomial over parameter names with rational coefficients."""

    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Mapping | None = None):
        clean = {}
        if terms:
            for m, c in terms.items():
                c = Fraction(c)
                if c:
                    clean[m] = c
        self.terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, terms):
        obj = cls.__new__(cls)
        obj.terms = terms
        obj._hash = None
        return obj

    @classmethod
    def const(cls, c) -> "ParamPoly":
        c = Fraction(c)
        return cls._raw({(): c} if c else {})

    @classmethod
    def symbol(cls, name: str) -> "ParamPoly":
        return cls._raw({((name, 1),): Fraction(1)})

    # -- structure
    def is_zero(self):
        return not self.terms

    def is_constant(self):
        return not self.terms or (len(self.terms) == 1 and () in self.terms)

    def constant_value(self) -> Fraction:
        return self.terms.get((), Fraction(0))

    def params(self) -> set:
        return {k for m in self.terms for k, _ in m}

    def degree(self):
        return max((mono_degree(m) for m in self.terms), default=0)

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda t: _mono_sort_key(t[0]))

    def leading(self):
        return self.sorted_terms()[0]

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = ParamPoly.const(other)
        if not isinstance(other, ParamPoly):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    # -- arithmetic
    def __add__(self, other):
        if not isinstance(other, ParamPoly):
            other = ParamPoly.const(other)
        return ParamPoly._raw(_terms_add(self.terms, other.terms))

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, ParamPoly):
            other = ParamPoly.const(other)
        return ParamPoly._raw(_terms_add(self.terms, other.terms, -1))

    def __rsub__(self, other):
        return ParamPoly.const(other) - self

    def __neg__(self):
        return ParamPoly._raw({m: -c for m, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, ParamPoly):
            return ParamPoly._raw(_terms_mul(self.terms, other.terms))
        return ParamPoly._raw(_terms_scale(self.terms, Fraction(other)))

    __rmul__ = __mul__

    def __pow__(self, e: int):
        if e < 0:
            raise ValueError("negative power of a polynomial")
        out = ParamPoly.const(1)
        base = self
        while e:
            if e & 1:
                out = out * base
            e >>= 1
            if e:
                base = base * base
        return out

    def eval(self, bindings: Mapping[str, Fraction]) -> Fraction:
        total = Fraction(0)
        for m, c in self.terms.items():
            v = c
            for k, e in m:
                try:
                    v *= Fraction(bindings[k]) ** e
                except KeyError:
                    raise KeyError(f"parameter {k!r} is not bound") from None
            total += v
        return total

    def substitute(self, bindings: Mapping[str, "ParamPoly"]) -> "ParamPoly":
        out = ParamPoly()
        for m, c in self.terms.items():
            term = ParamPoly.const(c)
            for k, e in m:
                term = term * (bindings[k] ** e if k in bindings else ParamPoly._raw({((k, e),): Fraction(1)}))
            out = out + term
        return out

    def render(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m, c in self.sorted_terms():
            mono = "*".join(k if e == 1 else f"{k}^{e}" for k, e in m)
            if not mono:
                parts.append(_frac_str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append("-" + mono)
            else:
                parts.append(f"{_frac_str(c)}*{mono}")
        return _join_signed(parts)

    def __repr__(self):
        return f"ParamPoly({self.render()})"

    __str__ = render


def _frac_str(c: Fraction) -> str:
    c = Fraction(c)
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _join_signed(parts):
    out = parts[0]
    for p in parts[1:]:
        if p.startswith("-"):
            out += " - " + p[1:]
        else:
            out += " + " + p
    return out


# -- univariate helpers used for best-effort cancellation


def _as_univariate(p: ParamPoly, var):
    coeffs = [Fraction(0)] * (p.degree() + 1)
    for m, c in p.terms.items():
        coeffs[m[0][1] if m else 0] = c
    while len(coeffs) > 1 and not coeffs[-1]:
        coeffs.pop()
    return coeffs


def _from_univariate(coeffs, var):
    return ParamPoly({((var, i),) if i else (): c for i, c in enumerate(coeffs) if c})


def _udivmod(a, b):
    a = list(a)
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 1)
    lead = b[-1]
    while len(a) >= len(b) and any(a):
        shift = len(a) - len(b)
        f = a[-1] / lead
        q[shift] = f
        for i, bc in enumerate(b):
            a[shift + i] -= f * bc
        a.pop()
        while len(a) > 1 and not a[-1]:
            a.pop()
    return q, a


def _ugcd(a, b):
    while any(b):
        _, r = _udivmod(a, b)
        while len(r) > 1 and not r[-1]:
            r.pop()
        a, b = b, r
    lead = a[-1]
    return [c / lead for c in a]


# ---------------------------------------------------------------------------
# RatFunc

_ONE_POLY = ParamPoly.const(1)


class RatFunc:
    """Quotient of two ParamPolys.

    Equality is semantic (cross multiplication).  Normalisation cancels
    constants, monomial factors and univariate common factors; it is not a
    complete multivariate gcd, so two equal RatFuncs may print differently
    only in exotic multivariate cases.
    """

    __slots__ = ("num", "den")

    def __init__(self, num, den=None):
        if not isinstance(num, ParamPoly):
            num = ParamPoly.const(num)
        if den is None:
            self.num, self.den = num, _ONE_POLY
            return
        if not isinstance(den, ParamPoly):
            den = ParamPoly.const(den)
        self.num, self.den = _normalize(num, den)

    @classmethod
    def _raw(cls, num, den):
        obj = cls.__new__(cls)
        obj.num = num
        obj.den = den
        return obj

    @classmethod
    def const(cls, c) -> "RatFunc":
        return cls._raw(ParamPoly.const(c), _ONE_POLY)

    @classmethod
    def symbol(cls, name: str) -> "RatFunc":
        return cls._raw(ParamPoly.symbol(name), _ONE_POLY)

    def is_zero(self):
        return self.num.is_zero()

    def __bool__(self):
        return not self.num.is_zero()

    def is_poly(self):
        return self.den.is_constant()

    def is_constant(self):
        return self.num.is_constant() and self.den.is_constant()

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError(f"{self.render()} is not a constant")
        return self.num.constant_value() / self.den.constant_value()

    def params(self):
        return self.num.params() | self.den.params()

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = RatFunc.const(other)
        if isinstance(other, ParamPoly):
            other = RatFunc(other)
        if not isinstance(other, RatFunc):
            return NotImplemented
        return ratfunc_eq(self, other)

    __hash__ = None

    def _coerce(self, other):
        if isinstance(other, RatFunc):
            return other
        if isinstance(other, ParamPoly):
            return RatFunc._raw(other, _ONE_POLY)
        return RatFunc.const(other)

    def __add__(self, other):
        other = self._coerce(other)
        if self.den is _ONE_POLY and other.den is _ONE_POLY:
            return RatFunc._raw(self.num + other.num, _ONE_POLY)
        if self.den == other.den:
            return RatFunc(self.num + other.num, self.den)
        return RatFunc(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __neg__(self):
        return RatFunc._raw(-self.num, self.den)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        if self.den is _ONE_POLY and other.den is _ONE_POLY:
            return RatFunc._raw(self.num * other.num, _ONE_POLY)
        return RatFunc(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def inverse(self):
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero rational function")
        return RatFunc(self.den, self.num)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other.is_zero():
            raise ZeroDivisionError("division by zero rational function")
        if other.is_constant():
            return self * RatFunc.const(1 / other.constant_value())
        return RatFunc(self.num * other.den, self.den * other.num)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        if self.den is _ONE_POLY:
            return RatFunc._raw(self.num ** e, _ONE_POLY)
        return RatFunc._raw(self.num ** e, self.den ** e)

    def eval(self, bindings) -> Fraction:
        return ratfunc_eval(self, bindings)

    def render(self) -> str:
        if self.den is _ONE_POLY or self.den == _ONE_POLY:
            return self.num.render()
        return f"({self.num.render()})/({self.den.render()})"

    def is_simple(self):
        """True when the rendering is a single signed term."""
        return self.is_poly() and len(self.num.terms) <= 1

    def __repr__(self):
        return f"RatFunc({self.render()})"

    __str__ = render


def _normalize(num: ParamPoly, den: ParamPoly):
    if den.is_zero():
        raise ZeroDivisionError("rational function with zero denominator")
    if num.is_zero():
        return num, _ONE_POLY
    if den.is_constant():
        c = den.constant_value()
        return (num * (1 / c) if c != 1 else num), _ONE_POLY
    # common monomial factor
    common = None
    for m in list(num.terms) + list(den.terms):
        d = dict(m)
        if common is None:
            common = d
        else:
            common = {k: min(e, d[k]) for k, e in common.items() if k in d}
        if not common:
            break
    if common:
        def strip(p):
            out = {}
            for m, c in p.terms.items():
                out[tuple((k, e - common.get(k, 0)) for k, e in m if e - common.get(k, 0))] = c
            return ParamPoly._raw(out)

        num, den = strip(num), strip(den)
        if den.is_constant():
            return num * (1 / den.constant_value()), _ONE_POLY
    vars_ = num.params() | den.params()
    if len(vars_) == 1:
        (v,) = vars_
        un, ud = _as_univariate(num, v), _as_univariate(den, v)
        g = _ugcd(un, ud)
        if len(g) > 1:
            un, _ = _udivmod(un, g)
            ud, _ = _udivmod(ud, g)
            num, den = _from_univariate(un, v), _from_univariate(ud, v)
            if den.is_constant():
                return num * (1 / den.constant_value()), _ONE_POLY
    lead = den.leading()[1]
    if lead != 1:
        num, den = num * (1 / lead), den * (1 / lead)
    return num, den


def ratfunc_eq(a: RatFunc, b: RatFunc) -> bool:
    """Semantic equality by cross multiplication."""
    if a.den is _ONE_POLY and b.den is _ONE_POLY:
        return a.num == b.num
    return (a.num * b.den - b.num * a.den).is_zero()


def ratfunc_eval(a: RatFunc, bindings: Mapping[str, Fraction]) -> Fraction:
    d = a.den.eval(bindings)
    if d == 0:
        raise DenominatorZero(f"denominator {a.den.render()} vanishes at {_fmt_bindings(bindings)}")
    return a.num.eval(bindings) / d


def _fmt_bindings(bindings):
    return "{" + ", ".join(f"{k}={_frac_str(Fraction(v))}" for k, v in sorted(bindings.items())) + "}"


ZERO = RatFunc.const(0)
ONE = RatFunc.const(1)


def as_ratfunc(x) -> RatFunc:
    if isinstance(x, RatFunc):
        return x
    if isinstance(x, ParamPoly):
        return RatFunc(x)
    if isinstance(x, str):
        return RatFunc.symbol(x)
    return RatFunc.const(x)


# ---------------------------------------------------------------------------
# Poly: sparse polynomial over arbitrary atoms with RatFunc coefficients


class Poly:
    """Polynomial over hashable, mutually comparable atoms with RatFunc coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {m: c for m, c in (terms or {}).items() if c}

    @classmethod
    def _raw(cls, terms):
        obj = cls.__new__(cls)
        obj.terms = terms
        return obj

    @classmethod
    def const(cls, c) -> "Poly":
        c = as_ratfunc(c)
        return cls._raw({(): c} if c else {})

    @classmethod
    def atom(cls, a) -> "Poly":
        return cls._raw({((a, 1),): ONE})

    def is_zero(self):
        return not self.terms

    def __add__(self, other):
        if not isinstance(other, Poly):
            other = Poly.const(other)
        return Poly._raw(_terms_add(self.terms, other.terms))

    __radd__ = __add__

    def __neg__(self):
        return Poly._raw({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, Poly):
            other = Poly.const(other)
        return Poly._raw(_terms_add(self.terms, other.terms, -1))

    def __rsub__(self, other):
        return Poly.const(other) - self

    def __mul__(self, other):
        if isinstance(other, Poly):
            return Poly._raw(_terms_mul(self.terms, other.terms))
        return Poly._raw(_terms_scale(self.terms, as_ratfunc(other)))

    __rmul__ = __mul__

    def __pow__(self, e: int):
        out = Poly.const(1)
        base = self
        while e:
            if e & 1:
                out = out * base
            e >>= 1
            if e:
                base = base * base
        return out

    def atoms(self) -> set:
        return {a for m in self.terms for a, _ in m}

    def degree_in(self, pred) -> int:
        """Largest total degree counting only atoms satisfying ``pred``."""
        return max((sum(e for a, e in m if pred(a)) for m in self.terms), default=0)

    def split_by(self, atom):
        """Return {exponent of atom: Poly of the cofactor}."""
        out = {}
        for m, c in self.terms.items():
            e = 0
            rest = []
            for a, x in m:
                if a == atom:
                    e = x
                else:
                    rest.append((a, x))
            out.setdefault(e, {})[tuple(rest)] = c
        return {e: Poly._raw(t) for e, t in out.items()}

    def __repr__(self):
        return "Poly(" + " + ".join(f"{c.render()}*{m}" for m, c in self.terms.items()) + ")"


# ---------------------------------------------------------------------------
# NPoly: polynomial in the loop counter with RatFunc coefficients


class NPoly:
    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        cs = [as_ratfunc(c) for c in coeffs]
        while cs and cs[-1].is_zero():
            cs.pop()
        self.coeffs = tuple(cs)

    @classmethod
    def const(cls, c):
        return cls([c])

    @classmethod
    def n(cls):
        return cls([0, 1])

    def is_zero(self):
        return not self.coeffs

    def degree(self):
        return len(self.coeffs) - 1

    def coeff(self, i) -> RatFunc:
        return self.coeffs[i] if i < len(self.coeffs) else ZERO

    def __add__(self, other):
        k = max(len(self.coeffs), len(other.coeffs))
        return NPoly(self.coeff(i) + other.coeff(i) for i in range(k))

    def __neg__(self):
        return NPoly(-c for c in self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, NPoly):
            s = as_ratfunc(other)
            return NPoly(c * s for c in self.coeffs)
        if not self.coeffs or not other.coeffs:
            return NPoly()
        out = [ZERO] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + a * b
        return NPoly(out)

    def at(self, n: int) -> RatFunc:
        acc = ZERO
        for c in reversed(self.coeffs):
            acc = acc * n + c
        return acc

    def eval(self, n: int, bindings) -> Fraction:
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * n + ratfunc_eval(c, bindings)
        return acc

    def shift(self, s: int) -> "NPoly":
        """p(n + s)."""
        if s == 0 or not self.coeffs:
            return self
        out = [ZERO] * len(self.coeffs)
        for j, c in enumerate(self.coeffs):
            for i in range(j + 1):
                out[i] = out[i] + c * (comb(j, i) * Fraction(s) ** (j - i))
        return NPoly(out)

    def semantic_eq(self, other):
        k = max(len(self.coeffs), len(other.coeffs))
        return all(ratfunc_eq(self.coeff(i), other.coeff(i)) for i in range(k))

    def render(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for j in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[j]
            if c.is_zero():
                continue
            if j == 0:
                parts.append(c.render() if c.is_simple() or not parts else f"({c.render()})")
                continue
            nn = COUNTER if j == 1 else f"{COUNTER}^{j}"
            if c == ONE:
                parts.append(nn)
            elif c == -ONE:
                parts.append("-" + nn)
            elif c.is_simple():
                parts.append(f"{c.render()}*{nn}")
            else:
                parts.append(f"({c.render()})*{nn}")
        return _join_signed(parts)

    def __repr__(self):
        return f"NPoly({self.render()})"


# ---------------------------------------------------------------------------
# CFinite


class CFinite:
    """``sum(poly_j(n) * base_j**n)`` for n >= validity_start; ``prefix[n]`` before."""

    __slots__ = ("terms", "validity_start", "prefix")

    def __init__(self, terms=(), validity_start: int = 0, prefix=()):
        merged: list = []
        for base, poly in terms:
            base = as_ratfunc(base)
            if base.is_zero():
                raise ValueError("C-finite base must be nonzero")
            if not isinstance(poly, NPoly):
                poly = NPoly.const(poly)
            for i, (b, p) in enumerate(merged):
                if ratfunc_eq(b, base):
                    merged[i] = (b, p + poly)
                    break
            else:
                merged.append((base, poly))
        self.terms = tuple((b, p) for b, p in merged if not p.is_zero())
        prefix = tuple(as_ratfunc(v) for v in prefix)
        if len(prefix) != validity_start:
            raise ValueError("prefix length must equal validity_start")
        self.validity_start = validity_start
        self.prefix = prefix

    @classmethod
    def const(cls, c) -> "CFinite":
        return cls([(ONE, NPoly.const(c))])

    @classmethod
    def n(cls) -> "CFinite":
        return cls([(ONE, NPoly.n())])

    @classmethod
    def geometric(cls, base, coeff=1) -> "CFinite":
        return cls([(base, NPoly.const(coeff))])

    def is_zero(self):
        return not self.terms and all(v.is_zero() for v in self.prefix)

    def bases(self):
        return [b for b, _ in self.terms]

    def formula_at(self, n: int) -> RatFunc:
        acc = ZERO
        for base, poly in self.terms:
            acc = acc + poly.at(n) * base ** n
        return acc

    def at(self, n: int) -> RatFunc:
        """Symbolic value at a concrete counter value."""
        if n < self.validity_start:
            return self.prefix[n]
        return self.formula_at(n)

    def eval(self, n: int, bindings=None) -> Fraction:
        return cf_eval(self, n, bindings or {})

    def compact(self) -> "CFinite":
        """Drop trailing prefix entries that the term sum already reproduces."""
        k = self.validity_start
        while k > 0 and ratfunc_eq(self.prefix[k - 1], self.formula_at(k - 1)):
            k -= 1
        if k == self.validity_start:
            return self
        return CFinite(self.terms, k, self.prefix[:k])

    def term_poly(self, base) -> NPoly:
        base = as_ratfunc(base)
        for b, p in self.terms:
            if ratfunc_eq(b, base):
                return p
        return NPoly()

    def semantic_eq(self, other: "CFinite") -> bool:
        """Pointwise equality as sequences (identical threshold not required)."""
        vs = max(self.validity_start, other.validity_start)
        for n in range(vs):
            if not ratfunc_eq(self.at(n), other.at(n)):
                return False
        return formula_eq(self, other)

    def render(self) -> str:
        return render_cfinite(self)

    def __add__(self, other):
        return cf_add(self, as_cfinite(other))

    __radd__ = __add__

    def __neg__(self):
        return cf_scale(self, -ONE)

    def __sub__(self, other):
        return cf_add(self, cf_scale(as_cfinite(other), -ONE))

    def __rsub__(self, other):
        return as_cfinite(other) - self

    def __mul__(self, other):
        if isinstance(other, CFinite):
            return cf_mul(self, other)
        return cf_scale(self, as_ratfunc(other))

    __rmul__ = __mul__

    def __pow__(self, e: int):
        out = CFinite.const(1)
        for _ in range(e):
            out = cf_mul(out, self)
        return out

    def __repr__(self):
        return f"CFinite({self.render()})"


def as_cfinite(x) -> CFinite:
    if isinstance(x, CFinite):
        return x
    return CFinite.const(as_ratfunc(x))


def formula_eq(a: CFinite, b: CFinite) -> bool:
    """Equality of the term sums (ignores prefixes)."""
    for base, p in a.terms:
        if not p.semantic_eq(b.term_poly(base)):
            return False
    for base, p in b.terms:
        if not p.semantic_eq(a.term_poly(base)):
            return False
    return True


def _pointwise(a: CFinite, b: CFinite, op, terms):
    vs = max(a.validity_start, b.validity_start)
    prefix = [op(a.at(i), b.at(i)) for i in range(vs)]
    return CFinite(terms, vs, prefix)


def cf_add(a: CFinite, b: CFinite) -> CFinite:
    return _pointwise(a, b, lambda x, y: x + y, list(a.terms) + list(b.terms))


def cf_mul(a: CFinite, b: CFinite) -> CFinite:
    terms = [(ba * bb, pa * pb) for ba, pa in a.terms for bb, pb in b.terms]
    return _pointwise(a, b, lambda x, y: x * y, terms)


def cf_scale(a: CFinite, s) -> CFinite:
    s = as_ratfunc(s)
    return CFinite([(b, p * s) for b, p in a.terms], a.validity_start, [v * s for v in a.prefix])


def cf_eval(a: CFinite, n: int, bindings=None) -> Fraction:
    bindings = bindings or {}
    if n < a.validity_start:
        return ratfunc_eval(a.prefix[n], bindings)
    total = Fraction(0)
    for base, poly in a.terms:
        total += poly.eval(n, bindings) * ratfunc_eval(base, bindings) ** n
    return total


def cf_shift(a: CFinite, s: int) -> CFinite:
    """The sequence n -> a(n + s)."""
    if s < 0:
        raise ValueError("shift must be non-negative")
    if s == 0:
        return a
    terms = [(b, p.shift(s) * b ** s) for b, p in a.terms]
    vs = max(0, a.validity_start - s)
    return CFinite(terms, vs, a.prefix[s:s + vs])


def cf_delay(a: CFinite, first) -> CFinite:
    """The sequence ``first, a(0), a(1), ...`` i.e. n -> a(n - 1) with a(-1) := first."""
    terms = [(b, p.shift(-1) * b.inverse()) for b, p in a.terms]
    vs = max(1, a.validity_start + 1)
    prefix = [as_ratfunc(first)] + [a.at(i) for i in range(vs - 1)]
    return CFinite(terms, vs, prefix)


# ---------------------------------------------------------------------------
# canonical rendering


def _base_key(base: RatFunc):
    return (0, "") if base == ONE else (1, base.render())


def render_base(base: RatFunc) -> str:
    if base.is_constant():
        v = base.constant_value()
        if v > 0 and v.denominator == 1:
            return f"{v.numerator}^{COUNTER}"
    return f"({base.render()})^{COUNTER}"


def render_cfinite(a: CFinite, with_prefix=False) -> str:
    parts = []
    for base, poly in sorted(a.terms, key=lambda t: _base_key(t[0])):
        if base == ONE:
            parts.append(poly.render())
            continue
        b = render_base(base)
        if poly.degree() == 0 and poly.coeffs[0].is_simple():
            c = poly.coeffs[0]
            if c == ONE:
                parts.append(b)
            elif c == -ONE:
                parts.append("-" + b)
            else:
                parts.append(f"{c.render()}*{b}")
        else:
            parts.append(f"({poly.render()})*{b}")
    text = _join_signed(parts) if parts else "0"
    if with_prefix and a.validity_start:
        vals = ", ".join(v.render() for v in a.prefix)
        text += f"  [n >= {a.validity_start}; n < {a.validity_start}: {vals}]"
    return text


# ---------------------------------------------------------------------------
# parsing C-finite text (inverse of render_cfinite, also accepts hand-written forms)

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d+)?)|([A-Za-z_][A-Za-z0-9_]*)|(\*\*|[-+*/^()]))")


def _tokenize(text):
    pos = 0
    out = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", 1, pos + 1)
        num, ident, op = m.groups()
        if num is not None:
            out.append(("num", Fraction(num), m.start(1)))
        elif ident is not None:
            out.append(("id", ident, m.start(2)))
        else:
            out.append(("op", "^" if op == "**" else op, m.start(3)))
        pos = m.end()
    out.append(("end", None, len(text)))
    return out


def parse_cfinite(text: str, counter: str = COUNTER) -> CFinite:
    """Parse a closed form such as ``(2^n - 1)/2^n`` or ``9/16*n^2 + 1``.

    Identifiers other than the counter are parameters.  Division is allowed
    by anything that is a single exponential term ``c * base^n``.
    """
    toks = _tokenize(text)
    i = 0

    def peek():
        return toks[i]

    def take(kind=None, value=None):
        nonlocal i
        t = toks[i]
        if (kind and t[0] != kind) or (value is not None and t[1] != value):
            raise ParseError(f"expected {value or kind}, found {t[1]!r}", 1, t[2] + 1)
        i += 1
        return t

    def expr():
        v = term()
        while peek()[0] == "op" and peek()[1] in "+-":
            op = take()[1]
            r = term()
            v = v + r if op == "+" else v - r
        return v

    def term():
        v = unary()
        while peek()[0] == "op" and peek()[1] in "*/":
            op = take()[1]
            r = unary()
            v = cf_mul(v, r) if op == "*" else _cf_div(v, r, toks[i - 1][2])
        return v

    def unary():
        kind, value, _ = peek()
        if kind == "op" and value in "+-":
            take()
            return -unary() if value == "-" else unary()
        return power()

    def power():
        base_tok = peek()
        v = atom()
        if peek()[0] == "op" and peek()[1] == "^":
            take()
            t = peek()
            if t[0] == "id" and t[1] == counter:
                take()
                if len(v.terms) > 1 or v.validity_start or (v.terms and v.terms[0][1].degree() > 0):
                    raise ParseError("only constants can be raised to the counter", 1, base_tok[2] + 1)
                if not v.terms:
                    raise ParseError("0^n is not a valid base", 1, base_tok[2] + 1)
                base, p = v.terms[0]
                return CFinite.geometric(base * p.coeffs[0])
            if t[0] == "num" and t[1].denominator == 1:
                take()
                return v ** int(t[1])
            if t[0] == "op" and t[1] == "(":
                # allow n^(2) style
                take()
                e = take("num")[1]
                take("op", ")")
                return v ** int(e)
            raise ParseError("exponent must be a natural number or the counter", 1, t[2] + 1)
        return v

    def atom():
        t = take()
        if t[0] == "num":
            return CFinite.const(t[1])
        if t[0] == "id":
            if t[1] == counter:
                return CFinite.n()
            return CFinite.const(RatFunc.symbol(t[1]))
        if t[0] == "op" and t[1] == "(":
            v = expr()
            take("op", ")")
            return v
        raise ParseError(f"unexpected token {t[1]!r}", 1, t[2] + 1)

    result = expr()
    if peek()[0] != "end":
        raise ParseError(f"trailing input {peek()[1]!r}", 1, peek()[2] + 1)
    return result


def _cf_div(a: CFinite, b: CFinite, pos) -> CFinite:
    if len(b.terms) != 1 or b.validity_start or b.terms[0][1].degree() != 0:
        raise ParseError("divisor must be a single term c*base^n", 1, pos + 1)
    base, p = b.terms[0]
    c = p.coeffs[0]
    return cf_mul(a, CFinite.geometric(base.inverse(), c.inverse()))
