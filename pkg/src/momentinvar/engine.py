"""Moment-based recurrences over E-variables.

``step_expectation`` rewrites ``E[M(n+1)]`` into a linear combination of
step-``n`` E-variables; ``build_system`` closes a target set under that
rewrite, checking on every recurrence that all other monomials are strictly smaller.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .algebra import ONE, ZERO, Poly, RatFunc
from .distributions import raw_moment
from .errors import BoundExceeded, OrderingViolation
from .frontend import DRAW, NEW, VAR, ValidatedProgram

# An EMonomial is a tuple of (variable, exponent) pairs, exponents positive,
# sorted by the program's assignment order.  () is the constant monomial.


def emonomial(vp: ValidatedProgram, exps) -> tuple:
    if isinstance(exps, dict):
        exps = exps.items()
    items = [(v, e) for v, e in exps if e]
    for v, _ in items:
        if v not in vp.index:
            raise KeyError(f"{v!r} is not a program variable")
    merged = {}
    for v, e in items:
        merged[v] = merged.get(v, 0) + e
    return tuple(sorted(merged.items(), key=lambda t: vp.index[t[0]]))


def parse_monomial(vp: ValidatedProgram, text: str) -> tuple:
    """``"x*y^2"`` -> EMonomial."""
    exps = []
    for part in text.replace(" ", "").split("*"):
        name, _, e = part.partition("^")
        exps.append((name, int(e) if e else 1))
    return emonomial(vp, exps)


def render_monomial(m) -> str:
    if not m:
        return "1"
    return "*".join(v if e == 1 else f"{v}^{e}" for v, e in m)


def total_degree(m) -> int:
    return sum(e for _, e in m)


def sigma_ord(vp: ValidatedProgram, m) -> tuple:
    """Exponent vector from last-assigned to first-assigned variable.

    Lexicographic comparison of these vectors is the ordinal order
    ``w^m*a_m + ... + a_1``.
    """
    exps = dict(m)
    return tuple(exps.get(v, 0) for v in reversed(vp.order))


@dataclass
class MomentRecurrence:
    target: tuple
    self_coeff: RatFunc
    lin: dict            # EMonomial -> RatFunc
    const: RatFunc

    def render(self) -> str:
        parts = [f"{_coef(self.self_coeff)}E[{render_monomial(self.target)}][n]"]
        for m, c in self.lin.items():
            parts.append(f"{_coef(c)}E[{render_monomial(m)}][n]")
        parts.append(self.const.render())
        return f"E[{render_monomial(self.target)}][n+1] = " + " + ".join(parts)


def _coef(c):
    return f"({c.render()})*"


@dataclass
class RecurrenceSystem:
    recurrences: list                    # ascending sigma_ord
    initials: dict                       # EMonomial -> RatFunc
    targets: tuple = ()
    bound: int = 0                       # termination_bound: k^m * prod d_i^(i-1)
    closure_sizes: dict = field(default_factory=dict)   # root target -> monomials reachable
    guard: int = 0                       # monomial_guard, enforced while building

    def by_target(self):
        return {r.target: r for r in self.recurrences}

    def dump(self) -> str:
        return "\n".join(r.render() for r in self.recurrences)

    @property
    def processed(self) -> int:
        return len(self.recurrences)


# ---------------------------------------------------------------------------
# substitution machinery shared by step and initial expectations


class _Expander:
    """Expands products of variables by their (branching) definitions."""

    def __init__(self, vp, defs, atom_kind):
        self.vp = vp
        self.defs = defs          # var -> tuple of (prob, Poly)
        self.kind = atom_kind     # which atoms are still to be substituted
        self._pow_cache = {}

    def power(self, v, e) -> Poly:
        key = (v, e)
        p = self._pow_cache.get(key)
        if p is None:
            p = Poly()
            for prob, rhs in self.defs[v]:
                if prob:
                    p = p + (rhs ** e) * prob
            self._pow_cache[key] = p
        return p

    def expand(self, poly: Poly, rank) -> Poly:
        """Substitute pending atoms, latest (by ``rank``) first, until none remain."""
        while True:
            pending = {a for a in poly.atoms() if a[0] == self.kind}
            if not pending:
                return poly
            atom = max(pending, key=lambda a: rank[a[1]])
            out = {}
            for e, cof in poly.split_by(atom).items():
                piece = cof if e == 0 else cof * self.power(atom[1], e)
                for m, c in piece.terms.items():
                    v = out.get(m)
                    v = c if v is None else v + c
                    if v:
                        out[m] = v
                    else:
                        out.pop(m, None)
            poly = Poly._raw(out)


def _take_draw_moments(vp, poly: Poly) -> dict:
    """Replace draw powers by raw moments; returns {remaining monomial: coefficient}."""
    out = {}
    for m, c in poly.terms.items():
        rest = []
        for a, e in m:
            if a[0] == DRAW:
                c = c * raw_moment(vp.draws[a[1]], e)
            else:
                rest.append((a, e))
        if not c:
            continue
        key = tuple(rest)
        v = out.get(key)
        v = c if v is None else v + c
        if v:
            out[key] = v
        else:
            out.pop(key, None)
    return out


def _expander(vp, slot, factory):
    # cached on the instance; ValidatedProgram is frozen but owns a __dict__
    ex = vp.__dict__.get(slot)
    if ex is None:
        ex = vp.__dict__[slot] = factory()
    return ex


def step_expectation(vp: ValidatedProgram, m) -> MomentRecurrence:
    """E[M(n+1)] = c*E[M(n)] + sum lin[N]*E[N(n)] + const."""
    ex = _expander(vp, "_step_expander",
                   lambda: _Expander(vp, {v: u.branches for v, u in vp.updates.items()}, NEW))
    poly = Poly._raw({tuple(sorted(((NEW, v), e) for v, e in m)): ONE})
    poly = ex.expand(poly, vp.index)
    collected = _take_draw_moments(vp, poly)
    self_coeff, const, lin = ZERO, ZERO, {}
    for key, c in collected.items():
        mono = emonomial(vp, [(a[1], e) for a, e in key])
        if mono == m:
            self_coeff = self_coeff + c
        elif not mono:
            const = const + c
        else:
            lin[mono] = lin[mono] + c if mono in lin else c
    lin = {k: v for k, v in lin.items() if v}
    return MomentRecurrence(m, self_coeff, lin, const)


def initial_expectation(vp: ValidatedProgram, m) -> RatFunc:
    """E[M(0)] from the initial assignments (draws independent)."""
    ex = _expander(vp, "_init_expander", lambda: _Expander(vp, dict(vp.inits), VAR))
    rank = {v: i for i, (v, _) in enumerate(vp.inits)}
    poly = Poly._raw({tuple(sorted(((VAR, v), e) for v, e in m)): ONE})
    poly = ex.expand(poly, rank)
    collected = _take_draw_moments(vp, poly)
    return collected.get((), ZERO)


def termination_bound(vp: ValidatedProgram, k: int) -> int:
    """k^m * prod_{i=2..m} d_i^(i-1) over the body variables in order."""
    b = k ** len(vp.order)
    for i, v in enumerate(vp.order, start=1):
        b *= vp.updates[v].degree ** (i - 1)
    return b


def monomial_guard(vp: ValidatedProgram, k: int) -> int:
    """Number of nonconstant monomials with alpha_i <= k * prod_{j>i} d_j.

    Substituting an update never raises the weighted degree
    sum alpha_i / prod_{j>i} d_j, so every monomial reachable from targets of
    degree <= k satisfies these limits.  Unlike ``termination_bound`` this
    counts the zero exponent, so it also holds for small k.
    """
    total, scale = 1, 1
    for v in reversed(vp.order):
        total *= k * scale + 1
        scale *= vp.updates[v].degree
    return total - 1


def build_system(vp: ValidatedProgram, targets) -> RecurrenceSystem:
    targets = [emonomial(vp, t) if not isinstance(t, tuple) else t for t in targets]
    targets = [t for t in dict.fromkeys(targets) if t]
    if not targets:
        return RecurrenceSystem([], {}, (), 0, {})
    k = max(total_degree(t) for t in targets)
    bound = termination_bound(vp, k)
    guard = monomial_guard(vp, k)
    recs = {}
    work = list(targets)
    while work:
        m = work.pop()
        if m in recs:
            continue
        r = step_expectation(vp, m)
        key = sigma_ord(vp, m)
        for n in r.lin:
            if not sigma_ord(vp, n) < key:
                raise OrderingViolation(
                    f"E[{render_monomial(m)}] depends on E[{render_monomial(n)}], which is not smaller")
            if n not in recs:
                work.append(n)
        recs[m] = r
        if len(recs) > guard:
            raise BoundExceeded(f"more than {guard} monomials processed for moment order {k}")
    closure = {}
    for t in targets:
        seen = {t}
        stack = [t]
        while stack:
            for n in recs[stack.pop()].lin:
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        closure[t] = len(seen)
    ordered = sorted(recs.values(), key=lambda r: sigma_ord(vp, r.target))
    initials = {r.target: initial_expectation(vp, r.target) for r in ordered}
    return RecurrenceSystem(ordered, initials, tuple(targets), bound, closure, guard)
