"""User-facing moment invariants: raw, central, variance, covariance, skewness."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb

from .algebra import CFinite, RatFunc, cf_add, cf_eval, cf_mul, cf_scale, render_cfinite
from .engine import RecurrenceSystem, build_system, emonomial, render_monomial
from .errors import MissingMoment, ZeroVariance
from .frontend import ValidatedProgram
from .solver import ClosedFormSet, solve_system


@dataclass
class MomentEntry:
    variable: str
    order: int
    kind: str                    # raw | central | variance | covariance
    form: CFinite
    with_: str | None = None

    def label(self) -> str:
        if self.kind == "raw":
            power = "" if self.order == 1 else f"^{self.order}"
            return f"E[{self.variable}{power}(n)]"
        if self.kind == "variance":
            return f"Var[{self.variable}(n)]"
        if self.kind == "covariance":
            return f"Cov[{self.variable}(n), {self.with_}(n)]"
        return f"E[({self.variable} - E[{self.variable}])^{self.order}(n)]"


@dataclass
class InvariantReport:
    program: str
    params: tuple
    k: int
    entries: list
    forms: ClosedFormSet
    system: RecurrenceSystem
    side_conditions: list = field(default_factory=list)
    mixed: dict = field(default_factory=dict)        # rendered monomial -> CFinite

    def raw(self, var, j) -> CFinite:
        for e in self.entries:
            if e.kind == "raw" and e.variable == var and e.order == j:
                return e.form
        raise MissingMoment(f"E[{var}^{j}] not in report")

    def render_text(self) -> str:
        lines = []
        for e in self.entries:
            lines.append(f"{e.label()} = {render_cfinite(e.form)}" + _validity_note(e))
        for name, form in self.mixed.items():
            lines.append(f"E[({name})(n)] = {render_cfinite(form)}")
        if self.side_conditions:
            lines.append("# valid when: " + "; ".join(self.side_conditions))
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        moments = []
        for e in self.entries:
            item = {
                "variable": e.variable,
                "order": e.order,
                "kind": e.kind,
                "validity_start": e.form.validity_start,
                "prefix": [v.render() for v in e.form.prefix],
                "terms": [{"base": b.render(), "poly": [c.render() for c in p.coeffs]}
                          for b, p in sorted(e.form.terms, key=lambda t: _base_sort(t[0]))],
                "side_conditions": list(self.side_conditions),
            }
            if e.with_ is not None:
                item["with"] = e.with_
            moments.append(item)
        return {"program": self.program, "params": list(self.params), "moments": moments}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _base_sort(b):
    r = b.render()
    return (0, "") if r == "1" else (1, r)


def _validity_note(e: MomentEntry) -> str:
    f = e.form
    if not f.validity_start:
        return ""
    vals = ", ".join(f"{e.label().replace('(n)', f'({i})')} = {v.render()}" for i, v in enumerate(f.prefix))
    return f"    (for n >= {f.validity_start}; {vals})"


# ---------------------------------------------------------------------------


def _raw_form(forms: ClosedFormSet, var: str, j: int) -> CFinite:
    if j == 0:
        return CFinite.const(1)
    m = ((var, j),)
    if m not in forms:
        raise MissingMoment(f"no closed form for E[{render_monomial(m)}]")
    return forms[m]


def central_moment(forms: ClosedFormSet, var: str, j: int) -> CFinite:
    """E[(x - E[x])^j] by the binomial change of centre."""
    mean = _raw_form(forms, var, 1)
    neg_mean = cf_scale(mean, -1)
    total = CFinite()
    power = CFinite.const(1)
    powers = [power]
    for _ in range(j):
        power = cf_mul(power, neg_mean)
        powers.append(power)
    for i in range(j + 1):
        total = cf_add(total, cf_scale(cf_mul(_raw_form(forms, var, i), powers[j - i]), comb(j, i)))
    return total.compact()


def variance(forms: ClosedFormSet, var: str) -> CFinite:
    mean = _raw_form(forms, var, 1)
    return cf_add(_raw_form(forms, var, 2), cf_scale(cf_mul(mean, mean), -1)).compact()


def covariance(forms: ClosedFormSet, x: str, y: str, vp: ValidatedProgram | None = None) -> CFinite:
    if x == y:
        return variance(forms, x)
    key = emonomial(vp, [(x, 1), (y, 1)]) if vp is not None else None
    if key is None:
        cands = [m for m in forms.forms if sorted(m) == sorted([(x, 1), (y, 1)])]
        if not cands:
            raise MissingMoment(f"no closed form for E[{x}*{y}]")
        key = cands[0]
    if key not in forms:
        raise MissingMoment(f"no closed form for E[{x}*{y}]")
    mx, my = _raw_form(forms, x, 1), _raw_form(forms, y, 1)
    return cf_add(forms[key], cf_scale(cf_mul(mx, my), -1)).compact()


def skewness_at(forms: ClosedFormSet, var: str, n: int, bindings) -> float:
    var_n = cf_eval(variance(forms, var), n, bindings)
    if var_n <= 0:
        raise ZeroVariance(f"Var[{var}({n})] = {var_n}")
    mu3 = cf_eval(central_moment(forms, var, 3), n, bindings)
    return float(mu3) / float(var_n) ** 1.5


def side_conditions(forms) -> list:
    """Parameter expressions that must be nonzero for the forms to hold."""
    seen = {}

    def note(rf: RatFunc):
        if not rf.den.is_constant():
            seen.setdefault(rf.den.render(), None)

    for form in forms:
        for base, poly in form.terms:
            note(base)
            if not base.num.is_constant():
                seen.setdefault(base.num.render(), None)
            for c in poly.coeffs:
                note(c)
        for v in form.prefix:
            note(v)
    return [f"{s} != 0" for s in sorted(seen)]


def analyze(vp: ValidatedProgram, k: int, *, central=False, variance_of=None,
            covariances=(), monomials=()) -> InvariantReport:
    """Raw moments 1..k of every variable plus the requested derived moments.

    ``variance_of``: None for no variances, True for every variable, or an
    iterable of variable names.  ``covariances``: pairs (x, y).
    ``monomials``: extra mixed EMonomials to solve and report.
    """
    if k < 1:
        raise ValueError("moment order k must be at least 1")
    need = max(k, 2) if (central or variance_of or covariances) else k
    if central:
        need = max(need, k)
    targets = [((v, j),) for v in vp.order for j in range(1, need + 1)]
    for x, y in covariances:
        if x != y:
            targets.append(emonomial(vp, [(x, 1), (y, 1)]))
    targets += [m for m in monomials]
    system = build_system(vp, targets)
    forms = solve_system(system)
    entries = [MomentEntry(v, j, "raw", forms[((v, j),)]) for v in vp.order for j in range(1, k + 1)]
    if central:
        for v in vp.order:
            for j in range(2, k + 1):
                entries.append(MomentEntry(v, j, "central", central_moment(forms, v, j)))
    if variance_of:
        names = vp.order if variance_of is True else list(variance_of)
        for v in names:
            entries.append(MomentEntry(v, 2, "variance", variance(forms, v)))
    for x, y in covariances:
        entries.append(MomentEntry(x, 2, "covariance", covariance(forms, x, y, vp), with_=y))
    mixed = {render_monomial(m): forms[m] for m in monomials}
    report = InvariantReport(vp.name or "program", vp.params, k, entries, forms, system, mixed=mixed)
    report.side_conditions = side_conditions([e.form for e in entries] + list(mixed.values()))
    return report
