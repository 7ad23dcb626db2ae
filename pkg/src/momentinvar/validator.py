"""Independent oracles for solved moments.

Finite-support programs are pushed forward exactly, state by state, with
``Fraction`` probabilities.  Anything with a continuous draw goes through a
seeded, vectorised Monte Carlo run instead.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import distributions
from .algebra import cf_eval, ratfunc_eval
from .errors import InfiniteSupport, InvalidSupport, StateExplosion
from .frontend import DRAW, ValidatedProgram

BLOCK = 8192          # Monte Carlo runs per generator substream
DEFAULT_N_POINTS = (1, 2, 5, 10, 25, 50)


# ---------------------------------------------------------------------------
# compilation against concrete bindings


@dataclass
class _Step:
    slot: int
    branches: list      # of (prob Fraction, terms, draw occurrences)


def _compile_poly(poly, slots, bindings):
    terms = []
    draws = set()
    for mono, coef in poly.terms.items():
        factors = []
        for atom, e in mono:
            if atom[0] == DRAW:
                draws.add(atom[1])
                factors.append((DRAW, atom[1], e))
            else:
                factors.append(("S", slots[atom[1]], e))
        terms.append((ratfunc_eval(coef, bindings), factors))
    return terms, sorted(draws)


def _compile(vp: ValidatedProgram, bindings):
    slots = {v: i for i, v in enumerate(vp.order)}
    inits, body = [], []
    for var, branches in vp.inits:
        inits.append(_compile_update(slots[var], branches, slots, bindings))
    for var in vp.order:
        body.append(_compile_update(slots[var], vp.updates[var].branches, slots, bindings))
    return slots, inits, body


def _compile_update(slot, branches, slots, bindings):
    out = []
    for prob, rhs in branches:
        p = ratfunc_eval(prob, bindings)
        if not 0 <= p <= 1:
            raise InvalidSupport(f"branch probability {p} outside [0, 1]")
        terms, draws = _compile_poly(rhs, slots, bindings)
        out.append((p, terms, draws))
    return _Step(slot, out)


def _check_bindings(vp, bindings):
    bindings = {k: Fraction(v) for k, v in (bindings or {}).items()}
    missing = [p for p in vp.params if p not in bindings]
    if missing:
        raise ValueError(f"numeric values needed for parameters: {', '.join(missing)}")
    return bindings


# ---------------------------------------------------------------------------
# exact enumeration


def _eval_exact(terms, state, draw_vals):
    total = Fraction(0)
    for coef, factors in terms:
        v = coef
        for kind, ref, e in factors:
            v *= (draw_vals[ref] if kind == DRAW else state[ref]) ** e
        total += v
    return total


def _push(dist, step, supports, cap):
    out = {}
    for state, p in dist.items():
        for bp, terms, draws in step.branches:
            if not bp:
                continue
            for combo in itertools.product(*(supports[d] for d in draws)):
                dp = bp
                vals = {}
                for d, (value, q) in zip(draws, combo):
                    vals[d] = value
                    dp *= q
                new = list(state)
                new[step.slot] = _eval_exact(terms, state, vals)
                new = tuple(new)
                out[new] = out.get(new, 0) + p * dp
        if len(out) > cap:
            raise StateExplosion(f"more than {cap} distinct states")
    return out


def enumerate_exact(vp: ValidatedProgram, bindings, n_max: int, state_cap: int = 10**6):
    """Exact state distributions for n = 0..n_max, keyed by value tuples in ``vp.order``."""
    bindings = _check_bindings(vp, bindings)
    supports = {}
    for occ, spec in vp.draws.items():
        s = distributions.support(spec, bindings)
        if s is None:
            raise InfiniteSupport(f"draw #{occ} has a continuous distribution")
        supports[occ] = s
    slots, inits, body = _compile(vp, bindings)
    dist = {tuple(Fraction(0) for _ in slots): Fraction(1)}
    for step in inits:
        dist = _push(dist, step, supports, state_cap)
    out = [dist]
    for _ in range(n_max):
        for step in body:
            dist = _push(dist, step, supports, state_cap)
        out.append(dist)
    return out


def exact_moment(dist, vp, mono) -> Fraction:
    idx = {v: i for i, v in enumerate(vp.order)}
    total = Fraction(0)
    for state, p in dist.items():
        v = p
        for var, e in mono:
            v *= state[idx[var]] ** e
        total += v
    return total


def exact_central(dist, vp, var, j) -> Fraction:
    i = vp.order.index(var)
    mean = sum((s[i] * p for s, p in dist.items()), Fraction(0))
    return sum(((s[i] - mean) ** j * p for s, p in dist.items()), Fraction(0))


def exact_covariance(dist, vp, x, y) -> Fraction:
    i, j = vp.order.index(x), vp.order.index(y)
    mx = sum((s[i] * p for s, p in dist.items()), Fraction(0))
    my = sum((s[j] * p for s, p in dist.items()), Fraction(0))
    return sum(((s[i] - mx) * (s[j] - my) * p for s, p in dist.items()), Fraction(0))


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass
class Simulation:
    order: tuple
    runs: int
    seed: int
    samples: dict          # n -> ndarray (runs, variables)

    def column(self, var, n):
        return self.samples[n][:, self.order.index(var)]

    def moment(self, mono, n):
        """Sample mean of the monomial at step n and its standard error."""
        vals = np.ones(self.runs)
        for var, e in mono:
            vals = vals * self.column(var, n) ** e
        return _mean_se(vals)

    def central(self, var, j, n):
        x = self.column(var, n)
        return _mean_se((x - x.mean()) ** j)

    def covariance(self, x, y, n):
        a, b = self.column(x, n), self.column(y, n)
        return _mean_se((a - a.mean()) * (b - b.mean()))


def _mean_se(vals):
    if len(vals) < 2:
        return float(vals.mean()), math.inf
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))


def _eval_float(terms, state, draw_vals, size):
    total = np.zeros(size)
    for coef, factors in terms:
        v = np.full(size, float(coef))
        for kind, ref, e in factors:
            base = draw_vals[ref] if kind == DRAW else state[:, ref]
            v = v * (base if e == 1 else base ** e)
        total += v
    return total


def _apply_float(state, step, specs, bindings, rng):
    size = state.shape[0]
    if len(step.branches) == 1:
        _, terms, draws = step.branches[0]
        vals = {d: distributions.sample(specs[d], bindings, rng, size) for d in draws}
        state[:, step.slot] = _eval_float(terms, state, vals, size)
        return
    u = rng.random(size)
    results = []
    for _, terms, draws in step.branches:
        vals = {d: distributions.sample(specs[d], bindings, rng, size) for d in draws}
        results.append(_eval_float(terms, state, vals, size))
    new = results[-1]
    edge = 0.0
    chosen = np.zeros(size, dtype=bool)
    for (p, _, _), res in zip(step.branches[:-1], results[:-1]):
        edge += float(p)
        pick = (u < edge) & ~chosen
        new = np.where(pick, res, new)
        chosen |= pick
    state[:, step.slot] = new


def simulate(vp: ValidatedProgram, bindings, n_iters: int, runs: int, seed: int = 0,
             checkpoints=None) -> Simulation:
    """Run the loop ``runs`` times for ``n_iters`` iterations.

    Runs are processed in blocks of ``BLOCK``; block ``b`` draws from the
    substream ``SeedSequence(seed, spawn_key=(b,))`` so results depend only
    on (seed, runs, n_iters, bindings).
    """
    bindings = _check_bindings(vp, bindings)
    checkpoints = sorted(set(range(n_iters + 1) if checkpoints is None else checkpoints))
    if checkpoints and checkpoints[-1] > n_iters:
        raise ValueError("checkpoint beyond n_iters")
    slots, inits, body = _compile(vp, bindings)
    parts = {n: [] for n in checkpoints}
    for b in range(math.ceil(runs / BLOCK)):
        size = min(BLOCK, runs - b * BLOCK)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))
        state = np.zeros((size, len(slots)))
        for step in inits:
            _apply_float(state, step, vp.draws, bindings, rng)
        for n in range(n_iters + 1):
            if n:
                for step in body:
                    _apply_float(state, step, vp.draws, bindings, rng)
            if n in parts:
                parts[n].append(state.copy())
    samples = {n: np.concatenate(blocks) for n, blocks in parts.items()}
    return Simulation(tuple(vp.order), runs, seed, samples)


# ---------------------------------------------------------------------------
# checking a report


@dataclass
class CheckConfig:
    n_points: tuple = DEFAULT_N_POINTS
    n_max: int | None = None
    runs: int = 100_000
    seed: int = 0
    z_max: float = 4.0
    abs_floor: float = 1e-9
    exact_n_max: int = 8
    state_cap: int = 10**6
    prefer_exact: bool = True


@dataclass
class CheckEntry:
    label: str
    n: int
    observed: object        # Fraction on the exact path, float otherwise
    stderr: float
    expected: object
    z: float
    passed: bool

    def to_json(self):
        return {
            "moment": self.label,
            "n": self.n,
            "observed": str(self.observed),
            "stderr": self.stderr,
            "expected": str(self.expected),
            "z": None if math.isinf(self.z) else self.z,
            "pass": self.passed,
        }


@dataclass
class MCReport:
    program: str
    method: str             # "exact" or "monte-carlo"
    bindings: dict
    runs: int = 0
    seed: int = 0
    entries: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self):
        return [e for e in self.entries if not e.passed]

    def to_json(self) -> dict:
        return {
            "program": self.program,
            "method": self.method,
            "bindings": {k: str(v) for k, v in self.bindings.items()},
            "runs": self.runs,
            "seed": self.seed,
            "pass": self.passed,
            "checks": [e.to_json() for e in self.entries],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    def render_text(self) -> str:
        head = f"{self.program}: {self.method}"
        if self.method != "exact":
            head += f", {self.runs} runs, seed {self.seed}"
        lines = [head]
        for e in self.entries:
            mark = "ok  " if e.passed else "FAIL"
            if self.method == "exact":
                lines.append(f"{mark} {e.label} n={e.n}: {e.observed} vs {e.expected}")
            else:
                lines.append(f"{mark} {e.label} n={e.n}: {e.observed:.6g} +- {e.stderr:.2g} "
                             f"vs {float(e.expected):.6g} (z={e.z:.2f})")
        failed = len(self.failures())
        lines.append(f"{len(self.entries) - failed}/{len(self.entries)} checks passed")
        return "\n".join(lines) + "\n"


def _targets(report):
    """(label, form, kind, args) for every moment in the report."""
    out = [(e.label(), e.form, e.kind, (e.variable, e.order, e.with_)) for e in report.entries]
    for name, form in report.mixed.items():
        mono = tuple((v, int(e) if e else 1) for v, _, e in (p.partition("^") for p in name.split("*")))
        out.append((f"E[({name})(n)]", form, "mixed", mono))
    return out


def check(report, vp: ValidatedProgram, bindings, config: CheckConfig | None = None) -> MCReport:
    """Compare every closed form in ``report`` against an oracle."""
    config = config or CheckConfig()
    bindings = _check_bindings(vp, bindings)
    name = report.program
    if config.prefer_exact:
        try:
            dists = enumerate_exact(vp, bindings, config.exact_n_max, config.state_cap)
        except (InfiniteSupport, StateExplosion):
            dists = None
        if dists is not None:
            return _check_exact(report, vp, bindings, dists, name)
    return _check_mc(report, vp, bindings, config, name)


def _check_exact(report, vp, bindings, dists, name):
    out = MCReport(name, "exact", bindings)
    for label, form, kind, args in _targets(report):
        for n, dist in enumerate(dists):
            if kind == "raw":
                truth = exact_moment(dist, vp, ((args[0], args[1]),))
            elif kind == "mixed":
                truth = exact_moment(dist, vp, args)
            elif kind == "covariance":
                truth = exact_covariance(dist, vp, args[0], args[2])
            else:
                truth = exact_central(dist, vp, args[0], args[1])
            value = cf_eval(form, n, bindings)
            ok = value == truth
            out.entries.append(CheckEntry(label, n, truth, 0.0, value, 0.0 if ok else math.inf, ok))
    return out


def _check_mc(report, vp, bindings, config, name):
    points = sorted(n for n in config.n_points if config.n_max is None or n <= config.n_max)
    sim = simulate(vp, bindings, max(points, default=0), config.runs, config.seed, points)
    out = MCReport(name, "monte-carlo", bindings, config.runs, config.seed)
    for label, form, kind, args in _targets(report):
        for n in points:
            if kind == "raw":
                mean, se = sim.moment(((args[0], args[1]),), n)
            elif kind == "mixed":
                mean, se = sim.moment(args, n)
            elif kind == "covariance":
                mean, se = sim.covariance(args[0], args[2], n)
            else:
                mean, se = sim.central(args[0], args[1], n)
            expected = cf_eval(form, n, bindings)
            gap = abs(mean - float(expected))
            z = gap / se if se > 0 else (0.0 if gap <= config.abs_floor else math.inf)
            ok = gap <= config.z_max * se + config.abs_floor
            out.entries.append(CheckEntry(label, n, mean, se, expected, z, ok))
    return out
