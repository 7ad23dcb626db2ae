"""Command-line driver: analyze, check and bench."""
from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .errors import MissingMoment, MomentInvarError, ParseError
from .frontend import load
from .invariants import analyze
from .validator import CheckConfig, DEFAULT_N_POINTS, check

GOLDEN_VERSION = "v1"

# display name -> file under corpus/
CORPUS = (
    ("Coupon", "coupon.psl"),
    ("Coupon4", "coupon4.psl"),
    ("Random_walk_1D_cts", "random_walk_1d_cts.psl"),
    ("Sum_rnd_series", "sum_rnd_series.psl"),
    ("Product_dep_var", "product_dep_var.psl"),
    ("Random_walk_2D", "random_walk_2d.psl"),
    ("Binomial", "binomial.psl"),
    ("StutteringP", "stuttering_p.psl"),
    ("Square", "square.psl"),
    ("StutteringA", "stuttering_a.psl"),
    ("Multipath_demo", "multipath_demo.psl"),
)


def corpus() -> list[tuple[str, str]]:
    """The shipped benchmark programs as (name, source) pairs."""
    root = resources.files("momentinvar") / "corpus"
    return [(name, (root / fname).read_text()) for name, fname in CORPUS]


def default_bindings(source: str) -> dict:
    """Values from ``# bind: p=1/2, d=1`` header comments."""
    out = {}
    for line in source.splitlines():
        line = line.strip()
        if line.startswith("# bind:"):
            for item in line[len("# bind:"):].split(","):
                if item.strip():
                    k, v = parse_binding(item)
                    out[k] = v
    return out


def parse_binding(text: str):
    name, sep, value = text.partition("=")
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return name.strip(), Fraction(value.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"{value.strip()!r} is not a rational number") from None


def golden_dir() -> Path:
    return Path(str(resources.files("momentinvar") / "golden" / GOLDEN_VERSION))


def _slug(name: str) -> str:
    return name.lower()


# ---------------------------------------------------------------------------


def _moments_arg(text):
    k = int(text)
    if k < 1:
        raise argparse.ArgumentTypeError("moment order must be at least 1")
    return k


def _cov_arg(text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2 or not all(parts):
        raise argparse.ArgumentTypeError(f"expected x,y, got {text!r}")
    return tuple(parts)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="momentinvar",
                                 description="Moment invariants of Prob-solvable loops.")
    sub = ap.add_subparsers(dest="command", required=True)

    def moment_flags(p):
        p.add_argument("file", help="program source (.psl)")
        p.add_argument("--moments", "-k", type=_moments_arg, default=1, metavar="K",
                       help="raw moments 1..K of every variable (default 1)")
        p.add_argument("--central", action="store_true", help="also report central moments 2..K")
        p.add_argument("--var", action="store_true", help="also report variances")
        p.add_argument("--cov", type=_cov_arg, action="append", default=[], metavar="X,Y",
                       help="report Cov[X, Y]; repeatable")
        p.add_argument("--format", choices=("text", "json"), default="text")
        p.add_argument("--out", help="write the report here instead of stdout")

    a = sub.add_parser("analyze", help="solve moment recurrences symbolically")
    moment_flags(a)
    a.add_argument("--recurrences", action="store_true", help="print the recurrence system first")

    c = sub.add_parser("check", help="validate closed forms against exact or sampled moments")
    moment_flags(c)
    c.add_argument("--param", type=parse_binding, action="append", default=[], metavar="NAME=VALUE")
    c.add_argument("--runs", type=int, default=100_000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--n-max", type=int, default=None,
                   help="largest checkpoint for Monte Carlo runs")
    c.add_argument("--monte-carlo", action="store_true",
                   help="sample even when exact enumeration is possible")

    b = sub.add_parser("bench", help="run the corpus against the golden files")
    b.add_argument("--filter", default=None, help="only programs whose name contains this")
    b.add_argument("--moments", "-k", type=_moments_arg, default=3)
    b.add_argument("--update-golden", action="store_true",
                   help="rewrite golden files (only for programs passing check)")
    return ap


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_file(path):
    source = Path(path).read_text()
    return source, load(source, Path(path).stem)


def _report(vp, args):
    for pair in args.cov:
        for v in pair:
            if v not in vp.order:
                raise MissingMoment(f"{v!r} is not a program variable")
    return analyze(vp, args.moments, central=args.central, variance_of=args.var or None,
                   covariances=tuple(args.cov))


def cmd_analyze(args) -> int:
    _, vp = _load_file(args.file)
    report = _report(vp, args)
    if args.format == "json":
        text = report.dumps() + "\n"
    else:
        text = report.render_text()
        if args.recurrences:
            text = report.system.dump() + "\n\n" + text
    _emit(text, args.out)
    return 0


def cmd_check(args) -> int:
    source, vp = _load_file(args.file)
    bindings = default_bindings(source)
    bindings.update(dict(args.param))
    missing = [p for p in vp.params if p not in bindings]
    if missing:
        print(f"error: missing --param for {', '.join(missing)}", file=sys.stderr)
        return 2
    report = _report(vp, args)
    n_points = DEFAULT_N_POINTS
    if args.n_max is not None:
        n_points = tuple(n for n in DEFAULT_N_POINTS if n <= args.n_max) or (args.n_max,)
    config = CheckConfig(n_points=n_points, n_max=args.n_max, runs=args.runs, seed=args.seed,
                         prefer_exact=not args.monte_carlo)
    result = check(report, vp, bindings, config)
    _emit(result.dumps() + "\n" if args.format == "json" else result.render_text(), args.out)
    return 0 if result.passed else 1


def _bench_one(name, source, k):
    start = time.perf_counter()
    vp = load(source, name)
    report = analyze(vp, k)
    elapsed = time.perf_counter() - start
    return vp, report, elapsed


def cmd_bench(args) -> int:
    programs = [(n, s) for n, s in corpus() if not args.filter or args.filter.lower() in n.lower()]
    if not programs:
        print("no corpus program matches the filter", file=sys.stderr)
        return 1
    threads = max(1, int(os.environ.get("MOMENT_INVAR_THREADS", "1")))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda p: _bench_one(p[0], p[1], args.moments), programs))
    gdir = golden_dir()
    failures = 0
    total = 0.0
    for (name, source), (vp, report, elapsed) in zip(programs, results):
        total += elapsed
        text = report.render_text()
        path = gdir / f"{_slug(name)}.k{args.moments}.txt"
        if args.update_golden:
            verdict = check(report, vp, default_bindings(source))
            if not verdict.passed:
                status = "NOT UPDATED (check failed)"
                failures += 1
            else:
                gdir.mkdir(parents=True, exist_ok=True)
                path.write_text(text)
                status = "updated"
        elif not path.exists():
            status = "MISSING GOLDEN"
            failures += 1
        elif path.read_text() == text:
            status = "ok"
        else:
            status = "MISMATCH"
            failures += 1
        print(f"{name:<20} k={args.moments}  {status:<28} {elapsed:8.3f} s")
    passed = len(programs) - failures
    print(f"{passed}/{len(programs)} programs passed, total {total:.3f} s")
    return 0 if failures == 0 else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"analyze": cmd_analyze, "check": cmd_check, "bench": cmd_bench}[args.command]
    try:
        return handler(args)
    except ParseError as exc:
        print(f"error: ParseError: {exc}", file=sys.stderr)
        return 2
    except MomentInvarError as exc:
        msg = str(exc)
        name = type(exc).__name__
        print(f"error: {msg if msg.startswith(name) else f'{name}: {msg}'}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
