"""Moment invariants for Prob-solvable loops.

Typical use::

    from momentinvar import load, analyze
    vp = load(open("binomial.psl").read())
    print(analyze(vp, 2).render_text())
"""
from .algebra import CFinite, RatFunc, cf_eval, parse_cfinite, render_cfinite
from .engine import build_system
from .errors import MomentInvarError
from .frontend import load, parse, validate
from .invariants import InvariantReport, analyze
from .solver import solve_system
from .validator import CheckConfig, check, enumerate_exact, simulate

__version__ = "0.1.0"

__all__ = [
    "CFinite", "RatFunc", "cf_eval", "parse_cfinite", "render_cfinite", "build_system",
    "MomentInvarError", "load", "parse", "validate", "InvariantReport", "analyze",
    "solve_system", "CheckConfig", "check", "enumerate_exact", "simulate",
]
