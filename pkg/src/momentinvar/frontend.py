"""Parser, validator and multipath desugaring for the loop DSL.

Source shape::

    x := 0; y := 1          # initial assignments (';' separates)
    while true:
        f := 1 [3/4] 0      # probabilistic branch
        x := x + f*u(1-d, 1+d)
        if flip(1/2):       # optional multipath block
            y := y + 1
        else:
            y := y - 1

Identifiers that are never assigned are symbolic parameters.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Union

from . import errors
from .algebra import COUNTER, ONE, Poly, RatFunc
from .distributions import Bernoulli, DiscreteFinite, Normal, Uniform, check_discrete
from .errors import ParseError

# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: Fraction


@dataclass(frozen=True)
class Name:
    id: str


@dataclass(frozen=True)
class Pair:
    value: "Expr"
    prob: "Expr"


@dataclass(frozen=True)
class Draw:
    func: str
    args: tuple
    occ: int


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exp: int


Expr = Union[Num, Name, Draw, BinOp, Neg, Pow]


@dataclass(frozen=True)
class Assign:
    var: str
    rhs: Expr
    prob: Expr | None = None
    rhs_false: Expr | None = None
    line: int | None = field(default=None, compare=False)

    @property
    def is_branch(self):
        return self.prob is not None

    def exprs(self):
        return [e for e in (self.rhs, self.prob, self.rhs_false) if e is not None]


@dataclass(frozen=True)
class Flip:
    prob: Expr


@dataclass(frozen=True)
class IfBlock:
    cond: Union[Flip, Name]
    then: tuple
    orelse: tuple
    line: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Program:
    params: tuple
    inits: tuple
    body: tuple
    name: str | None = field(default=None, compare=False)

    @property
    def has_multipath(self):
        return any(isinstance(b, IfBlock) for b in self.body)

    def body_assigns(self):
        for item in self.body:
            if isinstance(item, IfBlock):
                yield from item.then
                yield from item.orelse
            else:
                yield item


DIST_FUNCS = {
    "u": "uniform", "rand": "uniform",
    "g": "normal", "gauss": "normal",
    "b": "bernoulli", "bern": "bernoulli",
    "d": "discrete",
}
_ARITY = {"uniform": 2, "normal": 2, "bernoulli": 1}


def walk(e):
    yield e
    if isinstance(e, BinOp):
        yield from walk(e.left)
        yield from walk(e.right)
    elif isinstance(e, (Neg,)):
        yield from walk(e.operand)
    elif isinstance(e, Pow):
        yield from walk(e.base)
    elif isinstance(e, Draw):
        for a in e.args:
            if isinstance(a, Pair):
                yield from walk(a.value)
                yield from walk(a.prob)
            else:
                yield from walk(a)


def names_in(e) -> set:
    return {x.id for x in walk(e) if isinstance(x, Name)}


def draws_in(e) -> list:
    return [x for x in walk(e) if isinstance(x, Draw)]


# ---------------------------------------------------------------------------
# tokenizer / expression parser

_TOK = re.compile(
    r"(?P<ws>[ \t]+)|(?P<num>\d+(?:\.\d+)?)|(?P<id>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>:=|\*\*|[-+*/^()\[\],:;])"
)


def _tokenize_line(text, lineno, col0=0):
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOK.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", lineno, col0 + pos + 1)
        kind = m.lastgroup
        if kind != "ws":
            val = m.group()
            if kind == "num":
                val = Fraction(val)
            elif kind == "op" and val == "**":
                val = "^"
            toks.append((kind, val, col0 + pos + 1))
        pos = m.end()
    toks.append(("end", None, col0 + len(text) + 1))
    return toks


class _ExprParser:
    def __init__(self, toks, lineno, occ_counter):
        self.toks = toks
        self.i = 0
        self.line = lineno
        self.occ = occ_counter

    def peek(self):
        return self.toks[self.i]

    def at_op(self, *ops):
        t = self.toks[self.i]
        return t[0] == "op" and t[1] in ops

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect_op(self, op):
        t = self.peek()
        if t[0] != "op" or t[1] != op:
            found = "end of line" if t[0] == "end" else repr(t[1])
            raise ParseError(f"expected {op!r}, found {found}", self.line, t[2])
        return self.take()

    def fail(self, msg, t=None):
        t = t or self.peek()
        raise ParseError(msg, self.line, t[2])

    def expr(self):
        left = self.term()
        while self.at_op("+", "-"):
            op = self.take()[1]
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.at_op("*", "/"):
            op = self.take()[1]
            left = BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.at_op("-"):
            self.take()
            return Neg(self.unary())
        if self.at_op("+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.at_op("^"):
            self.take()
            t = self.peek()
            if t[0] != "num" or t[1].denominator != 1:
                self.fail("exponent must be a natural number literal")
            self.take()
            return Pow(base, int(t[1]))
        return base

    def atom(self):
        t = self.peek()
        if t[0] == "num":
            self.take()
            return Num(t[1])
        if t[0] == "id":
            self.take()
            if self.at_op("("):
                if t[1] not in DIST_FUNCS:
                    self.fail(f"unknown distribution {t[1]!r}", t)
                return self.draw(t)
            return Name(t[1])
        if t[0] == "op" and t[1] == "(":
            self.take()
            e = self.expr()
            self.expect_op(")")
            return e
        if t[0] == "end":
            self.fail("unexpected end of line (dangling operator?)")
        self.fail(f"unexpected {t[1]!r}")

    def draw(self, name_tok):
        func = name_tok[1]
        self.expect_op("(")
        args = []
        kind = DIST_FUNCS[func]
        while True:
            a = self.expr()
            if kind == "discrete":
                self.expect_op(":")
                a = Pair(a, self.expr())
            args.append(a)
            if self.at_op(","):
                self.take()
                continue
            break
        self.expect_op(")")
        if kind in _ARITY and len(args) != _ARITY[kind]:
            self.fail(f"{func}() takes {_ARITY[kind]} argument(s), got {len(args)}", name_tok)
        occ = self.occ[0]
        self.occ[0] += 1
        return Draw(func, tuple(args), occ)

    def assign(self):
        t = self.peek()
        if t[0] != "id":
            self.fail("expected an assignment 'name := expression'")
        self.take()
        self.expect_op(":=")
        rhs = self.expr()
        if self.at_op("["):
            self.take()
            prob = self.expr()
            self.expect_op("]")
            other = self.expr()
            return Assign(t[1], rhs, prob, other, line=self.line)
        return Assign(t[1], rhs, line=self.line)


def _parse_assign_list(text, lineno, col0, occ):
    """Parse ``a := e; b := e`` on one physical line."""
    toks = _tokenize_line(text, lineno, col0)
    p = _ExprParser(toks, lineno, occ)
    out = [p.assign()]
    while p.at_op(";"):
        p.take()
        if p.peek()[0] == "end":
            break
        out.append(p.assign())
    if p.peek()[0] != "end":
        p.fail(f"unexpected {p.peek()[1]!r} after assignment")
    return out


# ---------------------------------------------------------------------------
# line structure


@dataclass
class _Line:
    no: int
    indent: str
    text: str


def _logical_lines(text):
    out = []
    for i, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].rstrip()
        if not body.strip():
            continue
        stripped = body.lstrip(" \t")
        indent = body[: len(body) - len(stripped)]
        out.append(_Line(i, indent, stripped))
    kinds = {c for ln in out for c in ln.indent}
    if len(kinds) > 1:
        bad = next(ln for ln in out if ln.indent and len(set(ln.indent) | kinds) > 1)
        raise ParseError("mixed tabs and spaces in indentation", bad.no, 1)
    return out


_WHILE = re.compile(r"while\s+true\s*:$")
_IF = re.compile(r"if\s+(.*):$")
_ELSE = re.compile(r"else\s*:$")


def parse(text: str, name: str | None = None) -> Program:
    lines = _logical_lines(text)
    occ = [0]
    inits = []
    i = 0
    while i < len(lines) and not _WHILE.match(lines[i].text):
        ln = lines[i]
        if ln.indent:
            raise ParseError("unexpected indentation before 'while true:'", ln.no, 1)
        inits.extend(_parse_assign_list(ln.text, ln.no, 0, occ))
        i += 1
    if i == len(lines):
        raise ParseError("missing 'while true:' loop header", lines[-1].no + 1 if lines else 1, 1)
    header = lines[i]
    if header.indent:
        raise ParseError("'while true:' must not be indented", header.no, 1)
    i += 1
    if i == len(lines) or not lines[i].indent:
        raise ParseError("empty loop body", header.no + 1, 1)
    level = lines[i].indent
    body = []
    while i < len(lines):
        ln = lines[i]
        if not ln.indent:
            raise ParseError("statements after the loop are not supported", ln.no, 1)
        if ln.indent != level:
            raise ParseError("inconsistent indentation in loop body", ln.no, 1)
        col0 = len(ln.indent)
        m = _IF.match(ln.text)
        if m:
            block, i = _parse_if(lines, i, level, occ)
            body.append(block)
            continue
        if _ELSE.match(ln.text):
            raise ParseError("'else:' without 'if'", ln.no, col0 + 1)
        body.extend(_parse_assign_list(ln.text, ln.no, col0, occ))
        i += 1
    assigned = {a.var for a in inits} | {a.var for a in _iter_assigns(body)}
    used = set()
    for a in list(inits) + list(_iter_assigns(body)):
        for e in a.exprs():
            used |= names_in(e)
    for b in body:
        if isinstance(b, IfBlock):
            used |= names_in(b.cond.prob) if isinstance(b.cond, Flip) else {b.cond.id}
    params = sorted(used - assigned)
    if COUNTER in params:
        raise ParseError(f"{COUNTER!r} is reserved for the loop counter and cannot be a parameter")
    return Program(tuple(params), tuple(inits), tuple(body), name=name)


def _iter_assigns(body):
    for item in body:
        if isinstance(item, IfBlock):
            yield from item.then
            yield from item.orelse
        else:
            yield item


def _parse_if(lines, i, level, occ):
    ln = lines[i]
    col0 = len(ln.indent)
    cond_text = _IF.match(ln.text).group(1)
    cond_col = col0 + ln.text.index(cond_text)
    toks = _tokenize_line(cond_text, ln.no, cond_col - 1)
    p = _ExprParser(toks, ln.no, occ)
    t = p.peek()
    if t[0] == "id" and t[1] == "flip":
        p.take()
        p.expect_op("(")
        cond = Flip(p.expr())
        p.expect_op(")")
    elif t[0] == "id":
        p.take()
        cond = Name(t[1])
    else:
        p.fail("condition must be flip(prob) or a variable name")
    if p.peek()[0] != "end":
        p.fail(f"unexpected {p.peek()[1]!r} in condition")
    then, i = _parse_block(lines, i + 1, level, occ, ln.no)
    if i >= len(lines) or lines[i].indent != level or not _ELSE.match(lines[i].text):
        no = lines[i].no if i < len(lines) else ln.no + 1
        raise ParseError("expected 'else:' after if-block", no, 1)
    orelse, i = _parse_block(lines, i + 1, level, occ, lines[i].no)
    return IfBlock(cond, tuple(then), tuple(orelse), line=ln.no), i


def _parse_block(lines, i, level, occ, header_no):
    if i >= len(lines) or len(lines[i].indent) <= len(level) or not lines[i].indent.startswith(level):
        raise ParseError("expected an indented block", lines[i].no if i < len(lines) else header_no + 1, 1)
    inner = lines[i].indent
    out = []
    while i < len(lines) and lines[i].indent.startswith(inner) and len(lines[i].indent) >= len(inner):
        ln = lines[i]
        if ln.indent != inner:
            raise ParseError("inconsistent indentation in block", ln.no, 1)
        if _IF.match(ln.text):
            raise ParseError("nested if-blocks are not supported", ln.no, len(inner) + 1)
        out.extend(_parse_assign_list(ln.text, ln.no, len(inner), occ))
        i += 1
    return out, i


# ---------------------------------------------------------------------------
# rendering (canonical source form)

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(e):
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return 3
    if isinstance(e, Pow):
        return 4
    return 5


def render_expr(e) -> str:
    if isinstance(e, Num):
        v = e.value
        return str(v.numerator) if v.denominator == 1 else f"({v.numerator}/{v.denominator})"
    if isinstance(e, Name):
        return e.id
    if isinstance(e, Draw):
        parts = []
        for a in e.args:
            if isinstance(a, Pair):
                parts.append(f"{render_expr(a.value)}:{render_expr(a.prob)}")
            else:
                parts.append(render_expr(a))
        return f"{e.func}({', '.join(parts)})"
    if isinstance(e, Neg):
        inner = render_expr(e.operand)
        return "-" + (f"({inner})" if _prec(e.operand) < 3 else inner)
    if isinstance(e, Pow):
        inner = render_expr(e.base)
        return (f"({inner})" if _prec(e.base) < 5 else inner) + f"^{e.exp}"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        left = render_expr(e.left)
        right = render_expr(e.right)
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
        sep = " " if p == 1 else ""
        return f"{left}{sep}{e.op}{sep}{right}"
    raise TypeError(e)


def render_assign(a: Assign) -> str:
    out = f"{a.var} := {render_expr(a.rhs)}"
    if a.is_branch:
        out += f" [{render_expr(a.prob)}] {render_expr(a.rhs_false)}"
    return out


def render_program(p: Program) -> str:
    lines = [render_assign(a) for a in p.inits]
    lines.append("while true:")
    for item in p.body:
        if isinstance(item, IfBlock):
            cond = f"flip({render_expr(item.cond.prob)})" if isinstance(item.cond, Flip) else item.cond.id
            lines.append(f"    if {cond}:")
            lines += [f"        {render_assign(a)}" for a in item.then]
            lines.append("    else:")
            lines += [f"        {render_assign(a)}" for a in item.orelse]
        else:
            lines.append(f"    {render_assign(item)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# multipath desugaring


def _fresh(base, used):
    if base not in used:
        used.add(base)
        return base
    i = 1
    while f"{base}{i}" in used:
        i += 1
    used.add(f"{base}{i}")
    return f"{base}{i}"


def _mul(a, b):
    return BinOp("*", a, b)


def _one_minus(v):
    return BinOp("-", Num(Fraction(1)), Name(v))


def _is_01_value(e):
    return isinstance(e, Num) and e.value in (0, 1)


def desugar_multipath(p: Program) -> Program:
    """Rewrite every ``if t: U1 else: U2`` block into straight-line branch updates."""
    if not p.has_multipath:
        return p
    used = set(p.params) | {a.var for a in p.inits} | {a.var for a in p.body_assigns()}
    body = []
    fresh = []
    for item in p.body:
        if not isinstance(item, IfBlock):
            body.append(item)
            continue
        if isinstance(item.cond, Flip):
            t = _fresh("t", used)
            fresh.append(t)
            body.append(Assign(t, Num(Fraction(1)), item.cond.prob, Num(Fraction(0)), line=item.line))
        else:
            t = item.cond.id
            _check_condition_var(t, body, item.line)
        then = {a.var: a for a in item.then}
        orelse = {a.var: a for a in item.orelse}
        if len(then) != len(item.then) or len(orelse) != len(item.orelse):
            raise errors.DuplicateAssignment("variable assigned twice in one branch", item.line)
        order = [a.var for a in item.then] + [a.var for a in item.orelse if a.var not in then]
        for x in order:
            ident = Assign(x, Name(x))
            exprs = []
            for a, coin in ((then.get(x, ident), "f"), (orelse.get(x, ident), "g")):
                if a.is_branch:
                    c = _fresh(coin, used)
                    fresh.append(c)
                    body.append(Assign(c, Num(Fraction(1)), a.prob, Num(Fraction(0)), line=a.line))
                    exprs.append(BinOp("+", _mul(a.rhs, Name(c)), _mul(a.rhs_false, _one_minus(c))))
                else:
                    exprs.append(a.rhs)
            rhs = BinOp("+", _mul(Name(t), exprs[0]), _mul(_one_minus(t), exprs[1]))
            line = (then.get(x) or orelse.get(x)).line
            body.append(Assign(x, rhs, line=line))
    # fresh coins start at 0; their value at n = 0 never feeds back into the loop
    inits = tuple(p.inits) + tuple(Assign(c, Num(Fraction(0))) for c in fresh)
    params = tuple(sorted(set(p.params)))
    return Program(params, inits, tuple(body), name=p.name)


def _check_condition_var(t, body_so_far, line):
    prior = [a for a in body_so_far if a.var == t]
    if not prior:
        raise errors.UnsupportedCondition(
            f"condition {t!r} must be assigned earlier in the loop body", line)
    a = prior[-1]
    rhs_parts = [a.rhs] + ([a.rhs_false] if a.is_branch else [])
    for e in rhs_parts:
        refs = {x.id for x in walk(e) if isinstance(x, Name)}
        assigned = {b.var for b in body_so_far}
        if refs & assigned:
            raise errors.UnsupportedCondition(
                f"condition {t!r} is not iteration-local (its update reads program state)", line)
        ok = _is_01_value(e) or (isinstance(e, Draw) and DIST_FUNCS[e.func] == "bernoulli")
        if not ok:
            raise errors.UnsupportedCondition(f"condition {t!r} is not 0/1-valued", line)


# ---------------------------------------------------------------------------
# validation

VAR = "V"     # program variable reference (initialisation context)
NEW = "N"     # earlier body variable, value after this iteration's update
OLD = "O"     # the assigned variable's own value before the update
DRAW = "D"


@dataclass(frozen=True)
class Update:
    var: str
    branches: tuple          # of (prob: RatFunc, rhs: Poly)
    self_coeffs: tuple       # per branch: Poly coefficient of the OLD self atom
    degree: int              # max(deg of non-self part over variables, 1)
    line: int | None = None


@dataclass(frozen=True)
class ValidatedProgram:
    program: Program
    order: tuple             # body variables in assignment order
    index: dict
    local: frozenset         # iteration-local variables
    updates: dict            # var -> Update
    inits: tuple             # of (var, branches) with atoms (VAR, name) / (DRAW, occ)
    draws: dict              # occ -> DistSpec
    params: tuple

    @property
    def name(self):
        return self.program.name

    @property
    def variables(self):
        return self.order


def _to_ratfunc(e, variables, what, line):
    if isinstance(e, Num):
        return RatFunc.const(e.value)
    if isinstance(e, Name):
        if e.id in variables:
            raise errors.VariableInDistribution(f"{what} refers to program variable {e.id!r}", line)
        return RatFunc.symbol(e.id)
    if isinstance(e, Draw):
        raise errors.VariableInDistribution(f"{what} contains a random draw", line)
    if isinstance(e, Neg):
        return -_to_ratfunc(e.operand, variables, what, line)
    if isinstance(e, Pow):
        return _to_ratfunc(e.base, variables, what, line) ** e.exp
    a = _to_ratfunc(e.left, variables, what, line)
    b = _to_ratfunc(e.right, variables, what, line)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if b.is_zero():
        raise errors.ModelError(f"division by zero in {what}", line)
    return a / b


def _dist_spec(d: Draw, variables, line):
    kind = DIST_FUNCS[d.func]
    what = f"argument of {d.func}()"
    if kind == "discrete":
        outcomes = tuple((_to_ratfunc(a.value, variables, what, line),
                          _to_ratfunc(a.prob, variables, what, line)) for a in d.args)
        spec = DiscreteFinite(outcomes)
        for _, pr in outcomes:
            _check_prob_range(pr, line)
        try:
            check_discrete(spec)
        except errors.InvalidSupport as exc:
            raise errors.ProbabilityOutOfRange(str(exc), line) from None
        return spec
    args = [_to_ratfunc(a, variables, what, line) for a in d.args]
    if kind == "uniform":
        return Uniform(*args)
    if kind == "normal":
        return Normal(*args)
    _check_prob_range(args[0], line)
    return Bernoulli(args[0])


def _check_prob_range(p: RatFunc, line):
    if p.is_constant() and not 0 <= p.constant_value() <= 1:
        raise errors.ProbabilityOutOfRange(f"probability {p.render()} is outside [0, 1]", line)


def _to_poly(e, atom_of, line) -> Poly:
    """Lower an expression to a Poly; ``atom_of(name)`` returns an atom or None for parameters."""
    if isinstance(e, Num):
        return Poly.const(e.value)
    if isinstance(e, Name):
        a = atom_of(e.id)
        return Poly.const(RatFunc.symbol(e.id)) if a is None else Poly.atom(a)
    if isinstance(e, Draw):
        return Poly.atom((DRAW, e.occ))
    if isinstance(e, Neg):
        return -_to_poly(e.operand, atom_of, line)
    if isinstance(e, Pow):
        return _to_poly(e.base, atom_of, line) ** e.exp
    a = _to_poly(e.left, atom_of, line)
    b = _to_poly(e.right, atom_of, line)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if b.atoms():
        raise errors.ModelError("division by an expression containing variables or draws", line)
    c = b.terms.get((), None)
    if c is None or c.is_zero():
        raise errors.ModelError("division by zero", line)
    return a * c.inverse()


def validate(p: Program) -> ValidatedProgram:
    if p.has_multipath:
        raise ValueError("desugar multipath blocks before validation")
    body = list(p.body)
    # (1) single assignment, initialisation
    seen = {}
    for a in body:
        if a.var in seen:
            raise errors.DuplicateAssignment(f"{a.var!r} is assigned more than once in the loop body", a.line)
        seen[a.var] = a
    init_seen = {}
    for a in p.inits:
        if a.var in init_seen:
            raise errors.DuplicateAssignment(f"{a.var!r} is initialised more than once", a.line)
        init_seen[a.var] = a
    for a in body:
        if a.var not in init_seen:
            raise errors.Uninitialized(f"{a.var!r} is updated in the loop but never initialised", a.line)
    implicit = [Assign(v, Name(v)) for v in init_seen if v not in seen]
    body = implicit + body
    order = tuple(a.var for a in body)
    index = {v: i for i, v in enumerate(order)}
    variables = set(order)

    # (2) forward references
    for i, a in enumerate(body):
        refs = set()
        for e in a.exprs():
            refs |= names_in(e)
        for r in sorted(refs & variables):
            if r != a.var and index[r] > i:
                raise errors.ForwardReference(
                    f"{a.var!r} reads {r!r}, which is assigned later in the body "
                    "(mutually dependent updates are not supported)", a.line)
    for j, a in enumerate(p.inits):
        refs = set()
        for e in a.exprs():
            refs |= names_in(e)
        earlier = {b.var for b in p.inits[:j]}
        for r in sorted(refs & (variables | set(init_seen))):
            if r not in earlier:
                raise errors.ForwardReference(f"initial value of {a.var!r} reads {r!r} before it is initialised", a.line)

    local = set()
    for a in body:
        refs = set()
        for e in (a.rhs, a.rhs_false):
            if e is not None:
                refs |= names_in(e) & variables
        if not refs:
            local.add(a.var)

    draws = {}
    updates = {}
    for a in body:
        v = a.var

        def atom_of(name, v=v):
            if name not in variables:
                return None
            return (OLD, name) if name == v else (NEW, name)

        rhss = [a.rhs] + ([a.rhs_false] if a.is_branch else [])
        polys = [_to_poly(e, atom_of, a.line) for e in rhss]
        self_atom = (OLD, v)
        coeffs = []
        for poly in polys:
            # (3) linear in itself
            parts = poly.split_by(self_atom)
            if any(e > 1 for e in parts):
                raise errors.NonlinearSelf(f"{v!r} appears nonlinearly in its own update", a.line)
            coeff = parts.get(1, Poly())
            # (4) coefficient of itself may only use iteration-local earlier variables
            for at in coeff.atoms():
                if at[0] == NEW and at[1] not in local:
                    raise errors.StatefulSelfCoefficient(
                        f"coefficient of {v!r} in its own update depends on {at[1]!r}, "
                        "which is not iteration-local", a.line)
            coeffs.append(coeff)
        # (5) distribution arguments / probabilities
        for e in rhss:
            for d in draws_in(e):
                draws[d.occ] = _dist_spec(d, variables, a.line)
        if a.is_branch:
            prob = _to_ratfunc(a.prob, variables, "branch probability", a.line)
            # (6)
            _check_prob_range(prob, a.line)
            branches = ((prob, polys[0]), (ONE - prob, polys[1]))
        else:
            branches = ((ONE, polys[0]),)
        deg = 1
        for poly in polys:
            rest = poly.split_by(self_atom).get(0, Poly())
            deg = max(deg, rest.degree_in(lambda at: at[0] == NEW))
        updates[v] = Update(v, branches, tuple(coeffs), deg, a.line)

    inits = []
    for a in p.inits:
        def init_atom(name):
            return (VAR, name) if name in init_seen else None

        rhss = [a.rhs] + ([a.rhs_false] if a.is_branch else [])
        polys = [_to_poly(e, init_atom, a.line) for e in rhss]
        for e in rhss:
            for d in draws_in(e):
                draws[d.occ] = _dist_spec(d, variables, a.line)
        if a.is_branch:
            prob = _to_ratfunc(a.prob, variables, "branch probability", a.line)
            _check_prob_range(prob, a.line)
            inits.append((a.var, ((prob, polys[0]), (ONE - prob, polys[1]))))
        else:
            inits.append((a.var, ((ONE, polys[0]),)))

    prog = replace(p, body=tuple(body))
    return ValidatedProgram(prog, order, index, frozenset(local), updates, tuple(inits), draws, tuple(p.params))


def load(text: str, name: str | None = None) -> ValidatedProgram:
    """parse -> desugar -> validate."""
    return validate(desugar_multipath(parse(text, name)))
