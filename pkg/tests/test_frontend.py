import pytest

from momentinvar import errors
from momentinvar.cli import corpus
from momentinvar.frontend import (
    DRAW, Assign, IfBlock, desugar_multipath, load, parse, render_assign, render_program, validate,
)

BINOMIAL = """x := 0
while true:
    x := x + 1 [p] x
"""


def wrap(body, inits="x := 0\n"):
    lines = "".join(f"    {line}\n" for line in body.split("\n"))
    return f"{inits}while true:\n{lines}"


def test_parse_binomial():
    p = parse(BINOMIAL)
    assert p.params == ("p",)
    assert len(p.inits) == 1
    (a,) = p.body
    assert a.is_branch
    assert render_assign(a) == "x := x + 1 [p] x"


def test_parse_coupon():
    p = parse(dict(corpus())["Coupon"])
    assert len(p.inits) == 3 and len(p.body) == 3
    assert render_assign(p.body[0]) == "f := 1 [1/2] 0"
    assert p.params == ()


def test_dangling_operator_is_a_parse_error():
    with pytest.raises(errors.ParseError) as exc:
        parse("x := x +")
    assert exc.value.line == 1
    assert exc.value.column == 9


@pytest.mark.parametrize("src", [
    "x := 0\nwhile true:\n\tx := x + 1\n        y := 2\n",       # mixed indentation
    "x := 0\nwhile true:\n    x := foo(1) + x\n",                 # unknown function
    "x := 0\nwhile true:\n    x := (x + 1\n",                     # unbalanced
    "x := 0\nwhile true:\n    x := x ^ y\n",                      # symbolic exponent
    "x := 0\nx := x + 1\n",                                       # no loop header
    "x := 0\nwhile true:\n    x := x + n\n",                      # counter name as parameter
])
def test_malformed_sources(src):
    with pytest.raises(errors.ParseError):
        parse(src)


def test_semicolons_and_comments():
    p = parse("x := 0; y := 1  # two inits\nwhile true:\n    x := x + 1; y := y + x\n")
    assert [a.var for a in p.inits] == ["x", "y"]
    assert [a.var for a in p.body] == ["x", "y"]


def test_draw_occurrences_are_distinct():
    vp = load(wrap("x := x + u(0,1) + u(0,1)"))
    assert len(vp.draws) == 2


def test_desugar_deterministic_branches():
    src = "x := 0\nwhile true:\n    if flip(1/2):\n        x := x+1\n    else:\n        x := x-1\n"
    p = desugar_multipath(parse(src))
    body = render_program(p).split("while true:\n")[1]
    assert body == "    t := 1 [1/2] 0\n    x := t*(x + 1) + (1 - t)*(x - 1)\n"


def test_desugar_probabilistic_branches():
    src = ("x := 0\nwhile true:\n    if flip(p):\n        x := u1 [q] v1\n"
           "    else:\n        x := u2 [q] v2\n")
    p = desugar_multipath(parse(src))
    lines = [render_assign(a) for a in p.body]
    assert lines == [
        "t := 1 [p] 0",
        "f := 1 [q] 0",
        "g := 1 [q] 0",
        "x := t*(u1*f + v1*(1 - f)) + (1 - t)*(u2*g + v2*(1 - g))",
    ]


def test_desugar_without_if_is_identity():
    p = parse(BINOMIAL)
    assert desugar_multipath(p) is p


def test_desugar_one_sided_update_gets_identity():
    src = "x := 0; y := 0\nwhile true:\n    if flip(1/3):\n        x := x + 1\n    else:\n        y := y + 1\n"
    p = desugar_multipath(parse(src))
    lines = [render_assign(a) for a in p.body]
    assert lines[1] == "x := t*(x + 1) + (1 - t)*x"
    assert lines[2] == "y := t*y + (1 - t)*(y + 1)"
    validate(p)


def test_desugar_condition_variable():
    ok = "x := 0; c := 0\nwhile true:\n    c := 1 [1/2] 0\n    if c:\n        x := x + 1\n    else:\n        x := x\n"
    load(ok)
    stateful = ("x := 0; c := 0\nwhile true:\n    c := 1 - c\n    if c:\n        x := x + 1\n"
                "    else:\n        x := x\n")
    with pytest.raises(errors.UnsupportedCondition):
        load(stateful)
    missing = "x := 0\nwhile true:\n    if c:\n        x := x + 1\n    else:\n        x := x\n"
    with pytest.raises(errors.UnsupportedCondition):
        load(missing)


@pytest.mark.parametrize("body,inits,err", [
    ("x := x*x + 1", "x := 0\n", errors.NonlinearSelf),
    ("x := x + y\ny := y + 1", "x := 0\ny := 0\n", errors.ForwardReference),
    ("x := x + 1 [3/2] x", "x := 0\n", errors.ProbabilityOutOfRange),
    ("x := x + u(x, 1)", "x := 0\n", errors.VariableInDistribution),
    ("x := x + 1 [b(1/2)] x", "x := 0\n", errors.VariableInDistribution),
    ("y := y + 1\nx := y*x + 1", "x := 0\ny := 0\n", errors.StatefulSelfCoefficient),
    ("x := x + 1\nx := x + 2", "x := 0\n", errors.DuplicateAssignment),
    ("x := x + 1\ny := 1", "x := 0\n", errors.Uninitialized),
    ("x := x / (x + 1)", "x := 0\n", errors.ModelError),
])
def test_validation_errors(body, inits, err):
    with pytest.raises(err) as exc:
        load(wrap(body, inits))
    assert exc.value.line is not None


def test_coupon_self_coefficient_is_iteration_local():
    vp = load(dict(corpus())["Coupon"])
    assert "f" in vp.local
    assert "c" not in vp.local


def test_init_only_variable_gets_identity_update():
    vp = load("k := 3\nx := 0\nwhile true:\n    x := x + k\n")
    assert vp.order == ("k", "x")
    assert vp.updates["k"].branches[0][1].atoms() == {("O", "k")}


def test_init_may_reference_earlier_init_and_draws():
    vp = load("a := u(0,2)\nb := a + 1\nwhile true:\n    b := b + a\n")
    assert any(atom[0] == DRAW for _, branches in vp.inits for _, rhs in branches for atom in rhs.atoms())


def test_all_corpus_programs_validate():
    for name, src in corpus():
        vp = load(src, name)
        assert vp.order


def test_render_round_trip_on_corpus():
    for name, src in corpus():
        p = parse(src, name)
        text = render_program(p)
        assert render_program(parse(text, name)) == text
        if not p.has_multipath:
            assert parse(text, name) == p


def test_program_structures():
    p = parse(dict(corpus())["Multipath_demo"])
    assert isinstance(p.body[0], IfBlock)
    assert all(isinstance(a, Assign) for a in desugar_multipath(p).body)
