from __future__ import annotations

from fractions import Fraction as F

import pytest

from cobabs.model import ContinuousSystem, HybridSystem, Interval, TransitionSystem, render, with_time
from cobabs.parser import ModelError, ModelSemanticError, ModelSyntaxError, parse, parse_many, parse_polynomial, read_pragmas

from conftest import CORPUS, corpus_text, load

ALL = sorted(p.stem for p in CORPUS.glob("*.cob"))


def test_ex11_parse():
    m = load("ex11")
    assert isinstance(m, ContinuousSystem)
    assert m.field["x"] == parse_polynomial("x*y + 2*x", m.vars)
    assert m.field["y"] == parse_polynomial("-1/2*y^2 + 7*y + 1", m.vars)
    assert m.init.box_dict() == {"x": Interval(F(0), F(1)), "y": Interval(F(0), F(1))}


def test_fig2_parse():
    m = load("fig2")
    assert isinstance(m, TransitionSystem)
    assert m.locations == ("head",)
    assert [t.name for t in m.transitions] == ["t1", "t2"]
    box = m.init.box_dict()
    assert box["x"] == box["y"] == Interval(F(0), F(0))
    assert box["k"] == Interval(F(1), None)
    t1 = m.transitions[0]
    assert t1.update[2] == parse_polynomial("k", m.vars)
    assert m.transitions[1].is_identity()


def test_hybrid_parse():
    m = load("hybrid_spin")
    assert isinstance(m, HybridSystem)
    assert m.locations == ("spin", "boost")
    assert m.field_at("boost")["z"] == parse_polynomial("1", m.vars)
    assert not m.invariant_at("spin").is_true()


@pytest.mark.parametrize(
    "text, kind",
    [
        ("continuous a { vars: ; field { } init { } }", ModelSemanticError),
        ("continuous a { vars: x; field { x' = y; } init { } }", ModelSemanticError),
        ("continuous a { vars: x; field { x' = sin(x); } init { } }", ModelSemanticError),
        ("continuous a { vars: x; field { x' = pi*x; } init { } }", ModelSemanticError),
        ("continuous a { vars: x; field { x' = x^(1/2); } init { } }", ModelSemanticError),
        ("continuous a { vars: x; field { x' = x/x; } init { } }", ModelSemanticError),
        ("continuous a { vars: x; field { x' = x } init { } }", ModelSyntaxError),
        ("continuous a { vars: x; field { x' = x; }", ModelSyntaxError),
        ("discrete a { vars: x; locations: l l; initloc: l; transition t { from l; to l; update { } } init { } }", ModelSemanticError),
        ("discrete a { vars: x; locations: l; initloc: l; transition t { from l; to m; update { } } init { } }", ModelSemanticError),
    ],
)
def test_errors(text, kind):
    with pytest.raises(kind):
        parse(text)


def test_error_position():
    with pytest.raises(ModelError) as exc:
        parse("continuous a {\n  vars: x;\n  field { x' = y; }\n  init { }\n}")
    assert exc.value.line == 3 and exc.value.col > 1


def test_decimal_literals_are_exact():
    m = parse("continuous a { vars: x; field { x' = 0.25*x; } init { x in [0.5, 1.5]; } }")
    assert m.field["x"] == parse_polynomial("1/4*x", m.vars)
    assert m.init.interval("x") == Interval(F(1, 2), F(3, 2))


def test_params_get_zero_dynamics_and_identity_updates():
    m = load("two_spring")
    for p in m.params:
        assert m.field[p].is_zero()
    g = load("geo")
    for t in g.transitions:
        for p in g.params:
            assert t.update[g.vars.index(p)] == parse_polynomial(p, g.vars)


@pytest.mark.parametrize("name", ALL)
def test_round_trip(name):
    m = load(name)
    assert parse(render(m)) == m


@pytest.mark.parametrize("name", ALL)
def test_update_arity(name):
    m = load(name)
    for t in m.transitions:
        assert len(t.update) == len(m.vars)


def test_parse_many_and_pragmas():
    text = corpus_text("ex11") + "\n" + corpus_text("fig2")
    assert [m.name for m in parse_many(text)] == ["ex11", "fig2"]
    assert read_pragmas(corpus_text("ex11"))["degree-init"] == "3"
    with pytest.raises(ModelError):
        parse(text)


def test_with_time():
    m = with_time(load("toda2"))
    assert m.vars.names[-1] == "t"
    assert m.field["t"] == parse_polynomial("1", m.vars)
