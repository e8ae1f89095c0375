from __future__ import annotations

import math
import random
from fractions import Fraction as F

import numpy as np
import pytest

from cobabs.abstraction import AbstractSystem, build
from cobabs.closure import ClosureConfig, SubspaceBasis, fixpoint
from cobabs.exactalg import Matrix
from cobabs.model import with_time
from cobabs.parser import parse
from cobabs.poly import Polynomial, VarTable, VectorField
from cobabs.validate import (
    CompiledPolys,
    SimConfig,
    check_exp_conservation,
    check_flow_commutation,
    execute,
    integrate,
    order_ratio,
    sample_init,
)

from conftest import load


def P(text, vars):
    return Polynomial.parse(text, vars)


def ex11_abstraction():
    m = load("ex11")
    sp = SubspaceBasis(m.vars, [P(t, m.vars) for t in ("x", "x*y", "x*y^2")])
    alpha, a = build(m, {"main": sp}, 1)
    return m, alpha, a


def with_dynamics(a: AbstractSystem, loc: str, dyn) -> AbstractSystem:
    return AbstractSystem(a.kind, a.vars, a.locations, a.init_location, ((loc, tuple(dyn)),), a.transitions, a.init, a.degree)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(step=0)
    assert SimConfig(step=1e-3, horizon=1.0).steps == 1000


def test_integrate_examples():
    v = VarTable(["x"])
    still = integrate(VectorField(v, [P("0", v)]), [3.0], SimConfig())
    assert np.all(still.states == 3.0)
    growth = integrate(VectorField(v, [P("x", v)]), [1.0], SimConfig())
    assert abs(growth.states[-1, 0, 0] - math.e) < 1e-6
    assert np.all(np.diff(growth.times) > 0)
    m = load("ex11")
    tr = integrate(m.field, [0.5, 0.5], SimConfig())
    assert np.isfinite(tr.states).all() and not tr.blown.any()


def test_blowup_is_flagged_not_fatal():
    v = VarTable(["x"])
    tr = integrate(VectorField(v, [P("x^2", v)]), [10.0], SimConfig(horizon=1.0))
    assert tr.blown.all()


def test_compiled_polys_match_exact():
    m = load("ex11")
    f = CompiledPolys(list(m.field))
    pts = np.array([[0.25, -1.5], [2.0, 0.5]])
    for row, pt in zip(f(pts), pts):
        exact = [float(p.evaluate([F(x) for x in pt])) for p in m.field]
        assert np.allclose(row, exact)


def test_sample_init_respects_box_and_equalities():
    m = load("hamiltonian")
    pts = sample_init(m.init, m.vars, 30, random.Random(1))
    for p1, p2, q1, q2 in pts:
        assert -1 <= p1 <= 1 and -1 <= p2 <= 1 and q1 == 2 and q2 == 2
    g = load("geo")
    for s, p, k, a, r, n in sample_init(g.init, g.vars, 30, random.Random(2), exact=True, width=10):
        assert s == 0 and k == 0 and p == a and isinstance(p, F)


def test_flow_commutation_ex11_and_fault():
    m, alpha, a = ex11_abstraction()
    rep = check_flow_commutation(m, alpha, a, SimConfig())
    assert rep.passed and rep.max_defect <= 1e-4 and len(rep.defects) == 20
    w = a.vars
    dyn = list(a.dynamics_at("main"))
    dyn[0] = dyn[0] + P("w1", w)
    bad = with_dynamics(a, "main", dyn)
    assert not check_flow_commutation(m, alpha, bad, SimConfig()).passed


def test_flow_commutation_equilibrium():
    m = parse("continuous e { vars: x, y; field { x' = x*y; y' = y^2 - y; } init { x = 0; y = 0; } }")
    sp = SubspaceBasis(m.vars, [P("x", m.vars), P("y", m.vars)])
    alpha, a = build(m, {"main": sp}, 2)
    rep = check_flow_commutation(m, alpha, a, SimConfig(samples=3))
    assert rep.max_defect == 0.0


def test_order_ratio_ex11():
    m, alpha, a = ex11_abstraction()
    r = order_ratio(m, alpha, a, SimConfig())
    assert r is not None and 8 <= r <= 32


def test_order_ratio_none_when_exact():
    # linear alpha: RK4 commutes with linear maps, defect is round-off only
    m = parse("continuous l { vars: x, y; field { x' = y; y' = -x; } init { x in [0, 1]; y in [0, 1]; } }")
    sp = SubspaceBasis(m.vars, [P("x", m.vars), P("y", m.vars)])
    alpha, a = build(m, {"main": sp}, 1)
    assert order_ratio(m, alpha, a, SimConfig()) is None


def test_exp_conservation():
    m, alpha, a = ex11_abstraction()
    mat, b = a.affine("main")
    rep = check_exp_conservation(mat, b, alpha.at("main"), m.field, m.init, SimConfig())
    assert rep.passed and max(rep.drift) <= 1e-4

    s = load("two_spring")
    w1 = P("v2^2 + v1^2 + k*x2^2 - 2*k*x1*x2 + 2*k*x1^2", s.vars)
    w2 = P("v1*v2 - 1/2*v1^2 - 1/2*k*x2^2 + 2*k*x1*x2 - 3/2*k*x1^2", s.vars)
    alpha2, a2 = build(s, {"main": SubspaceBasis(s.vars, [w1, w2])}, 1)
    mat2, b2 = a2.affine("main")
    assert mat2.is_zero()
    assert check_exp_conservation(mat2, b2, alpha2.at("main"), s.field, s.init, SimConfig()).passed


def test_exp_conservation_negative_control():
    m = load("ex11")
    rng = np.random.default_rng(5)
    a = Matrix.from_rows([[F(int(x)) for x in row] for row in rng.integers(-3, 4, size=(2, 2))])
    alpha = [P("x^2 + y", m.vars), P("x*y", m.vars)]
    rep = check_exp_conservation(a, (F(0), F(0)), alpha, m.field, m.init, SimConfig())
    assert not rep.passed


@pytest.mark.parametrize("name, k, time", [("two_spring", 3, False), ("toda2", 2, True), ("hybrid_spin", 2, False), ("cubic_d2", 2, False)])
def test_flow_commutation_corpus(name, k, time):
    m = load(name)
    if time:
        m = with_time(m)
    d = 2 if name == "cubic_d2" else 1
    alpha, a = build(m, fixpoint(m, ClosureConfig(d, k)).spaces, d)
    cfg = SimConfig()
    assert check_flow_commutation(m, alpha, a, cfg).passed
    r = order_ratio(m, alpha, a, cfg)
    assert r is None or 8 <= r <= 32


def test_hybrid_schedule_note():
    m = load("hybrid_spin")
    alpha, a = build(m, fixpoint(m, ClosureConfig(1, 2)).spaces, 1)
    rep = check_flow_commutation(m, alpha, a, SimConfig(), schedule=["up"])
    assert rep.passed and "up" in rep.note


def test_discrete_commutation_is_exact():
    m = load("fermat")
    alpha, a = build(m, fixpoint(m, ClosureConfig(1, 2)).spaces, 1)
    rep = check_flow_commutation(m, alpha, a, SimConfig(samples=10))
    assert rep.passed and rep.tol == 0.0 and rep.max_defect == 0.0
    upd = list(a.transitions)
    t = upd[1]
    wrong = type(t)(t.name, t.source, t.target, t.guard, (t.update[0] + 1,) + tuple(t.update[1:]))
    upd[1] = wrong
    bad = AbstractSystem(a.kind, a.vars, a.locations, a.init_location, a.dynamics, tuple(upd), a.init, a.degree)
    assert not check_flow_commutation(m, alpha, bad, SimConfig(samples=10)).passed


def test_execute_respects_guards():
    m = load("computep")
    run = execute(m, (F(0), F(0), F(3)), 20, random.Random(0))
    assert [loc for loc, _, _ in run] == ["head"] * 4 + ["exit"]
    assert run[-1][1][0] == 0 + 1 + 4
