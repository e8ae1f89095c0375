from __future__ import annotations

import random
from fractions import Fraction as F
from itertools import product

import pytest

from cobabs.abstraction import NotAffine, build
from cobabs.closure import ClosureConfig, SubspaceBasis, fixpoint
from cobabs.exactalg import Matrix
from cobabs.invariants import (
    AffineSubspace,
    back_substitute,
    equalities,
    implied,
    karr,
    ode_equalities,
    rational_roots,
    scale_certificate,
    scale_functions,
)
from cobabs.model import with_time
from cobabs.parser import parse
from cobabs.poly import Polynomial, lie_derivative
from cobabs.validate import SimConfig, check_equalities_exact, check_equalities_numeric, execute

from conftest import load


def P(text, vars):
    return Polynomial.parse(text, vars)


def analysed(name, k, d=1, time=False):
    m = load(name)
    if time:
        m = with_time(m)
    spaces = fixpoint(m, ClosureConfig(d, k)).spaces
    alpha, a = build(m, spaces, d)
    return m, alpha, a


def concrete_by_location(m, alpha, a):
    invs = equalities(karr(a, alpha, m.init, m.vars), alpha)
    out = {}
    for e in invs:
        out.setdefault(e.location, []).append(e.concrete)
    return out


# -- affine subspaces -------------------------------------------------------

def test_affine_subspace_basics():
    a = AffineSubspace.make((F(1), F(1)), [])
    b = AffineSubspace.make((F(3), F(5)), [])
    j = a.join(b)
    assert j.dim == 1 and j.contains_point((F(2), F(3))) and not j.contains_point((F(2), F(2)))
    assert j.contains(a) and not a.contains(j)
    assert AffineSubspace.empty(2).join(a) == a
    (c, e), = j.equations()
    assert c[0] * 2 + c[1] * 3 == e
    line = j.meet_hyperplane((F(1), F(0)), F(5))
    assert line.dim == 0 and line.contains_point((F(5), F(9)))
    assert a.meet_hyperplane((F(1), F(0)), F(0)).is_empty
    img = j.image(Matrix.from_rows([[1, 0], [0, 0]]), (F(0), F(7)))
    assert img.contains_point((F(10), F(7)))


def test_karr_point_identity():
    m = parse("discrete s { vars: x, y; locations: l; initloc: l; transition t { from l; to l; update { } } init { x = 2; y = 3; } }")
    spaces = {"l": SubspaceBasis(m.vars, [P("x", m.vars), P("y", m.vars)])}
    alpha, a = build(m, spaces, 1)
    h = karr(a, alpha, m.init, m.vars)["l"]
    assert h.dim == 0 and h.point == (2, 3)
    assert len(h.equations()) == 2


# -- Karr on the discrete benchmarks ----------------------------------------

def test_fermat_invariant_and_oracle():
    m, alpha, a = analysed("fermat", 2)
    target = P("4*r + v^2 - 2*v - u^2 + 2*u + 4*N", m.vars)
    by_loc = concrete_by_location(m, alpha, a)
    for loc in ("l1", "l2", "l3"):
        assert implied(target, by_loc[loc]), loc
    # oracle: run the program exhaustively for N, R <= 20
    for n, r0 in product(range(1, 21), range(0, 21)):
        for loc, x, _ in execute(m, (F(n), F(r0), F(0), F(0), F(0)), 600, random.Random(0)):
            if loc != "l0":
                assert target.evaluate(x) == 0
            for p in by_loc.get(loc, []):
                assert p.evaluate(x) == 0


def test_geo_invariant_and_printed_sign():
    m, alpha, a = analysed("geo", 2)
    by_loc = concrete_by_location(m, alpha, a)
    good = P("-p - s + r*s + a", m.vars)
    printed = P("-p + s - r*s + a", m.vars)
    assert implied(good, by_loc["head"])
    # one iteration from a = 2, r = 3: s = 2, p = 6
    state = {"s": 2, "p": 6, "k": 1, "a": 2, "r": 3, "n": 5}
    assert good.evaluate(state) == 0 and printed.evaluate(state) != 0
    assert check_equalities_exact(m, by_loc, SimConfig(), steps=50, samples=50, width=5) == []


def test_sum_of_squares_loop_exit():
    m, alpha, a = analysed("computep", 3)
    by_loc = concrete_by_location(m, alpha, a)
    target = P("6*x - 2*y^3 + 3*y^2 - y", m.vars)
    assert implied(target, by_loc["exit"])
    # the printed sign is refuted at k = 2: x = 0 + 1 = 1
    assert P("6*x - 2*y^3 - 3*y^2 - y", m.vars).evaluate({"x": 1, "y": 2, "k": 2}) != 0
    for k in range(1, 11):
        run = execute(m, (F(0), F(0), F(k)), 100, random.Random(k))
        loc, x, _ = run[-1]
        assert loc == "exit" and target.evaluate(x) == 0


@pytest.mark.parametrize("name, k", [("fig2", 2), ("fig3", 2), ("petter2", 2), ("petter3", 3), ("fermat", 2), ("fermat_printed", 2), ("geo", 2), ("computep", 3)])
def test_karr_soundness_oracle(name, k):
    m, alpha, a = analysed(name, k)
    by_loc = concrete_by_location(m, alpha, a)
    assert check_equalities_exact(m, by_loc, SimConfig(seed=k), steps=50, samples=50, width=10) == []


@pytest.mark.parametrize("name, k", [("fig3", 2), ("fermat", 2), ("geo", 2), ("hybrid_spin", 2)])
def test_karr_fixpoint_is_closed(name, k):
    m, alpha, a = analysed(name, k)
    hulls = karr(a, alpha, m.init, m.vars)
    for t in a.transitions:
        mat, c = a.transition_affine(t)
        assert hulls[t.target].contains(hulls[t.source].image(mat, c))


def test_not_affine():
    m, alpha, a = analysed("cubic_d2", 2, d=2)
    with pytest.raises(NotAffine):
        karr(a, alpha, m.init, m.vars)
    with pytest.raises(NotAffine):
        ode_equalities(a, alpha, m.init, m.vars)


# -- ODE equalities -----------------------------------------------------------

def test_ode_equalities_static_and_two_spring():
    m = parse("continuous s { vars: x, y; field { x' = 0; y' = 0; } init { x = 1; y = 2; } }")
    spaces = {"main": SubspaceBasis(m.vars, [P("x", m.vars), P("y", m.vars)])}
    alpha, a = build(m, spaces, 1)
    h = ode_equalities(a, alpha, m.init, m.vars)
    assert h.dim == 0 and h.point == (1, 2)

    text = (
        "continuous sp { vars: x1, x2, v1, v2; params: k; field { x1' = v1; x2' = v2; "
        "v1' = k*x2 - 2*k*x1; v2' = k*(x1 - x2); } init { x1 = 1; x2 = 0; v1 = 0; v2 = 0; k = 1; } }"
    )
    sp = parse(text)
    w1 = P("v2^2 + v1^2 + k*x2^2 - 2*k*x1*x2 + 2*k*x1^2", sp.vars)
    w2 = P("v1*v2 - 1/2*v1^2 - 1/2*k*x2^2 + 2*k*x1*x2 - 3/2*k*x1^2", sp.vars)
    alpha, a = build(sp, {"main": SubspaceBasis(sp.vars, [w1, w2])}, 1)
    h = ode_equalities(a, alpha, sp.init, sp.vars)
    assert h.dim == 0 and h.point == (2, F(-3, 2))


def test_ode_full_box_generic():
    m, alpha, a = analysed("ex11", 3)
    h = ode_equalities(a, alpha, m.init, m.vars)
    assert h.equations() == []


@pytest.mark.parametrize("name, k, time", [("two_spring", 3, False), ("hamiltonian", 4, False), ("toda2", 2, True)])
def test_ode_equality_integration_oracle(name, k, time):
    m, alpha, a = analysed(name, k, time=time)
    h = ode_equalities(a, alpha, m.init, m.vars)
    polys = [back_substitute(c, e, alpha.at("main")) for c, e in h.equations()]
    polys = [p for p in polys if not p.is_zero()]
    assert check_equalities_numeric(m, polys, SimConfig(samples=20)) <= 1e-6


# -- scale functions -------------------------------------------------------------

def test_scale_diagonal():
    res = scale_functions(Matrix.from_rows([[3, 0], [0, 0]]), (F(0), F(0)))
    by_scale = {q.scale: q.coeffs for q in res.quantities}
    assert by_scale == {F(0): (0, 1), F(3): (1, 0)}


def test_scale_ex11():
    m, alpha, a = analysed("ex11", 3)
    mat, b = a.affine("main")
    res = scale_functions(mat, b, alpha.at("main"))
    assert all(q.scale != 0 for q in res.quantities)
    for q in res.quantities:
        assert scale_certificate(q, m.field).is_zero()
    # restricted to (x, xy, xy^2) the matrix is invertible
    from cobabs.exactalg import determinant

    assert determinant(Matrix.from_rows([[2, 1, 0], [1, 9, F(1, 2)], [0, 2, 16]])) == 270
    res = scale_functions(Matrix.from_rows([[2, 1, 0], [1, 9, F(1, 2)], [0, 2, 16]]), (F(0),) * 3)
    assert [q.scale for q in res.quantities] == [9]
    assert res.skipped_eigen_degree == 2


def test_scale_two_spring_matches_listed_pair():
    m, alpha, a = analysed("two_spring", 3)
    mat, b = a.affine("main")
    res = scale_functions(mat, b, alpha.at("main"))
    strong = [q for q in res.quantities if q.scale == 0]
    for q in strong:
        assert lie_derivative(q.concrete, m.field).is_zero()
    found = SubspaceBasis.span(m.vars, [q.concrete for q in strong]).without_parameter_only(m.params)
    listed = SubspaceBasis.span(m.vars, [
        P("v2^2 + v1^2 + k*x2^2 - 2*k*x1*x2 + 2*k*x1^2", m.vars),
        P("v1*v2 - 1/2*v1^2 - 1/2*k*x2^2 + 2*k*x1*x2 - 3/2*k*x1^2", m.vars),
    ])
    assert found == listed


def test_rational_roots():
    assert rational_roots([1, -5, 6]) == [2, 3]
    assert rational_roots([1, 0, -2]) == []
    assert rational_roots([2, -1]) == [F(1, 2)]


# -- back substitution ------------------------------------------------------------

def test_back_substitute():
    m = load("ex11")
    alpha = [P("x", m.vars), P("x*y", m.vars), P("x*y^2", m.vars)]
    assert back_substitute((F(-1), F(2), F(0)), F(3), alpha) == P("-x + 2*x*y - 3", m.vars)
    ident = [P("x", m.vars), P("y", m.vars)]
    assert back_substitute((F(1), F(-1)), F(0), ident) == P("x - y", m.vars)
    f = load("petter2")
    alpha = [P("x", f.vars), P("y", f.vars), P("y^2", f.vars)]
    assert back_substitute((F(1), F(0), F(-1)), F(0), alpha) == P("x - y^2", f.vars)
