from __future__ import annotations

from fractions import Fraction as F

from hypothesis import given, settings
from hypothesis import strategies as st

from cobabs.exactalg import (
    Echelon,
    Matrix,
    affine_hull_closure,
    charpoly,
    determinant,
    in_column_space,
    kernel,
    rank,
    residual,
    rref,
    solve,
)

small = st.fractions(min_value=-5, max_value=5, max_denominator=4)


def matrices(max_rows=4, max_cols=5):
    return st.integers(1, max_rows).flatmap(
        lambda r: st.integers(1, max_cols).flatmap(
            lambda c: st.lists(st.lists(small, min_size=c, max_size=c), min_size=r, max_size=r)
        )
    )


def test_rref_examples():
    m, piv = rref(Matrix.from_rows([[2, 4], [1, 2]]))
    assert m.to_lists() == [[1, 2], [0, 0]] and piv == [0]
    eye = Matrix.identity(3)
    assert rref(eye) == (eye, [0, 1, 2])
    m, piv = rref(Matrix.from_rows([[1, 2], [3, 4]]))
    assert m == Matrix.identity(2) and piv == [0, 1]


def test_kernel_examples():
    assert kernel(Matrix.from_rows([[1, 1]])) == [(F(-1), F(1))]
    assert kernel(Matrix.identity(4)) == []
    ks = kernel(Matrix.from_rows([[1, 2, 3], [2, 4, 6]]))
    assert len(ks) == 2
    # free variables set to 1 in column order
    assert ks == [(F(-2), F(1), F(0)), (F(-3), F(0), F(1))]


def test_residual_examples():
    basis = Matrix.from_columns([[1, 0], [0, 1]])
    assert residual([1, 1], basis) == (0, 0)
    assert residual([1, 0], Matrix.from_columns([[0, 1]])) == (1, 0)
    span = Matrix.from_columns([[1, 2, 3]])
    assert residual([2, 4, 6], span) == (0, 0, 0)


def test_affine_hull_closure_examples():
    d = Matrix.from_columns([[1, 0, 0]])
    p, dirs = affine_hull_closure([1, 2, 3], d, Matrix.zeros(3, 3), [0, 0, 0])
    # same affine set: directions unchanged, point moved only along them
    assert dirs == d
    assert all(x == 0 for x in residual([a - b for a, b in zip(p, (1, 2, 3))], d))
    p, dirs = affine_hull_closure([0, 0], Matrix.zeros(2, 0), Matrix.identity(2), [1, 0])
    assert p == (0, 0) and dirs.columns() == [(1, 0)]
    full = Matrix.identity(2)
    _, dirs = affine_hull_closure([0, 0], full, Matrix.from_rows([[0, 1], [1, 0]]), [5, 7])
    assert rank(dirs) == 2


def test_affine_hull_closure_chain():
    # nilpotent shift: A e1 = e2, A e2 = e3, A e3 = 0; b = e1
    a = Matrix.from_rows([[0, 0, 0], [1, 0, 0], [0, 1, 0]])
    _, dirs = affine_hull_closure([0, 0, 0], Matrix.zeros(3, 0), a, [1, 0, 0])
    assert rank(dirs) == 3


def test_determinant_and_charpoly():
    m = Matrix.from_rows([[1, 2], [3, 4]])
    assert determinant(m) == -2
    assert charpoly(m) == [1, -5, -2]
    ex = Matrix.from_rows([[2, 1, 0], [1, 9, F(1, 2)], [0, 2, 16]])
    assert determinant(ex) == 270


def test_echelon_membership():
    e = Echelon()
    assert e.add({"a": F(1), "b": F(1)})
    assert not e.add({"a": F(2), "b": F(2)})
    assert e.contains({"a": F(-3), "b": F(-3)})
    assert not e.contains({"a": F(1)})


@settings(max_examples=60, deadline=None)
@given(matrices())
def test_rref_idempotent(rows):
    m = Matrix.from_rows(rows)
    r, piv = rref(m)
    assert rref(r) == (r, piv)
    assert rank(m) == len(piv)


@settings(max_examples=60, deadline=None)
@given(matrices())
def test_kernel_vectors_annihilate(rows):
    m = Matrix.from_rows(rows)
    ks = kernel(m)
    assert len(ks) == m.ncols - rank(m)
    for k in ks:
        assert all(x == 0 for x in m.apply(k))


@settings(max_examples=60, deadline=None)
@given(matrices(), st.data())
def test_residual_zero_iff_solvable(rows, data):
    span = Matrix.from_columns(rows)
    v = data.draw(st.lists(small, min_size=span.nrows, max_size=span.nrows))
    sol = solve(span, v)
    zero = all(x == 0 for x in residual(v, span))
    assert zero == (sol is not None) == in_column_space(v, span)
    if sol is not None:
        assert list(span.apply(sol)) == v


@settings(max_examples=60, deadline=None)
@given(matrices(), st.data())
def test_combinations_are_members(rows, data):
    span = Matrix.from_columns(rows)
    coeffs = data.draw(st.lists(small, min_size=span.ncols, max_size=span.ncols))
    v = span.apply(coeffs)
    assert all(x == 0 for x in residual(v, span))


@given(small, small, small, small)
def test_exact_addition_two_ways(a, b, c, d):
    assert (a + b) + (c + d) == a + (b + (c + d)) == (d + c) + (b + a)
