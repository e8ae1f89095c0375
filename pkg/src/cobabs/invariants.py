"""Affine equality invariants of abstract systems, transferred back through alpha."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import sympy

from .abstraction import AbstractSystem, CobMap, NotAffine, affine_parts, init_substitution
from .closure import SpanChecker
from .exactalg import ONE, ZERO, Echelon, Matrix, affine_hull_closure, charpoly, dot, kernel
from .model import InitSet
from .poly import Polynomial, VarTable, lie_derivative

log = logging.getLogger(__name__)


def _sparse(v: Sequence[Fraction]) -> Dict[int, Fraction]:
    return {i: x for i, x in enumerate(v) if x}


def _dense(d: Dict[int, Fraction], n: int) -> Tuple[Fraction, ...]:
    return tuple(d.get(i, ZERO) for i in range(n))


@dataclass(frozen=True)
class AffineSubspace:
    """``point + span(directions)``; ``point is None`` encodes the empty set."""

    dim_ambient: int
    point: Optional[Tuple[Fraction, ...]]
    directions: Tuple[Tuple[Fraction, ...], ...] = ()

    @classmethod
    def empty(cls, n: int) -> "AffineSubspace":
        return cls(n, None, ())

    @classmethod
    def make(cls, point: Sequence[Fraction], directions: Sequence[Sequence[Fraction]]) -> "AffineSubspace":
        n = len(point)
        e = Echelon()
        for d in directions:
            e.add(_sparse(d))
        base = _dense(e.reduce(_sparse(point)), n)
        return cls(n, base, tuple(_dense(r, n) for r in e.rows()))

    @property
    def is_empty(self) -> bool:
        return self.point is None

    @property
    def dim(self) -> int:
        return -1 if self.is_empty else len(self.directions)

    def _echelon(self) -> Echelon:
        e = Echelon()
        for d in self.directions:
            e.add(_sparse(d))
        return e

    def contains_point(self, p: Sequence[Fraction]) -> bool:
        if self.is_empty:
            return False
        diff = [a - b for a, b in zip(p, self.point)]
        return not self._echelon().reduce(_sparse(diff))

    def contains(self, other: "AffineSubspace") -> bool:
        if other.is_empty:
            return True
        if self.is_empty:
            return False
        e = self._echelon()
        return self.contains_point(other.point) and all(not e.reduce(_sparse(d)) for d in other.directions)

    def join(self, other: "AffineSubspace") -> "AffineSubspace":
        if self.is_empty:
            return other
        if other.is_empty:
            return self
        diff = tuple(a - b for a, b in zip(other.point, self.point))
        return AffineSubspace.make(self.point, list(self.directions) + list(other.directions) + [diff])

    def image(self, m: Matrix, c: Sequence[Fraction]) -> "AffineSubspace":
        if self.is_empty:
            return self
        p = tuple(x + y for x, y in zip(m.apply(self.point), c))
        return AffineSubspace.make(p, [m.apply(d) for d in self.directions])

    def meet_hyperplane(self, a: Sequence[Fraction], e: Fraction) -> "AffineSubspace":
        """Intersect with ``a . w = e``."""
        if self.is_empty:
            return self
        gap = e - dot(a, self.point)
        vals = [dot(a, d) for d in self.directions]
        k = next((i for i, v in enumerate(vals) if v), None)
        if k is None:
            return self if gap == 0 else AffineSubspace.empty(self.dim_ambient)
        pivot = self.directions[k]
        p = tuple(x + gap / vals[k] * y for x, y in zip(self.point, pivot))
        dirs = [
            tuple(y - vals[i] / vals[k] * z for y, z in zip(d, pivot))
            for i, d in enumerate(self.directions)
            if i != k
        ]
        return AffineSubspace.make(p, dirs)

    def equations(self) -> List[Tuple[Tuple[Fraction, ...], Fraction]]:
        """Canonical ``(c, e)`` pairs with ``c . w = e`` spanning all affine equalities."""
        if self.is_empty:
            return []
        n = self.dim_ambient
        if self.directions:
            cs = kernel(Matrix.from_rows(self.directions, n))
        else:
            cs = [tuple(ONE if i == j else ZERO for i in range(n)) for j in range(n)]
        e = Echelon()
        for c in cs:
            e.add(_sparse(c))
        return [(_dense(r, n), dot(_dense(r, n), self.point)) for r in e.rows()]


@dataclass(frozen=True)
class EqualityInvariant:
    location: str
    coeffs: Tuple[Fraction, ...]
    rhs: Fraction
    concrete: Polynomial  # concrete = 0

    def abstract_text(self, wvars: VarTable) -> str:
        lhs = Polynomial(wvars, {tuple(1 if j == i else 0 for j in range(len(wvars))): c for i, c in enumerate(self.coeffs)})
        return f"{(lhs - self.rhs).render()} = 0"


@dataclass(frozen=True)
class ConservedQuantity:
    coeffs: Tuple[Fraction, ...]
    scale: Fraction
    concrete: Polynomial


def back_substitute(coeffs: Sequence[Fraction], rhs: Fraction, alpha: Sequence[Polynomial]) -> Polynomial:
    """``sum c_j alpha_j - rhs`` as a polynomial over the original variables."""
    if len(coeffs) != len(alpha):
        raise ValueError("arity mismatch between invariant and alpha")
    vars = alpha[0].vars
    out = Polynomial.constant(vars, -rhs)
    for c, h in zip(coeffs, alpha):
        if c:
            out = out + h.scale(c)
    return out


def init_hull(init: InitSet, alpha: Sequence[Polynomial], vars: VarTable) -> AffineSubspace:
    """Affine hull of ``alpha(X0)`` where X0 is treated as Zariski dense in its free variables.

    Inequalities and equalities that cannot be eliminated are dropped, so the
    result over-approximates the true hull.
    """
    images, free = init_substitution(init, vars)
    qs = [h.substitute(images) for h in alpha]
    n = len(qs)
    zero = (0,) * len(vars)
    point = tuple(q.coeff(zero) for q in qs)
    monos = sorted({m for q in qs for m in q.terms if m != zero})
    dirs = [tuple(q.coeff(m) for q in qs) for m in monos]
    if n == 0:
        return AffineSubspace(0, (), ())
    return AffineSubspace.make(point, dirs)


def _affine_guard_hyperplanes(guard, alpha_pre: Sequence[Polynomial]) -> List[Tuple[Tuple[Fraction, ...], Fraction]]:
    """Equality guard atoms that are affine combinations of the alpha components."""
    out = []
    eq_atoms = [a for a in guard.atoms if a.rel == "="]
    if not eq_atoms:
        return out
    vars = eq_atoms[0].poly.vars
    gens = [Polynomial.constant(vars, 1)] + list(alpha_pre)
    checker = SpanChecker(gens)
    for a in eq_atoms:
        rep = checker.represent(a.poly)
        if rep is None:
            continue
        out.append((tuple(rep[1:]), -rep[0]))
    return out


def karr(abs_sys: AbstractSystem, alpha: CobMap, model_init: InitSet, model_vars: VarTable) -> Dict[str, AffineSubspace]:
    """Least fixpoint of affine-hull propagation over the abstract transitions.

    Locations with continuous dynamics close their hull under the flow, so
    the same routine serves continuous, discrete and hybrid abstractions.
    """
    if abs_sys.degree != 1:
        raise NotAffine("Karr analysis needs affine abstract updates (degree-out 1)")
    n = len(abs_sys.vars)
    flows = {}
    for loc in abs_sys.locations:
        if abs_sys.dynamics_at(loc) is not None:
            flows[loc] = abs_sys.affine(loc)

    def close(loc: str, h: AffineSubspace) -> AffineSubspace:
        # hybrid locations: the hull must also be invariant under the flow
        if loc not in flows or h.is_empty:
            return h
        a, b = flows[loc]
        dirs = Matrix.from_columns(h.directions, n) if h.directions else Matrix(n, 0)
        point, dmat = affine_hull_closure(h.point, dirs, a, b)
        return AffineSubspace.make(point, dmat.columns())

    hulls = {l: AffineSubspace.empty(n) for l in abs_sys.locations}
    start = abs_sys.init_location
    hulls[start] = close(start, init_hull(model_init, alpha.at(start), model_vars))
    trans = []
    for t in abs_sys.transitions:
        m, c = affine_parts(t.update, abs_sys.vars)
        planes = _affine_guard_hyperplanes(t.guard, alpha.at(t.source))
        trans.append((t, m, c, planes))
    work = [abs_sys.init_location]
    while work:
        loc = work.pop(0)
        for t, m, c, planes in trans:
            if t.source != loc:
                continue
            h = hulls[loc]
            for a, e in planes:
                h = h.meet_hyperplane(a, e)
            img = h.image(m, c)
            new = close(t.target, hulls[t.target].join(img))
            if new != hulls[t.target]:
                hulls[t.target] = new
                if t.target not in work:
                    work.append(t.target)
    return hulls


def equalities(hulls: Dict[str, AffineSubspace], alpha: CobMap) -> List[EqualityInvariant]:
    out = []
    for loc, h in hulls.items():
        comps = alpha.at(loc)
        for c, e in h.equations():
            conc = back_substitute(c, e, comps)
            if conc.is_zero():
                continue  # relation among padded components only
            out.append(EqualityInvariant(loc, c, e, conc))
    return out


def ode_equalities(abs_sys: AbstractSystem, alpha: CobMap, model_init: InitSet, model_vars: VarTable, loc: Optional[str] = None) -> AffineSubspace:
    """Smallest flow-invariant affine subspace containing the init hull."""
    loc = loc or abs_sys.init_location
    if abs_sys.degree != 1:
        raise NotAffine("ODE equalities need affine abstract dynamics (degree-out 1)")
    a, b = abs_sys.affine(loc)
    h = init_hull(model_init, alpha.at(loc), model_vars)
    if h.is_empty:
        return h
    n = len(abs_sys.vars)
    dirs = Matrix.from_columns(h.directions, n) if h.directions else Matrix(n, 0)
    point, dmat = affine_hull_closure(h.point, dirs, a, b)
    return AffineSubspace.make(point, dmat.columns())


# -- strong / constant scale ---------------------------------------------------------

def rational_roots(coeffs: Sequence[Fraction]) -> List[Fraction]:
    """Distinct rational roots of a polynomial given highest degree first."""
    x = sympy.Symbol("x")
    p = sympy.Poly([sympy.Rational(c.numerator, c.denominator) for c in coeffs], x, domain="QQ")
    roots = []
    for fac, _ in p.factor_list()[1]:
        if fac.degree() == 1:
            a, b = fac.all_coeffs()
            r = -sympy.Rational(b) / sympy.Rational(a)
            roots.append(Fraction(int(r.p), int(r.q)))
    return sorted(set(roots))


@dataclass
class ScaleResult:
    quantities: List[ConservedQuantity]
    skipped_eigen_degree: int  # degree of the char. polynomial not covered by rational roots


def _left_kernel(a: Matrix, lam: Fraction, b: Sequence[Fraction]) -> List[Tuple[Fraction, ...]]:
    n = a.nrows
    rows = []
    at = a.transpose()
    for i in range(n):
        r = list(at.row(i))
        r[i] -= lam
        rows.append(r)
    rows.append(list(b))
    return kernel(Matrix.from_rows(rows, n))


def scale_functions(a: Matrix, b: Sequence[Fraction], alpha: Optional[Sequence[Polynomial]] = None) -> ScaleResult:
    """Strong-scale (``c^T A = 0``) and constant-scale (``c^T A = λ c^T``) functions with ``c . b = 0``."""
    n = a.nrows
    out = []
    if n == 0:
        return ScaleResult([], 0)
    cp = charpoly(a)
    roots = rational_roots(cp)
    lams = [Fraction(0)] + [r for r in roots if r != 0]
    covered = 0
    x = sympy.Symbol("x")
    poly = sympy.Poly([sympy.Rational(c.numerator, c.denominator) for c in cp], x)
    for r in roots:
        covered += _multiplicity(poly, r, x)
    for lam in lams:
        for c in _left_kernel(a, lam, b):
            conc = back_substitute(c, ZERO, alpha) if alpha is not None else None
            out.append(ConservedQuantity(tuple(c), lam, conc))
    return ScaleResult(out, (len(cp) - 1) - covered)


def _multiplicity(poly, r: Fraction, x) -> int:
    k = 0
    root = sympy.Rational(r.numerator, r.denominator)
    p = poly
    while p.degree() > 0 and p.eval(root) == 0:
        p = sympy.Poly(sympy.quo(p.as_expr(), x - root), x)
        k += 1
    return k


def scale_certificate(q: ConservedQuantity, field) -> Polynomial:
    """``lie(c . alpha) - λ (c . alpha)``; zero for a genuine scale function."""
    return lie_derivative(q.concrete, field) - q.concrete.scale(q.scale)


def implied(target: Polynomial, invs: Sequence[Polynomial]) -> bool:
    """Is ``target`` a linear combination of the given concrete equalities?"""
    if target.is_zero():
        return True
    if not invs:
        return False
    return SpanChecker(list(invs)).contains(target)
