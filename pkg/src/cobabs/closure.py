"""Polynomial subspaces, power-product spaces and the d-closure fixpoint."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations_with_replacement
from math import comb
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .exactalg import ONE, ZERO, Echelon
from .model import SystemModel, Transition, incoming
from .poly import (
    Monomial,
    Polynomial,
    VarTable,
    VectorField,
    fpre,
    grlex_key,
    lie_derivative,
    monomials_up_to,
)

log = logging.getLogger(__name__)


class ProductCapExceeded(RuntimeError):
    pass


class SweepCapExceeded(RuntimeError):
    pass


def _mono_key(m: Monomial):
    # smallest key = largest monomial in graded-lex order
    return (0, -sum(m), tuple(-e for e in m))


def poly_echelon(polys: Iterable[Polynomial]) -> Echelon:
    e = Echelon(_mono_key)
    for p in polys:
        e.add(dict(p.terms))
    return e


def _canonical(vars: VarTable, e: Echelon) -> Tuple[Polynomial, ...]:
    rows = [Polynomial._raw(vars, r) for r in e.rows()]
    return tuple(sorted(rows, key=lambda p: grlex_key(p.leading_monomial())))


class SubspaceBasis:
    """A finite-dimensional space of polynomials (never containing 1).

    ``elements`` keeps the order it was built with, so a caller may fix the
    coordinate order of an abstraction; ``canonical`` is the unique reduced
    basis (pivot at the largest monomial, sorted ascending) used for equality.
    """

    def __init__(self, vars: VarTable, elements: Sequence[Polynomial] = (), check: bool = True):
        self.vars = vars
        self.elements = tuple(elements)
        for p in self.elements:
            if p.vars != vars:
                raise ValueError("basis element over a different VarTable")
        self._echelon = poly_echelon([])
        for p in self.elements:
            if p.is_constant() or (not self._echelon.add(dict(p.terms)) and check):
                raise ValueError(f"basis elements not independent (or constant) at {p.render()}")
        self.canonical = _canonical(vars, self._echelon)

    @classmethod
    def span(cls, vars: VarTable, polys: Iterable[Polynomial]) -> "SubspaceBasis":
        """Canonical basis of the span; constants must not be in the span."""
        e = poly_echelon(polys)
        return cls(vars, _canonical(vars, e))

    @property
    def dim(self) -> int:
        return len(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __eq__(self, other) -> bool:
        return isinstance(other, SubspaceBasis) and self.vars == other.vars and self.canonical == other.canonical

    def __hash__(self) -> int:
        return hash(self.canonical)

    def __repr__(self) -> str:
        return "SubspaceBasis{" + ", ".join(p.render() for p in self.elements) + "}"

    def residual(self, p: Polynomial) -> Polynomial:
        return Polynomial._raw(self.vars, self._echelon.reduce(dict(p.terms)))

    def contains(self, p: Polynomial) -> bool:
        return not self._echelon.reduce(dict(p.terms))

    def contains_space(self, other: "SubspaceBasis") -> bool:
        return all(self.contains(p) for p in other.elements)

    def canonical_form(self) -> "SubspaceBasis":
        return SubspaceBasis(self.vars, self.canonical)

    def without_parameter_only(self, params: Sequence[str]) -> "SubspaceBasis":
        """Drop the part of the space made of polynomials in the parameters alone."""
        pidx = {self.vars.index(p) for p in params}
        sidx = [i for i in range(len(self.vars)) if i not in pidx]

        def param_only(m: Monomial) -> bool:
            return all(m[i] == 0 for i in sidx)

        e = Echelon(lambda m: (1 if param_only(m) else 0, _mono_key(m)))
        for p in self.elements:
            e.add(dict(p.terms))
        keep = [Polynomial._raw(self.vars, e.row_for(pv)) for pv in e.pivots if not param_only(pv)]
        return SubspaceBasis.span(self.vars, keep)


def initial_basis(vars: VarTable, k: int) -> SubspaceBasis:
    """All monomials of degree 1..k."""
    if k < 1:
        raise ValueError("init degree must be at least 1")
    return SubspaceBasis(vars, [Polynomial.monomial(vars, m) for m in monomials_up_to(len(vars), k, 1)])


@dataclass
class ClosureConfig:
    degree_out: int = 1
    degree_init: int = 2
    max_products: int = 200_000
    max_sweeps: Optional[int] = None

    def __post_init__(self):
        if self.degree_out < 1 or self.degree_init < 1:
            raise ValueError("degrees must be positive")


def product_count(dim: int, d: int) -> int:
    return comb(dim + d, d)


def products(elements: Sequence[Polynomial], d: int, cap: int = 200_000) -> List[Tuple[Tuple[int, ...], Polynomial]]:
    """All products of at most ``d`` elements (with 1 adjoined), keyed by the
    sorted index tuple of the factors (``()`` is the constant 1)."""
    if product_count(len(elements), d) > cap:
        raise ProductCapExceeded(f"{product_count(len(elements), d)} products exceed the cap of {cap}")
    if not elements:
        return [((), None)]
    vars = elements[0].vars
    out: List[Tuple[Tuple[int, ...], Polynomial]] = [((), Polynomial.constant(vars, 1))]
    cache: Dict[Tuple[int, ...], Polynomial] = {(): out[0][1]}
    for deg in range(1, d + 1):
        for combo in combinations_with_replacement(range(len(elements)), deg):
            p = cache[combo[:-1]] * elements[combo[-1]]
            cache[combo] = p
            out.append((combo, p))
    return out


def pp_basis(v: SubspaceBasis, d: int, cap: int = 200_000) -> Echelon:
    """Echelon basis (over monomials) of pp(V, d); always contains 1."""
    if d < 1:
        raise ValueError("out degree must be at least 1")
    e = Echelon(_mono_key)
    e.add({(0,) * len(v.vars): ONE})
    if d == 1:
        for p in v.canonical:
            e.add(dict(p.terms))
        return e
    for _, p in products(v.canonical, d, cap)[1:]:
        e.add(dict(p.terms))
    return e


def pp_space(v: SubspaceBasis, d: int, cap: int = 200_000) -> List[Polynomial]:
    return [Polynomial._raw(v.vars, r) for r in pp_basis(v, d, cap).rows()]


# -- refinement ---------------------------------------------------------------

def _rz_key(c):
    # residual columns ("r", ...) sort before the coefficient tags ("z", j)
    tag = c[1]
    return (0, tag[1], _mono_key(tag[2])) if tag[0] == "r" else (1, tag[1])


def refine_continuous(v: SubspaceBasis, f: VectorField, d: int, cap: int = 200_000) -> SubspaceBasis:
    """``{g in V : lie(g) in pp(V, d)}``."""
    pp = pp_basis(v, d, cap)
    return _refine_with(v, [([lie_derivative(g, f) for g in v.elements], pp)])


def refine_discrete(v_post: SubspaceBasis, v_pre: SubspaceBasis, t: Transition, d: int, cap: int = 200_000) -> SubspaceBasis:
    """``{g in V_post : fpre(g, t) in pp(V_pre, d)}``."""
    pp = pp_basis(v_pre, d, cap)
    return _refine_with(v_post, [([fpre(g, t.update) for g in v_post.elements], pp)])


def _refine_with(v: SubspaceBasis, constraints: List[Tuple[List[Polynomial], Echelon]]) -> SubspaceBasis:
    if not v.elements or not constraints:
        return v
    n = len(v.elements)
    e = Echelon(_rz_key)
    for j in range(n):
        row: Dict = {}
        for ci, (images, target) in enumerate(constraints):
            for m, c in target.reduce(dict(images[j].terms)).items():
                row[("#", ("r", ci, m))] = c
        row[("#", ("z", j))] = ONE
        e.add(row)
    keep = []
    for pv in e.pivots:
        if pv[1][0] != "z":
            continue
        g = Polynomial.zero(v.vars)
        for c, x in e.row_for(pv).items():
            g = g + v.elements[c[1][1]].scale(x)
        keep.append(g)
    if len(keep) == n:
        return v
    return SubspaceBasis.span(v.vars, keep)


# -- fixpoint -------------------------------------------------------------------

@dataclass
class FixpointResult:
    spaces: Dict[str, SubspaceBasis]
    sweeps: int
    changing_sweeps: int
    history: List[Dict[str, int]] = field(default_factory=list)

    def dims(self) -> Dict[str, int]:
        return {l: s.dim for l, s in self.spaces.items()}

    def total_dim(self) -> int:
        return sum(s.dim for s in self.spaces.values())


def _location_constraints(model: SystemModel, loc: str, spaces: Dict[str, SubspaceBasis], d: int, cap: int, pp_cache):
    v = spaces[loc]
    cons = []

    def pp(l):
        if l not in pp_cache:
            pp_cache[l] = pp_basis(spaces[l], d, cap)
        return pp_cache[l]

    f = model.field_at(loc)
    if f is not None and not f.is_zero():
        cons.append(([lie_derivative(g, f) for g in v.elements], pp(loc)))
    for t in incoming(model, loc):
        cons.append(([fpre(g, t.update) for g in v.elements], pp(t.source)))
    return cons


def one_sweep(model: SystemModel, spaces: Dict[str, SubspaceBasis], d: int, cap: int = 200_000) -> Dict[str, SubspaceBasis]:
    """Refine every location against the spaces at the start of the sweep."""
    pp_cache: Dict[str, Echelon] = {}
    out = {}
    for loc in model.locations:
        out[loc] = _refine_with(spaces[loc], _location_constraints(model, loc, spaces, d, cap, pp_cache))
    return out


def fixpoint(
    model: SystemModel,
    cfg: ClosureConfig,
    initial: Optional[Dict[str, SubspaceBasis]] = None,
) -> FixpointResult:
    """Greatest d-closed collection inside the initial one (Jacobi sweeps)."""
    if initial is None:
        b0 = initial_basis(model.vars, cfg.degree_init)
        initial = {l: b0 for l in model.locations}
    spaces = dict(initial)
    total0 = sum(s.dim for s in spaces.values())
    cap = cfg.max_sweeps if cfg.max_sweeps is not None else 10 * max(total0, 1)
    history = [{l: s.dim for l, s in spaces.items()}]
    sweeps = changing = 0
    while True:
        if sweeps >= cap:
            raise SweepCapExceeded(f"no convergence after {sweeps} sweeps")
        new = one_sweep(model, spaces, cfg.degree_out, cfg.max_products)
        sweeps += 1
        history.append({l: s.dim for l, s in new.items()})
        log.debug("sweep %d: %s", sweeps, history[-1])
        if all(new[l].dim == spaces[l].dim for l in spaces):
            break
        changing += 1
        spaces = new
    return FixpointResult(spaces, sweeps, changing, history)


# -- certificate -------------------------------------------------------------------

@dataclass
class ClosureObligation:
    location: str
    source: str  # "flow" or a transition name
    element: Polynomial
    residual: Polynomial


def closure_certificate(model: SystemModel, spaces: Dict[str, SubspaceBasis], d: int, cap: int = 200_000) -> List[ClosureObligation]:
    """Residuals of every closure obligation, computed from scratch.

    Membership is decided by solving against the expanded products rather
    than through the refinement code; an empty failure list certifies
    d-closure.
    """
    out = []
    pp_sets = {}
    for loc in model.locations:
        prods = [p for _, p in products(spaces[loc].elements, d, cap)] if spaces[loc].elements else [Polynomial.constant(model.vars, 1)]
        pp_sets[loc] = SpanChecker(prods)
    for loc in model.locations:
        f = model.field_at(loc)
        for g in spaces[loc].elements:
            if f is not None:
                out.append(ClosureObligation(loc, "flow", g, pp_sets[loc].residual(lie_derivative(g, f))))
            for t in incoming(model, loc):
                out.append(ClosureObligation(loc, t.name, g, pp_sets[t.source].residual(fpre(g, t.update))))
    return out


class SpanChecker:
    """Membership in the span of a list of polynomials, with representations."""

    def __init__(self, gens: Sequence[Polynomial]):
        self.gens = list(gens)
        self.vars = gens[0].vars if gens else None
        # relation rows pivot on the latest generator so earlier ones are preferred
        self._e = Echelon(lambda c: (1, -c[1]) if _tagged(c) else _mono_key(c))
        for i, g in enumerate(self.gens):
            row = dict(g.terms)
            row[("#", i)] = ONE
            self._e.add(row)

    def _reduce(self, p: Polynomial):
        return self._e.reduce(dict(p.terms))

    def residual(self, p: Polynomial) -> Polynomial:
        r = self._reduce(p)
        return Polynomial._raw(p.vars, {m: c for m, c in r.items() if not _tagged(m)})

    def contains(self, p: Polynomial) -> bool:
        return self.residual(p).is_zero()

    def represent(self, p: Polynomial) -> Optional[List[Fraction]]:
        """Coefficients ``c`` with ``p = sum c_i gens[i]`` or None."""
        r = self._reduce(p)
        if any(not _tagged(m) for m in r):
            return None
        coeffs = [ZERO] * len(self.gens)
        for tag, c in r.items():
            coeffs[tag[1]] = -c
        return coeffs


def _tagged(c) -> bool:
    return len(c) == 2 and c[0] == "#"
