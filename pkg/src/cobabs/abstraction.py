"""Building the abstract system from a closed collection of spaces."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .closure import SpanChecker, SubspaceBasis, products
from .exactalg import ZERO, Matrix
from .model import (
    Atom,
    Condition,
    ContinuousSystem,
    InitSet,
    Interval,
    SystemModel,
    TRUE,
)
from .poly import Monomial, Polynomial, VarTable, VectorField, fpre, lie_derivative


class NotClosed(RuntimeError):
    """A basis element's image is not expressible in the power-product space."""


class NotAffine(ValueError):
    pass


@dataclass(frozen=True)
class CobMap:
    """Per-location tuple of components, zero padded to a common arity."""

    vars: VarTable
    maps: Tuple[Tuple[str, Tuple[Polynomial, ...]], ...]

    @property
    def arity(self) -> int:
        return len(self.maps[0][1]) if self.maps else 0

    def at(self, loc: str) -> Tuple[Polynomial, ...]:
        for l, comps in self.maps:
            if l == loc:
                return comps
        raise KeyError(loc)

    def nonzero(self, loc: str) -> int:
        return sum(1 for p in self.at(loc) if not p.is_zero())

    def locations(self) -> Tuple[str, ...]:
        return tuple(l for l, _ in self.maps)


@dataclass(frozen=True)
class AbstractTransition:
    name: str
    source: str
    target: str
    guard: Condition  # original guard, passed through untouched
    update: Tuple[Polynomial, ...]


@dataclass(frozen=True)
class AbstractSystem:
    kind: str
    vars: VarTable
    locations: Tuple[str, ...]
    init_location: str
    dynamics: Tuple[Tuple[str, Tuple[Polynomial, ...]], ...]
    transitions: Tuple[AbstractTransition, ...]
    init: InitSet
    degree: int

    def dynamics_at(self, loc: str) -> Optional[Tuple[Polynomial, ...]]:
        for l, dyn in self.dynamics:
            if l == loc:
                return dyn
        return None

    def field_at(self, loc: str) -> Optional[VectorField]:
        dyn = self.dynamics_at(loc)
        return VectorField(self.vars, dyn) if dyn is not None else None

    def max_degree(self) -> int:
        polys = [p for _, dyn in self.dynamics for p in dyn] + [p for t in self.transitions for p in t.update]
        return max((p.degree() for p in polys), default=-1)

    def affine(self, loc: str) -> Tuple[Matrix, Tuple[Fraction, ...]]:
        dyn = self.dynamics_at(loc)
        if dyn is None:
            raise KeyError(f"no continuous dynamics at {loc}")
        return affine_parts(dyn, self.vars)

    def transition_affine(self, t: AbstractTransition) -> Tuple[Matrix, Tuple[Fraction, ...]]:
        return affine_parts(t.update, self.vars)


def affine_parts(polys: Sequence[Polynomial], vars: VarTable) -> Tuple[Matrix, Tuple[Fraction, ...]]:
    """``(M, c)`` with ``polys = M w + c``; raises NotAffine on higher degree."""
    n = len(vars)
    rows = []
    consts = []
    for p in polys:
        if p.degree() > 1:
            raise NotAffine(f"non-affine abstract polynomial {p.render()}")
        row = [ZERO] * n
        for m, c in p.terms.items():
            if sum(m):
                row[m.index(1)] = c
        rows.append(row)
        consts.append(p.constant_term())
    return Matrix.from_rows(rows, n), tuple(consts)


def abstract_vars(m: int, prefix: str = "w") -> VarTable:
    return VarTable([f"{prefix}{i + 1}" for i in range(m)])


def _product_poly(wvars: VarTable, combo: Tuple[int, ...]) -> Polynomial:
    exps = [0] * len(wvars)
    for i in combo:
        exps[i] += 1
    return Polynomial._raw(wvars, {tuple(exps): Fraction(1)})


class _Representer:
    def __init__(self, elements: Sequence[Polynomial], d: int, wvars: VarTable, vars: VarTable, cap: int):
        if elements:
            prods = products(elements, d, cap)
        else:
            prods = [((), Polynomial.constant(vars, 1))]
        self.combos = [c for c, _ in prods]
        self.checker = SpanChecker([p for _, p in prods])
        self.wvars = wvars

    def express(self, target: Polynomial, what: str) -> Polynomial:
        coeffs = self.checker.represent(target)
        if coeffs is None:
            raise NotClosed(f"{what}: {target.render()} is not in the power-product space")
        terms: Dict[Monomial, Fraction] = {}
        for combo, c in zip(self.combos, coeffs):
            if c:
                m = next(iter(_product_poly(self.wvars, combo).terms))
                terms[m] = terms.get(m, ZERO) + c
        return Polynomial(self.wvars, terms)


def _elements(space) -> Tuple[Polynomial, ...]:
    return tuple(space.elements) if isinstance(space, SubspaceBasis) else tuple(space)


def build(
    model: SystemModel,
    spaces: Mapping[str, Union[SubspaceBasis, Sequence[Polynomial]]],
    d: int,
    cap: int = 200_000,
) -> Tuple[CobMap, AbstractSystem]:
    """Express every image of every basis element as a degree-``d``
    polynomial in the basis; ``w_j`` stands for the ``j``-th element."""
    elems = {loc: _elements(spaces[loc]) for loc in model.locations}
    m = max((len(e) for e in elems.values()), default=0)
    wvars = abstract_vars(m)
    zero_w = Polynomial.zero(wvars)
    zero_x = Polynomial.zero(model.vars)
    reps = {loc: _Representer(elems[loc], d, wvars, model.vars, cap) for loc in model.locations}

    padded = tuple((loc, elems[loc] + (zero_x,) * (m - len(elems[loc]))) for loc in model.locations)
    alpha = CobMap(model.vars, padded)

    dynamics = []
    for loc in model.locations:
        f = model.field_at(loc)
        if f is None:
            continue
        dyn = [reps[loc].express(lie_derivative(h, f), f"flow at {loc}, w{i + 1}") for i, h in enumerate(elems[loc])]
        dynamics.append((loc, tuple(dyn) + (zero_w,) * (m - len(dyn))))

    transitions = []
    for t in model.transitions:
        upd = [
            reps[t.source].express(fpre(h, t.update), f"transition {t.name}, w{i + 1}")
            for i, h in enumerate(elems[t.target])
        ]
        transitions.append(AbstractTransition(t.name, t.source, t.target, t.guard, tuple(upd) + (zero_w,) * (m - len(upd))))

    init = map_initial_box(model.init, alpha.at(model.init_location), model.vars, wvars)
    abs_sys = AbstractSystem(
        model.kind,
        wvars,
        tuple(model.locations),
        model.init_location,
        tuple(dynamics),
        tuple(transitions),
        init,
        d,
    )
    return alpha, abs_sys


# -- initial sets ----------------------------------------------------------------

def init_substitution(init: InitSet, vars: VarTable) -> Tuple[List[Polynomial], List[str]]:
    """Images of the variables after eliminating point-valued variables and
    equalities of the form ``x = poly(other variables)``.

    Returns the images and the names of variables that stay free.
    """
    images = [Polynomial.variable(vars, n) for n in vars.names]
    bound = set()
    for n, iv in init.box:
        if iv.is_point:
            images[vars.index(n)] = Polynomial.constant(vars, iv.low)
            bound.add(n)
    images = [p.substitute(images) for p in images]
    for atom in init.condition.atoms:
        if atom.rel != "=":
            continue
        p = atom.poly.substitute(images)
        for i, n in enumerate(vars.names):
            if n in bound or p.degree_in(n) != 1:
                continue
            lin = tuple(1 if j == i else 0 for j in range(len(vars)))
            if any(mm[i] for mm in p.terms if mm != lin):
                continue
            a = p.terms.get(lin)
            if not a:
                continue
            expr = (Polynomial.variable(vars, n) - p.scale(1 / a))
            sub = list(Polynomial.variable(vars, v) for v in vars.names)
            sub[i] = expr
            images = [q.substitute(sub) for q in images]
            bound.add(n)
            break
    free = [n for n in vars.names if n not in bound]
    return images, free


Bound = Union[Fraction, float]  # float only for +-inf


def _imul(a: Bound, b: Bound) -> Bound:
    if a == 0 or b == 0:
        return Fraction(0)
    return a * b


def _interval_mul(x: Tuple[Bound, Bound], y: Tuple[Bound, Bound]) -> Tuple[Bound, Bound]:
    cands = [_imul(a, b) for a in x for b in y]
    return min(cands), max(cands)


def _interval_pow(x: Tuple[Bound, Bound], e: int) -> Tuple[Bound, Bound]:
    lo, hi = x
    if e == 0:
        return Fraction(1), Fraction(1)
    if e % 2 == 1 or lo >= 0:
        return _pw(lo, e), _pw(hi, e)
    if hi <= 0:
        return _pw(hi, e), _pw(lo, e)
    return Fraction(0), max(_pw(lo, e), _pw(hi, e))


def _pw(a: Bound, e: int) -> Bound:
    if isinstance(a, float):
        return a if e % 2 or a > 0 else -a
    return a ** e


def interval_eval(p: Polynomial, box: Mapping[str, Interval]) -> Interval:
    """Interval enclosure of ``p`` over ``box`` (monomial by monomial)."""
    ranges = []
    for n in p.vars.names:
        iv = box.get(n, Interval())
        ranges.append((iv.low if iv.low is not None else -math.inf, iv.high if iv.high is not None else math.inf))
    lo: Bound = Fraction(0)
    hi: Bound = Fraction(0)
    for m, c in p.terms.items():
        r = (Fraction(1), Fraction(1))
        for i, e in enumerate(m):
            if e:
                r = _interval_mul(r, _interval_pow(ranges[i], e))
        r = _interval_mul(r, (c, c))
        lo, hi = lo + r[0], hi + r[1]
    return Interval(
        None if isinstance(lo, float) else lo,
        None if isinstance(hi, float) else hi,
    )


def map_initial_box(init: InitSet, alpha: Sequence[Polynomial], vars: VarTable, wvars: Optional[VarTable] = None) -> InitSet:
    """Box ``Y0`` with ``alpha(X0) ⊆ Y0``."""
    wvars = wvars or abstract_vars(len(alpha))
    images, _ = init_substitution(init, vars)
    box = init.box_dict()
    out = []
    for name, h in zip(wvars.names, alpha):
        out.append((name, interval_eval(h.substitute(images), box)))
    return InitSet(tuple(out), TRUE)


# -- multilinearization -------------------------------------------------------------

def multilinearize(sys: ContinuousSystem) -> Tuple[Dict[str, str], ContinuousSystem]:
    """Copy each variable once per power it reaches so the field becomes multilinear."""
    vars = sys.vars
    maxpow = {n: max(1, max((p.degree_in(n) for p in sys.field), default=1)) for n in vars.names}
    copies = {n: [f"{n}_{i + 1}" for i in range(maxpow[n])] for n in vars.names}
    new_names = [c for n in vars.names for c in copies[n]]
    target = VarTable(new_names)
    copy_map = {c: n for n in vars.names for c in copies[n]}

    def rewrite(p: Polynomial) -> Polynomial:
        terms: Dict[Monomial, Fraction] = {}
        for m, c in p.terms.items():
            exps = [0] * len(target)
            for i, e in enumerate(m):
                for k in range(e):
                    exps[target.index(copies[vars.names[i]][k])] = 1
            terms[tuple(exps)] = terms.get(tuple(exps), ZERO) + c
        return Polynomial(target, terms)

    rhs = {c: rewrite(sys.field[copy_map[c]]) for c in new_names}
    box = []
    for n, iv in sys.init.box:
        box += [(c, iv) for c in copies[n]]
    cond = Condition(tuple(Atom(rewrite(a.poly), a.rel) for a in sys.init.condition.atoms))
    dom = Condition(tuple(Atom(rewrite(a.poly), a.rel) for a in sys.domain.atoms))
    state = tuple(c for n in sys.state for c in copies[n])
    params = tuple(c for n in sys.params for c in copies[n])
    out = ContinuousSystem(
        f"{sys.name}_ml",
        target,
        state,
        params,
        VectorField.from_mapping(target, rhs),
        InitSet(tuple(box), cond),
        dom,
    )
    return copy_map, out


# -- certificates -------------------------------------------------------------------------

@dataclass(frozen=True)
class Obligation:
    kind: str  # "flow" or "jump"
    where: str  # location or transition name
    index: int
    residual: Polynomial

    @property
    def ok(self) -> bool:
        return self.residual.is_zero()


def check_commutation(model: SystemModel, alpha: CobMap, abs_sys: AbstractSystem) -> List[Obligation]:
    """Exact residuals of ``G(alpha(x)) - J_alpha F`` and ``F'(alpha_pre) - alpha_post(F)``."""
    out = []
    for loc in model.locations:
        f = model.field_at(loc)
        g = abs_sys.dynamics_at(loc)
        if f is None:
            continue
        a = alpha.at(loc)
        for i, h in enumerate(a):
            lhs = fpre(g[i], a) if g is not None else Polynomial.zero(model.vars)
            out.append(Obligation("flow", loc, i, lhs - lie_derivative(h, f)))
    by_name = {t.name: t for t in abs_sys.transitions}
    for t in model.transitions:
        at = by_name[t.name]
        pre = alpha.at(t.source)
        post = alpha.at(t.target)
        for i, h in enumerate(post):
            out.append(Obligation("jump", t.name, i, fpre(at.update[i], pre) - fpre(h, t.update)))
    return out


def certificate_ok(obligations: Sequence[Obligation]) -> bool:
    return all(o.ok for o in obligations)
