"""Sparse multivariate polynomials with rational coefficients.

A polynomial is a map from exponent tuples to nonzero :class:`Fraction`
coefficients, tied to a :class:`VarTable` that fixes the meaning of each
exponent position.  Terms are ordered graded-lexicographically (total degree
first, then lexicographic with earlier variables more significant).
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations_with_replacement
from numbers import Rational
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from .exactalg import ZERO, ONE, Vector, as_fraction

Monomial = Tuple[int, ...]
Scalar = Union[int, Fraction]


class VarTableMismatch(ValueError):
    pass


class MonomialNotIndexed(KeyError):
    """Raised by :func:`to_coordinates` when a term has no coordinate."""

    def __init__(self, monomial: Monomial, rendered: str = ""):
        super().__init__(rendered or str(monomial))
        self.monomial = monomial
        self.rendered = rendered


class VarTable:
    """Ordered, duplicate-free list of variable names."""

    __slots__ = ("names", "_index")

    def __init__(self, names: Iterable[str]):
        names = tuple(names)
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate variable names: {', '.join(dup)}")
        self.names = names
        self._index = {n: i for i, n in enumerate(names)}

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self) -> Iterator[str]:
        return iter(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown variable {name!r}") from None

    def __eq__(self, other) -> bool:
        return isinstance(other, VarTable) and self.names == other.names

    def __hash__(self) -> int:
        return hash(self.names)

    def __repr__(self) -> str:
        return f"VarTable({', '.join(self.names)})"

    def extended(self, extra: Iterable[str]) -> "VarTable":
        return VarTable(self.names + tuple(extra))


def mono_degree(m: Monomial) -> int:
    return sum(m)


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


def grlex_key(m: Monomial) -> Tuple[int, Monomial]:
    """Sort key; larger key means larger monomial in graded-lex order."""
    return (sum(m), m)


def monomials_up_to(n: int, degree: int, min_degree: int = 0) -> List[Monomial]:
    """All exponent tuples over ``n`` variables with degree in [min_degree, degree],
    in ascending graded-lex order."""
    out = []
    for d in range(min_degree, degree + 1):
        layer = []
        for combo in combinations_with_replacement(range(n), d):
            e = [0] * n
            for i in combo:
                e[i] += 1
            layer.append(tuple(e))
        layer.sort()
        out.extend(layer)
    return out


def render_monomial(m: Monomial, names: Sequence[str]) -> str:
    parts = []
    for name, e in zip(names, m):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return "*".join(parts)


def render_rational(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


class Polynomial:
    """Immutable sparse polynomial over a :class:`VarTable`."""

    __slots__ = ("vars", "terms", "_hash")

    def __init__(self, vars: VarTable, terms: Optional[Mapping[Monomial, Scalar]] = None):
        self.vars = vars
        n = len(vars)
        clean: Dict[Monomial, Fraction] = {}
        if terms:
            for m, c in terms.items():
                if len(m) != n:
                    raise ValueError(f"monomial {m} has wrong arity for {vars}")
                c = as_fraction(c)
                if c:
                    clean[m] = c
        self.terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, vars: VarTable, terms: Dict[Monomial, Fraction]) -> "Polynomial":
        p = cls.__new__(cls)
        p.vars = vars
        p.terms = terms
        p._hash = None
        return p

    # -- constructors ---------------------------------------------------
    @classmethod
    def zero(cls, vars: VarTable) -> "Polynomial":
        return cls._raw(vars, {})

    @classmethod
    def constant(cls, vars: VarTable, c: Scalar) -> "Polynomial":
        c = as_fraction(c)
        return cls._raw(vars, {(0,) * len(vars): c} if c else {})

    @classmethod
    def variable(cls, vars: VarTable, name: str) -> "Polynomial":
        i = vars.index(name)
        m = tuple(1 if j == i else 0 for j in range(len(vars)))
        return cls._raw(vars, {m: ONE})

    @classmethod
    def monomial(cls, vars: VarTable, m: Monomial, c: Scalar = 1) -> "Polynomial":
        return cls(vars, {tuple(m): c})

    @classmethod
    def parse(cls, text: str, vars: VarTable) -> "Polynomial":
        from .parser import parse_polynomial

        return parse_polynomial(text, vars)

    # -- basic queries --------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def is_constant(self) -> bool:
        return all(not any(m) for m in self.terms)

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * len(self.vars), ZERO)

    def degree(self) -> int:
        """Total degree; the zero polynomial has degree -1."""
        return max((sum(m) for m in self.terms), default=-1)

    def degree_in(self, name: str) -> int:
        i = self.vars.index(name)
        return max((m[i] for m in self.terms), default=0)

    def coeff(self, m: Monomial) -> Fraction:
        return self.terms.get(tuple(m), ZERO)

    def monomials(self) -> List[Monomial]:
        """Monomials in descending graded-lex order."""
        return sorted(self.terms, key=grlex_key, reverse=True)

    def leading_monomial(self) -> Monomial:
        if not self.terms:
            raise ValueError("zero polynomial has no leading monomial")
        return max(self.terms, key=grlex_key)

    def leading_coefficient(self) -> Fraction:
        return self.terms[self.leading_monomial()]

    def used_variables(self) -> List[str]:
        used = set()
        for m in self.terms:
            used.update(i for i, e in enumerate(m) if e)
        return [self.vars.names[i] for i in sorted(used)]

    def is_multilinear(self) -> bool:
        return all(e <= 1 for m in self.terms for e in m)

    # -- arithmetic -----------------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.vars != self.vars:
                raise VarTableMismatch(f"{self.vars} vs {other.vars}")
            return other
        if isinstance(other, (int, Fraction)) or isinstance(other, Rational):
            return Polynomial.constant(self.vars, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m, ZERO) + c
            if s:
                out[m] = s
            else:
                out.pop(m, None)
        return Polynomial._raw(self.vars, out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial._raw(self.vars, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def scale(self, c: Scalar) -> "Polynomial":
        c = as_fraction(c)
        if not c:
            return Polynomial.zero(self.vars)
        return Polynomial._raw(self.vars, {m: c * x for m, x in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            if isinstance(other, (int, Fraction)) or isinstance(other, Rational):
                return self.scale(other)
            return NotImplemented
        other = self._coerce(other)
        out: Dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out.get(m, ZERO) + c1 * c2
        return Polynomial._raw(self.vars, {m: c for m, c in out.items() if c})

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            other = as_fraction(other)
            if not other:
                raise ZeroDivisionError("polynomial division by zero")
            return self.scale(ONE / other)
        return NotImplemented

    def __pow__(self, k: int) -> "Polynomial":
        if not isinstance(k, int) or k < 0:
            raise ValueError("polynomial exponent must be a non-negative integer")
        result = Polynomial.constant(self.vars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            return self.vars == other.vars and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self.terms == Polynomial.constant(self.vars, other).terms
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.vars, frozenset(self.terms.items())))
        return self._hash

    # -- calculus and substitution ---------------------------------------
    def diff(self, name_or_index: Union[str, int]) -> "Polynomial":
        i = self.vars.index(name_or_index) if isinstance(name_or_index, str) else name_or_index
        out: Dict[Monomial, Fraction] = {}
        for m, c in self.terms.items():
            e = m[i]
            if e:
                dm = m[:i] + (e - 1,) + m[i + 1:]
                out[dm] = out.get(dm, ZERO) + c * e
        return Polynomial._raw(self.vars, {m: c for m, c in out.items() if c})

    def lie_derivative(self, field: "VectorField") -> "Polynomial":
        return lie_derivative(self, field)

    def substitute(self, images: Sequence["Polynomial"]) -> "Polynomial":
        return fpre(self, images)

    def evaluate(self, point: Union[Sequence, Mapping[str, Scalar]]):
        """Evaluate at a point given as a sequence (VarTable order) or a name map.

        Exact when the point holds ints/Fractions; floats give a float.
        """
        if isinstance(point, Mapping):
            point = [point[n] for n in self.vars.names]
        if len(point) != len(self.vars):
            raise ValueError("point has wrong dimension")
        total = 0
        for m, c in self.terms.items():
            t = c
            for x, e in zip(point, m):
                if e:
                    t = t * x ** e
            total = total + t
        if isinstance(total, int):
            return Fraction(total)
        return total

    def embed(self, target: VarTable) -> "Polynomial":
        """Re-express over ``target``, which must contain every used variable."""
        if target == self.vars:
            return self
        idx = []
        for i, name in enumerate(self.vars.names):
            idx.append(target.index(name) if name in target else None)
        out: Dict[Monomial, Fraction] = {}
        n = len(target)
        for m, c in self.terms.items():
            e = [0] * n
            for i, k in enumerate(m):
                if k:
                    if idx[i] is None:
                        raise VarTableMismatch(f"variable {self.vars.names[i]!r} not in {target}")
                    e[idx[i]] += k
            out[tuple(e)] = c
        return Polynomial._raw(target, out)

    def rename(self, target: VarTable) -> "Polynomial":
        """Positional re-labelling onto a VarTable of the same size."""
        if len(target) != len(self.vars):
            raise VarTableMismatch("rename requires equal arity")
        return Polynomial._raw(target, dict(self.terms))

    # -- rendering --------------------------------------------------------
    def render(self) -> str:
        if not self.terms:
            return "0"
        names = self.vars.names
        out = []
        for k, m in enumerate(self.monomials()):
            c = self.terms[m]
            body = render_monomial(m, names)
            mag = abs(c)
            if body:
                text = body if mag == 1 else f"{render_rational(mag)}*{body}"
            else:
                text = render_rational(mag)
            if k == 0:
                out.append(("-" if c < 0 else "") + text)
            else:
                out.append((" - " if c < 0 else " + ") + text)
        return "".join(out)

    __str__ = render

    def __repr__(self) -> str:
        return f"Polynomial({self.render()!r})"


class VectorField:
    """One polynomial right-hand side per variable of a VarTable."""

    __slots__ = ("vars", "components")

    def __init__(self, vars: VarTable, components: Sequence[Polynomial]):
        components = tuple(components)
        if len(components) != len(vars):
            raise ValueError(f"vector field needs {len(vars)} components, got {len(components)}")
        for p in components:
            if p.vars != vars:
                raise VarTableMismatch(f"component over {p.vars}, field over {vars}")
        self.vars = vars
        self.components = components

    @classmethod
    def from_mapping(cls, vars: VarTable, rhs: Mapping[str, Polynomial]) -> "VectorField":
        for name in rhs:
            vars.index(name)
        return cls(vars, [rhs.get(n, Polynomial.zero(vars)) for n in vars.names])

    @classmethod
    def zero(cls, vars: VarTable) -> "VectorField":
        return cls(vars, [Polynomial.zero(vars)] * len(vars))

    def __getitem__(self, key: Union[int, str]) -> Polynomial:
        if isinstance(key, str):
            key = self.vars.index(key)
        return self.components[key]

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __eq__(self, other) -> bool:
        return isinstance(other, VectorField) and self.vars == other.vars and self.components == other.components

    def __hash__(self) -> int:
        return hash((self.vars, self.components))

    def degree(self) -> int:
        return max((p.degree() for p in self.components), default=-1)

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.components)

    def embed(self, target: VarTable, extra: Optional[Mapping[str, Polynomial]] = None) -> "VectorField":
        """Move onto a larger VarTable; new variables get ``extra`` or zero dynamics."""
        extra = dict(extra or {})
        comps = []
        for name in target.names:
            if name in self.vars:
                comps.append(self[name].embed(target))
            else:
                comps.append(extra.get(name, Polynomial.zero(target)))
        return VectorField(target, comps)

    def __repr__(self) -> str:
        body = "; ".join(f"{n}' = {p}" for n, p in zip(self.vars.names, self.components))
        return f"VectorField({body})"


def lie_derivative(p: Polynomial, field: VectorField) -> Polynomial:
    """Sum over variables of (dp/dx_i) * f_i."""
    if p.vars != field.vars:
        raise VarTableMismatch(f"{p.vars} vs {field.vars}")
    total = Polynomial.zero(p.vars)
    for i, f in enumerate(field.components):
        if f.is_zero():
            continue
        d = p.diff(i)
        if not d.is_zero():
            total = total + d * f
    return total


def jacobian_times_field(alpha: Sequence[Polynomial], field: VectorField) -> List[Polynomial]:
    return [lie_derivative(a, field) for a in alpha]


def fpre(g: Polynomial, update: Sequence[Polynomial]) -> Polynomial:
    """Simultaneously substitute each variable of ``g`` by its update polynomial."""
    if len(update) != len(g.vars):
        raise ValueError(f"update has {len(update)} components, expected {len(g.vars)}")
    if not g.terms:
        return Polynomial.zero(update[0].vars if update else g.vars)
    target = update[0].vars
    powers: Dict[Tuple[int, int], Polynomial] = {}

    def power(i: int, e: int) -> Polynomial:
        key = (i, e)
        if key not in powers:
            powers[key] = update[i] if e == 1 else power(i, e - 1) * update[i]
        return powers[key]

    acc: Dict[Monomial, Fraction] = {}
    one = Polynomial.constant(target, 1)
    for m, c in g.terms.items():
        t = one
        for i, e in enumerate(m):
            if e:
                t = t * power(i, e)
        for tm, tc in t.terms.items():
            acc[tm] = acc.get(tm, ZERO) + c * tc
    return Polynomial._raw(target, {m: c for m, c in acc.items() if c})


def to_coordinates(p: Polynomial, index: Sequence[Monomial]) -> Vector:
    """Coefficient vector of ``p`` over an ordered monomial index."""
    pos = {tuple(m): i for i, m in enumerate(index)}
    out = [ZERO] * len(index)
    for m in p.monomials():
        if m not in pos:
            raise MonomialNotIndexed(m, render_monomial(m, p.vars.names))
        out[pos[m]] = p.terms[m]
    return tuple(out)


def from_coordinates(vars: VarTable, coords: Sequence, index: Sequence[Monomial]) -> Polynomial:
    return Polynomial(vars, {tuple(m): c for m, c in zip(index, coords)})


def variables(vars: VarTable) -> List[Polynomial]:
    return [Polynomial.variable(vars, n) for n in vars.names]
