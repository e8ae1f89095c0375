"""Exact linear algebra over the rationals.

Everything here works on :class:`fractions.Fraction` entries and never
touches floating point.  Matrices are stored as sparse rows (dicts from
column index to nonzero entry); the dense/sparse distinction is a storage
detail only.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

Vector = Tuple[Fraction, ...]

ZERO = Fraction(0)
ONE = Fraction(1)


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise TypeError("floating point values are not accepted by exact arithmetic")
    return Fraction(value)


def vec(values: Iterable) -> Vector:
    return tuple(as_fraction(v) for v in values)


def zero_vector(n: int) -> Vector:
    return (ZERO,) * n


def dot(u: Sequence[Fraction], v: Sequence[Fraction]) -> Fraction:
    return sum((a * b for a, b in zip(u, v) if a and b), ZERO)


class Matrix:
    """An immutable rational matrix with sparse row storage."""

    __slots__ = ("nrows", "ncols", "_rows")

    def __init__(self, nrows: int, ncols: int, rows: Optional[Sequence[Dict[int, Fraction]]] = None):
        self.nrows = nrows
        self.ncols = ncols
        if rows is None:
            rows = [{} for _ in range(nrows)]
        if len(rows) != nrows:
            raise ValueError("row count does not match nrows")
        clean = []
        for r in rows:
            d = {}
            for c, x in r.items():
                if not 0 <= c < ncols:
                    raise IndexError(f"column {c} out of range for {ncols} columns")
                x = as_fraction(x)
                if x:
                    d[c] = x
            clean.append(d)
        self._rows = tuple(clean)

    # -- construction ---------------------------------------------------
    @classmethod
    def from_rows(cls, rows: Sequence[Sequence], ncols: Optional[int] = None) -> "Matrix":
        rows = [list(r) for r in rows]
        if ncols is None:
            ncols = len(rows[0]) if rows else 0
        for r in rows:
            if len(r) != ncols:
                raise ValueError("ragged rows")
        return cls(len(rows), ncols, [{j: x for j, x in enumerate(r)} for r in rows])

    @classmethod
    def from_columns(cls, columns: Sequence[Sequence], nrows: Optional[int] = None) -> "Matrix":
        columns = [list(c) for c in columns]
        if nrows is None:
            if not columns:
                raise ValueError("nrows required for a matrix without columns")
            nrows = len(columns[0])
        rows = [{} for _ in range(nrows)]
        for j, col in enumerate(columns):
            if len(col) != nrows:
                raise ValueError("ragged columns")
            for i, x in enumerate(col):
                rows[i][j] = x
        return cls(nrows, len(columns), rows)

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "Matrix":
        return cls(nrows, ncols)

    @classmethod
    def identity(cls, n: int) -> "Matrix":
        return cls(n, n, [{i: ONE} for i in range(n)])

    # -- access ---------------------------------------------------------
    def __getitem__(self, index: Tuple[int, int]) -> Fraction:
        i, j = index
        if not (0 <= i < self.nrows and 0 <= j < self.ncols):
            raise IndexError(index)
        return self._rows[i].get(j, ZERO)

    def row(self, i: int) -> Vector:
        r = self._rows[i]
        return tuple(r.get(j, ZERO) for j in range(self.ncols))

    def sparse_row(self, i: int) -> Dict[int, Fraction]:
        return dict(self._rows[i])

    def column(self, j: int) -> Vector:
        return tuple(r.get(j, ZERO) for r in self._rows)

    def rows(self) -> List[Vector]:
        return [self.row(i) for i in range(self.nrows)]

    def columns(self) -> List[Vector]:
        return [self.column(j) for j in range(self.ncols)]

    def to_lists(self) -> List[List[Fraction]]:
        return [list(self.row(i)) for i in range(self.nrows)]

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return sum(len(r) for r in self._rows)

    @property
    def density(self) -> float:
        size = self.nrows * self.ncols
        return self.nnz / size if size else 0.0

    @property
    def is_sparse(self) -> bool:
        return self.density < 0.25

    def is_zero(self) -> bool:
        return self.nnz == 0

    # -- algebra --------------------------------------------------------
    def transpose(self) -> "Matrix":
        rows: List[Dict[int, Fraction]] = [{} for _ in range(self.ncols)]
        for i, r in enumerate(self._rows):
            for j, x in r.items():
                rows[j][i] = x
        return Matrix(self.ncols, self.nrows, rows)

    @property
    def T(self) -> "Matrix":
        return self.transpose()

    def apply(self, v: Sequence) -> Vector:
        if len(v) != self.ncols:
            raise ValueError(f"vector of length {len(v)} does not match {self.ncols} columns")
        v = vec(v)
        return tuple(sum((x * v[j] for j, x in r.items()), ZERO) for r in self._rows)

    def __matmul__(self, other):
        if isinstance(other, Matrix):
            if self.ncols != other.nrows:
                raise ValueError("shape mismatch")
            rows = []
            for r in self._rows:
                acc: Dict[int, Fraction] = {}
                for k, x in r.items():
                    for j, y in other._rows[k].items():
                        acc[j] = acc.get(j, ZERO) + x * y
                rows.append(acc)
            return Matrix(self.nrows, other.ncols, rows)
        return self.apply(other)

    def __add__(self, other: "Matrix") -> "Matrix":
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        rows = []
        for a, b in zip(self._rows, other._rows):
            d = dict(a)
            for j, x in b.items():
                d[j] = d.get(j, ZERO) + x
            rows.append(d)
        return Matrix(self.nrows, self.ncols, rows)

    def __neg__(self) -> "Matrix":
        return Matrix(self.nrows, self.ncols, [{j: -x for j, x in r.items()} for r in self._rows])

    def __sub__(self, other: "Matrix") -> "Matrix":
        return self + (-other)

    def scale(self, c) -> "Matrix":
        c = as_fraction(c)
        return Matrix(self.nrows, self.ncols, [{j: c * x for j, x in r.items()} for r in self._rows])

    def with_entry(self, i: int, j: int, value) -> "Matrix":
        rows = [dict(r) for r in self._rows]
        rows[i][j] = as_fraction(value)
        return Matrix(self.nrows, self.ncols, rows)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Matrix):
            return NotImplemented
        return self.shape == other.shape and self._rows == other._rows

    def __hash__(self) -> int:
        return hash((self.nrows, self.ncols, tuple(frozenset(r.items()) for r in self._rows)))

    def __repr__(self) -> str:
        body = ", ".join("[" + ", ".join(str(x) for x in self.row(i)) + "]" for i in range(self.nrows))
        return f"Matrix({self.nrows}x{self.ncols}: [{body}])"


class Echelon:
    """Incrementally maintained, fully reduced row echelon basis.

    Rows are sparse dicts over arbitrary hashable column keys.  The pivot of
    a row is its column with the smallest ``key``; every pivot column is zero
    in all other rows, so reduction against the basis is a single pass and
    the residual is canonical.
    """

    def __init__(self, key: Optional[Callable[[Hashable], object]] = None):
        self.key = key if key is not None else (lambda c: c)
        self._rows: Dict[Hashable, Dict[Hashable, Fraction]] = {}

    def __len__(self) -> int:
        return len(self._rows)

    @property
    def pivots(self) -> List[Hashable]:
        return sorted(self._rows, key=self.key)

    def rows(self) -> List[Dict[Hashable, Fraction]]:
        return [dict(self._rows[p]) for p in self.pivots]

    def row_for(self, pivot: Hashable) -> Dict[Hashable, Fraction]:
        return dict(self._rows[pivot])

    def reduce(self, v: Dict[Hashable, Fraction]) -> Dict[Hashable, Fraction]:
        out = {c: x for c, x in v.items() if x}
        for p in [c for c in out if c in self._rows]:
            coeff = out.get(p)
            if not coeff:
                continue
            for c, x in self._rows[p].items():
                y = out.get(c, ZERO) - coeff * x
                if y:
                    out[c] = y
                else:
                    out.pop(c, None)
        return out

    def contains(self, v: Dict[Hashable, Fraction]) -> bool:
        return not self.reduce(v)

    def add(self, v: Dict[Hashable, Fraction]) -> bool:
        """Insert ``v``; returns False when it was already in the span."""
        r = self.reduce(v)
        if not r:
            return False
        p = min(r, key=self.key)
        inv = ONE / r[p]
        r = {c: x * inv for c, x in r.items()}
        for q, row in self._rows.items():
            coeff = row.get(p)
            if coeff:
                for c, x in r.items():
                    y = row.get(c, ZERO) - coeff * x
                    if y:
                        row[c] = y
                    else:
                        row.pop(c, None)
        self._rows[p] = r
        return True

    def copy(self) -> "Echelon":
        e = Echelon(self.key)
        e._rows = {p: dict(r) for p, r in self._rows.items()}
        return e


def _dense_to_sparse(v: Sequence) -> Dict[int, Fraction]:
    return {i: as_fraction(x) for i, x in enumerate(v) if x}


def _sparse_to_dense(d: Dict[int, Fraction], n: int) -> Vector:
    return tuple(d.get(i, ZERO) for i in range(n))


def rref(m: Matrix) -> Tuple[Matrix, List[int]]:
    """Reduced row echelon form and the list of pivot columns.

    Zero rows are kept at the bottom so the result has the shape of ``m``.
    """
    e = Echelon()
    for i in range(m.nrows):
        e.add(m.sparse_row(i))
    pivots = e.pivots
    rows = e.rows() + [{} for _ in range(m.nrows - len(pivots))]
    return Matrix(m.nrows, m.ncols, rows), pivots


def rank(m: Matrix) -> int:
    return len(rref(m)[1])


def kernel(m: Matrix) -> List[Vector]:
    """Canonical null-space basis: one vector per free column, that column set to 1."""
    r, pivots = rref(m)
    pivot_set = set(pivots)
    basis = []
    for f in range(m.ncols):
        if f in pivot_set:
            continue
        v = {f: ONE}
        for i, p in enumerate(pivots):
            x = r[i, f]
            if x:
                v[p] = -x
        basis.append(_sparse_to_dense(v, m.ncols))
    return basis


def residual(v: Sequence, span: Matrix) -> Vector:
    """Reduce ``v`` against the column space of ``span``.

    The result is zero exactly when ``v`` lies in the column space; otherwise
    it is the canonical representative of ``v`` modulo that space.
    """
    if len(v) != span.nrows:
        raise ValueError(f"vector of length {len(v)} does not match {span.nrows} rows")
    e = Echelon()
    for j in range(span.ncols):
        e.add(_dense_to_sparse(span.column(j)))
    return _sparse_to_dense(e.reduce(_dense_to_sparse(v)), span.nrows)


def in_column_space(v: Sequence, span: Matrix) -> bool:
    return not any(residual(v, span))


def solve(m: Matrix, rhs: Sequence) -> Optional[Vector]:
    """One solution of ``m x = rhs`` (free variables set to 0), or None."""
    if len(rhs) != m.nrows:
        raise ValueError("right-hand side length mismatch")
    aug_rows = []
    for i in range(m.nrows):
        r = m.sparse_row(i)
        if rhs[i]:
            r[m.ncols] = as_fraction(rhs[i])
        aug_rows.append(r)
    r, pivots = rref(Matrix(m.nrows, m.ncols + 1, aug_rows))
    if m.ncols in pivots:
        return None
    x = {}
    for i, p in enumerate(pivots):
        x[p] = r[i, m.ncols]
    return _sparse_to_dense(x, m.ncols)


def column_basis(vectors: Iterable[Sequence], n: int) -> Matrix:
    """Canonical (rref) basis of the span of ``vectors`` as matrix columns."""
    e = Echelon()
    for v in vectors:
        e.add(_dense_to_sparse(v))
    cols = [_sparse_to_dense(r, n) for r in e.rows()]
    if not cols:
        return Matrix(n, 0)
    return Matrix.from_columns(cols, n)


def affine_hull_closure(point: Sequence, directions: Matrix, a: Matrix, b: Sequence) -> Tuple[Vector, Matrix]:
    """Smallest affine subspace containing ``point + span(directions)`` that is
    invariant under the flow of ``dw/dt = a w + b``.

    Directions are closed under ``d -> a d`` and must contain ``a point + b``.
    Returns a canonical base point (reduced modulo the directions) and the
    rref direction basis as columns.
    """
    n = len(point)
    if a.shape != (n, n) or len(b) != n or directions.nrows != n:
        raise ValueError("dimension mismatch")
    point = vec(point)
    e = Echelon()
    work: List[Vector] = list(directions.columns())
    drift = tuple(x + y for x, y in zip(a.apply(point), vec(b)))
    work.append(drift)
    while work:
        d = work.pop()
        if e.add(_dense_to_sparse(d)):
            work.append(a.apply(d))
    base = _sparse_to_dense(e.reduce(_dense_to_sparse(point)), n)
    cols = [_sparse_to_dense(r, n) for r in e.rows()]
    dmat = Matrix.from_columns(cols, n) if cols else Matrix(n, 0)
    return base, dmat


def determinant(m: Matrix) -> Fraction:
    if m.nrows != m.ncols:
        raise ValueError("determinant of a non-square matrix")
    rows = [list(r) for r in m.rows()]
    n = m.nrows
    det = ONE
    for c in range(n):
        p = next((i for i in range(c, n) if rows[i][c]), None)
        if p is None:
            return ZERO
        if p != c:
            rows[c], rows[p] = rows[p], rows[c]
            det = -det
        det *= rows[c][c]
        for i in range(c + 1, n):
            f = rows[i][c] / rows[c][c]
            if f:
                for j in range(c, n):
                    rows[i][j] -= f * rows[c][j]
    return det


def charpoly(m: Matrix) -> List[Fraction]:
    """Characteristic polynomial det(xI - m) by Faddeev-LeVerrier.

    Coefficients are returned highest degree first, leading coefficient 1.
    """
    n = m.nrows
    if n != m.ncols:
        raise ValueError("characteristic polynomial of a non-square matrix")
    coeffs = [ONE]
    mk = Matrix.zeros(n, n)
    ident = Matrix.identity(n)
    for k in range(1, n + 1):
        mk = m @ (mk + ident.scale(coeffs[-1]))
        trace = sum((mk[i, i] for i in range(n)), ZERO)
        coeffs.append(-trace / k)
    return coeffs
