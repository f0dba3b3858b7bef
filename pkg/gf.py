"""
Finite Field Arithmetic over GF(p^k)
====================================
Exact arithmetic in GF(p^k) and the small amount of linear algebra the box
construction needs: vectors, rank, 2x2 independence, affine lines.

Elements are stored by their integer code: the element with residues
(c_0, ..., c_{k-1}) (polynomial c_0 + c_1 x + ... reduced modulo the field's
modulus) has code c_0 + c_1 p + ... + c_{k-1} p^(k-1). Code 0 is zero and
code 1 is one in every field. All arithmetic goes through precomputed numpy
tables, so whole vector spaces can be processed at once.

Usage:
    from gf import make_field, Vector, linearly_independent, affine_line_through

    field = make_field(2, 2)                  # GF(4), modulus x^2 + x + 1
    x = field.element((0, 1))
    print(x * (x + field.one()))              # GF(4)[1]

    v = Vector.of(field, [1, 0])
    w = Vector.of(field, [0, 1])
    print(linearly_independent(v, w))         # True

    line = affine_line_through(v, w)
    print(len(line.points))                   # 4
"""

import itertools
import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import sympy

from errors import DegenerateInputError, DimensionMismatchError, FieldError

logger = logging.getLogger(__name__)

ZERO = 0
ONE = 1


class FieldTables(NamedTuple):
    """Lookup tables of a field, indexed by element code"""
    digits: np.ndarray  # q x k residues
    add: np.ndarray     # q x q
    sub: np.ndarray     # q x q
    mul: np.ndarray     # q x q
    neg: np.ndarray     # q
    inv: np.ndarray     # q, inv[0] is never read


# ============================================================================
# POLYNOMIALS OVER GF(p)
# ============================================================================

def is_irreducible(p: int, modulus: Sequence[int]) -> bool:
    """
    Test a polynomial over GF(p) for irreducibility

    Args:
        p (int): Prime characteristic
        modulus (Sequence[int]): Coefficients, constant term first

    Returns:
        bool: True if the polynomial is irreducible over GF(p)
    """
    x = sympy.Symbol('x')
    poly = sympy.Poly(list(reversed([int(c) for c in modulus])), x, modulus=p)
    return poly.degree() >= 1 and poly.is_irreducible


def iter_irreducible_polynomials(p: int, k: int) -> Iterator[Tuple[int, ...]]:
    """
    Monic irreducible polynomials of degree k over GF(p), lexicographically
    ordered on (c_{k-1}, ..., c_0).
    """
    for code in range(p ** k):
        lower = tuple((code // p ** i) % p for i in range(k))
        modulus = lower + (1,)
        if is_irreducible(p, modulus):
            yield modulus


def irreducible_polynomials(p: int, k: int) -> List[Tuple[int, ...]]:
    return list(iter_irreducible_polynomials(p, k))


@lru_cache(maxsize=None)
def _default_modulus(p: int, k: int) -> Tuple[int, ...]:
    modulus = next(iter_irreducible_polynomials(p, k))
    logger.debug(f"Default modulus for GF({p}^{k}): {modulus}")
    return modulus


@lru_cache(maxsize=None)
def _validate_field(p: int, k: int, modulus: Tuple[int, ...]) -> None:
    if not sympy.isprime(p):
        raise FieldError(f"characteristic must be prime, got {p}")
    if k < 1:
        raise FieldError(f"extension degree must be >= 1, got {k}")
    if len(modulus) != k + 1:
        raise FieldError(f"modulus must have degree {k}, got coefficients {modulus}")
    if any(c < 0 or c >= p for c in modulus):
        raise FieldError(f"modulus coefficients must lie in [0, {p}), got {modulus}")
    if modulus[-1] != 1:
        raise FieldError(f"modulus must be monic, got {modulus}")
    if not is_irreducible(p, modulus):
        raise FieldError(f"modulus {modulus} is reducible over GF({p})")


@lru_cache(maxsize=None)
def _field_tables(p: int, k: int, modulus: Tuple[int, ...]) -> FieldTables:
    q = p ** k
    codes = np.arange(q, dtype=np.int64)
    powers = p ** np.arange(k, dtype=np.int64)
    digits = (codes[:, None] // powers[None, :]) % p

    add = ((digits[:, None, :] + digits[None, :, :]) % p) @ powers
    sub = ((digits[:, None, :] - digits[None, :, :]) % p) @ powers

    # schoolbook product, then reduce degrees 2k-2 .. k with the monic modulus
    prod = np.zeros((q, q, 2 * k - 1), dtype=np.int64)
    for i in range(k):
        for j in range(k):
            prod[:, :, i + j] += digits[:, None, i] * digits[None, :, j]
    prod %= p
    mod = np.array(modulus, dtype=np.int64)
    for deg in range(2 * k - 2, k - 1, -1):
        lead = prod[:, :, deg].copy()
        for i in range(k + 1):
            prod[:, :, deg - k + i] -= lead * mod[i]
        prod %= p
    mul = prod[:, :, :k] @ powers

    neg = sub[ZERO].copy()
    inv = np.zeros(q, dtype=np.int64)
    rows, cols = np.nonzero(mul == ONE)
    inv[rows] = cols

    tables = FieldTables(digits, add, sub, mul, neg, inv)
    for table in tables:
        table.setflags(write=False)
    return tables


# ============================================================================
# FIELD, SCALARS, VECTORS
# ============================================================================

@dataclass(frozen=True)
class FieldSpec:
    """
    The finite field GF(p^k) given by its reduction polynomial

    Args:
        p (int): Prime characteristic
        k (int): Extension degree
        modulus (Tuple[int, ...]): Monic irreducible of degree k, constant term first
    """
    p: int
    k: int
    modulus: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, 'modulus', tuple(int(c) for c in self.modulus))
        _validate_field(int(self.p), int(self.k), self.modulus)

    @property
    def q(self) -> int:
        return self.p ** self.k

    @property
    def tables(self) -> FieldTables:
        return _field_tables(self.p, self.k, self.modulus)

    def element(self, value: Union[int, Sequence[int]]) -> 'Scalar':
        """
        Build an element from its code or from its k residues

        Example:
            >>> gf4 = make_field(2, 2)
            >>> gf4.element((1, 1)) == gf4.element(3)
            True
        """
        if isinstance(value, (int, np.integer)):
            return Scalar(self, int(value))
        residues = [int(c) for c in value]
        if len(residues) != self.k or any(c < 0 or c >= self.p for c in residues):
            raise FieldError(f"expected {self.k} residues mod {self.p}, got {residues}")
        return Scalar(self, sum(c * self.p ** i for i, c in enumerate(residues)))

    def zero(self) -> 'Scalar':
        return Scalar(self, ZERO)

    def one(self) -> 'Scalar':
        return Scalar(self, ONE)

    def elements(self) -> Iterator['Scalar']:
        return (Scalar(self, code) for code in range(self.q))

    def __str__(self):
        return f"GF({self.q})"


def make_field(p: int, k: int = 1, modulus: Optional[Sequence[int]] = None) -> FieldSpec:
    """
    Construct GF(p^k)

    Args:
        p (int): Prime characteristic
        k (int): Extension degree (default: 1)
        modulus (Sequence[int], optional): Monic irreducible of degree k, constant
            term first. If not given, the lexicographically smallest one is used
            (x itself for prime fields).

    Returns:
        FieldSpec: The validated field

    Example:
        >>> make_field(2, 2).modulus
        (1, 1, 1)
    """
    if not isinstance(p, (int, np.integer)) or not sympy.isprime(int(p)):
        raise FieldError(f"characteristic must be prime, got {p}")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise FieldError(f"extension degree must be a positive integer, got {k}")
    if modulus is None:
        modulus = _default_modulus(int(p), int(k))
    return FieldSpec(int(p), int(k), tuple(modulus))


def split_prime_power(q: int) -> Tuple[int, int]:
    """Return (p, k) with q = p^k, or raise FieldError"""
    factors = sympy.factorint(q) if q > 1 else {}
    if len(factors) != 1:
        raise FieldError(f"field size must be a prime power, got {q}")
    (p, k), = factors.items()
    return int(p), int(k)


@dataclass(frozen=True)
class Scalar:
    """An element of GF(p^k), stored by code"""
    field: FieldSpec
    value: int

    def __post_init__(self):
        object.__setattr__(self, 'value', int(self.value))
        if not 0 <= self.value < self.field.q:
            raise FieldError(f"code {self.value} is not an element of {self.field}")

    @property
    def coeffs(self) -> Tuple[int, ...]:
        return tuple(int(c) for c in self.field.tables.digits[self.value])

    def _other(self, other: 'Scalar') -> int:
        if not isinstance(other, Scalar):
            raise FieldError(f"expected a Scalar, got {type(other).__name__}")
        if other.field != self.field:
            raise FieldError(f"mixed-field operands: {self.field} and {other.field}")
        return other.value

    def __add__(self, other: 'Scalar') -> 'Scalar':
        return Scalar(self.field, self.field.tables.add[self.value, self._other(other)])

    def __sub__(self, other: 'Scalar') -> 'Scalar':
        return Scalar(self.field, self.field.tables.sub[self.value, self._other(other)])

    def __mul__(self, other: 'Scalar') -> 'Scalar':
        return Scalar(self.field, self.field.tables.mul[self.value, self._other(other)])

    def __neg__(self) -> 'Scalar':
        return Scalar(self.field, self.field.tables.neg[self.value])

    def inverse(self) -> 'Scalar':
        if self.value == ZERO:
            raise FieldError("inversion of zero")
        return Scalar(self.field, self.field.tables.inv[self.value])

    def __truediv__(self, other: 'Scalar') -> 'Scalar':
        self._other(other)
        return self * other.inverse()

    def __bool__(self) -> bool:
        return self.value != ZERO

    def __int__(self) -> int:
        return self.value

    def __repr__(self):
        return f"{self.field}[{self.value}]"


def _as_scalar(field: FieldSpec, value: Union['Scalar', int]) -> Scalar:
    if isinstance(value, Scalar):
        if value.field != field:
            raise FieldError(f"mixed-field operands: {field} and {value.field}")
        return value
    return field.element(value)


_BINARY_OPS = {
    'add': lambda a, b: a + b,
    'sub': lambda a, b: a - b,
    'mul': lambda a, b: a * b,
}


def scalar_arith(
    field: FieldSpec,
    op: str,
    a: Union[Scalar, int],
    b: Optional[Union[Scalar, int]] = None
) -> Scalar:
    """
    Exact field operation by name

    Args:
        field (FieldSpec): The field
        op (str): One of add, sub, mul, inv, neg
        a: First operand (Scalar or element code)
        b: Second operand for add, sub and mul

    Returns:
        Scalar: The result

    Example:
        >>> gf5 = make_field(5)
        >>> scalar_arith(gf5, 'inv', 3).value
        2
    """
    a = _as_scalar(field, a)
    if op == 'inv':
        return a.inverse()
    if op == 'neg':
        return -a
    if op not in _BINARY_OPS:
        raise FieldError(f"unknown operation {op!r}")
    if b is None:
        raise FieldError(f"operation {op!r} needs two operands")
    return _BINARY_OPS[op](a, _as_scalar(field, b))


@dataclass(frozen=True)
class Vector:
    """A vector of F_q^dim, entries stored as element codes"""
    field: FieldSpec
    entries: Tuple[int, ...]

    def __post_init__(self):
        entries = tuple(int(e) for e in self.entries)
        if any(e < 0 or e >= self.field.q for e in entries):
            raise FieldError(f"entries {entries} are not all elements of {self.field}")
        object.__setattr__(self, 'entries', entries)

    @classmethod
    def of(cls, field: FieldSpec, values: Sequence[Union[Scalar, int]]) -> 'Vector':
        return cls(field, tuple(_as_scalar(field, v).value for v in values))

    @classmethod
    def zeros(cls, field: FieldSpec, dim: int) -> 'Vector':
        return cls(field, (ZERO,) * dim)

    @property
    def dim(self) -> int:
        return len(self.entries)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i: int) -> Scalar:
        return Scalar(self.field, self.entries[i])

    def __iter__(self) -> Iterator[Scalar]:
        return (Scalar(self.field, e) for e in self.entries)

    def is_zero(self) -> bool:
        return not any(self.entries)

    def _same_space(self, other: 'Vector') -> None:
        if not isinstance(other, Vector):
            raise FieldError(f"expected a Vector, got {type(other).__name__}")
        if other.field != self.field:
            raise FieldError(f"mixed-field operands: {self.field} and {other.field}")
        if other.dim != self.dim:
            raise DimensionMismatchError(f"dimension mismatch: {self.dim} and {other.dim}")

    def __add__(self, other: 'Vector') -> 'Vector':
        self._same_space(other)
        add = self.field.tables.add
        return Vector(self.field, tuple(add[a, b] for a, b in zip(self.entries, other.entries)))

    def __sub__(self, other: 'Vector') -> 'Vector':
        self._same_space(other)
        sub = self.field.tables.sub
        return Vector(self.field, tuple(sub[a, b] for a, b in zip(self.entries, other.entries)))

    def __neg__(self) -> 'Vector':
        neg = self.field.tables.neg
        return Vector(self.field, tuple(neg[a] for a in self.entries))

    def scale(self, lam: Union[Scalar, int]) -> 'Vector':
        lam = _as_scalar(self.field, lam).value
        mul = self.field.tables.mul
        return Vector(self.field, tuple(mul[lam, a] for a in self.entries))

    def __rmul__(self, lam: Union[Scalar, int]) -> 'Vector':
        return self.scale(lam)

    @property
    def index(self) -> int:
        """Base-q code of the vector, the row of this vector in its VectorSpace"""
        q = self.field.q
        return sum(e * q ** i for i, e in enumerate(self.entries))

    def __repr__(self):
        return f"Vector{self.entries}"


# ============================================================================
# LINEAR ALGEBRA
# ============================================================================

def linearly_independent(v: Vector, w: Vector) -> bool:
    """
    Exact 2x2 rank test: v, w are independent iff some 2x2 minor is nonzero

    Example:
        >>> gf5 = make_field(5)
        >>> linearly_independent(Vector.of(gf5, [1, 2]), Vector.of(gf5, [2, 4]))
        False
    """
    v._same_space(w)
    mul = v.field.tables.mul
    for i, j in itertools.combinations(range(v.dim), 2):
        if mul[v.entries[i], w.entries[j]] != mul[v.entries[j], w.entries[i]]:
            return True
    return False


def _row_reduce(field: FieldSpec, rows: List[List[int]], ncols: int) -> Tuple[List[List[int]], List[int]]:
    """Reduced row echelon form over the first ncols columns; returns (rows, pivot columns)"""
    t = field.tables
    rows = [list(row) for row in rows]
    pivots = []
    r = 0
    for col in range(ncols):
        pivot = next((i for i in range(r, len(rows)) if rows[i][col] != ZERO), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        scale = t.inv[rows[r][col]]
        rows[r] = [int(t.mul[scale, x]) for x in rows[r]]
        for i in range(len(rows)):
            factor = rows[i][col]
            if i != r and factor != ZERO:
                rows[i] = [int(t.sub[x, t.mul[factor, y]]) for x, y in zip(rows[i], rows[r])]
        pivots.append(col)
        r += 1
        if r == len(rows):
            break
    return rows, pivots


def _check_common_space(vectors: Sequence[Vector]) -> Tuple[FieldSpec, int]:
    if not vectors:
        raise DimensionMismatchError("need at least one vector")
    first = vectors[0]
    for v in vectors[1:]:
        first._same_space(v)
    return first.field, first.dim


def rank(vectors: Sequence[Vector]) -> int:
    """Exact rank of a list of vectors over GF(q)"""
    field, dim = _check_common_space(vectors)
    _, pivots = _row_reduce(field, [list(v.entries) for v in vectors], dim)
    return len(pivots)


def coordinates(basis: Sequence[Vector], u: Vector) -> Vector:
    """
    Coordinates of u in the span of independent basis vectors

    Raises:
        DegenerateInputError: If u is not in the span or the basis is dependent
    """
    field, dim = _check_common_space(list(basis) + [u])
    m = len(basis)
    # one row per ambient coordinate: [b_1[j], ..., b_m[j] | u[j]]
    rows = [[b.entries[j] for b in basis] + [u.entries[j]] for j in range(dim)]
    reduced, pivots = _row_reduce(field, rows, m)
    if len(pivots) != m:
        raise DegenerateInputError("basis vectors are linearly dependent")
    if any(row[m] != ZERO for row in reduced[m:]):
        raise DegenerateInputError(f"{u} is not in the span of the basis")
    return Vector(field, tuple(reduced[i][m] for i in range(m)))


@dataclass(frozen=True)
class AffineLine:
    """
    The affine line {base + t * direction : t in F_q}, kept in canonical form:
    the direction's first nonzero coordinate is 1 and base is the
    lexicographically smallest point.
    """
    base: Vector
    direction: Vector

    def __post_init__(self):
        self.base._same_space(self.direction)
        if self.direction.is_zero():
            raise DegenerateInputError("line direction must be nonzero")
        lead = next(e for e in self.direction.entries if e != ZERO)
        direction = self.direction.scale(self.base.field.tables.inv[lead])
        base = min(_line_points(self.base, direction), key=lambda v: v.entries)
        object.__setattr__(self, 'direction', direction)
        object.__setattr__(self, 'base', base)

    @property
    def field(self) -> FieldSpec:
        return self.base.field

    @property
    def points(self) -> Tuple[Vector, ...]:
        return tuple(sorted(_line_points(self.base, self.direction), key=lambda v: v.entries))

    def __contains__(self, v: Vector) -> bool:
        return v in set(_line_points(self.base, self.direction))

    def __len__(self):
        return self.field.q


def _line_points(base: Vector, direction: Vector) -> List[Vector]:
    return [base + direction.scale(t) for t in range(base.field.q)]


def affine_line_through(p0: Vector, p1: Vector) -> AffineLine:
    """
    The canonical line through two distinct points

    Example:
        >>> gf3 = make_field(3)
        >>> a = affine_line_through(Vector.of(gf3, [1, 1]), Vector.of(gf3, [2, 2]))
        >>> b = affine_line_through(Vector.of(gf3, [0, 0]), Vector.of(gf3, [2, 2]))
        >>> a == b
        True
    """
    p0._same_space(p1)
    if p0 == p1:
        raise DegenerateInputError("a line needs two distinct points")
    return AffineLine(p0, p1 - p0)


# ============================================================================
# WHOLE-SPACE ENUMERATION
# ============================================================================

class VectorSpace:
    """
    F_q^dim with every vector enumerated, row i having base-q digits i

    The pair tables are N x N with N = q^dim; the construction's budgets keep
    N small enough for them.
    """

    def __init__(self, field: FieldSpec, dim: int):
        if dim < 1:
            raise DimensionMismatchError(f"dimension must be >= 1, got {dim}")
        self.field = field
        self.dim = dim
        self.size = field.q ** dim
        self.weights = field.q ** np.arange(dim, dtype=np.int64)
        indices = np.arange(self.size, dtype=np.int64)
        self.vectors = (indices[:, None] // self.weights[None, :]) % field.q
        self.vectors.setflags(write=False)

    def encode(self, codes: np.ndarray) -> np.ndarray:
        """Row indices of vectors given as code arrays (last axis = coordinates)"""
        return np.asarray(codes, dtype=np.int64) @ self.weights

    def vector(self, index: int) -> Vector:
        return Vector(self.field, tuple(self.vectors[int(index)]))

    def index(self, v: Vector) -> int:
        if v.field != self.field or v.dim != self.dim:
            raise DimensionMismatchError(f"{v} is not a vector of F_{self.field.q}^{self.dim}")
        return v.index

    @cached_property
    def independent(self) -> np.ndarray:
        """N x N: True iff the two vectors are linearly independent"""
        mul = self.field.tables.mul
        V = self.vectors
        table = np.zeros((self.size, self.size), dtype=bool)
        for i, j in itertools.combinations(range(self.dim), 2):
            table |= mul[V[:, None, i], V[None, :, j]] != mul[V[:, None, j], V[None, :, i]]
        table.setflags(write=False)
        return table

    @cached_property
    def _lines(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        t = self.field.tables
        q = self.field.q
        V = self.vectors
        nonzero = V != ZERO
        first = np.argmax(nonzero, axis=1)
        leading = V[np.arange(self.size), first]
        directions = np.flatnonzero(nonzero.any(axis=1) & (leading == ONE))

        line_id = np.full((self.size, self.size), -1, dtype=np.int64)
        points_blocks, direction_blocks = [], []
        next_id = 0
        steps = np.arange(q, dtype=np.int64)
        for direction in directions:
            # points x + t*D for every x, t
            offsets = t.mul[steps[:, None], V[direction][None, :]]
            points = self.encode(t.add[V[:, None, :], offsets[None, :, :]])
            base = points.min(axis=1)
            bases, local = np.unique(base, return_inverse=True)
            ids = next_id + local
            line_id[np.arange(self.size)[:, None], points] = ids[:, None]
            first_rows = np.unique(local, return_index=True)[1]
            points_blocks.append(np.sort(points[first_rows], axis=1))
            direction_blocks.append(np.full(len(bases), direction, dtype=np.int64))
            next_id += len(bases)
        np.fill_diagonal(line_id, -1)

        line_points = np.vstack(points_blocks)
        line_direction = np.concatenate(direction_blocks)
        for table in (line_id, line_points, line_direction):
            table.setflags(write=False)
        logger.debug(f"{self}: {len(line_points)} affine lines")
        return line_id, line_points, line_direction

    @property
    def line_id(self) -> np.ndarray:
        """N x N: index of the line through two distinct points, -1 on the diagonal"""
        return self._lines[0]

    @property
    def line_points(self) -> np.ndarray:
        """(#lines) x q: sorted point indices of each line"""
        return self._lines[1]

    @property
    def num_lines(self) -> int:
        return len(self.line_points)

    def line(self, line_index: int) -> AffineLine:
        _, points, direction = self._lines
        return AffineLine(self.vector(points[line_index][0]), self.vector(direction[line_index]))

    def line_index(self, line: AffineLine) -> int:
        a, b = line.points[0], line.points[1]
        return int(self.line_id[self.index(a), self.index(b)])

    def __repr__(self):
        return f"VectorSpace(F_{self.field.q}^{self.dim})"


@lru_cache(maxsize=None)
def vector_space(field: FieldSpec, dim: int) -> VectorSpace:
    """Shared, memoised VectorSpace for (field, dim)"""
    return VectorSpace(field, dim)
