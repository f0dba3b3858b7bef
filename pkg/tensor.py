"""
Multilinear Forms over GF(q)
============================
Dense multilinear forms T: V_1 x ... x V_d -> F_q. The coefficient array
holds T(e_{i_1}, ..., e_{i_d}) at multi-index (i_1, ..., i_d), row-major, as
element codes.

A form may carry a coordinate frame (one SubspaceBasis per slot). Restrictions
and corner interpolants have a frame, so they can be evaluated directly on
ambient vectors with evaluate_ambient().

Usage:
    import numpy as np
    from gf import make_field, Vector
    from tensor import sample_uniform, evaluate

    field = make_field(3)
    rng = np.random.default_rng(42)
    T = sample_uniform(field, 2, (2, 2), rng)
    value = evaluate(T, [Vector.of(field, [1, 0]), Vector.of(field, [0, 1])])
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from errors import DegenerateInputError, DimensionMismatchError, FieldError, ParameterError
from gf import ONE, FieldSpec, Scalar, Vector, VectorSpace, coordinates, linearly_independent, make_field, rank

logger = logging.getLogger(__name__)

FORM_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SubspaceBasis:
    """Linearly independent vectors spanning a subspace U of an ambient space"""
    vectors: Tuple[Vector, ...]

    def __post_init__(self):
        vectors = tuple(self.vectors)
        if not vectors:
            raise DegenerateInputError("a basis needs at least one vector")
        if rank(vectors) != len(vectors):
            raise DegenerateInputError(f"basis vectors are linearly dependent: {vectors}")
        object.__setattr__(self, 'vectors', vectors)

    @classmethod
    def standard(cls, field: FieldSpec, dim: int) -> 'SubspaceBasis':
        return cls(tuple(Vector(field, tuple(int(i == j) for j in range(dim))) for i in range(dim)))

    @property
    def field(self) -> FieldSpec:
        return self.vectors[0].field

    @property
    def dim(self) -> int:
        return len(self.vectors)

    @property
    def ambient_dim(self) -> int:
        return self.vectors[0].dim

    def matrix(self) -> np.ndarray:
        """dim x ambient_dim array of codes, one basis vector per row"""
        return np.array([v.entries for v in self.vectors], dtype=np.int64)

    def coordinates(self, u: Vector) -> Vector:
        return coordinates(self.vectors, u)

    def __len__(self):
        return self.dim


@dataclass(frozen=True, eq=False)
class MultilinearForm:
    """
    A d-linear form stored as a dense coefficient array

    Args:
        field (FieldSpec): Field of the coefficients
        coeffs (np.ndarray): Element codes, shape (m_1, ..., m_d)
        frame (Tuple[SubspaceBasis, ...], optional): Coordinate frame per slot
    """
    field: FieldSpec
    coeffs: np.ndarray
    frame: Optional[Tuple[SubspaceBasis, ...]] = None

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=np.int64)
        if coeffs.ndim < 2:
            raise ParameterError(f"arity must be >= 2, got {coeffs.ndim}")
        if coeffs.size and (coeffs.min() < 0 or coeffs.max() >= self.field.q):
            raise FieldError(f"coefficients are not all elements of {self.field}")
        coeffs.setflags(write=False)
        object.__setattr__(self, 'coeffs', coeffs)
        if self.frame is not None:
            frame = tuple(self.frame)
            if len(frame) != coeffs.ndim or any(b.dim != m for b, m in zip(frame, coeffs.shape)):
                raise DimensionMismatchError("frame does not match the coefficient shape")
            if any(b.field != self.field for b in frame):
                raise FieldError("frame lives over a different field")
            object.__setattr__(self, 'frame', frame)

    @property
    def arity(self) -> int:
        return self.coeffs.ndim

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(self.coeffs.shape)

    def values(self) -> list:
        """Flat row-major list of coefficient codes"""
        return [int(c) for c in self.coeffs.ravel()]

    def __eq__(self, other):
        if not isinstance(other, MultilinearForm):
            return NotImplemented
        return (self.field == other.field and self.dims == other.dims
                and np.array_equal(self.coeffs, other.coeffs) and self.frame == other.frame)

    def __hash__(self):
        return hash((self.field, self.dims, self.coeffs.tobytes(), self.frame))

    def __repr__(self):
        return f"MultilinearForm({self.field}, dims={self.dims}, values={self.values()})"


# ============================================================================
# KERNEL
# ============================================================================

def _contract(field: FieldSpec, coeffs: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    """
    Evaluate a coefficient array on every combination of rows of mats.

    mats[j] is an n_j x m_j array of codes; the result has shape (n_1, ..., n_d)
    and entry T(mats[0][a_1], ..., mats[d-1][a_d]).
    """
    t = field.tables
    acc = np.asarray(coeffs, dtype=np.int64)
    for j, mat in enumerate(mats):
        # axes before j are already output axes; contract coefficient axis j
        moved = np.moveaxis(acc, j, -1)
        out = np.zeros(moved.shape[:-1] + (mat.shape[0],), dtype=np.int64)
        for i in range(mat.shape[1]):
            out = t.add[out, t.mul[moved[..., i][..., None], mat[:, i]]]
        acc = np.moveaxis(out, -1, j)
    return acc


def _check_args(T: MultilinearForm, args: Sequence[Vector], dims: Sequence[int]) -> None:
    if len(args) != T.arity:
        raise DimensionMismatchError(f"form has arity {T.arity}, got {len(args)} arguments")
    for j, (v, m) in enumerate(zip(args, dims)):
        if not isinstance(v, Vector):
            raise DimensionMismatchError(f"argument {j} is not a Vector")
        if v.field != T.field:
            raise FieldError(f"argument {j} lives over {v.field}, form over {T.field}")
        if v.dim != m:
            raise DimensionMismatchError(f"argument {j} has dimension {v.dim}, slot expects {m}")


# ============================================================================
# OPERATIONS
# ============================================================================

def sample_uniform(
    field: FieldSpec,
    arity: int,
    dims: Sequence[int],
    rng: np.random.Generator
) -> MultilinearForm:
    """
    Uniformly random multilinear form: every coefficient independent and uniform

    Args:
        field (FieldSpec): Field of the form
        arity (int): Number of slots d >= 2
        dims (Sequence[int]): Dimension of each slot
        rng (np.random.Generator): Caller-owned generator

    Returns:
        MultilinearForm: The sampled form
    """
    dims = tuple(int(m) for m in dims)
    if arity < 2 or len(dims) != arity or any(m < 1 for m in dims):
        raise ParameterError(f"need arity >= 2 and {arity} positive dims, got {dims}")
    return MultilinearForm(field, rng.integers(0, field.q, size=dims, dtype=np.int64))


def evaluate(T: MultilinearForm, args: Sequence[Vector]) -> Scalar:
    """
    Evaluate T in its own coordinates: sum of coeff(i) * v_1[i_1] * ... * v_d[i_d]
    """
    _check_args(T, args, T.dims)
    mats = [np.array([v.entries], dtype=np.int64) for v in args]
    value = _contract(T.field, T.coeffs, mats)
    return Scalar(T.field, int(value.reshape(-1)[0]))


def evaluate_ambient(T: MultilinearForm, args: Sequence[Vector]) -> Scalar:
    """Evaluate a framed form on ambient vectors (plain evaluate when unframed)"""
    if T.frame is None:
        return evaluate(T, args)
    _check_args(T, args, [b.ambient_dim for b in T.frame])
    return evaluate(T, [basis.coordinates(v) for basis, v in zip(T.frame, args)])


def evaluate_all(T: MultilinearForm, space: VectorSpace) -> np.ndarray:
    """
    Values of T on every tuple of vectors of a space, shape (N,) * d

    Example:
        >>> space = vector_space(field, 2)
        >>> values = evaluate_all(T, space)     # values[a, b] = T(v_a, v_b)
    """
    if space.field != T.field:
        raise FieldError(f"space over {space.field}, form over {T.field}")
    if any(m != space.dim for m in T.dims):
        raise DimensionMismatchError(f"form dims {T.dims} do not match F_q^{space.dim}")
    return _contract(T.field, T.coeffs, [space.vectors] * T.arity)


def restrict(T: MultilinearForm, bases: Sequence[SubspaceBasis]) -> MultilinearForm:
    """
    Restriction of T to U_1 x ... x U_d

    The bases are given in T's coordinates. The result's coefficient at
    (i_1, ..., i_d) is T(u^(1)_{i_1}, ..., u^(d)_{i_d}) and its frame is the
    given bases.
    """
    bases = tuple(b if isinstance(b, SubspaceBasis) else SubspaceBasis(tuple(b)) for b in bases)
    if len(bases) != T.arity:
        raise DimensionMismatchError(f"form has arity {T.arity}, got {len(bases)} bases")
    for j, (basis, m) in enumerate(zip(bases, T.dims)):
        if basis.field != T.field:
            raise FieldError(f"basis {j} lives over {basis.field}, form over {T.field}")
        if basis.ambient_dim != m:
            raise DimensionMismatchError(f"basis {j} lives in dimension {basis.ambient_dim}, slot has {m}")
    coeffs = _contract(T.field, T.coeffs, [b.matrix() for b in bases])
    return MultilinearForm(T.field, coeffs, frame=bases)


def corner_interpolant(pairs: Sequence[Tuple[Vector, Vector]]) -> MultilinearForm:
    """
    The unique form on U_1 x ... x U_d, U_j = span(v_j^0, v_j^1), equal to 1 at
    all 2^d corners. In the corner frame its coefficient array is all ones.

    Raises:
        DegenerateInputError: If some pair is collinear
    """
    pairs = [tuple(pair) for pair in pairs]
    if len(pairs) < 2:
        raise ParameterError(f"need at least 2 slots, got {len(pairs)}")
    for j, (v0, v1) in enumerate(pairs):
        if not linearly_independent(v0, v1):
            raise DegenerateInputError(f"pair {j} is collinear: {v0}, {v1}")
    field = pairs[0][0].field
    frame = tuple(SubspaceBasis((v0, v1)) for v0, v1 in pairs)
    return MultilinearForm(field, np.full((2,) * len(pairs), ONE, dtype=np.int64), frame=frame)


def corner_values(T: MultilinearForm, pairs: Sequence[Tuple[Vector, Vector]]) -> Tuple[Scalar, ...]:
    """T at the 2^d corners, (eps_1, ..., eps_d) in lexicographic order"""
    return tuple(
        evaluate_ambient(T, [pair[e] for pair, e in zip(pairs, eps)])
        for eps in itertools.product((0, 1), repeat=len(pairs))
    )


def all_forms(field: FieldSpec, arity: int, dims: Sequence[int]) -> Iterator[MultilinearForm]:
    """Every form of the tensor space, in base-q counting order of the flat coefficients"""
    dims = tuple(int(m) for m in dims)
    if arity < 2 or len(dims) != arity:
        raise ParameterError(f"need arity >= 2 and {arity} dims, got {dims}")
    size = int(np.prod(dims))
    q = field.q
    powers = q ** np.arange(size - 1, -1, -1, dtype=np.int64)
    for n in range(q ** size):
        yield MultilinearForm(field, ((n // powers) % q).reshape(dims))


def tensor_space_size(field: FieldSpec, dims: Sequence[int]) -> int:
    return field.q ** int(np.prod(dims))


# ============================================================================
# SERIALIZATION
# ============================================================================

def form_to_record(T: MultilinearForm, index: Optional[int] = None) -> Dict:
    """Header (p, k, modulus, d, dims) plus the flat list of coefficient codes"""
    if T.frame is not None:
        raise ParameterError("only unframed forms are serialized")
    record = {'record': 'form', 'schema': FORM_SCHEMA_VERSION}
    if index is not None:
        record['index'] = int(index)
    record.update({
        'p': T.field.p,
        'k': T.field.k,
        'modulus': list(T.field.modulus),
        'd': T.arity,
        'dims': list(T.dims),
        'values': T.values(),
    })
    return record


def _record_int(record: Dict, key: str) -> int:
    value = record.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ParameterError(f"form record field {key!r} must be an integer, got {value!r}")
    return value


def _record_ints(record: Dict, key: str) -> List[int]:
    values = record.get(key)
    if not isinstance(values, (list, tuple)) or any(
            isinstance(v, bool) or not isinstance(v, (int, np.integer)) for v in values):
        raise ParameterError(f"form record field {key!r} must be a list of integers")
    return values


def form_from_record(record: Dict) -> MultilinearForm:
    """
    Inverse of form_to_record

    Raises:
        ParameterError: If a header field is missing or not integral
        DimensionMismatchError: If the header does not match the values
    """
    if record.get('schema') != FORM_SCHEMA_VERSION:
        raise ParameterError(f"unsupported form schema {record.get('schema')}")
    field = make_field(_record_int(record, 'p'), _record_int(record, 'k'), _record_ints(record, 'modulus'))
    dims = tuple(_record_ints(record, 'dims'))
    values = _record_ints(record, 'values')
    if len(dims) != _record_int(record, 'd') or len(values) != int(np.prod(dims)):
        raise DimensionMismatchError(f"form record header {dims} does not match {len(values)} values")
    return MultilinearForm(field, np.array(values, dtype=np.int64).reshape(dims))
