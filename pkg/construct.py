"""
Random Multilinear Box-Free Hypergraphs
=======================================
Builds the d-partite d-uniform hypergraph on d copies of V = F_q^s whose edges
are the tuples of nonzero vectors on which r random multilinear forms all
equal 1, then deletes every edge that sits in a copy of K_{2,...,2}.

Pipeline (one instance):
    1. build_edge_set     E  = tuples where every form is 1
    2. find_boxes         F  = ordered boxes (v_1^0, v_1^1, ..., v_d^0, v_d^1) inside E
    3. lines_of_boxes     L  = line tuples (l_1, ..., l_d) carrying those boxes
    4. bad_edges          B  = union of l_1 x ... x l_d over L
    5. delete_and_verify  E' = E minus B, checked box-free by an independent detector

Vertices are vectors. Internally a vector is its row index in the VectorSpace
(its base-q code), so edge sets are boolean masks over V^d and box families
are integer arrays; iteration converts back to Vector objects.

Usage:
    from construct import Params, run_instance, run_trials, sample_forms, trial_rng

    params = Params(d=2, r=1, s=2, p=3)
    forms = sample_forms(params, trial_rng(seed=1, trial_index=0))
    instance = run_instance(params, forms)
    print(instance.sizes())

    stats = run_trials(params, trials=100, seed=0, mode='sample')
    print(stats.summary())
"""

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from multiprocessing import Pool
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats as sps
from tqdm import tqdm

from bounds import check_params
from errors import (BudgetExceededError, DegenerateInputError, DimensionMismatchError,
                    ParameterError, VerificationError)
from gf import ONE, AffineLine, FieldSpec, Vector, VectorSpace, make_field, vector_space
from tensor import MultilinearForm, all_forms, evaluate_all, sample_uniform

logger = logging.getLogger(__name__)

DEFAULT_MAX_TUPLES = 10 ** 7
DEFAULT_MAX_TENSOR_SPACE = 2 ** 20
DEFAULT_MAX_BOXES = 10 ** 7
DEFAULT_DELTA = 0.5
MODES = ('exact', 'sample')
STATS_SCHEMA_VERSION = 1

# cap on booleans materialised per block by the two-slot box search
_BLOCK_CELLS = 2 ** 24

RECORD_COLUMNS = ['trial', 'edges', 'boxes', 'line_tuples', 'bad', 'kept', 'box_free', 'good']


# ============================================================================
# PARAMETERS AND BUDGETS
# ============================================================================

@dataclass(frozen=True)
class Params:
    """
    (d, r, s) and the field GF(p^k), plus everything derived from them

    Args:
        d (int): Uniformity, d >= 2
        r (int): Number of forms, r >= 1
        s (int): Dimension of V, s >= 1
        p (int): Field characteristic
        k (int): Field extension degree (default: 1)
    """
    d: int
    r: int
    s: int
    p: int
    k: int = 1

    def __post_init__(self):
        if self.d < 2 or self.r < 1 or self.s < 1 or self.k < 1:
            raise ParameterError(f"need d >= 2, r >= 1, s >= 1, k >= 1; got {self}")

    @property
    def field(self) -> FieldSpec:
        return make_field(self.p, self.k)

    @property
    def q(self) -> int:
        return self.p ** self.k

    @property
    def n(self) -> int:
        """Vertex count d * q^s"""
        return self.d * self.q ** self.s

    @property
    def target_exponent(self) -> Fraction:
        return self.d - Fraction(self.r, self.s)

    @property
    def theorem_regime(self) -> bool:
        return check_params(self.d, self.r, self.s)

    @property
    def leading_constant(self) -> float:
        """c = d^(r/s - d)"""
        return float(self.d) ** (self.r / self.s - self.d)

    @property
    def expected_edges(self) -> Fraction:
        """(q^s - 1)^d q^-r"""
        q, s, d = self.q, self.s, self.d
        return Fraction((q ** s - 1) ** d, q ** self.r)

    @property
    def expected_boxes(self) -> Fraction:
        """(q^s - 1)^d (q^s - q)^d q^(-2^d r)"""
        q, s, d = self.q, self.s, self.d
        return Fraction((q ** s - 1) ** d * (q ** s - q) ** d, q ** (2 ** d * self.r))

    @property
    def bad_bound(self) -> Fraction:
        """Expected |F| / (q - 1)^d, the bound on expected |B|"""
        return self.expected_boxes / (self.q - 1) ** self.d

    @property
    def edge_scale(self) -> Fraction:
        """q^(ds - r)"""
        return Fraction(self.q ** (self.d * self.s), self.q ** self.r)

    @property
    def target_edges(self) -> float:
        """c * n^(d - r/s); equals q^(ds - r)"""
        return self.leading_constant * float(self.n) ** float(self.target_exponent)

    @property
    def line_product_size(self) -> int:
        """|P(l_1, ..., l_d)| = q^d (q - 1)^d"""
        return self.q ** self.d * (self.q - 1) ** self.d

    @property
    def exponent_gap(self) -> int:
        """(2ds - 2^d r - d) - (ds - r); negative in the theorem regime"""
        d, r, s = self.d, self.r, self.s
        return (2 * d * s - 2 ** d * r - d) - (d * s - r)

    @property
    def tuple_count(self) -> int:
        return self.q ** (self.s * self.d)

    @property
    def tensor_space_size(self) -> int:
        return self.q ** (self.r * self.s ** self.d)

    def __str__(self):
        return f"d={self.d} r={self.r} s={self.s} q={self.q}"


@dataclass(frozen=True)
class Budget:
    max_tuples: int = DEFAULT_MAX_TUPLES
    max_tensor_space: int = DEFAULT_MAX_TENSOR_SPACE
    max_boxes: int = DEFAULT_MAX_BOXES

    def check_tuples(self, params: Params) -> None:
        if params.tuple_count > self.max_tuples:
            raise BudgetExceededError(
                f"{params}: (q^s)^d = {params.tuple_count} tuples exceeds budget {self.max_tuples}")

    def check_tensor_space(self, params: Params) -> None:
        if params.tensor_space_size > self.max_tensor_space:
            raise BudgetExceededError(
                f"{params}: tensor space q^(r s^d) = {params.tensor_space_size} "
                f"exceeds budget {self.max_tensor_space}; use sampled mode")

    def check_boxes(self, params: Params) -> None:
        if params.expected_boxes > self.max_boxes:
            raise BudgetExceededError(
                f"{params}: expected |F| = {float(params.expected_boxes):.4g} exceeds budget {self.max_boxes}")


# ============================================================================
# COMBINATORIAL OBJECTS
# ============================================================================

class EdgeSet:
    """
    Edges of a d-partite hypergraph on d copies of a vector space, stored as a
    boolean mask over V^d. No edge contains the zero vector.
    """

    def __init__(self, space: VectorSpace, d: int, mask: np.ndarray):
        mask = np.array(mask, dtype=bool)
        if mask.shape != (space.size,) * d:
            raise DimensionMismatchError(f"mask shape {mask.shape} is not ({space.size},) * {d}")
        for j in range(d):
            if mask.take(0, axis=j).any():
                raise DegenerateInputError(f"an edge uses the zero vector in slot {j}")
        mask.setflags(write=False)
        self.space = space
        self.d = d
        self.mask = mask

    @classmethod
    def from_tuples(cls, space: VectorSpace, d: int, tuples) -> 'EdgeSet':
        mask = np.zeros((space.size,) * d, dtype=bool)
        for edge in tuples:
            mask[_edge_index(space, edge)] = True
        return cls(space, d, mask)

    def __len__(self):
        return int(self.mask.sum())

    def __contains__(self, edge) -> bool:
        return bool(self.mask[_edge_index(self.space, edge)])

    def __iter__(self) -> Iterator[Tuple[Vector, ...]]:
        for row in self.index_tuples():
            yield tuple(self.space.vector(i) for i in row)

    def index_tuples(self) -> np.ndarray:
        """|E| x d array of vector indices, lexicographic order"""
        return np.argwhere(self.mask)

    def issubset(self, other: 'EdgeSet') -> bool:
        self._same_frame(other)
        return not (self.mask & ~other.mask).any()

    def difference(self, other: 'EdgeSet') -> 'EdgeSet':
        self._same_frame(other)
        return EdgeSet(self.space, self.d, self.mask & ~other.mask)

    def _same_frame(self, other: 'EdgeSet') -> None:
        if other.space is not self.space and (other.space.field != self.space.field
                                              or other.space.dim != self.space.dim):
            raise DimensionMismatchError("edge sets live on different vector spaces")
        if other.d != self.d:
            raise DimensionMismatchError(f"edge sets have uniformity {self.d} and {other.d}")

    def __eq__(self, other):
        if not isinstance(other, EdgeSet):
            return NotImplemented
        return (self.d == other.d and self.space.field == other.space.field
                and self.space.dim == other.space.dim and np.array_equal(self.mask, other.mask))

    def __repr__(self):
        return f"EdgeSet({self.space}, d={self.d}, size={len(self)})"


def _edge_index(space: VectorSpace, edge) -> Tuple[int, ...]:
    return tuple(space.index(v) if isinstance(v, Vector) else int(v) for v in edge)


@dataclass(frozen=True)
class BoxWitness:
    """d pairs (v_j^0, v_j^1) of distinct vectors; the 2^d corners form a box"""
    pairs: Tuple[Tuple[Vector, Vector], ...]

    def __post_init__(self):
        pairs = tuple((a, b) for a, b in self.pairs)
        for j, (a, b) in enumerate(pairs):
            if a == b:
                raise DegenerateInputError(f"pair {j} repeats the vector {a}")
        object.__setattr__(self, 'pairs', pairs)

    @classmethod
    def from_indices(cls, space: VectorSpace, row: Sequence[int]) -> 'BoxWitness':
        row = [int(i) for i in row]
        return cls(tuple((space.vector(row[2 * j]), space.vector(row[2 * j + 1]))
                         for j in range(len(row) // 2)))

    @property
    def d(self) -> int:
        return len(self.pairs)

    def corners(self) -> Iterator[Tuple[Vector, ...]]:
        """All 2^d corner tuples, (eps_1, ..., eps_d) lexicographic"""
        for eps in itertools.product((0, 1), repeat=self.d):
            yield tuple(pair[e] for pair, e in zip(self.pairs, eps))

    def indices(self) -> Tuple[int, ...]:
        return tuple(v.index for pair in self.pairs for v in pair)


class BoxFamily:
    """Set of BoxWitness values backed by an |F| x 2d array of vector indices"""

    def __init__(self, space: VectorSpace, d: int, rows: np.ndarray):
        rows = np.asarray(rows, dtype=np.int64).reshape(-1, 2 * d)
        rows.setflags(write=False)
        self.space = space
        self.d = d
        self.rows = rows

    def __len__(self):
        return len(self.rows)

    def __iter__(self) -> Iterator[BoxWitness]:
        return (BoxWitness.from_indices(self.space, row) for row in self.rows)

    @cached_property
    def _row_set(self) -> set:
        return set(map(tuple, self.rows.tolist()))

    def __contains__(self, witness: Union[BoxWitness, Sequence[int]]) -> bool:
        key = witness.indices() if isinstance(witness, BoxWitness) else tuple(int(i) for i in witness)
        return key in self._row_set

    def __eq__(self, other):
        if not isinstance(other, BoxFamily):
            return NotImplemented
        return self.d == other.d and self._row_set == other._row_set

    def first_corners(self) -> np.ndarray:
        """|F| x d array (v_1^0, ..., v_d^0)"""
        return self.rows[:, 0::2]

    def __repr__(self):
        return f"BoxFamily(d={self.d}, size={len(self)})"


@dataclass(frozen=True)
class LineTuple:
    """d canonical affine lines; P(l_1, ..., l_d) has q^d (q - 1)^d members"""
    lines: Tuple[AffineLine, ...]

    @property
    def product_size(self) -> int:
        q = self.lines[0].field.q
        return q ** len(self.lines) * (q - 1) ** len(self.lines)

    def product(self) -> Iterator[Tuple[Vector, ...]]:
        """Points of l_1 x ... x l_d"""
        return itertools.product(*(line.points for line in self.lines))


class LineTupleSet:
    """
    Set of LineTuple values backed by an |L| x d array of line indices.

    hits[i] counts the members of F inside P of tuple i.
    """

    def __init__(self, space: VectorSpace, d: int, ids: np.ndarray, hits: Optional[np.ndarray] = None):
        ids = np.asarray(ids, dtype=np.int64).reshape(-1, d)
        hits = np.zeros(len(ids), dtype=np.int64) if hits is None else np.asarray(hits, dtype=np.int64)
        ids.setflags(write=False)
        hits.setflags(write=False)
        self.space = space
        self.d = d
        self.ids = ids
        self.hits = hits

    def __len__(self):
        return len(self.ids)

    def __iter__(self) -> Iterator[LineTuple]:
        return (LineTuple(tuple(self.space.line(i) for i in row)) for row in self.ids)

    def __contains__(self, item: LineTuple) -> bool:
        key = [self.space.line_index(line) for line in item.lines]
        return bool((self.ids == key).all(axis=1).any()) if len(self.ids) else False

    def __repr__(self):
        return f"LineTupleSet(d={self.d}, size={len(self)})"


# ============================================================================
# SEARCH KERNELS
# ============================================================================

def _too_many_boxes(found: int, limit: Optional[int]) -> None:
    if limit is not None and found > limit:
        raise BudgetExceededError(f"box search passed {limit} boxes; raise the box budget")


def _enumerate_boxes(mask: np.ndarray, allowed: np.ndarray, limit: Optional[int] = None) -> np.ndarray:
    """
    Every ordered box in a boolean mask over V^m: rows (a_1, b_1, ..., a_m, b_m)
    with allowed[a_j, b_j] for all j and all 2^m corners in the mask.

    Raises:
        BudgetExceededError: As soon as more than `limit` rows are found
    """
    m = mask.ndim
    if m == 2:
        return _enumerate_boxes_2d(mask, allowed, limit)

    # a pair (a, b) in slot 1 needs a box of dimension m-1 in the common link
    flat = mask.reshape(mask.shape[0], -1).astype(np.int64)
    common = flat @ flat.T
    blocks = []
    found = 0
    for a, b in zip(*np.nonzero(allowed & (common >= 2 ** (m - 1)))):
        rows = _enumerate_boxes(mask[a] & mask[b], allowed, None if limit is None else limit - found)
        if len(rows):
            found += len(rows)
            prefix = np.broadcast_to(np.array([a, b], dtype=np.int64), (len(rows), 2))
            blocks.append(np.hstack([prefix, rows]))
    if not blocks:
        return np.empty((0, 2 * m), dtype=np.int64)
    return np.vstack(blocks)


def _enumerate_boxes_2d(mask: np.ndarray, allowed: np.ndarray, limit: Optional[int] = None) -> np.ndarray:
    """Two-slot case, vectorised over blocks of first-slot pairs"""
    size = mask.shape[0]
    M = mask.astype(np.int64)
    a, b = np.nonzero(allowed & (M @ M.T >= 2))
    step = max(1, _BLOCK_CELLS // (size * size))
    blocks = []
    found = 0
    for start in range(0, len(a), step):
        sa, sb = a[start:start + step], b[start:start + step]
        shared = mask[sa] & mask[sb]
        hits = shared[:, :, None] & shared[:, None, :] & allowed[None, :, :]
        p, c, e = np.nonzero(hits)
        if len(p):
            found += len(p)
            _too_many_boxes(found, limit)
            blocks.append(np.column_stack([sa[p], sb[p], c, e]).astype(np.int64))
    if not blocks:
        return np.empty((0, 4), dtype=np.int64)
    return np.vstack(blocks)


def _first_box(mask: np.ndarray) -> Optional[Tuple[int, ...]]:
    """Some box in a boolean mask over V^m using distinct pairs only, or None"""
    if mask.ndim == 2:
        M = mask.astype(np.int64)
        pairs = np.argwhere(np.triu(M @ M.T >= 2, k=1))
        if not len(pairs):
            return None
        a, b = pairs[0]
        c, e = np.flatnonzero(mask[a] & mask[b])[:2]
        return int(a), int(b), int(c), int(e)

    flat = mask.reshape(mask.shape[0], -1).astype(np.int64)
    common = np.triu(flat @ flat.T >= 2 ** (mask.ndim - 1), k=1)
    for a, b in zip(*np.nonzero(common)):
        found = _first_box(mask[a] & mask[b])
        if found is not None:
            return (int(a), int(b)) + found
    return None


def _extends_to_box(mask: np.ndarray, edge: Tuple[int, ...]) -> bool:
    """Is there (v'_1, ..., v'_d), v'_j != v_j, completing the edge to a box?"""
    d = len(edge)
    size = mask.shape[0]

    def search(level: int, chosen: List[int]) -> bool:
        # corners whose last partner slot is `level`: earlier slots free, later slots fixed
        ok = np.ones(size, dtype=bool)
        ok[edge[level]] = False
        for choice in itertools.product((0, 1), repeat=level):
            prefix = tuple(chosen[i] if c else edge[i] for i, c in enumerate(choice))
            ok &= mask[prefix + (slice(None),) + tuple(edge[level + 1:])]
        candidates = np.flatnonzero(ok)
        if level == d - 1:
            return len(candidates) > 0
        return any(search(level + 1, chosen + [int(x)]) for x in candidates)

    return search(0, [])


# ============================================================================
# PIPELINE OPERATIONS
# ============================================================================

def _check_forms(params: Params, forms: Sequence[MultilinearForm]) -> None:
    if len(forms) != params.r:
        raise DimensionMismatchError(f"expected r={params.r} forms, got {len(forms)}")
    field = params.field
    for i, T in enumerate(forms):
        if T.field != field:
            raise DimensionMismatchError(f"form {i} lives over {T.field}, expected {field}")
        if T.dims != (params.s,) * params.d:
            raise DimensionMismatchError(f"form {i} has dims {T.dims}, expected {(params.s,) * params.d}")
        if T.frame is not None:
            raise DimensionMismatchError(f"form {i} is framed; expected a form on V^d")


def build_edge_set(
    params: Params,
    forms: Sequence[MultilinearForm],
    budget: Optional[Budget] = None
) -> EdgeSet:
    """
    E = all tuples of nonzero vectors on which every form evaluates to 1

    Raises:
        BudgetExceededError: If (q^s)^d exceeds budget.max_tuples
    """
    (budget or Budget()).check_tuples(params)
    _check_forms(params, forms)
    space = vector_space(params.field, params.s)
    mask = np.ones((space.size,) * params.d, dtype=bool)
    for T in forms:
        mask &= evaluate_all(T, space) == ONE
    return EdgeSet(space, params.d, mask)


def find_boxes(
    params: Params,
    forms: Sequence[MultilinearForm],
    budget: Optional[Budget] = None,
    edges: Optional[EdgeSet] = None
) -> BoxFamily:
    """
    F = every (v_1^0, v_1^1, ..., v_d^0, v_d^1) with v_j^0 != v_j^1 and all 2^d
    corners evaluating to 1 under every form. Collinear pairs are never
    enumerated: a collinear pair cannot have both corners equal to 1.

    Args:
        edges (EdgeSet, optional): E for the same forms, to skip recomputing it

    Raises:
        BudgetExceededError: If expected |F| or the running count exceeds budget.max_boxes
    """
    budget = budget or Budget()
    budget.check_boxes(params)
    if edges is None:
        edges = build_edge_set(params, forms, budget)
    else:
        budget.check_tuples(params)
    rows = _enumerate_boxes(edges.mask, edges.space.independent, budget.max_boxes)
    return BoxFamily(edges.space, params.d, rows)


def lines_of_boxes(F: BoxFamily) -> LineTupleSet:
    """
    L = canonical line tuples whose P-set meets F, with the count of F-members
    in each P-set.
    """
    space, d = F.space, F.d
    if not len(F):
        return LineTupleSet(space, d, np.empty((0, d), dtype=np.int64))
    rows = F.rows
    ids = np.column_stack([space.line_id[rows[:, 2 * j], rows[:, 2 * j + 1]] for j in range(d)])
    unique, hits = np.unique(ids, axis=0, return_counts=True)
    return LineTupleSet(space, d, unique, hits)


def expand_line_tuples(L: LineTupleSet) -> BoxFamily:
    """Union of P(l_1, ..., l_d) over L, as a BoxFamily"""
    space, d = L.space, L.d
    points = space.line_points
    q = space.field.q
    pairs = np.array([(i, j) for i in range(q) for j in range(q) if i != j], dtype=np.int64)
    blocks = []
    for row in L.ids:
        per_slot = [points[line][pairs] for line in row]   # (q(q-1)) x 2 each
        grids = np.meshgrid(*[np.arange(len(pairs))] * d, indexing='ij')
        combo = [per_slot[j][grids[j].ravel()] for j in range(d)]
        blocks.append(np.hstack(combo))
    rows = np.vstack(blocks) if blocks else np.empty((0, 2 * d), dtype=np.int64)
    return BoxFamily(space, d, rows)


def bad_edges(E: EdgeSet, L: LineTupleSet, check_direct: bool = False) -> EdgeSet:
    """
    B = union over L of l_1 x ... x l_d

    Args:
        check_direct (bool): Also compute B by the direct per-edge extension
            search and require equality

    Raises:
        VerificationError: If the union leaves E, or disagrees with the direct search
    """
    mask = np.zeros_like(E.mask)
    points = L.space.line_points
    for row in L.ids:
        mask[np.ix_(*(points[line] for line in row))] = True
    if (mask & ~E.mask).any():
        raise VerificationError("a line-tuple product leaves the edge set")
    B = EdgeSet(E.space, E.d, mask)
    if check_direct:
        direct = bad_edges_direct(E)
        if direct != B:
            raise VerificationError(
                f"union-of-products B ({len(B)} edges) differs from direct B ({len(direct)} edges)")
    return B


def bad_edges_direct(E: EdgeSet) -> EdgeSet:
    """B by definition: edges that extend to a box (brute-force search per edge)"""
    mask = np.zeros_like(E.mask)
    for edge in E.index_tuples():
        edge = tuple(int(i) for i in edge)
        if _extends_to_box(E.mask, edge):
            mask[edge] = True
    return EdgeSet(E.space, E.d, mask)


def find_box(E: EdgeSet) -> Optional[BoxWitness]:
    """Independent detector: some K_{2,...,2} in E, or None. Uses distinctness only."""
    found = _first_box(E.mask)
    return None if found is None else BoxWitness.from_indices(E.space, found)


def delete_and_verify(E: EdgeSet, B: EdgeSet, strict: bool = True) -> Tuple[EdgeSet, Optional[BoxWitness]]:
    """
    E' = E minus B, plus the detector's verdict on E'

    Raises:
        VerificationError: If B is not inside E, or (strict) a box survives
    """
    if not B.issubset(E):
        raise VerificationError("bad set is not contained in the edge set")
    kept = E.difference(B)
    witness = find_box(kept)
    if witness is not None and strict:
        raise VerificationError(f"box survived deletion: {witness.pairs}")
    return kept, witness


def complete_edge_set(space: VectorSpace, d: int, vertices: Sequence[Union[Vector, int]]) -> EdgeSet:
    """Complete d-partite edge set on the same vertex choice in every slot"""
    idx = [space.index(v) if isinstance(v, Vector) else int(v) for v in vertices]
    mask = np.zeros((space.size,) * d, dtype=bool)
    mask[np.ix_(*[idx] * d)] = True
    return EdgeSet(space, d, mask)


def edge_records(E: EdgeSet) -> np.ndarray:
    """|E| x d integer vertex ids; slot j, vector i gets id j * q^s + i"""
    offsets = np.arange(E.d, dtype=np.int64) * E.space.size
    return E.index_tuples() + offsets[None, :]


def edges_from_records(space: VectorSpace, d: int, ids: Sequence[Sequence[int]]) -> EdgeSet:
    ids = np.asarray(ids, dtype=np.int64).reshape(-1, d)
    offsets = np.arange(d, dtype=np.int64) * space.size
    local = ids - offsets[None, :]
    if len(local) and (local.min() < 0 or local.max() >= space.size):
        raise DimensionMismatchError("vertex id outside its slot")
    return EdgeSet.from_tuples(space, d, local.tolist())


# ============================================================================
# INSTANCES AND TRIALS
# ============================================================================

@dataclass
class Instance:
    params: Params
    forms: List[MultilinearForm]
    edges: EdgeSet
    boxes: BoxFamily
    lines: LineTupleSet
    bad: EdgeSet
    kept: EdgeSet
    box_free: bool
    good: bool

    def sizes(self) -> Dict[str, int]:
        return {
            'edges': len(self.edges),
            'boxes': len(self.boxes),
            'line_tuples': len(self.lines),
            'bad': len(self.bad),
            'kept': len(self.kept),
        }


def sample_forms(params: Params, rng: np.random.Generator) -> List[MultilinearForm]:
    """r independent uniform forms on V^d"""
    return [sample_uniform(params.field, params.d, (params.s,) * params.d, rng) for _ in range(params.r)]


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    """Independent stream for (seed, trial index)"""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial_index,)))


def run_instance(
    params: Params,
    forms: Sequence[MultilinearForm],
    budget: Optional[Budget] = None,
    cross_check: bool = False,
    delta: float = DEFAULT_DELTA
) -> Instance:
    """
    Run the whole pipeline on one choice of forms, checking every identity

    Args:
        cross_check (bool): Also rebuild F from L and B by direct search
        delta (float): An instance is good when |E'| >= (1 - delta) q^(ds - r)

    Raises:
        VerificationError: If any identity, bound or the box-freeness check fails
        BudgetExceededError: If the tuple or box budget would be exceeded
    """
    budget = budget or Budget()
    budget.check_boxes(params)
    E = build_edge_set(params, forms, budget)
    F = find_boxes(params, forms, budget, edges=E)
    L = lines_of_boxes(F)

    per_tuple = params.line_product_size
    if len(L) * per_tuple != len(F) or (L.hits != per_tuple).any():
        raise VerificationError(f"{params}: |L| q^d (q-1)^d = {len(L) * per_tuple} but |F| = {len(F)}")
    if cross_check and expand_line_tuples(L) != F:
        raise VerificationError(f"{params}: union of P(l) over L differs from F")

    B = bad_edges(E, L, check_direct=cross_check)
    if len(B) * (params.q - 1) ** params.d > len(F) or len(B) > params.q ** params.d * len(L):
        raise VerificationError(f"{params}: |B| = {len(B)} exceeds its bound (|F| = {len(F)}, |L| = {len(L)})")

    kept, _ = delete_and_verify(E, B)
    good = len(kept) >= (1 - delta) * float(params.edge_scale)
    return Instance(params, list(forms), E, F, L, B, kept, True, good)


def _record(trial: int, instance: Instance) -> Dict:
    row = {'trial': trial}
    row.update(instance.sizes())
    row['box_free'] = instance.box_free
    row['good'] = instance.good
    return row


def _sampled_trial(task: Tuple) -> Dict:
    params, seed, trial, budget, cross_check, delta = task
    forms = sample_forms(params, trial_rng(seed, trial))
    return _record(trial, run_instance(params, forms, budget, cross_check, delta))


def _exact_forms(params: Params) -> Iterator[Tuple[MultilinearForm, ...]]:
    dims = (params.s,) * params.d
    single = list(all_forms(params.field, params.d, dims))
    return itertools.product(single, repeat=params.r)


@dataclass
class TrialStats:
    """
    Per-trial sizes and their aggregates.

    In exact mode the records cover the whole tensor space and means are exact
    Fractions; in sampled mode means are floats with standard errors.
    """
    params: Params
    mode: str
    seed: Optional[int]
    records: pd.DataFrame

    @property
    def trials(self) -> int:
        return len(self.records)

    def mean(self, column: str) -> Union[Fraction, float]:
        values = self.records[column]
        if self.mode == 'exact':
            return Fraction(int(values.sum()), len(values))
        return float(values.mean())

    def sem(self, column: str) -> float:
        if self.mode == 'exact' or self.trials < 2:
            return 0.0
        return float(sps.sem(self.records[column].to_numpy(dtype=float), ddof=1))

    def z_score(self, column: str, expected: Fraction) -> float:
        mean = self.mean(column)
        diff = float(mean - expected) if self.mode == 'exact' else mean - float(expected)
        se = self.sem(column)
        if se > 0:
            return diff / se
        return 0.0 if diff == 0 else float('inf')

    def summary(self) -> Dict:
        p = self.params
        mean_edges = self.mean('edges')
        mean_bad = self.mean('bad')
        summary = {
            'record': 'summary',
            'schema': STATS_SCHEMA_VERSION,
            'mode': self.mode,
            'd': p.d, 'r': p.r, 's': p.s, 'p': p.p, 'k': p.k, 'q': p.q, 'n': p.n,
            'trials': self.trials,
            'seed': self.seed,
            'theorem_regime': p.theorem_regime,
            'mean_edges': mean_edges,
            'sem_edges': self.sem('edges'),
            'expected_edges': p.expected_edges,
            'z_edges': self.z_score('edges', p.expected_edges),
            'mean_boxes': self.mean('boxes'),
            'sem_boxes': self.sem('boxes'),
            'expected_boxes': p.expected_boxes,
            'z_boxes': self.z_score('boxes', p.expected_boxes),
            'mean_line_tuples': self.mean('line_tuples'),
            'mean_bad': mean_bad,
            'bad_bound': p.bad_bound,
            'mean_kept': self.mean('kept'),
            'edge_scale': p.edge_scale,
            'bad_to_edge_ratio': float(mean_bad / mean_edges) if mean_edges else float('nan'),
            'all_box_free': bool(self.records['box_free'].all()),
            'good_fraction': float(self.records['good'].mean()) if self.trials else 0.0,
        }
        if self.mode == 'exact':
            summary['exact_match_edges'] = mean_edges == p.expected_edges
            summary['exact_match_boxes'] = self.mean('boxes') == p.expected_boxes
        return summary


def run_trials(
    params: Params,
    trials: int = 1,
    seed: int = 0,
    mode: str = 'sample',
    budget: Optional[Budget] = None,
    workers: int = 1,
    cross_check: bool = False,
    delta: float = DEFAULT_DELTA,
    progress: bool = False
) -> TrialStats:
    """
    Run many instances and collect their sizes

    Args:
        params (Params): Construction parameters
        trials (int): Number of sampled instances (ignored in exact mode)
        seed (int): Base seed; trial i uses trial_rng(seed, i)
        mode (str): 'exact' sweeps the whole tensor space, 'sample' draws forms
        budget (Budget, optional): Enumeration budgets
        workers (int): Worker processes for sampled mode (1 = in-process)
        cross_check (bool): Rebuild F and B by direct search on every instance
        delta (float): Threshold for the good-instance flag
        progress (bool): Show a tqdm progress bar on stderr

    Returns:
        TrialStats: Records in trial-index order
    """
    budget = budget or Budget()
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    budget.check_tuples(params)
    budget.check_boxes(params)

    logger.info("=" * 60)
    logger.info(f"TRIALS: {params} mode={mode}")
    logger.info("=" * 60)

    rows = []
    if mode == 'exact':
        budget.check_tensor_space(params)
        total = params.tensor_space_size
        logger.info(f"Sweeping the whole tensor space: {total} instances")
        for index, forms in enumerate(tqdm(_exact_forms(params), total=total, desc="Tensor space",
                                           unit="form", disable=not progress)):
            rows.append(_record(index, run_instance(params, forms, budget, cross_check, delta)))
        seed = None
    else:
        if trials < 1:
            raise ParameterError(f"trials must be >= 1, got {trials}")
        tasks = [(params, seed, i, budget, cross_check, delta) for i in range(trials)]
        with tqdm(total=trials, desc="Trials", unit="trial", disable=not progress) as pbar:
            if workers > 1:
                logger.info(f"Using {workers} worker processes")
                with Pool(processes=workers) as pool:
                    for row in pool.imap(_sampled_trial, tasks, chunksize=max(1, trials // (8 * workers))):
                        rows.append(row)
                        pbar.update(1)
            else:
                for task in tasks:
                    rows.append(_sampled_trial(task))
                    pbar.update(1)

    stats = TrialStats(params, mode, seed, pd.DataFrame(rows, columns=RECORD_COLUMNS))
    logger.info(f"mean |E| = {stats.mean('edges')} (expected {float(params.expected_edges):.4f}), "
                f"mean |F| = {stats.mean('boxes')} (expected {float(params.expected_boxes):.4f})")
    return stats


def trend(
    d: int,
    r: int,
    s: int,
    fields: Sequence[Tuple[int, int]],
    trials: int,
    seed: int = 0,
    budget: Optional[Budget] = None,
    workers: int = 1,
    progress: bool = False
) -> pd.DataFrame:
    """
    mean|B| / mean|E| across field sizes, the finite-scale view of |B| = o(|E|)

    Args:
        fields (Sequence[Tuple[int, int]]): (p, k) per field, in increasing q

    Returns:
        pd.DataFrame: One row per q, with a running 'decreasing' flag
    """
    rows = []
    for p, k in fields:
        params = Params(d=d, r=r, s=s, p=p, k=k)
        stats = run_trials(params, trials, seed, 'sample', budget, workers, progress=progress)
        mean_edges, mean_bad = stats.mean('edges'), stats.mean('bad')
        rows.append({
            'q': params.q, 'p': p, 'k': k, 'trials': trials,
            'mean_edges': mean_edges,
            'expected_edges': float(params.expected_edges),
            'mean_bad': mean_bad,
            'bad_bound': float(params.bad_bound),
            'ratio': mean_bad / mean_edges if mean_edges else float('nan'),
            'exponent_gap': params.exponent_gap,
            'theorem_regime': params.theorem_regime,
        })
    frame = pd.DataFrame(rows)
    ratios = frame['ratio'].to_numpy(dtype=float)
    frame['decreasing'] = np.logical_and.accumulate(np.r_[True, np.diff(ratios) < 0])
    return frame
