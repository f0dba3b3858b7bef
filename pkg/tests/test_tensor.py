"""Tests for multilinear forms: sampling, evaluation, restriction, corner interpolants."""

import itertools
from collections import Counter

import numpy as np
import pytest

from errors import DegenerateInputError, DimensionMismatchError, FieldError, ParameterError
from gf import Vector, affine_line_through, make_field, vector_space
from tensor import (MultilinearForm, SubspaceBasis, all_forms, corner_interpolant, corner_values,
                    evaluate, evaluate_all, evaluate_ambient, form_from_record, form_to_record,
                    restrict, sample_uniform, tensor_space_size)


def _identity_form(field):
    return MultilinearForm(field, np.eye(2, dtype=np.int64))


def _independent_pairs(space, rng, count):
    """count random pairs of linearly independent vectors of the space"""
    pairs = []
    while len(pairs) < count:
        a, b = rng.integers(0, space.size, size=2)
        if space.independent[a, b]:
            pairs.append((space.vector(a), space.vector(b)))
    return pairs


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_sample_uniform_is_seeded(gf5):
    a = sample_uniform(gf5, 3, (2, 2, 2), np.random.default_rng(42))
    b = sample_uniform(gf5, 3, (2, 2, 2), np.random.default_rng(42))
    assert a == b
    assert a.dims == (2, 2, 2) and a.arity == 3


def test_sample_uniform_single_coefficient(gf2):
    rng = np.random.default_rng(2024)
    draws = 10 ** 4
    ones = sum(sample_uniform(gf2, 2, (1, 1), rng).values()[0] for _ in range(draws))
    sigma = (0.25 / draws) ** 0.5
    assert abs(ones / draws - 0.5) <= 3 * sigma


@pytest.mark.slow
def test_sample_uniform_all_sixteen_arrays(gf2):
    rng = np.random.default_rng(7)
    draws = 10 ** 5
    counts = Counter(tuple(sample_uniform(gf2, 2, (2, 2), rng).values()) for _ in range(draws))
    assert len(counts) == 16
    p = 1 / 16
    sigma = (p * (1 - p) / draws) ** 0.5
    # 16 cells checked at once
    for count in counts.values():
        assert abs(count / draws - p) <= 4 * sigma


def test_sample_uniform_rejects(gf3, rng):
    with pytest.raises(ParameterError):
        sample_uniform(gf3, 1, (2,), rng)
    with pytest.raises(ParameterError):
        sample_uniform(gf3, 2, (2, 0), rng)
    with pytest.raises(ParameterError):
        sample_uniform(gf3, 3, (2, 2), rng)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def test_evaluate_identity_form(gf3):
    T = _identity_form(gf3)
    e1, e2 = Vector.of(gf3, [1, 0]), Vector.of(gf3, [0, 1])
    ones = Vector.of(gf3, [1, 1])
    assert evaluate(T, [e1, e2]) == gf3.zero()
    assert evaluate(T, [ones, ones]) == gf3.element(2)


def test_evaluate_zero_slot(gf4, rng):
    for _ in range(20):
        T = sample_uniform(gf4, 3, (2, 3, 2), rng)
        args = [Vector.of(gf4, [1, 2]), Vector.zeros(gf4, 3), Vector.of(gf4, [3, 1])]
        assert evaluate(T, args) == gf4.zero()


def test_evaluate_rejects(gf3, gf5):
    T = _identity_form(gf3)
    v = Vector.of(gf3, [1, 0])
    with pytest.raises(DimensionMismatchError):
        evaluate(T, [v])
    with pytest.raises(DimensionMismatchError):
        evaluate(T, [v, Vector.of(gf3, [1, 0, 0])])
    with pytest.raises(FieldError):
        evaluate(T, [v, Vector.of(gf5, [1, 0])])
    with pytest.raises(ParameterError):
        MultilinearForm(gf3, np.array([1, 2]))
    with pytest.raises(FieldError):
        MultilinearForm(gf3, np.full((2, 2), 3))


@pytest.mark.parametrize("p,k,dims", [(3, 1, (2, 2)), (2, 2, (2, 3, 2)), (5, 1, (3, 3, 3)), (2, 1, (2, 2, 2, 2))])
def test_multilinearity(p, k, dims):
    field = make_field(p, k)
    rng = np.random.default_rng(p * 100 + k * 10 + len(dims))
    mul, add = field.tables.mul, field.tables.add
    for _ in range(1000):
        T = sample_uniform(field, len(dims), dims, rng)
        args = [Vector(field, tuple(rng.integers(0, field.q, size=m))) for m in dims]
        slot = int(rng.integers(0, len(dims)))
        x = Vector(field, tuple(rng.integers(0, field.q, size=dims[slot])))
        y = Vector(field, tuple(rng.integers(0, field.q, size=dims[slot])))
        lam, mu = (int(c) for c in rng.integers(0, field.q, size=2))

        def at(v):
            return evaluate(T, args[:slot] + [v] + args[slot + 1:]).value

        combined = at(x.scale(lam) + y.scale(mu))
        assert combined == add[mul[lam, at(x)], mul[mu, at(y)]]


def test_evaluate_all_matches_evaluate(gf4, rng):
    space = vector_space(gf4, 2)
    T = sample_uniform(gf4, 2, (2, 2), rng)
    values = evaluate_all(T, space)
    assert values.shape == (16, 16)
    for a, b in itertools.product(range(space.size), repeat=2):
        assert values[a, b] == evaluate(T, [space.vector(a), space.vector(b)]).value


def test_evaluate_all_three_slots(gf3, rng):
    space = vector_space(gf3, 2)
    T = sample_uniform(gf3, 3, (2, 2, 2), rng)
    values = evaluate_all(T, space)
    for idx in itertools.product(range(space.size), repeat=3):
        assert values[idx] == evaluate(T, [space.vector(i) for i in idx]).value


# ---------------------------------------------------------------------------
# restriction
# ---------------------------------------------------------------------------

def test_restrict_to_standard_bases(gf5, rng):
    T = sample_uniform(gf5, 3, (2, 3, 2), rng)
    bases = [SubspaceBasis.standard(gf5, m) for m in T.dims]
    R = restrict(T, bases)
    assert np.array_equal(R.coeffs, T.coeffs)
    assert R.frame == tuple(bases)


def test_restrict_identity_to_diagonal(gf3):
    U = SubspaceBasis((Vector.of(gf3, [1, 1]),))
    R = restrict(_identity_form(gf3), [U, U])
    assert R.dims == (1, 1)
    assert R.values() == [2]


def test_restrict_agrees_with_evaluation(gf3, rng):
    space = vector_space(gf3, 3)
    for _ in range(20):
        T = sample_uniform(gf3, 2, (3, 3), rng)
        bases = [SubspaceBasis(pair) for pair in _independent_pairs(space, rng, 2)]
        R = restrict(T, bases)
        for a, b in itertools.product(range(3), repeat=2):
            coords = [Vector.of(gf3, [a, b]), Vector.of(gf3, [b, a])]
            ambient = [basis.vectors[0].scale(c[0]) + basis.vectors[1].scale(c[1])
                       for basis, c in zip(bases, coords)]
            assert evaluate(R, coords) == evaluate(T, ambient)
            assert evaluate_ambient(R, ambient) == evaluate(T, ambient)


def test_restrict_rejects(gf3):
    T = _identity_form(gf3)
    with pytest.raises(DegenerateInputError):
        SubspaceBasis((Vector.of(gf3, [1, 2]), Vector.of(gf3, [2, 1])))
    with pytest.raises(DimensionMismatchError):
        restrict(T, [SubspaceBasis.standard(gf3, 2)])
    with pytest.raises(DimensionMismatchError):
        restrict(T, [SubspaceBasis.standard(gf3, 3), SubspaceBasis.standard(gf3, 2)])


def test_restriction_of_sixteen_forms_is_balanced(gf2):
    U = SubspaceBasis((Vector.of(gf2, [1, 1]),))
    counts = Counter(restrict(T, [U, U]).values()[0] for T in all_forms(gf2, 2, (2, 2)))
    assert counts == {0: 8, 1: 8}


@pytest.mark.parametrize("p,k,s,d,sub", [(2, 1, 2, 2, 1), (3, 1, 2, 2, 1), (2, 1, 2, 3, 1),
                                          (2, 2, 2, 2, 1), (2, 1, 3, 2, 2), (5, 1, 2, 2, 1)])
def test_restriction_is_exactly_uniform(p, k, s, d, sub):
    field = make_field(p, k)
    rng = np.random.default_rng(11)
    space = vector_space(field, s)
    if sub == 1:
        bases = [SubspaceBasis((space.vector(rng.integers(1, space.size)),)) for _ in range(d)]
    else:
        bases = [SubspaceBasis(pair) for pair in _independent_pairs(space, rng, d)]

    total = tensor_space_size(field, (s,) * d)
    assert total <= 2 ** 16
    counts = Counter(restrict(T, bases).coeffs.tobytes() for T in all_forms(field, d, (s,) * d))
    restricted = field.q ** (sub ** d)
    assert len(counts) == restricted
    assert set(counts.values()) == {total // restricted}


# ---------------------------------------------------------------------------
# corner interpolants
# ---------------------------------------------------------------------------

def test_corner_interpolant_coefficients(gf3):
    pairs = [(Vector.of(gf3, [1, 0]), Vector.of(gf3, [0, 1])), (Vector.of(gf3, [1, 1]), Vector.of(gf3, [1, 2]))]
    R = corner_interpolant(pairs)
    assert R.dims == (2, 2)
    assert R.values() == [1, 1, 1, 1]
    assert all(value == gf3.one() for value in corner_values(R, pairs))


def test_corner_interpolant_on_lines_gf3(gf3):
    pairs = [(Vector.of(gf3, [1, 0]), Vector.of(gf3, [1, 1])), (Vector.of(gf3, [0, 1]), Vector.of(gf3, [2, 1]))]
    R = corner_interpolant(pairs)
    lines = [affine_line_through(a, b) for a, b in pairs]
    grid = list(itertools.product(*(line.points for line in lines)))
    assert len(grid) == 9
    assert all(evaluate_ambient(R, list(point)) == gf3.one() for point in grid)


@pytest.mark.parametrize("p,k", [(2, 1), (3, 1), (2, 2), (5, 1)])
@pytest.mark.parametrize("d", [2, 3])
def test_corner_interpolant_is_one_on_affine_hulls(p, k, d):
    field = make_field(p, k)
    space = vector_space(field, 2)
    rng = np.random.default_rng(p * 10 + k + d)
    for _ in range(10):
        pairs = _independent_pairs(space, rng, d)
        R = corner_interpolant(pairs)
        hulls = [affine_line_through(a, b).points for a, b in pairs]
        for point in itertools.product(*hulls):
            assert evaluate_ambient(R, list(point)) == field.one()


def test_corner_interpolant_rejects_collinear(gf5):
    v = Vector.of(gf5, [1, 2])
    with pytest.raises(DegenerateInputError):
        corner_interpolant([(v, v.scale(3)), (v, Vector.of(gf5, [0, 1]))])
    with pytest.raises(ParameterError):
        corner_interpolant([(v, Vector.of(gf5, [0, 1]))])


@pytest.mark.parametrize("p,k,d", [(2, 1, 2), (3, 1, 2), (2, 2, 2), (5, 1, 2), (2, 1, 3)])
def test_corner_evaluation_is_a_bijection(p, k, d):
    field = make_field(p, k)
    rng = np.random.default_rng(5)
    pairs = _independent_pairs(vector_space(field, 2), rng, d)
    images = {tuple(v.value for v in corner_values(T, pairs)) for T in all_forms(field, d, (2,) * d)}
    assert len(images) == field.q ** (2 ** d)


# ---------------------------------------------------------------------------
# enumeration and serialization
# ---------------------------------------------------------------------------

def test_all_forms_order(gf3):
    forms = list(all_forms(gf3, 2, (1, 2)))
    assert len(forms) == 9 == tensor_space_size(gf3, (1, 2))
    assert forms[0].values() == [0, 0]
    assert forms[1].values() == [0, 1]
    assert forms[3].values() == [1, 0]
    assert len(set(forms)) == 9


def test_form_record(gf4, rng):
    T = sample_uniform(gf4, 3, (2, 1, 2), rng)
    record = form_to_record(T, index=0)
    assert record['record'] == 'form' and record['schema'] == 1
    assert record['p'] == 2 and record['k'] == 2 and record['modulus'] == [1, 1, 1]
    assert record['dims'] == [2, 1, 2] and len(record['values']) == 4
    assert form_from_record(record) == T

    framed = corner_interpolant([(Vector.of(gf4, [1, 0]), Vector.of(gf4, [0, 1]))] * 2)
    with pytest.raises(ParameterError):
        form_to_record(framed)
    with pytest.raises(DimensionMismatchError):
        form_from_record(dict(record, values=[0, 1]))


@pytest.mark.parametrize("change", [
    {'p': None},
    {'k': '1'},
    {'values': [0, 1, 0.7, 1]},
    {'dims': [2, 1.0, 2]},
    {'modulus': None},
    {'d': True},
])
def test_form_record_rejects_malformed_fields(gf4, rng, change):
    record = form_to_record(sample_uniform(gf4, 3, (2, 1, 2), rng))
    for key, value in change.items():
        if value is None:
            del record[key]
        else:
            record[key] = value
    with pytest.raises(ParameterError):
        form_from_record(record)
