"""Tests for the construction pipeline, its cross-checks and the trial harness."""

from fractions import Fraction

import numpy as np
import pandas as pd
import pytest

from construct import (BoxFamily, BoxWitness, Budget, EdgeSet, LineTupleSet, Params, bad_edges,
                       bad_edges_direct, build_edge_set, complete_edge_set, delete_and_verify, edge_records,
                       edges_from_records, expand_line_tuples, find_box, find_boxes, lines_of_boxes,
                       run_instance, run_trials, sample_forms, trend, trial_rng)
from errors import (BudgetExceededError, DegenerateInputError, DimensionMismatchError, ParameterError,
                    VerificationError)
from gf import make_field, vector_space
from tensor import MultilinearForm, evaluate

# (q, s, d, r) configurations as Params(d, r, s, p)
SMALL = Params(d=2, r=1, s=2, p=3)
THREE_SLOT_BINARY = Params(d=3, r=1, s=2, p=2)
THREE_SLOT_TERNARY = Params(d=3, r=1, s=3, p=3)


def _instance(params, seed, **kwargs):
    return run_instance(params, sample_forms(params, trial_rng(seed, 0)), **kwargs)


def _instance_with_boxes(params, seeds=range(300)):
    for seed in seeds:
        forms = sample_forms(params, trial_rng(seed, 0))
        E = build_edge_set(params, forms)
        F = find_boxes(params, forms, edges=E)
        if len(F):
            return forms, E, F
    raise AssertionError("no instance with a box in the seed range")


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

def test_params_derived_values():
    params = Params(d=3, r=1, s=3, p=2)
    assert params.q == 2
    assert params.n == 24
    assert params.target_exponent == Fraction(8, 3)
    assert params.theorem_regime
    assert params.target_edges == pytest.approx(float(params.edge_scale))
    assert params.leading_constant == pytest.approx(3 ** (1 / 3 - 3))
    assert params.line_product_size == 8

    assert Params(d=2, r=1, s=2, p=2).expected_edges == Fraction(9, 2)
    assert Params(d=2, r=1, s=2, p=2).expected_boxes == Fraction(9, 4)
    assert Params(d=2, r=1, s=2, p=5).expected_edges == Fraction(576, 5)
    assert Params(d=2, r=1, s=2, p=5).expected_boxes == Fraction(24 ** 2 * 20 ** 2, 5 ** 4)
    assert Params(d=2, r=1, s=2, p=3).exponent_gap == -1
    assert not Params(d=3, r=1, s=4, p=2).theorem_regime


def test_params_rejects():
    with pytest.raises(ParameterError):
        Params(d=1, r=1, s=1, p=2)
    with pytest.raises(ParameterError):
        Params(d=2, r=0, s=1, p=2)


# ---------------------------------------------------------------------------
# single-form examples
# ---------------------------------------------------------------------------

def test_edge_set_of_one_by_one_form():
    params = Params(d=2, r=1, s=1, p=2)
    field = params.field
    E = build_edge_set(params, [MultilinearForm(field, np.array([[1]]))])
    assert len(E) == 1
    assert (1, 1) in E
    assert find_boxes(params, [MultilinearForm(field, np.array([[1]]))]).rows.shape == (0, 4)

    E = build_edge_set(params, [MultilinearForm(field, np.array([[0]]))])
    assert len(E) == 0


def test_build_edge_set_rejects():
    params = Params(d=2, r=1, s=2, p=3)
    field = params.field
    with pytest.raises(DimensionMismatchError):
        build_edge_set(params, [])
    with pytest.raises(DimensionMismatchError):
        build_edge_set(params, [MultilinearForm(field, np.zeros((2, 3), dtype=np.int64))])
    with pytest.raises(DimensionMismatchError):
        build_edge_set(params, [MultilinearForm(make_field(5), np.zeros((2, 2), dtype=np.int64))])
    with pytest.raises(BudgetExceededError):
        build_edge_set(params, sample_forms(params, trial_rng(0, 0)), Budget(max_tuples=10))


def test_edges_avoid_zero_and_evaluate_to_one(rng):
    params = SMALL
    forms = sample_forms(params, rng)
    E = build_edge_set(params, forms)
    T = forms[0]
    for v, w in E:
        assert not v.is_zero() and not w.is_zero()
        assert evaluate(T, [v, w]) == params.field.one()


def test_edge_set_rejects_zero_vector():
    space = vector_space(make_field(3), 2)
    with pytest.raises(DegenerateInputError):
        EdgeSet.from_tuples(space, 2, [(0, 4)])
    with pytest.raises(DimensionMismatchError):
        EdgeSet(space, 2, np.zeros((9, 9, 9), dtype=bool))


# ---------------------------------------------------------------------------
# boxes, lines and the bad set
# ---------------------------------------------------------------------------

def test_box_corners_are_edges():
    forms, E, F = _instance_with_boxes(SMALL)
    assert len(F) % SMALL.line_product_size == 0
    for witness in list(F)[:50]:
        assert all(corner in E for corner in witness.corners())
        assert witness in F


def test_lines_of_boxes_identity_and_expansion():
    forms, E, F = _instance_with_boxes(SMALL)
    L = lines_of_boxes(F)
    assert len(L) * SMALL.line_product_size == len(F)
    assert (L.hits == SMALL.line_product_size).all()
    assert expand_line_tuples(L) == F
    for line_tuple in L:
        assert line_tuple in L
        assert line_tuple.product_size == 36
        assert all(point in E for point in line_tuple.product())


def test_one_line_tuple_per_product():
    forms, E, F = _instance_with_boxes(SMALL)
    L = lines_of_boxes(F)
    single = LineTupleSet(L.space, L.d, L.ids[:1])
    family = expand_line_tuples(single)
    assert len(family) == SMALL.line_product_size
    again = lines_of_boxes(family)
    assert len(again) == 1
    assert np.array_equal(again.ids, L.ids[:1])


def test_empty_families():
    space = vector_space(make_field(3), 2)
    empty = BoxFamily(space, 2, np.empty((0, 4), dtype=np.int64))
    L = lines_of_boxes(empty)
    assert len(L) == 0
    E = complete_edge_set(space, 2, [1, 2, 4])
    assert len(bad_edges(E, L)) == 0


def test_bad_edges_match_direct_definition():
    forms, E, F = _instance_with_boxes(SMALL)
    B = bad_edges(E, lines_of_boxes(F), check_direct=True)
    assert B == bad_edges_direct(E)
    assert B.issubset(E)
    assert len(B) > 0


def test_bad_edges_outside_edge_set_raise():
    forms, E, F = _instance_with_boxes(SMALL)
    L = lines_of_boxes(F)
    shrunk = E.difference(bad_edges(E, L))
    with pytest.raises(VerificationError):
        bad_edges(shrunk, L)


def test_box_witness_rejects_equal_pair(gf3):
    space = vector_space(gf3, 2)
    v, w = space.vector(1), space.vector(3)
    with pytest.raises(DegenerateInputError):
        BoxWitness(((v, v), (v, w)))
    witness = BoxWitness(((v, w), (w, v)))
    assert len(list(witness.corners())) == 4
    assert witness.indices() == (1, 3, 3, 1)


# ---------------------------------------------------------------------------
# detector
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("p,s,d", [(2, 2, 2), (3, 2, 2), (2, 2, 3), (3, 2, 3)])
def test_detector_finds_planted_box(p, s, d):
    space = vector_space(make_field(p), s)
    E = complete_edge_set(space, d, [1, 2])
    witness = find_box(E)
    assert witness is not None
    assert all(corner in E for corner in witness.corners())
    assert find_box(complete_edge_set(space, d, [1])) is None


def test_detector_finds_member_of_box_family():
    forms, E, F = _instance_with_boxes(THREE_SLOT_BINARY)
    witness = find_box(E)
    assert witness is not None
    assert witness in F


def test_delete_and_verify():
    space = vector_space(make_field(2), 2)
    E = complete_edge_set(space, 2, [1, 2, 3])
    empty = EdgeSet(space, 2, np.zeros((4, 4), dtype=bool))
    with pytest.raises(VerificationError):
        delete_and_verify(E, empty)
    kept, witness = delete_and_verify(E, empty, strict=False)
    assert kept == E and witness is not None
    kept, witness = delete_and_verify(E, E)
    assert len(kept) == 0 and witness is None
    with pytest.raises(VerificationError):
        delete_and_verify(empty, E)


# ---------------------------------------------------------------------------
# per-instance identities over many seeds
# ---------------------------------------------------------------------------

def _check_instance(instance):
    params = instance.params
    F, L, B = instance.boxes, instance.lines, instance.bad
    assert len(L) * params.q ** params.d * (params.q - 1) ** params.d == len(F)
    assert len(B) * (params.q - 1) ** params.d <= len(F)
    assert len(B) <= params.q ** params.d * len(L)
    assert B.issubset(instance.edges)
    assert len(instance.kept) == len(instance.edges) - len(B)
    assert instance.box_free
    assert find_box(instance.kept) is None


@pytest.mark.parametrize("params", [SMALL, THREE_SLOT_BINARY], ids=['q3s2d2', 'q2s2d3'])
def test_identities_with_cross_checks(params):
    for seed in range(100):
        _check_instance(_instance(params, seed, cross_check=True))


@pytest.mark.slow
def test_identities_three_slots_ternary():
    for seed in range(100):
        _check_instance(_instance(THREE_SLOT_TERNARY, seed))


def test_edge_records_cover_vertex_ids():
    instance = _instance(SMALL, 3)
    ids = edge_records(instance.kept)
    assert ids.shape == (len(instance.kept), 2)
    for j in range(2):
        assert ((ids[:, j] >= j * 9) & (ids[:, j] < (j + 1) * 9)).all()
    assert edges_from_records(instance.kept.space, 2, ids.tolist()) == instance.kept


# ---------------------------------------------------------------------------
# trials
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("params,edges,boxes", [
    (Params(d=2, r=1, s=1, p=2), Fraction(1, 2), Fraction(0)),
    (Params(d=2, r=1, s=2, p=2), Fraction(9, 2), Fraction(9, 4)),
    (Params(d=2, r=1, s=1, p=3), Fraction(4, 3), Fraction(0)),
    (Params(d=2, r=1, s=2, p=3), Fraction(64, 3), Fraction(256, 9)),
    (Params(d=3, r=1, s=2, p=2), Fraction(27, 2), Fraction(27, 32)),
    (Params(d=2, r=1, s=2, p=2, k=2), Fraction(225, 4), Fraction(2025, 16)),
    (Params(d=2, r=1, s=3, p=2), Fraction(49, 2), Fraction(441, 4)),
])
def test_exact_means(params, edges, boxes):
    stats = run_trials(params, mode='exact')
    assert stats.trials == params.tensor_space_size
    assert stats.mean('edges') == edges == params.expected_edges
    assert stats.mean('boxes') == boxes == params.expected_boxes
    summary = stats.summary()
    assert summary['exact_match_edges'] and summary['exact_match_boxes']
    assert summary['all_box_free']


def test_exact_mode_two_forms():
    params = Params(d=2, r=2, s=1, p=3)
    stats = run_trials(params, mode='exact')
    assert stats.trials == 9
    assert stats.mean('edges') == params.expected_edges == Fraction(4, 9)


def test_exact_mode_budget():
    with pytest.raises(BudgetExceededError):
        run_trials(Params(d=2, r=1, s=2, p=5), mode='exact', budget=Budget(max_tensor_space=100))


def test_box_budget_refuses_large_expected_family():
    params = Params(d=2, r=1, s=3, p=13)
    assert params.tuple_count <= Budget().max_tuples
    assert params.expected_boxes > Budget().max_boxes
    with pytest.raises(BudgetExceededError):
        Budget().check_boxes(params)
    with pytest.raises(BudgetExceededError):
        run_instance(params, sample_forms(params, trial_rng(0, 0)))
    with pytest.raises(BudgetExceededError):
        run_trials(params, trials=1)


def test_box_search_stops_at_running_limit():
    space = vector_space(SMALL.field, SMALL.s)
    # (1,0), (0,1), (1,1): pairwise independent, so 6 ordered pairs per slot
    planted = complete_edge_set(space, 2, [1, 3, 4])
    assert len(find_boxes(SMALL, [], Budget(max_boxes=36), edges=planted)) == 36
    with pytest.raises(BudgetExceededError):
        find_boxes(SMALL, [], Budget(max_boxes=30), edges=planted)


def test_run_trials_rejects():
    with pytest.raises(ParameterError):
        run_trials(SMALL, trials=0)
    with pytest.raises(ParameterError):
        run_trials(SMALL, trials=1, mode='grid')


def test_trials_are_reproducible():
    a = run_trials(SMALL, trials=20, seed=5)
    b = run_trials(SMALL, trials=20, seed=5)
    pd.testing.assert_frame_equal(a.records, b.records)
    assert list(a.records['trial']) == list(range(20))
    c = run_trials(SMALL, trials=20, seed=6)
    assert not a.records.equals(c.records)


def test_trial_zero_matches_single_instance():
    stats = run_trials(SMALL, trials=3, seed=11)
    instance = _instance(SMALL, 11)
    row = stats.records.iloc[0]
    for key, value in instance.sizes().items():
        assert row[key] == value


def test_workers_preserve_order():
    serial = run_trials(THREE_SLOT_BINARY, trials=16, seed=2)
    parallel = run_trials(THREE_SLOT_BINARY, trials=16, seed=2, workers=2)
    pd.testing.assert_frame_equal(serial.records, parallel.records)


@pytest.mark.slow
def test_sampled_means_within_three_standard_errors():
    params = Params(d=2, r=1, s=2, p=5)
    stats = run_trials(params, trials=1000, seed=0)
    summary = stats.summary()
    assert float(params.expected_edges) == pytest.approx(115.2)
    assert abs(summary['z_edges']) <= 3
    assert abs(summary['z_boxes']) <= 3
    assert summary['all_box_free']


@pytest.mark.slow
def test_trend_ratio_decreases_with_q():
    frame = trend(2, 1, 2, [(3, 1), (5, 1), (7, 1), (3, 2)], trials=500, seed=0)
    assert list(frame['q']) == [3, 5, 7, 9]
    assert (frame['exponent_gap'] == -1).all()
    assert frame['decreasing'].all()
    assert (frame['ratio'].diff().dropna() < 0).all()
