import pytest
import os
import sys
import itertools

import numpy as np

# Add project root to sys.path to allow importing src modules
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from src.constraints import (KnapsackFamily, MatchingFamily, OracleFamily, Rank1Family, TemporalPolytope,
                             active_elements, active_sets, create_family, enumerate_feasible_sets,
                             feasible_set_matrix, in_polytope, in_temporal_polytope, is_feasible,
                             is_temporally_feasible)
from src.data_models import INFINITE_ACTIVITY, FractionalPoint, InstanceSequence
from src.errors import InstanceError, PreconditionError

INF = INFINITE_ACTIVITY


def seq_of(activities, arrivals=None):
    return InstanceSequence.from_lists([1.0] * len(activities), activities, arrivals)


# --- is_feasible ---

@pytest.mark.parametrize("family", [Rank1Family(3), MatchingFamily([("a", "b"), ("b", "c")]), KnapsackFamily([0.6, 0.5], 1.0)])
def test_empty_set_is_feasible_everywhere(family):
    assert is_feasible(set(), family)


def test_rank1_rejects_two_elements():
    assert not is_feasible({0, 1}, Rank1Family(2))
    assert is_feasible({1}, Rank1Family(2))


def test_knapsack_over_budget():
    assert not is_feasible({0, 1}, KnapsackFamily([0.6, 0.5], 1.0))
    assert is_feasible({0}, KnapsackFamily([0.6, 0.5], 1.0))


def test_matching_rejects_shared_vertex():
    family = MatchingFamily([("a", "b"), ("b", "c"), ("c", "d")])
    assert not is_feasible({0, 1}, family)
    assert is_feasible({0, 2}, family)


def test_out_of_range_id_raises():
    with pytest.raises(InstanceError):
        is_feasible({5}, Rank1Family(2))


def test_oracle_family_uses_oracle_and_has_no_polytope():
    family = OracleFamily(3, lambda S: len(S) <= 2)
    assert is_feasible({0, 1}, family)
    assert not is_feasible({0, 1, 2}, family)
    with pytest.raises(PreconditionError):
        TemporalPolytope.for_family(family)


@pytest.mark.parametrize("family", [Rank1Family(4), MatchingFamily([(0, 1), (1, 2), (2, 3), (3, 0)]),
                                    KnapsackFamily([0.3, 0.4, 0.5, 0.2], 0.9)])
def test_downward_closure(family):
    for r in range(family.m + 1):
        for S in itertools.combinations(range(family.m), r):
            if is_feasible(S, family):
                for k in range(len(S)):
                    for B in itertools.combinations(S, k):
                        assert is_feasible(B, family)


# --- active sets ---

def test_single_element_is_active_at_its_own_arrival():
    assert active_elements(0, seq_of([0])) == frozenset({0})


def test_active_window_is_inclusive():
    seq = seq_of([2, 0, 0], [1, 2, 3])
    assert active_elements(2, seq) == frozenset({0, 2})
    assert active_elements(1, seq) == frozenset({0, 1})


def test_infinite_activity_keeps_every_earlier_element_active():
    seq = seq_of([INF] * 4, [3, 1, 4, 2])
    assert active_elements(2, seq) == frozenset({0, 1, 2, 3})
    assert active_elements(3, seq) == frozenset({1, 3})
    assert active_sets(seq)[1] == frozenset({1})


# --- temporal feasibility ---

def test_expired_element_does_not_block():
    assert is_temporally_feasible({0, 1}, seq_of([0, 0]), Rank1Family(2))


def test_active_element_blocks():
    assert not is_temporally_feasible({0, 1}, seq_of([5, 0]), Rank1Family(2))


def test_singletons_are_temporally_feasible():
    seq = seq_of([INF, INF, INF])
    for e in range(3):
        assert is_temporally_feasible({e}, seq, Rank1Family(3))


def test_size_mismatch_raises():
    with pytest.raises(InstanceError):
        is_temporally_feasible({0}, seq_of([0, 0, 0]), Rank1Family(2))


# --- polytopes ---

def test_origin_in_every_polytope():
    for family in (Rank1Family(3), MatchingFamily([("a", "b"), ("b", "c"), ("a", "c")]), KnapsackFamily([1, 2, 3], 2)):
        for b in (0.1, 0.5, 1.0):
            assert in_polytope(FractionalPoint.zeros(3), family, b)


def test_rank1_polytope_sum_constraint():
    assert not in_polytope(FractionalPoint(np.array([0.6, 0.6])), Rank1Family(2), 1.0)
    assert in_polytope(FractionalPoint(np.array([0.5, 0.5])), Rank1Family(2), 1.0)


def test_single_edge_saturates_its_constraints():
    assert in_polytope(FractionalPoint(np.array([1.0])), MatchingFamily([("u", "v")]), 1.0)


def test_temporal_polytope_with_disjoint_active_sets():
    x = FractionalPoint(np.array([1.0, 1.0]))
    assert in_temporal_polytope(x, seq_of([0, 0]), Rank1Family(2), 1.0)
    assert not in_temporal_polytope(x, seq_of([5, 0]), Rank1Family(2), 1.0)


def test_non_temporal_point_is_temporally_feasible_for_any_activity():
    rng = np.random.default_rng(3)
    family = MatchingFamily([("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")])
    polytope = TemporalPolytope.for_family(family, None, 0.8)
    for _ in range(20):
        direction = rng.random(4)
        x = FractionalPoint(polytope.max_scale(direction) * direction)
        activities = [[0, 1, 2, INF][i] for i in rng.integers(4, size=4)]
        assert in_temporal_polytope(x, seq_of(activities, list(rng.permutation(4) + 1)), family, 0.8)


def test_bad_scale_raises():
    with pytest.raises(PreconditionError):
        in_polytope(FractionalPoint.zeros(2), Rank1Family(2), 0.0)
    with pytest.raises(PreconditionError):
        in_polytope(FractionalPoint.zeros(2), Rank1Family(2), 1.5)


def test_max_scale_and_repair():
    polytope = TemporalPolytope.for_family(Rank1Family(2), None, 1.0)
    assert polytope.max_scale(np.array([1.0, 1.0])) == pytest.approx(0.5)
    repaired = polytope.repair(np.array([0.9, 0.9]))
    assert repaired.sum() == pytest.approx(1.0)
    assert polytope.contains(repaired)


def test_duplicate_temporal_rows_are_dropped():
    A = TemporalPolytope.for_family(Rank1Family(3), seq_of([INF, INF, INF]), 1.0).A
    # Prefixes {0}, {0,1}, {0,1,2}: three distinct rows.
    assert A.shape == (3, 3)


@pytest.mark.parametrize("family", [Rank1Family(4), MatchingFamily([(0, 1), (1, 2), (2, 3), (3, 0)])])
def test_projection_stays_feasible(family):
    rng = np.random.default_rng(11)
    seq = seq_of([1, 0, INF, 2])
    polytope = TemporalPolytope.for_family(family, seq, 0.9)
    for _ in range(25):
        y = rng.random(4) * 2 - 0.5
        assert polytope.contains(polytope.project(y))
        assert polytope.contains(polytope.project_entropic(np.abs(y) + 0.01))


def test_projection_of_interior_point_is_identity():
    polytope = TemporalPolytope.for_family(Rank1Family(3), None, 1.0)
    y = np.array([0.1, 0.2, 0.3])
    assert np.allclose(polytope.project(y), y)


def test_euclidean_projection_onto_simplex_face():
    polytope = TemporalPolytope.for_family(Rank1Family(2), None, 1.0)
    assert np.allclose(polytope.project(np.array([1.0, 1.0])), [0.5, 0.5], atol=1e-6)


# --- enumeration ---

def test_enumerate_feasible_sets_rank1_with_expiry():
    sets = enumerate_feasible_sets(seq_of([0, 0, 5]), Rank1Family(3))
    assert len(sets) == 8
    for S in sets:
        assert is_temporally_feasible(S, seq_of([0, 0, 5]), Rank1Family(3))


def test_enumeration_matches_brute_force():
    family = MatchingFamily([(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])
    seq = seq_of([1, INF, 0, 2, 1], [2, 1, 5, 3, 4])
    brute = {frozenset(S) for r in range(6) for S in itertools.combinations(range(5), r)
             if is_temporally_feasible(S, seq, family)}
    assert set(enumerate_feasible_sets(seq, family)) == brute
    assert feasible_set_matrix(seq, family).shape == (len(brute), 5)


def test_enumeration_limit():
    with pytest.raises(PreconditionError):
        enumerate_feasible_sets(seq_of([0] * 5), Rank1Family(5), limit=4)


# --- activity monotonicity and degenerate activities ---

FAMILIES_5 = [Rank1Family(5), MatchingFamily([(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]),
              KnapsackFamily([0.3, 0.4, 0.5, 0.2, 0.6], 0.9)]


def all_subsets(m):
    return [frozenset(S) for r in range(m + 1) for S in itertools.combinations(range(m), r)]


@pytest.mark.parametrize("family", FAMILIES_5)
def test_longer_activities_only_remove_feasible_sets(family):
    rng = np.random.default_rng(12)
    levels = [0, 1, 2, INF]
    for _ in range(15):
        arrivals = list(rng.permutation(5) + 1)
        short = rng.integers(4, size=5)
        long = np.minimum(short + rng.integers(0, 3, size=5), 3)
        seq_short = seq_of([levels[i] for i in short], arrivals)
        seq_long = seq_of([levels[i] for i in long], arrivals)
        for S in all_subsets(5):
            if is_temporally_feasible(S, seq_long, family):
                assert is_temporally_feasible(S, seq_short, family)
        polytope_long = TemporalPolytope.for_family(family, seq_long, 1.0)
        for _ in range(10):
            direction = rng.random(5)
            x = FractionalPoint(polytope_long.max_scale(direction) * direction)
            assert in_temporal_polytope(x, seq_short, family, 1.0)


@pytest.mark.parametrize("family", FAMILIES_5)
def test_feasible_set_indicators_lie_in_the_temporal_polytope(family):
    rng = np.random.default_rng(13)
    for _ in range(10):
        seq = seq_of([[0, 1, 2, INF][i] for i in rng.integers(4, size=5)], list(rng.permutation(5) + 1))
        for S in enumerate_feasible_sets(seq, family):
            assert in_temporal_polytope(FractionalPoint.indicator(5, S), seq, family, 1.0)


@pytest.mark.parametrize("family", FAMILIES_5)
def test_infinite_activities_reduce_to_the_static_family(family):
    rng = np.random.default_rng(14)
    seq = seq_of([INF] * 5, list(rng.permutation(5) + 1))
    for S in all_subsets(5):
        assert is_temporally_feasible(S, seq, family) == is_feasible(S, family)
    static = TemporalPolytope.for_family(family, None, 1.0)
    for _ in range(50):
        direction = rng.random(5)
        # Points on both sides of the static boundary.
        x = FractionalPoint(np.clip(static.max_scale(direction) * direction * rng.uniform(0.8, 1.2), 0.0, 1.0))
        assert in_temporal_polytope(x, seq, family, 1.0) == in_polytope(x, family, 1.0)


# --- factory ---

def test_create_family_case_insensitive_and_unknown():
    assert isinstance(create_family("Rank1", 3), Rank1Family)
    with pytest.raises(InstanceError):
        create_family("matroid", 3)
    with pytest.raises(InstanceError):
        create_family("matching", 2, {"edges": [["a", "b"]]})
