import pytest
import os
import sys

import numpy as np

project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from src.batched import random_matching_instance
from src.constraints import KnapsackFamily, MatchingFamily, Rank1Family, TemporalPolytope, feasible_set_matrix
from src.data_models import (INFEASIBLE, INFINITE_ACTIVITY, OPTIMAL, UNBOUNDED, DiscreteDistribution, InstanceSequence,
                             Job, MatchingInstance)
from src.errors import PreconditionError
from src.lp import expected_offline_optimum, matching_lp_rows, simplex_maximize, solve_fractional, solve_matching_lp

INF = INFINITE_ACTIVITY


def one_machine(activity_pmfs, weights, arrivals=None):
    arrivals = arrivals or list(range(1, len(weights) + 1))
    jobs = tuple(Job(s, (w,), (pmf,)) for s, w, pmf in zip(arrivals, weights, activity_pmfs))
    return MatchingInstance(1, jobs)


# --- simplex ---

def test_simplex_simple_optimum():
    status, x, value = simplex_maximize([1, 1], A_ub=[[1, 2], [3, 1]], b_ub=[4, 6])
    assert status == OPTIMAL
    assert value == pytest.approx(2.8)
    assert np.allclose(x, [1.6, 1.2])


def test_simplex_equality_and_negative_rhs():
    status, x, value = simplex_maximize([1, 0], A_ub=[[-1, 0]], b_ub=[-0.5], A_eq=[[1, 1]], b_eq=[1])
    assert status == OPTIMAL
    assert value == pytest.approx(1.0)
    status, _, _ = simplex_maximize([-1, 0], A_ub=[[-1, 0]], b_ub=[-0.5], A_eq=[[1, 1]], b_eq=[1])
    assert status == OPTIMAL


def test_simplex_infeasible_and_unbounded():
    assert simplex_maximize([1], A_ub=[[1]], b_ub=[1], A_eq=[[1]], b_eq=[2])[0] == INFEASIBLE
    assert simplex_maximize([1, 0], A_ub=[[0, 1]], b_ub=[1])[0] == UNBOUNDED


def test_simplex_redundant_equalities():
    status, x, _ = simplex_maximize([1, 2], A_eq=[[1, 1], [2, 2]], b_eq=[1, 2])
    assert status == OPTIMAL
    assert np.allclose(x, [0, 1])


# --- fractional relaxation ---

def test_single_element_rank1():
    solution = solve_fractional(Rank1Family(1), InstanceSequence.from_lists([3], [4]), [3], 1.0)
    assert solution.x.values.tolist() == pytest.approx([1.0])
    assert solution.objective == pytest.approx(3.0)


def test_disjoint_active_sets_take_everything():
    seq = InstanceSequence.from_lists([1, 1], [0, 0])
    solution = solve_fractional(Rank1Family(2), seq, [1, 1], 1.0)
    assert solution.objective == pytest.approx(2.0)
    assert np.allclose(solution.x.values, [1, 1])


def test_infinite_activity_picks_the_heavier():
    seq = InstanceSequence.from_lists([1, 2], [INF, INF])
    solution = solve_fractional(Rank1Family(2), seq, [1, 2], 1.0)
    assert np.allclose(solution.x.values, [0, 1])
    assert solution.objective == pytest.approx(2.0)


def test_scaled_knapsack():
    seq = InstanceSequence.from_lists([1, 1], [INF, INF])
    solution = solve_fractional(KnapsackFamily([1.0, 1.0], 1.0), seq, [1.0, 0.5], 0.5)
    assert solution.objective == pytest.approx(0.5)
    assert solution.x.scale_hint == 0.5


@pytest.mark.parametrize("seed", range(5))
def test_lp_matches_best_feasible_set_on_integral_families(seed):
    # Temporal rank-1 rows are intervals, so the LP optimum is attained at a feasible set.
    rng = np.random.default_rng(seed)
    activities = [[0, 1, 2, INF][i] for i in rng.integers(4, size=6)]
    seq = InstanceSequence.from_lists([1.0] * 6, activities, list(rng.permutation(6) + 1))
    w = rng.random(6)
    solution = solve_fractional(Rank1Family(6), seq, w, 1.0)
    best = float((feasible_set_matrix(seq, Rank1Family(6)) @ w).max())
    assert solution.objective == pytest.approx(best, abs=1e-8)
    assert TemporalPolytope.for_family(Rank1Family(6), seq, 1.0).contains(solution.x)


def test_matching_lp_solution_is_feasible():
    family = MatchingFamily([("a", "b"), ("b", "c"), ("c", "a"), ("c", "d")])
    seq = InstanceSequence.from_lists([1, 1, 1, 1], [1, INF, 0, 2])
    solution = solve_fractional(family, seq, [0.3, 0.9, 0.5, 0.7], 1.0)
    assert TemporalPolytope.for_family(family, seq, 1.0).contains(solution.x)


def test_fractional_rejects_bad_weights():
    seq = InstanceSequence.from_lists([1, 1], [0, 0])
    with pytest.raises(PreconditionError):
        solve_fractional(Rank1Family(2), seq, [1, -1])
    with pytest.raises(PreconditionError):
        solve_fractional(Rank1Family(2), seq, [1, 1, 1])


# --- matching LP ---

def test_one_machine_one_job():
    instance = one_machine([DiscreteDistribution.point(3)], [5.0])
    solution = solve_matching_lp(instance)
    assert solution.objective == pytest.approx(5.0)
    assert solution.x.values.tolist() == pytest.approx([1.0])


def test_blocking_constraint_uses_inclusive_tail():
    instance = one_machine([DiscreteDistribution.point(1), DiscreteDistribution.point(0)], [1.0, 1.0])
    A, rhs = matching_lp_rows(instance)
    # Rows: one per job, then one per (machine, job); Pr[d >= 1] = 1 for the first job.
    assert A[3].tolist() == [1.0, 1.0]
    assert solve_matching_lp(instance).objective == pytest.approx(1.0)


def test_two_point_activity():
    instance = one_machine([DiscreteDistribution((0, 2), (0.5, 0.5)), DiscreteDistribution.point(0)], [1.0, 1.0])
    assert solve_matching_lp(instance).objective == pytest.approx(1.5)
    assert expected_offline_optimum(instance) == pytest.approx(1.5)


def test_offline_optimum_with_random_weights():
    jobs = (Job(1, (1.0,), (DiscreteDistribution.point(INF),), (DiscreteDistribution((0.0, 2.0), (0.5, 0.5)),)),
            Job(2, (0.5,), (DiscreteDistribution.point(0),)))
    instance = MatchingInstance(1, jobs)
    # Realised first weight 0 -> take the second job (0.5); 2 -> take the first (2).
    assert expected_offline_optimum(instance) == pytest.approx(0.5 * 0.5 + 0.5 * 2.0)


@pytest.mark.parametrize("seed", range(8))
def test_lp_dominates_expected_offline_optimum(seed):
    rng = np.random.default_rng(seed)
    instance = random_matching_instance(int(rng.integers(1, 4)), int(rng.integers(1, 4)), rng)
    assert solve_matching_lp(instance).objective >= expected_offline_optimum(instance) - 1e-8


def test_lp_solution_as_matrix():
    instance = random_matching_instance(2, 3, np.random.default_rng(0))
    solution = solve_matching_lp(instance)
    assert solution.as_matrix(2, 3).shape == (2, 3)
    A, rhs = matching_lp_rows(instance)
    assert np.all(A @ solution.x.values <= rhs + 1e-9)
