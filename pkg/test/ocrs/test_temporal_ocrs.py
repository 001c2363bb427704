import pytest
import os
import sys
import math
import itertools

import numpy as np

project_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.insert(0, project_root)

from src.constraints import MatchingFamily, Rank1Family, TemporalPolytope, active_sets, is_temporally_feasible
from src.data_models import INFINITE_ACTIVITY, FractionalPoint, InstanceSequence
from src.errors import PreconditionError
from src.ocrs.base_ocrs import sample_R
from src.ocrs.subfamily_ocrs import MatchingOcrs, Rank1Ocrs, exact_selection_probabilities
from src.ocrs.temporal_ocrs import (TemporalOcrs, estimate_selectability, exact_selectability, run_direct,
                                    run_temporal)

INF = INFINITE_ACTIVITY
CYCLE = MatchingFamily([("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")])


def seq_of(activities, arrivals=None):
    return InstanceSequence.from_lists([1.0] * len(activities), activities, arrivals)


def test_wrapper_refuses_non_greedy_and_nested_bases():
    seq = seq_of([0, 0])
    with pytest.raises(TypeError):
        TemporalOcrs(object(), seq)
    inner = TemporalOcrs(Rank1Ocrs(Rank1Family(2)), seq)
    with pytest.raises(TypeError):
        TemporalOcrs(inner, seq)
    with pytest.raises(PreconditionError):
        TemporalOcrs(Rank1Ocrs(Rank1Family(3)), seq)


def test_wrapper_name_and_ratio_follow_base():
    scheme = TemporalOcrs(MatchingOcrs(CYCLE, b=0.5), seq_of([0, 1, 2, 3]))
    assert scheme.name == "temporal-matching"
    assert scheme.selectability() == pytest.approx(math.exp(-1))
    assert scheme.alpha == pytest.approx(0.5 * math.exp(-1))


def test_wrapper_checks_the_temporal_polytope():
    scheme = TemporalOcrs(Rank1Ocrs(Rank1Family(2)), seq_of([5, 0]))
    with pytest.raises(PreconditionError):
        scheme.run(FractionalPoint(np.array([1.0, 1.0])), np.random.default_rng(0))


def test_expired_elements_can_both_be_accepted():
    rng = np.random.default_rng(7)
    seq = seq_of([0, 0])
    x = FractionalPoint(np.array([1.0, 1.0]))
    scheme = TemporalOcrs(Rank1Ocrs(Rank1Family(2)), seq)
    n = 20000
    both = sum(len(scheme.run(x, rng)[0]) == 2 for _ in range(n))
    assert abs(both / n - (1 - math.exp(-1)) ** 2) < 0.015


def test_infinite_activity_rank1_accepts_at_most_one():
    rng = np.random.default_rng(8)
    scheme = TemporalOcrs(Rank1Ocrs(Rank1Family(3)), seq_of([INF, INF, INF]))
    x = FractionalPoint(np.full(3, 1 / 3))
    for _ in range(1000):
        S, _ = scheme.run(x, rng)
        assert len(S) <= 1


@pytest.mark.parametrize("base_factory,m", [(lambda: Rank1Ocrs(Rank1Family(4)), 4), (lambda: MatchingOcrs(CYCLE), 4)])
def test_degenerate_reduction_matches_direct_run(base_factory, m):
    seq = seq_of([INF] * m, [2, 4, 1, 3])
    polytope = TemporalPolytope.for_family(base_factory().family, None, 1.0)
    x = FractionalPoint(polytope.repair(np.full(m, 0.9)))
    for seed in range(300):
        wrapped, _ = run_temporal(base_factory(), x, seq, np.random.default_rng(seed))
        direct, _ = run_direct(base_factory(), x, seq.order, np.random.default_rng(seed))
        assert wrapped == direct


def test_output_is_always_temporally_feasible():
    rng = np.random.default_rng(9)
    seq = seq_of([1, INF, 0, 2], [1, 2, 3, 4])
    scheme = TemporalOcrs(MatchingOcrs(CYCLE), seq)
    x = FractionalPoint(scheme.polytope.repair(np.full(4, 0.8)))
    for _ in range(500):
        S, transcript = scheme.run(x, rng)
        assert is_temporally_feasible(S, seq, CYCLE)
        assert transcript.accepted_set() == S
        assert [entry.element for entry in transcript.entries] == list(seq.order)


def test_temporal_point_beyond_static_polytope_is_accepted():
    # x = (1, 1) is outside P_F but inside P^d_F when the active sets are disjoint.
    scheme = TemporalOcrs(Rank1Ocrs(Rank1Family(2)), seq_of([0, 0]))
    S, _ = scheme.run(FractionalPoint(np.array([1.0, 1.0])), np.random.default_rng(1))
    assert S <= frozenset({0, 1})


def test_blocked_element_is_discarded_without_base():
    scheme = TemporalOcrs(Rank1Ocrs(Rank1Family(2)), seq_of([INF, INF]))
    x = FractionalPoint(np.array([0.5, 0.5]))
    scheme.init(x, None, subfamily=frozenset({0, 1}))
    assert scheme.observe(0, True)
    assert not scheme.observe(1, True)
    entry = scheme.transcript.entry(1)
    assert entry.sampled and not entry.feasible_at_arrival and entry.accept_probability == 0.0


def test_exact_selectability_matches_enumeration():
    seq = seq_of([1, INF, 0, 2], [2, 1, 4, 3])
    base = MatchingOcrs(CYCLE)
    scheme = TemporalOcrs(base, seq)
    x = FractionalPoint(scheme.polytope.repair(np.array([0.7, 0.5, 0.6, 0.4])))
    brute = exact_selection_probabilities(base, x, seq.order, seq)
    closed = exact_selectability(scheme, x, seq)
    assert np.allclose(brute["selectable"], closed, atol=1e-12)
    assert np.all(closed >= math.exp(-2) - 1e-12)


def test_estimate_selectability_measures_real_runs():
    rng = np.random.default_rng(10)
    seq = seq_of([0, INF, 1, INF], [1, 2, 3, 4])
    scheme = TemporalOcrs(Rank1Ocrs(Rank1Family(4)), seq)
    x = FractionalPoint(scheme.polytope.repair(np.full(4, 0.6)))
    estimate = estimate_selectability(scheme, x, seq, 20000, rng, keep_transcripts=2)
    exact = exact_selectability(scheme, x, seq)
    assert np.all(estimate["selected"] <= estimate["sampled"])
    assert estimate["feasible_runs"] == 20000
    assert len(estimate["transcripts"]) == 2
    assert np.all(np.abs(estimate["selectable"] - exact) <= 4 * estimate["stderr"] + 1e-3)
    # Selectable and sampled implies selected, so the measured rate sits at or above the closed form.
    assert np.all(estimate["selection_rate"] >= exact - 4 * estimate["selection_stderr"] - 1e-3)
    assert np.all(exact >= 1 / math.e - 1e-12)


def test_estimate_selectability_sees_a_scheme_that_never_selects(monkeypatch):
    seq = seq_of([0, INF, 1], [1, 2, 3])
    scheme = TemporalOcrs(Rank1Ocrs(Rank1Family(3)), seq)
    x = FractionalPoint(scheme.polytope.repair(np.full(3, 0.5)))
    monkeypatch.setattr(Rank1Ocrs, "in_subfamily", lambda self, S: False)
    estimate = estimate_selectability(scheme, x, seq, 500, np.random.default_rng(11))
    assert np.all(estimate["sampled"] > 0)
    assert np.all(estimate["selection_rate"] == 0.0)


def test_discarded_feasible_element_records_base_probability():
    scheme = TemporalOcrs(Rank1Ocrs(Rank1Family(2)), seq_of([0, 0]))
    x = FractionalPoint(np.array([0.5, 0.5]))
    # Element 1 is outside the subfamily draw, so the wrapper discards it without the base.
    scheme.init(x, None, subfamily=frozenset({0}))
    assert not scheme.observe(1, True)
    entry = scheme.transcript.entry(1)
    assert entry.feasible_at_arrival and not entry.accepted
    assert entry.accept_probability == pytest.approx((1 - math.exp(-0.5)) / 0.5)


@pytest.mark.parametrize("temporal", [False, True])
def test_decisions_depend_only_on_the_prefix(temporal):
    seq = seq_of([1, INF, 0, 2], [2, 1, 4, 3])
    base = MatchingOcrs(CYCLE)
    scheme = TemporalOcrs(base, seq) if temporal else base
    polytope = TemporalPolytope.for_family(CYCLE, seq if temporal else None, 1.0)
    x = FractionalPoint(polytope.repair(np.full(4, 0.7)))
    order = list(seq.order)
    for seed in range(30):
        rng = np.random.default_rng(seed)
        R = sample_R(x, rng)
        scheme.init(x, rng)
        full = [scheme.observe(e, e in R) for e in order]
        full_entries = list(scheme.transcript.entries)
        for k in range(len(order) + 1):
            rng = np.random.default_rng(seed)
            R_replay = sample_R(x, rng)
            scheme.init(x, rng)
            prefix = [scheme.observe(e, e in R_replay) for e in order[:k]]
            assert prefix == full[:k]
            # A different suffix never rewrites what was already decided.
            for e in order[k:]:
                scheme.observe(e, e not in R_replay)
            assert scheme.transcript.entries[:k] == full_entries[:k]


def subsets_of(m):
    return [frozenset(S) for r in range(m + 1) for S in itertools.combinations(range(m), r)]


@pytest.mark.parametrize("base_factory", [lambda: Rank1Ocrs(Rank1Family(4)), lambda: MatchingOcrs(CYCLE)])
def test_shorter_activity_keeps_every_feasible_decision(base_factory):
    levels = [0, 1, 2, INF]
    rng = np.random.default_rng(12)
    x = FractionalPoint(np.full(4, 0.25))
    subsets = subsets_of(4)
    for _ in range(6):
        arrivals = list(rng.permutation(4) + 1)
        long = [int(i) for i in rng.integers(1, 4, size=4)]
        e = int(rng.integers(4))
        for shorter in range(long[e]):
            short = list(long)
            short[e] = shorter
            seq_long = seq_of([levels[i] for i in long], arrivals)
            seq_short = seq_of([levels[i] for i in short], arrivals)
            actives_short = active_sets(seq_short)
            actives_long = active_sets(seq_long)
            base = base_factory()
            scheme = TemporalOcrs(base, seq_long)
            for R in subsets:
                for H in subsets:
                    scheme.init(x, None, subfamily=H, check=False)
                    for f in seq_long.order:
                        scheme.observe(f, f in R)
                    S = frozenset(scheme.selected)
                    for f in S:
                        # Every acceptance made under the longer activity stays feasible under the shorter one.
                        assert base.in_subfamily((S & actives_short[f]) | {f})
                    for f in range(4):
                        if base.is_selectable(f, R, actives_long[f]):
                            assert base.is_selectable(f, R, actives_short[f])
