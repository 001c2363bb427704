import pytest
import os
import sys
import math

import numpy as np
from pydantic import ValidationError

project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from src.adversaries import (AdversarySpec, build_adversary, constant_weights, dynamic_optimum, gen_lemma_c1,
                             gen_lemma_c2, lemma_c1_policy_reward, lemma_c2_delta, lemma_c2_guess_reward,
                             lemma_c2_informed_reward)
from src.constraints import Rank1Family
from src.errors import ConfigError, PreconditionError
from src.instance_io import load_instance
from src.ocrs.subfamily_ocrs import Rank1Ocrs
from src.ocrs.temporal_ocrs import TemporalOcrs

INSTANCES = os.path.join(project_root, "instances")


@pytest.fixture
def rank1_four():
    return load_instance(os.path.join(INSTANCES, "rank1_four.json"))


def test_coin_flip_stream_stage_values():
    stream = gen_lemma_c1(400, np.random.default_rng(0), epsilon=0.1)
    heads = stream.meta["heads"]
    assert 0.4 < heads.mean() < 0.6
    for t in range(stream.T):
        if heads[t]:
            assert dynamic_optimum(stream, t) == pytest.approx(2.0)
            assert lemma_c1_policy_reward(stream, t, accept_first=True) == pytest.approx(2.0)
            assert lemma_c1_policy_reward(stream, t, accept_first=False) == pytest.approx(1.0)
        else:
            assert dynamic_optimum(stream, t) == pytest.approx(1.0)
            assert lemma_c1_policy_reward(stream, t, accept_first=True) == pytest.approx(0.1)
            assert lemma_c1_policy_reward(stream, t, accept_first=False) == pytest.approx(1.0)


def test_coin_flip_dynamic_optimum_averages_three_halves():
    stream = gen_lemma_c1(4000, np.random.default_rng(1))
    mean = np.mean([dynamic_optimum(stream, t) for t in range(stream.T)])
    assert mean == pytest.approx(1.5, abs=0.05)


def test_coin_flip_needs_epsilon_in_range():
    with pytest.raises(PreconditionError):
        gen_lemma_c1(10, np.random.default_rng(0), epsilon=1.0)


def test_hidden_position_delta():
    assert lemma_c2_delta(4, 1 / math.e) == pytest.approx((1 / math.e - 0.25) / 2)
    with pytest.raises(PreconditionError):
        lemma_c2_delta(2, 0.5)
    with pytest.raises(PreconditionError):
        lemma_c2_delta(1, 0.9)


def test_hidden_position_weights():
    stream = gen_lemma_c2(50, 4, 1 / math.e, np.random.default_rng(2))
    delta = stream.meta["delta"]
    for t, k in enumerate(stream.meta["k"]):
        row = stream.weights[t]
        assert row[k - 1] == pytest.approx(delta)
        assert row[:k].tolist() == pytest.approx([delta ** (k - i) for i in range(k)])
        assert np.all(row[k:] == 0)
        assert lemma_c2_guess_reward(stream, t, int(k) - 1) == pytest.approx(delta)


def test_informed_scheme_collects_delta_at_its_rate():
    rng = np.random.default_rng(3)
    stream = gen_lemma_c2(2000, 4, 1 / math.e, rng)
    scheme = TemporalOcrs(Rank1Ocrs(Rank1Family(4)), stream.sequence(0))
    rewards = [lemma_c2_informed_reward(stream, t, scheme, rng) for t in range(stream.T)]
    assert np.mean(rewards) / stream.meta["delta"] == pytest.approx(1 - math.exp(-1), abs=0.04)


def test_streams_are_deterministic_per_seed(rank1_four):
    seq, family = rank1_four
    spec = AdversarySpec(kind="uniform-random", seed=5)
    first = build_adversary(spec, family, seq, 20)
    second = build_adversary(spec, family, seq, 20)
    assert np.array_equal(first.weights, second.weights)
    assert first.T == 20 and first.m == 4
    assert len(first.stage_instance_dicts()) == 20
    other = build_adversary(AdversarySpec(kind="uniform-random", seed=6), family, seq, 20)
    assert not np.array_equal(first.weights, other.weights)


def test_constant_and_file_streams(rank1_four):
    seq, family = rank1_four
    stream = build_adversary(AdversarySpec(kind="constant", weights=[1, 0, 0.5, 0]), family, seq, 3)
    assert stream.weights.tolist() == [[1, 0, 0.5, 0]] * 3
    path = os.path.join(INSTANCES, "uniform_weights_4x8.json")
    replay = build_adversary(AdversarySpec(kind="custom-file", path=path), family, seq, 5)
    assert replay.weights.shape == (5, 4)
    assert replay.weights[0].tolist() == [0.9, 0.1, 0.5, 0.3]


def test_build_adversary_errors(rank1_four):
    seq, family = rank1_four
    with pytest.raises(ConfigError):
        build_adversary(AdversarySpec(kind="uniform-random"), family, None, 5)
    with pytest.raises(ConfigError):
        build_adversary(AdversarySpec(kind="constant", weights=[1, 0]), family, seq, 5)
    with pytest.raises(ConfigError):
        build_adversary(AdversarySpec(kind="custom-file"), family, seq, 5)
    path = os.path.join(INSTANCES, "uniform_weights_4x8.json")
    with pytest.raises(ConfigError):
        build_adversary(AdversarySpec(kind="custom-file", path=path), family, seq, 9)


def test_spec_validation():
    with pytest.raises(ValidationError):
        AdversarySpec(kind="adaptive")
    with pytest.raises(ValidationError):
        AdversarySpec(kind="constant", weights=[1.5])
    with pytest.raises(ValidationError):
        AdversarySpec(kind="lemma-c1", epsilon=0)
    with pytest.raises(PreconditionError):
        constant_weights(2, [-0.1])
