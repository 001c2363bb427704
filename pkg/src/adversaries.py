"""
Non-adaptive input streams for the regret experiments: random and constant weight
streams over a fixed sequence, replayed weight files, and the two lower-bound
constructions (the coin-flip stream that defeats the dynamic benchmark, and the
hidden-position stream that separates an informed greedy OCRS from any learner).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator

from .constraints import ConstraintFamily, Rank1Family, active_sets, feasible_set_matrix
from .data_models import INFINITE_ACTIVITY, FractionalPoint, InstanceSequence
from .errors import ConfigError, PreconditionError
from .instance_io import instance_as_dict, load_weight_stream

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.1


class AdversarySpec(BaseModel):
    kind: Literal["uniform-random", "constant", "lemma-c1", "lemma-c2", "custom-file"]
    seed: int = 0
    T: Optional[int] = Field(default=None, ge=1)
    weights: Optional[List[float]] = None
    path: Optional[str] = None
    epsilon: float = Field(default=DEFAULT_EPSILON, gt=0, lt=1)
    n: int = Field(default=4, ge=2)
    alpha: float = Field(default=1.0 / math.e, gt=0, le=1)

    @field_validator("weights")
    @classmethod
    def _weights_in_unit_interval(cls, value):
        if value is not None and any(not 0 <= w <= 1 for w in value):
            raise ValueError("constant adversary weights must lie in [0, 1]")
        return value


@dataclass
class StageStream:
    """Per-stage sequences and weights; fixed-sequence streams repeat one sequence."""
    family: ConstraintFamily
    sequences: Tuple[InstanceSequence, ...]
    weights: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def T(self) -> int:
        return int(self.weights.shape[0])

    @property
    def m(self) -> int:
        return self.family.m

    def sequence(self, t: int) -> InstanceSequence:
        return self.sequences[t] if len(self.sequences) > 1 else self.sequences[0]

    def stage_instance_dicts(self) -> List[Dict]:
        """One instance document per stage, weights included, for replay."""
        return [instance_as_dict(self.sequence(t).with_weights(self.weights[t]), self.family) for t in range(self.T)]


def uniform_random_weights(T: int, m: int, rng: np.random.Generator) -> np.ndarray:
    return rng.random((T, m))


def constant_weights(T: int, w) -> np.ndarray:
    w = np.asarray(w, dtype=float).reshape(1, -1)
    if w.size and (w.min() < 0 or w.max() > 1):
        raise PreconditionError("Constant adversary weights must lie in [0, 1]")
    return np.repeat(w, T, axis=0)


def gen_lemma_c1(T: int, rng: np.random.Generator, epsilon: float = DEFAULT_EPSILON) -> StageStream:
    """
    Three single-choice jobs per stage. A fair coin per stage: heads gives weights
    (1, 1, 1) with activity 1, tails gives (epsilon, 1, 1) with infinite activity.
    """
    if not 0 < epsilon < 1:
        raise PreconditionError(f"epsilon must lie in (0, 1), got {epsilon}")
    heads = rng.random(T) < 0.5
    head_seq = InstanceSequence.from_lists([1.0, 1.0, 1.0], [1, 1, 1])
    tail_seq = InstanceSequence.from_lists([epsilon, 1.0, 1.0], [INFINITE_ACTIVITY] * 3)
    sequences = tuple(head_seq if h else tail_seq for h in heads)
    weights = np.array([seq.weights for seq in sequences]).reshape(T, 3)
    return StageStream(Rank1Family(3), sequences, weights, {"heads": heads, "epsilon": epsilon})


def lemma_c2_delta(n: int, alpha: float) -> float:
    if n < 2:
        raise PreconditionError(f"n must be at least 2, got {n}")
    if not 0 < alpha <= 1:
        raise PreconditionError(f"alpha must lie in (0, 1], got {alpha}")
    if alpha <= 1.0 / n:
        raise PreconditionError(f"alpha = {alpha} must exceed 1/n = {1.0 / n} for a positive delta")
    return (alpha - 1.0 / n) / 2.0


def gen_lemma_c2(T: int, n: int, alpha: float, rng: np.random.Generator) -> StageStream:
    """
    n single-choice jobs with infinite activity per stage. With k uniform in 1..n, the
    weights are delta^k, delta^(k-1), ..., delta followed by n - k zeros.
    """
    delta = lemma_c2_delta(n, alpha)
    ks = rng.integers(1, n + 1, size=T)
    weights = np.zeros((T, n))
    for t, k in enumerate(ks):
        weights[t, :k] = delta ** np.arange(k, 0, -1)
    seq = InstanceSequence.from_lists([0.0] * n, [INFINITE_ACTIVITY] * n)
    return StageStream(Rank1Family(n), (seq,), weights, {"k": ks, "delta": delta, "alpha": alpha, "n": n})


def greedy_policy_reward(seq: InstanceSequence, family: ConstraintFamily, weights: np.ndarray, accept_first: bool) -> float:
    """Accept or reject the first job as told, then take every later job that stays temporally feasible."""
    actives = active_sets(seq)
    selected: set = set()
    for position, e in enumerate(seq.order):
        if position == 0 and not accept_first:
            continue
        if family.is_independent(frozenset(selected & actives[e]) | {e}):
            selected.add(e)
    return float(sum(weights[e] for e in selected))


def lemma_c1_policy_reward(stream: StageStream, t: int, accept_first: bool) -> float:
    return greedy_policy_reward(stream.sequence(t), stream.family, stream.weights[t], accept_first)


def dynamic_optimum(stream: StageStream, t: int) -> float:
    """Clairvoyant best temporally feasible set for stage t."""
    F = feasible_set_matrix(stream.sequence(t), stream.family)
    return float((F @ stream.weights[t]).max())


def lemma_c2_guess_reward(stream: StageStream, t: int, position: int) -> float:
    """Reward of the uninformed policy that always stops at the given (0-based) position."""
    return float(stream.weights[t, position])


def lemma_c2_informed_reward(stream: StageStream, t: int, scheme, rng: np.random.Generator) -> float:
    """A temporal greedy OCRS told where delta lands: it rounds the indicator of that job."""
    k = int(stream.meta["k"][t])
    x = FractionalPoint.indicator(stream.m, [k - 1])
    S, _ = scheme.run(x, rng)
    return float(sum(stream.weights[t, e] for e in S))


def build_adversary(spec: AdversarySpec, family: ConstraintFamily, seq: Optional[InstanceSequence], T: int,
                    rng: Optional[np.random.Generator] = None) -> StageStream:
    """Factory dispatching on spec.kind. Streams depend only on (kind, seed, T) unless rng is passed."""
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    logger.info(f"Building '{spec.kind}' adversary for T = {T}")
    if spec.kind == "lemma-c1":
        return gen_lemma_c1(T, rng, spec.epsilon)
    if spec.kind == "lemma-c2":
        return gen_lemma_c2(T, spec.n, spec.alpha, rng)
    if seq is None:
        raise ConfigError(f"Adversary '{spec.kind}' needs an instance to fix the sequence")
    m = seq.m
    if spec.kind == "uniform-random":
        weights = uniform_random_weights(T, m, rng)
    elif spec.kind == "constant":
        if spec.weights is None or len(spec.weights) != m:
            raise ConfigError(f"Constant adversary needs {m} weights")
        weights = constant_weights(T, spec.weights)
    elif spec.kind == "custom-file":
        if spec.path is None:
            raise ConfigError("custom-file adversary needs a 'path'")
        stored = load_weight_stream(spec.path)
        if stored.shape[1] != m or stored.shape[0] < T:
            raise ConfigError(f"Weight stream {spec.path} has shape {stored.shape}; need at least ({T}, {m})")
        if stored.min() < 0 or stored.max() > 1:
            raise ConfigError(f"Weight stream {spec.path} has weights outside [0, 1]")
        weights = stored[:T]
    else:
        raise ConfigError(f"Unknown adversary kind: {spec.kind}")
    return StageStream(family, (seq,), weights, {"kind": spec.kind})
