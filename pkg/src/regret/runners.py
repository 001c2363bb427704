"""
The three feedback models: full feedback (minimizer + OCRS), semi-bandit feedback with a
white-box OCRS (mirror ascent on importance-weighted estimates), and semi-bandit feedback
with oracle-only access (blocked exploration).
"""
import logging
import math
from typing import FrozenSet, Optional, Sequence, Tuple, Union

import numpy as np

from ..constraints import ConstraintFamily, TemporalPolytope, is_temporally_feasible
from ..data_models import FractionalPoint, InstanceSequence, RegretTrace, WeightEstimate
from ..errors import ConfigError, PreconditionError
from ..ocrs.base_ocrs import selection_probability
from ..ocrs.perfect_selector import PerfectSelector
from ..ocrs.temporal_ocrs import TemporalOcrs
from .minimizers import EntropicMirrorAscent, OnlineGradientAscent, RegretMinimizer

logger = logging.getLogger(__name__)

Selector = Union[TemporalOcrs, PerfectSelector]


def _check_weights(weights: np.ndarray, T: int, m: int) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (T, m):
        raise PreconditionError(f"Adversary weights must have shape ({T}, {m}), got {weights.shape}")
    if weights.size and (weights.min() < 0 or weights.max() > 1):
        raise PreconditionError("Adversary weights must lie in [0, 1]")
    return weights


def decision_set(selector: Selector, family: ConstraintFamily, seq: InstanceSequence) -> TemporalPolytope:
    """The temporal polytope at the selector's own scale."""
    return TemporalPolytope.for_family(family, seq, selector.b)


def _indicator(m: int, S: FrozenSet[int]) -> np.ndarray:
    a = np.zeros(m)
    a[list(S)] = 1.0
    return a


def full_feedback_run(T: int, family: ConstraintFamily, seq: InstanceSequence, selector: Selector,
                      weights: np.ndarray, rng: np.random.Generator,
                      minimizer: Optional[RegretMinimizer] = None) -> RegretTrace:
    """Each stage plays the OCRS rounding of rm.rec() and then feeds the whole w_t to rm."""
    m = seq.m
    weights = _check_weights(weights, T, m)
    rm = minimizer if minimizer is not None else OnlineGradientAscent(decision_set(selector, family, seq))
    fractional = np.zeros((T, m))
    actions = np.zeros((T, m))
    for t in range(T):
        x = rm.rec()
        S, _ = selector.run(x, rng)
        fractional[t] = x.values
        actions[t] = _indicator(m, S)
        rm.update(weights[t])
    trace = RegretTrace(alpha=selector.alpha, fractional=fractional, actions=actions, weights=weights,
                        rewards=np.einsum("ij,ij->i", actions, weights),
                        fractional_rewards=np.einsum("ij,ij->i", fractional, weights))
    logger.info(f"full_feedback_run: T = {T}, reward {trace.total_reward:.4g}")
    return trace


def importance_weights(S: FrozenSet[int], transcript, observed: np.ndarray) -> WeightEstimate:
    """w_hat_e = w_e / q(e) on the selected elements, 0 elsewhere."""
    m = observed.size
    action = _indicator(m, S)
    q = np.zeros(m)
    for e in S:
        q[e] = selection_probability(transcript, e)
    return WeightEstimate.from_selection(action, observed, q)


def osmd_semibandit_run(T: int, family: ConstraintFamily, seq: InstanceSequence, selector: Selector,
                        weights: np.ndarray, rng: np.random.Generator,
                        minimizer: Optional[RegretMinimizer] = None) -> RegretTrace:
    """Only the weights of selected elements are observed; rm sees their importance-weighted estimates."""
    m = seq.m
    weights = _check_weights(weights, T, m)
    rm = minimizer if minimizer is not None else EntropicMirrorAscent(decision_set(selector, family, seq))
    fractional = np.zeros((T, m))
    actions = np.zeros((T, m))
    estimates = np.zeros((T, m))
    for t in range(T):
        x = rm.rec()
        S, transcript = selector.run(x, rng)
        action = _indicator(m, S)
        observed = weights[t] * action
        estimate = importance_weights(S, transcript, observed)
        fractional[t] = x.values
        actions[t] = action
        estimates[t] = estimate.values
        logger.debug(f"stage {t}: selected {sorted(S)}, estimate {estimate.values.round(4).tolist()}")
        rm.update(estimate.values)
    trace = RegretTrace(alpha=selector.alpha, fractional=fractional, actions=actions, weights=weights,
                        rewards=np.einsum("ij,ij->i", actions, weights),
                        fractional_rewards=np.einsum("ij,ij->i", fractional, weights), estimates=estimates)
    logger.info(f"osmd_semibandit_run: T = {T}, reward {trace.total_reward:.4g}")
    return trace


def block_layout(T: int) -> Tuple[int, int]:
    """(Z, block length): Z = ceil(T^(2/3)) blocks of ceil(T / Z) stages, the last one truncated."""
    if T < 1:
        raise ConfigError(f"Horizon must be positive, got {T}")
    Z = math.ceil(T ** (2.0 / 3.0) - 1e-9)
    return Z, math.ceil(T / Z)


def exploration_set(e: int, family: ConstraintFamily, seq: InstanceSequence) -> FrozenSet[int]:
    """A feasible set containing e: the singleton, which downward closure makes the only candidate worth trying."""
    S = frozenset((e,))
    if not is_temporally_feasible(S, seq, family):
        raise ConfigError(f"Element {e} is infeasible on its own and can never be explored")
    return S


def exploration_estimate(block_weights: np.ndarray, targets: Sequence[int], stages: Sequence[int],
                         hits: Optional[Sequence[bool]] = None) -> np.ndarray:
    """
    Block estimate: targets[j] gets its weight at block stage stages[j] when that exploration
    play selected it (hits[j], default every play), and 0 otherwise.
    """
    hits = [True] * len(targets) if hits is None else hits
    estimate = np.zeros(block_weights.shape[1])
    for e, t, hit in zip(targets, stages, hits):
        if hit:
            estimate[e] = block_weights[t, e]
    return estimate


def block_semibandit_run(T: int, family: ConstraintFamily, seq: InstanceSequence, selector: Selector,
                         weights: np.ndarray, rng: np.random.Generator,
                         minimizer: Optional[RegretMinimizer] = None) -> RegretTrace:
    """
    Blocked exploration for an oracle-only OCRS. Each block pairs a random
    permutation of the elements with distinct exploration stages; an exploration stage plays
    the indicator of its element through the OCRS, every other stage plays the block's point.
    The minimizer is updated once per block with the weights seen at the exploration stages.
    """
    m = seq.m
    weights = _check_weights(weights, T, m)
    Z, length = block_layout(T)
    if m > length:
        raise ConfigError(f"Cannot fit {m} exploration stages into blocks of {length} stages (T = {T})")
    rm = minimizer if minimizer is not None else OnlineGradientAscent(decision_set(selector, family, seq))
    fractional = np.zeros((T, m))
    actions = np.zeros((T, m))
    estimates = []
    misses = 0
    for start in range(0, T, length):
        stop = min(start + length, T)
        x_block = rm.rec()
        permutation = rng.permutation(m)
        n_explore = min(m, stop - start)
        stages = rng.choice(stop - start, size=n_explore, replace=False)
        target_of = {int(start + t): int(permutation[j]) for j, t in enumerate(stages)}
        explored = []
        for t in range(start, stop):
            if t in target_of:
                e = target_of[t]
                x = FractionalPoint.indicator(m, exploration_set(e, family, seq))
                S, _ = selector.run(x, rng, check=False)
                explored.append((e, t - start, e in S))
                if e not in S:
                    misses += 1
                    logger.debug(f"Exploration miss: element {e} not selected at stage {t}; estimate set to 0")
            else:
                x = x_block
                S, _ = selector.run(x, rng)
            fractional[t] = x.values
            actions[t] = _indicator(m, S)
        targets, offsets, hits = zip(*explored) if explored else ((), (), ())
        estimate = exploration_estimate(weights[start:stop], targets, offsets, hits)
        estimates.append(estimate)
        if n_explore < m:
            logger.debug(f"Truncated block at stage {start} explored {n_explore} of {m} elements")
        rm.update(estimate)
    if misses:
        logger.warning(f"{misses} exploration plays did not select their target; their estimates were set to 0")
    trace = RegretTrace(alpha=selector.alpha, fractional=fractional, actions=actions, weights=weights,
                        rewards=np.einsum("ij,ij->i", actions, weights),
                        fractional_rewards=np.einsum("ij,ij->i", fractional, weights),
                        estimates=np.array(estimates).reshape(-1, m), exploration_misses=misses)
    logger.info(f"block_semibandit_run: T = {T}, Z = {Z}, reward {trace.total_reward:.4g}, misses {misses}")
    return trace
