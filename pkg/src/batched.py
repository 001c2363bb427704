"""
Online bipartite matching with reusable machines: jobs arrive one at a time, a matched
machine stays blocked for a random activity time, and each job picks at most one
currently available machine with probability alpha * x[u, v] / Pr[u available at v].
With alpha = 1/2 every machine is available with probability at least alpha, which makes
the algorithm 1/2-competitive against the LP value.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .data_models import TAU_POLY, DiscreteDistribution, Job, LpSolution, MatchingInstance
from .errors import InvariantViolation, PreconditionError
from .lp import solve_matching_lp

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.5


@dataclass(frozen=True, eq=False)
class AvailabilityTable:
    """p_avail[u, v] = Pr[machine u is available when job v arrives]."""
    p_avail: np.ndarray
    alpha: float

    @property
    def minimum(self) -> float:
        return float(self.p_avail.min()) if self.p_avail.size else 1.0


@dataclass(frozen=True)
class MatchingRun:
    matches: Tuple[Tuple[int, int], ...]
    reward: float


def _check_alpha(alpha: float):
    if not 0 < alpha <= DEFAULT_ALPHA:
        raise PreconditionError(f"alpha must lie in (0, 1/2], got {alpha}")


def availability_table(solution: LpSolution, instance: MatchingInstance, alpha: float = DEFAULT_ALPHA) -> AvailabilityTable:
    """
    Exact forward recursion: u is unavailable at v iff some earlier v' took u and is still
    active, events that are mutually exclusive and each have probability
    alpha * x[u, v'] * Pr[d_uv' > s_v - s_v'].
    """
    _check_alpha(alpha)
    U, V = instance.n_machines, instance.n_jobs
    x = solution.as_matrix(U, V)
    p = np.ones((U, V))
    for v in range(1, V):
        for u in range(U):
            blocked = sum(x[u, earlier] * instance.jobs[earlier].activity[u].tail_above(
                instance.jobs[v].arrival - instance.jobs[earlier].arrival) for earlier in range(v))
            p[u, v] = 1.0 - alpha * blocked
    if p.size and p.min() < alpha - TAU_POLY:
        u, v = np.unravel_index(int(p.argmin()), p.shape)
        raise InvariantViolation(f"Availability of machine {u} at job {v} is {p[u, v]:.6g} < alpha = {alpha}")
    return AvailabilityTable(p, alpha)


def selection_probabilities(solution: LpSolution, instance: MatchingInstance, table: AvailabilityTable,
                            v: int, available: Sequence[int]) -> np.ndarray:
    """Per-machine probabilities for job v over the available machines (zero elsewhere)."""
    x = solution.as_matrix(instance.n_machines, instance.n_jobs)
    probs = np.zeros(instance.n_machines)
    for u in available:
        if x[u, v] <= 0:
            continue
        value = table.alpha * x[u, v] / table.p_avail[u, v]
        if value > 1.0:
            if value > 1.0 + TAU_POLY:
                raise InvariantViolation(f"Selection probability {value:.6g} > 1 for machine {u}, job {v}")
            logger.warning(f"Clamped selection probability {value!r} to 1 for machine {u}, job {v}")
            value = 1.0
        probs[u] = value
    total = float(probs.sum())
    if total > 1.0 + TAU_POLY:
        raise InvariantViolation(f"Job {v}: machine probabilities sum to {total:.6g} > 1")
    return probs


def _realised_weight(job: Job, u: int, rng: np.random.Generator) -> float:
    if job.weight_dists is None:
        return job.weights[u]
    return job.weight_dists[u].sample(rng)


def run_matching(solution: LpSolution, instance: MatchingInstance, alpha: float, rng: np.random.Generator,
                 table: Optional[AvailabilityTable] = None) -> MatchingRun:
    """One pass over the jobs. A machine matched at s with activity d is free again from slot s + d."""
    _check_alpha(alpha)
    if table is None:
        table = availability_table(solution, instance, alpha)
    free_from = np.full(instance.n_machines, -np.inf)
    matches: List[Tuple[int, int]] = []
    reward = 0.0
    for v, job in enumerate(instance.jobs):
        available = [u for u in range(instance.n_machines) if job.arrival >= free_from[u]]
        draw = rng.random()
        if not available:
            logger.debug(f"Job {v} rejected: no machine available")
            continue
        probs = selection_probabilities(solution, instance, table, v, available)
        cumulative = np.cumsum(probs)
        chosen = int(np.searchsorted(cumulative, draw, side="right"))
        if chosen >= instance.n_machines or probs[chosen] == 0.0:
            continue
        if job.arrival < free_from[chosen]:
            raise InvariantViolation(f"Machine {chosen} matched to job {v} while blocked")
        free_from[chosen] = job.arrival + job.activity[chosen].sample(rng)
        reward += _realised_weight(job, chosen, rng)
        matches.append((chosen, v))
    return MatchingRun(tuple(matches), reward)


def simulate_matching(instance: MatchingInstance, n_runs: int, rng: np.random.Generator, alpha: float = DEFAULT_ALPHA,
                      solution: Optional[LpSolution] = None) -> Dict[str, object]:
    """Monte-Carlo driver: per-run rewards and per-pair match frequencies."""
    if solution is None:
        solution = solve_matching_lp(instance)
    table = availability_table(solution, instance, alpha)
    rewards = np.zeros(n_runs)
    frequency = np.zeros((instance.n_machines, instance.n_jobs))
    for i in range(n_runs):
        run = run_matching(solution, instance, alpha, rng, table)
        rewards[i] = run.reward
        for u, v in run.matches:
            frequency[u, v] += 1
    if n_runs:
        frequency /= n_runs
    return {"rewards": rewards, "match_frequency": frequency, "lp_value": solution.objective,
            "table": table, "solution": solution}


# Activity values the random instance panel draws two-point supports from.
ACTIVITY_GRID = (0, 1, 2, 3, np.inf)


def random_matching_instance(n_machines: int, n_jobs: int, rng: np.random.Generator,
                             grid: Sequence[float] = ACTIVITY_GRID, random_weights: bool = False) -> MatchingInstance:
    """Jobs at slots 1..n_jobs; every (u, v) gets a two-point activity law drawn from grid."""
    jobs = []
    for v in range(n_jobs):
        weights = tuple(float(w) for w in np.round(rng.random(n_machines), 3))
        activity = []
        for _ in range(n_machines):
            low, high = sorted(rng.choice(len(grid), size=2, replace=False))
            p = float(np.round(rng.uniform(0.1, 0.9), 3))
            activity.append(DiscreteDistribution((grid[low], grid[high]), (p, 1.0 - p)))
        weight_dists = None
        if random_weights:
            # Two-point laws {0, 2w} with mean w.
            weight_dists = tuple(DiscreteDistribution((0.0, 2.0 * w), (0.5, 0.5)) for w in weights)
        jobs.append(Job(arrival=v + 1, weights=weights, activity=tuple(activity), weight_dists=weight_dists))
    return MatchingInstance(n_machines=n_machines, jobs=tuple(jobs))
