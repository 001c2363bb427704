"""
Fractional relaxations: maximize <x, w> over a temporal packing polytope, and the
reusable-resource matching LP over machines and jobs. Both go through a small dense
two-phase tableau simplex with Bland's rule.
"""
import itertools
import logging
from typing import List, Optional, Tuple

import numpy as np

from .constraints import ConstraintFamily, TemporalPolytope
from .data_models import (INFEASIBLE, OPTIMAL, UNBOUNDED, FractionalPoint, InstanceSequence, LpSolution,
                          MatchingInstance)
from .errors import InvariantViolation, PreconditionError

logger = logging.getLogger(__name__)

# Relative objective tolerance reported alongside solutions.
TAU_LP = 1e-8
_PIVOT_TOL = 1e-11


def _pivot(T: np.ndarray, row: int, col: int):
    T[row, :] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r, :] -= T[r, col] * T[row, :]


def _price_out(T: np.ndarray, costs: np.ndarray, basis: List[int]):
    """Writes the objective row for 'maximize costs . x' consistent with the basis."""
    T[-1, :] = 0.0
    T[-1, :-1] = -costs
    for r, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1, :] -= T[-1, j] * T[r, :]


def _simplex_core(T: np.ndarray, basis: List[int], max_iter: int) -> str:
    """Bland's rule: lowest-index improving column, ties on the ratio go to the lowest basic index."""
    k = T.shape[0] - 1
    for _ in range(max_iter):
        improving = np.flatnonzero(T[-1, :-1] < -_PIVOT_TOL)
        if improving.size == 0:
            return OPTIMAL
        col = int(improving[0])
        column = T[:k, col]
        mask = column > _PIVOT_TOL
        if not mask.any():
            return UNBOUNDED
        ratios = np.full(k, np.inf)
        ratios[mask] = T[:k, -1][mask] / column[mask]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + _PIVOT_TOL * max(1.0, abs(best)))
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
    raise InvariantViolation(f"Simplex did not terminate within {max_iter} pivots")


def simplex_maximize(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
                     max_iter: int = 50_000) -> Tuple[str, Optional[np.ndarray], float]:
    """
    maximize c.x  s.t.  A_ub x <= b_ub, A_eq x = b_eq, x >= 0.

    Returns (status, x, objective); x is None unless status is optimal.
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
    k_ub, k_eq = A_ub.shape[0], A_eq.shape[0]
    k = k_ub + k_eq

    # Columns: originals, one slack per <= row, one artificial per row that lacks a basic slack.
    flip_ub = b_ub < 0
    needs_art = np.concatenate([flip_ub, np.ones(k_eq, dtype=bool)])
    art_rows = np.flatnonzero(needs_art)
    n_cols = n + k_ub + art_rows.size
    T = np.zeros((k + 1, n_cols + 1))
    T[:k_ub, :n] = A_ub
    T[:k_ub, n:n + k_ub] = np.eye(k_ub)
    T[:k_ub, -1] = b_ub
    T[k_ub:k, :n] = A_eq
    T[k_ub:k, -1] = b_eq
    sign = np.where(T[:k, -1] < 0, -1.0, 1.0)
    T[:k, :] *= sign[:, None]
    basis = [n + r for r in range(k_ub)] + [0] * k_eq
    artificials = []
    for i, r in enumerate(art_rows):
        j = n + k_ub + i
        T[r, j] = 1.0
        basis[r] = j
        artificials.append(j)

    if artificials:
        phase1 = np.zeros(n_cols)
        phase1[artificials] = -1.0
        _price_out(T, phase1, basis)
        _simplex_core(T, basis, max_iter)
        if T[-1, -1] < -1e-9:
            logger.debug(f"Phase I ended with infeasibility {-T[-1, -1]:.3g}")
            return INFEASIBLE, None, float("nan")
        art_set = set(artificials)
        for r in range(k - 1, -1, -1):
            if basis[r] in art_set:
                candidates = [j for j in range(n_cols) if j not in art_set and abs(T[r, j]) > _PIVOT_TOL]
                if candidates:
                    _pivot(T, r, candidates[0])
                    basis[r] = candidates[0]
                else:
                    T = np.delete(T, r, axis=0)
                    del basis[r]
        keep = [j for j in range(n_cols) if j not in art_set]
        remap = {j: i for i, j in enumerate(keep)}
        T = np.hstack([T[:, keep], T[:, -1:]])
        basis = [remap[j] for j in basis]
        n_cols = len(keep)

    costs = np.zeros(n_cols)
    costs[:n] = c
    _price_out(T, costs, basis)
    status = _simplex_core(T, basis, max_iter)
    if status != OPTIMAL:
        return status, None, float("inf")
    x = np.zeros(n_cols)
    for r, j in enumerate(basis):
        x[j] = T[r, -1]
    x = np.maximum(x[:n], 0.0)
    return OPTIMAL, x, float(c @ x)


def solve_fractional(family: ConstraintFamily, seq: InstanceSequence, w, b: float = 1.0) -> LpSolution:
    """max <x, w> over the temporal polytope scaled by b."""
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size != family.m:
        raise PreconditionError(f"Weight vector has {w.size} entries, family has {family.m} elements")
    if np.any(w < 0):
        raise PreconditionError("Weights must be non-negative")
    polytope = TemporalPolytope.for_family(family, seq, b)
    A_ub = np.vstack([polytope.A, np.eye(family.m)])
    b_ub = np.concatenate([polytope.rhs, np.ones(family.m)])
    status, x, _ = simplex_maximize(w, A_ub, b_ub)
    if status != OPTIMAL:
        raise InvariantViolation(f"Fractional LP returned {status} on a bounded, non-empty polytope")
    x = polytope.repair(x)
    logger.debug(f"solve_fractional: {family.kind}, m = {family.m}, objective {w @ x:.6g}")
    return LpSolution(FractionalPoint(x, scale_hint=b), float(w @ x), OPTIMAL)


def matching_lp_rows(instance: MatchingInstance) -> Tuple[np.ndarray, np.ndarray]:
    """
    The two constraint groups of the reusable-resource LP on x[u, v] (machine-major):
    each job matched at most once, and each machine's expected blocked load plus x[u, v]
    at most 1 at every arrival, with blocking Pr[d_uv' >= s_v - s_v'].
    """
    U, V = instance.n_machines, instance.n_jobs
    rows, rhs = [], []
    for v in range(V):
        row = np.zeros(U * V)
        row[[instance.index(u, v) for u in range(U)]] = 1.0
        rows.append(row)
        rhs.append(1.0)
    for u in range(U):
        for v in range(V):
            row = np.zeros(U * V)
            row[instance.index(u, v)] = 1.0
            for earlier in range(v):
                gap = instance.jobs[v].arrival - instance.jobs[earlier].arrival
                row[instance.index(u, earlier)] = instance.jobs[earlier].activity[u].tail_at_least(gap)
            rows.append(row)
            rhs.append(1.0)
    return np.array(rows), np.array(rhs)


def solve_matching_lp(instance: MatchingInstance) -> LpSolution:
    A, rhs = matching_lp_rows(instance)
    weights = instance.mean_weights().reshape(-1)
    if np.any(weights < 0):
        raise PreconditionError("Mean weights must be non-negative")
    status, x, objective = simplex_maximize(weights, A, rhs)
    if status != OPTIMAL:
        raise InvariantViolation(f"Matching LP returned {status}; x = 0 is always feasible")
    x = np.clip(x, 0.0, 1.0)
    logger.info(f"Matching LP |U| = {instance.n_machines}, |V| = {instance.n_jobs}: value {objective:.6g}")
    return LpSolution(FractionalPoint(x), float(weights @ x), OPTIMAL)


def _offline_best(instance: MatchingInstance, activity: np.ndarray, weights: np.ndarray) -> float:
    """Best assignment for one realisation; u stays blocked while s_v <= s_v' + d_uv'."""
    U, V = instance.n_machines, instance.n_jobs
    arrivals = [job.arrival for job in instance.jobs]

    def best_from(v: int, expiry: Tuple[float, ...]) -> float:
        if v == V:
            return 0.0
        best = best_from(v + 1, expiry)
        for u in range(U):
            if arrivals[v] > expiry[u]:
                blocked = expiry[:u] + (arrivals[v] + activity[u, v],) + expiry[u + 1:]
                best = max(best, weights[u, v] + best_from(v + 1, blocked))
        return best

    return best_from(0, tuple(-np.inf for _ in range(U)))


def expected_offline_optimum(instance: MatchingInstance, limit: int = 1 << 16) -> float:
    """
    Exact E[offline optimum] over every activity (and weight) realisation. Exponential;
    meant for instances with a handful of machines and jobs.
    """
    U, V = instance.n_machines, instance.n_jobs
    pairs = [(u, v) for u in range(U) for v in range(V)]
    activity_supports = [instance.jobs[v].activity[u].support() for u, v in pairs]
    weight_supports = []
    for u, v in pairs:
        dists = instance.jobs[v].weight_dists
        weight_supports.append(dists[u].support() if dists is not None else [(instance.jobs[v].weights[u], 1.0)])
    count = int(np.prod([len(s) for s in activity_supports + weight_supports]))
    if count > limit:
        raise PreconditionError(f"{count} realisations exceed the enumeration limit {limit}")
    total = 0.0
    for d_draw in itertools.product(*activity_supports):
        d_prob = float(np.prod([p for _, p in d_draw]))
        activity = np.array([value for value, _ in d_draw]).reshape(U, V)
        for w_draw in itertools.product(*weight_supports):
            prob = d_prob * float(np.prod([p for _, p in w_draw]))
            weights = np.array([value for value, _ in w_draw]).reshape(U, V)
            total += prob * _offline_best(instance, activity, weights)
    return total
