import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..constraints import ConstraintFamily, feasible_set_matrix
from ..data_models import InstanceSequence, RegretTrace
from ..lp import TAU_LP, solve_fractional

logger = logging.getLogger(__name__)

# Largest ground set for which benchmarks enumerate feasible sets instead of solving LPs.
BRUTE_FORCE_LIMIT = 12


@dataclass
class Benchmarks:
    """Post-hoc comparators for one trace. Series are cumulative over stages 1..T."""
    best_fixed_value: float
    best_fixed_lp_value: float
    best_fixed_prefix: np.ndarray
    alpha_regret: np.ndarray
    fractional_regret: np.ndarray
    dynamic_opt_value: Optional[float]
    alpha: float

    @property
    def final_alpha_regret(self) -> float:
        return float(self.alpha_regret[-1]) if self.alpha_regret.size else 0.0

    @property
    def final_fractional_regret(self) -> float:
        return float(self.fractional_regret[-1]) if self.fractional_regret.size else 0.0


def compute_benchmarks(trace: RegretTrace, family: ConstraintFamily, seq: InstanceSequence,
                       alpha: Optional[float] = None) -> Benchmarks:
    """
    Best fixed super-arm in hindsight for every prefix, alpha-regret against it, and the
    per-stage clairvoyant (dynamic) optimum. Small ground sets use exhaustive enumeration
    of the temporally feasible sets; the LP value on the summed weights is always reported
    and checked against the enumeration.
    """
    alpha = trace.alpha if alpha is None else alpha
    cumulative = np.cumsum(trace.weights, axis=0)
    total = cumulative[-1] if trace.horizon else np.zeros(seq.m)
    lp_value = solve_fractional(family, seq, total, 1.0).objective

    dynamic = None
    if seq.m <= BRUTE_FORCE_LIMIT:
        F = feasible_set_matrix(seq, family, BRUTE_FORCE_LIMIT)
        prefix = (cumulative @ F.T).max(axis=1) if trace.horizon else np.zeros(0)
        dynamic = float((trace.weights @ F.T).max(axis=1).sum())
    else:
        prefix = np.array([solve_fractional(family, seq, row, 1.0).objective for row in cumulative])
    best = float(prefix[-1]) if prefix.size else 0.0
    if abs(best - lp_value) > TAU_LP * max(1.0, abs(lp_value)):
        logger.warning(f"Best fixed set value {best:.10g} differs from the LP value {lp_value:.10g}")

    rewards = np.cumsum(trace.rewards)
    fractional = np.cumsum(trace.fractional_rewards)
    return Benchmarks(best_fixed_value=best, best_fixed_lp_value=lp_value, best_fixed_prefix=prefix,
                      alpha_regret=alpha * prefix - rewards, fractional_regret=prefix - fractional,
                      dynamic_opt_value=dynamic, alpha=alpha)


def loglog_slope(horizons: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log(max(value, 1)) against log(T)."""
    x = np.log(np.asarray(horizons, dtype=float))
    y = np.log(np.maximum(np.asarray(values, dtype=float), 1.0))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def linear_slope(horizons: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of value against T."""
    slope, _ = np.polyfit(np.asarray(horizons, dtype=float), np.asarray(values, dtype=float), 1)
    return float(slope)
