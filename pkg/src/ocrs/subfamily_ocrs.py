"""
Greedy OCRSs whose subfamily is {S feasible : S subset of H(x)}, where H(x) contains each
element independently with probability (1 - e^{-x_e}) / x_e. Rank-1 and matching
constraints both use this scheme; their selectability differs only through the number of
competitors a feasible element can have.
"""
import itertools
import logging
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence

import numpy as np

from ..constraints import ConstraintFamily, MatchingFamily, Rank1Family, TemporalPolytope, active_sets
from ..data_models import FractionalPoint, InstanceSequence, SelectionTranscript
from ..errors import PreconditionError
from .base_ocrs import GreedyOcrs, run_scheme

logger = logging.getLogger(__name__)


def acceptance_ratio(x):
    """(1 - e^{-x}) / x, with its limit 1 at x = 0."""
    x = np.asarray(x, dtype=float)
    safe = np.where(x > 1e-12, x, 1.0)
    return np.where(x > 1e-12, -np.expm1(-safe) / safe, 1.0 - x / 2.0)


class SubfamilyOcrs(GreedyOcrs):
    """Greedy scheme over the random subfamily of feasible subsets of H(x)."""

    kind: Optional[str] = None

    def __init__(self, family: ConstraintFamily, b: float = 1.0):
        if self.kind is not None and family.kind != self.kind:
            raise PreconditionError(f"{type(self).__name__} needs a {self.kind} family, got {family.kind}")
        super().__init__(family, b)
        self._polytope = TemporalPolytope.for_family(family, None, b)

    def check_point(self, x: FractionalPoint):
        if not self._polytope.contains(x):
            raise PreconditionError(f"{self.name}: x is not in the polytope at scale {self.b} (violation {self._polytope.violation(x.values):.3g})")

    def draw_subfamily(self, x: FractionalPoint, rng: np.random.Generator) -> FrozenSet[int]:
        coins = rng.random(x.m)
        return frozenset(int(e) for e in np.flatnonzero(coins < acceptance_ratio(x.values)))

    def in_subfamily(self, S: FrozenSet[int]) -> bool:
        return S <= self.subfamily and self.family.is_independent(S)

    def acceptance_probability(self, e: int) -> float:
        return float(acceptance_ratio(self.x[e]))

    def is_selectable(self, e: int, R: FrozenSet[int], pool: Iterable[int]) -> bool:
        # Conflicts are pairwise, so only single competitors in R and H can block e.
        if e not in self.subfamily or not self.family.is_independent(frozenset((e,))):
            return False
        return not any(f != e and f in R and f in self.subfamily and self.family.conflicts(e, f) for f in pool)

    def conflict_matrix(self, seq: InstanceSequence) -> np.ndarray:
        """C[e, f] = 1 iff f != e is active at e's arrival and {e, f} is infeasible."""
        actives = active_sets(seq)
        C = np.zeros((self.family.m, self.family.m))
        for e in range(self.family.m):
            for f in actives[e]:
                if f != e and self.family.conflicts(e, f):
                    C[e, f] = 1.0
        return C


class Rank1Ocrs(SubfamilyOcrs):
    """Single-choice scheme: select the first sampled element of H(x)."""
    name = "rank1"
    kind = "rank1"


class MatchingOcrs(SubfamilyOcrs):
    """Matching scheme: select a sampled edge of H(x) when it keeps the selection a matching."""
    name = "matching"
    kind = "matching"


def rank1_ocrs(x: FractionalPoint, order: Sequence[int], R: FrozenSet[int], rng: np.random.Generator) -> SelectionTranscript:
    scheme = Rank1Ocrs(Rank1Family(x.m), b=1.0)
    return run_scheme(scheme, x, order, R, rng)


def matching_ocrs(x: FractionalPoint, family: MatchingFamily, order: Sequence[int], R: FrozenSet[int],
                  rng: np.random.Generator, b: float = 1.0) -> SelectionTranscript:
    scheme = MatchingOcrs(family, b=b)
    return run_scheme(scheme, x, order, R, rng)


def _subsets(m: int) -> List[FrozenSet[int]]:
    return [frozenset(c) for size in range(m + 1) for c in itertools.combinations(range(m), size)]


def exact_selection_probabilities(scheme: SubfamilyOcrs, x: FractionalPoint, order: Sequence[int],
                                  seq: Optional[InstanceSequence] = None) -> Dict[str, np.ndarray]:
    """
    Exact probabilities by enumerating every sample set R and every subfamily draw H.
    With seq, the scheme runs behind the temporal reduction on that sequence.

    Returns arrays indexed by element id: 'accepted', 'feasible_at_arrival' and
    'selectable'.
    """
    from .temporal_ocrs import TemporalOcrs  # circular at import time

    m = x.m
    if m > 6:
        raise PreconditionError(f"Exact enumeration is limited to m <= 6, got {m}")
    runner = TemporalOcrs(scheme, seq) if seq is not None else scheme
    order = list(order)
    if seq is not None:
        pool_of = dict(enumerate(active_sets(seq)))
    else:
        pool_of = {e: frozenset(order[:order.index(e)]) for e in range(m)}
    sample_p = x.values
    keep_p = acceptance_ratio(x.values)
    result = {name: np.zeros(m) for name in ("accepted", "feasible_at_arrival", "selectable")}
    subsets = _subsets(m)

    def weight(S: FrozenSet[int], p: np.ndarray) -> float:
        return float(np.prod([p[e] if e in S else 1.0 - p[e] for e in range(m)]))

    for R in subsets:
        w_R = weight(R, sample_p)
        if w_R == 0.0:
            continue
        for H in subsets:
            w_H = weight(H, keep_p)
            if w_H == 0.0:
                continue
            transcript = run_scheme(runner, x, order, R, None, subfamily=H, check=False)
            for item in transcript.entries:
                result["accepted"][item.element] += w_R * w_H * item.accepted
                result["feasible_at_arrival"][item.element] += w_R * w_H * item.feasible_at_arrival
            for e in range(m):
                result["selectable"][e] += w_R * w_H * scheme.is_selectable(e, R, pool_of[e])
    return result
