import logging
from typing import FrozenSet, List, Optional, Tuple

import numpy as np

from ..constraints import ConstraintFamily, TemporalPolytope, enumerate_feasible_sets
from ..data_models import OPTIMAL, FractionalPoint, InstanceSequence, SelectionTranscript, TranscriptEntry
from ..errors import PreconditionError
from ..lp import simplex_maximize

logger = logging.getLogger(__name__)


class PerfectSelector:
    """
    A lossless rounding (alpha = 1): writes x as a convex combination of temporally
    feasible sets and samples one of them, so Pr[e selected] = x_e exactly. Only usable
    when the feasible sets can be enumerated.
    """

    name = "perfect"
    alpha = 1.0

    def __init__(self, family: ConstraintFamily, seq: InstanceSequence, limit: int = 12):
        self.family = family
        self.seq = seq
        self.b = 1.0
        self.sets: List[FrozenSet[int]] = enumerate_feasible_sets(seq, family, limit)
        self._matrix = np.zeros((len(self.sets), seq.m))
        for i, S in enumerate(self.sets):
            self._matrix[i, list(S)] = 1.0
        self.polytope = TemporalPolytope.for_family(family, seq, 1.0)
        self.transcript = SelectionTranscript(self.name)

    def decompose(self, x: FractionalPoint) -> np.ndarray:
        """Convex weights over self.sets whose mixture is x."""
        k = len(self.sets)
        A_eq = np.vstack([self._matrix.T, np.ones((1, k))])
        b_eq = np.concatenate([x.values, [1.0]])
        status, lam, _ = simplex_maximize(np.zeros(k), A_eq=A_eq, b_eq=b_eq)
        if status != OPTIMAL:
            raise PreconditionError("x is not a convex combination of temporally feasible sets")
        lam = np.maximum(lam, 0.0)
        return lam / lam.sum()

    def run(self, x: FractionalPoint, rng: np.random.Generator,
            check: bool = True) -> Tuple[FrozenSet[int], SelectionTranscript]:
        """Samples one feasible set. Any hull point is accepted, so check has nothing to relax."""
        lam = self.decompose(x)
        chosen = self.sets[int(rng.choice(len(self.sets), p=lam))]
        self.transcript = SelectionTranscript(self.name)
        for e in self.seq.order:
            self.transcript.append(TranscriptEntry(element=e, sampled=e in chosen, feasible_at_arrival=True,
                                                   accepted=e in chosen, accept_probability=1.0, x_value=x[e]))
        return chosen, self.transcript

    def competitive_ratio(self, b: Optional[float] = None) -> float:
        return self.alpha
