import abc
import itertools
import logging
import math
from typing import Callable, Dict, FrozenSet, Iterable, Optional, Set

import numpy as np

from ..constraints import ConstraintFamily
from ..data_models import FractionalPoint, SelectionTranscript, TranscriptEntry
from ..errors import PreconditionError, SelectionQueryError

logger = logging.getLogger(__name__)

# (b, c)-selectability guarantees per constraint kind, as functions of the scale b.
SELECTABILITY_CONSTANTS: Dict[str, Callable[[float], float]] = {
    "rank1": lambda b: math.exp(-b),
    "matching": lambda b: math.exp(-2.0 * b),
    "matroid": lambda b: 1.0 - b,
    "knapsack": lambda b: (1.0 - 2.0 * b) / (2.0 - 2.0 * b),
}


def sample_R(x: FractionalPoint, rng: np.random.Generator) -> FrozenSet[int]:
    """R(x): each element independently with probability x_e. Draw i belongs to element id i."""
    draws = rng.random(x.m)
    return frozenset(int(e) for e in np.flatnonzero(draws < x.values))


class GreedyOcrs(abc.ABC):
    """
    Abstract base class for greedy online contention resolution schemes.

    A run is init(x) followed by one observe(e, sampled) per arrival. The scheme's state
    is the point x, its random subfamily draw and the set selected so far.
    """

    name: str = "abstract"

    def __init__(self, family: ConstraintFamily, b: float = 1.0):
        if not 0 < b <= 1:
            raise PreconditionError(f"Scale b must lie in (0, 1], got {b}")
        self.family = family
        self.b = b
        self.x: Optional[FractionalPoint] = None
        self.subfamily = None
        self.selected: Set[int] = set()
        self.transcript = SelectionTranscript(self.name)

    @abc.abstractmethod
    def check_point(self, x: FractionalPoint):
        """Raises PreconditionError unless x lies in the polytope the scheme is built for."""

    @abc.abstractmethod
    def draw_subfamily(self, x: FractionalPoint, rng: np.random.Generator):
        """Realises the scheme's random subfamily; draw i belongs to element id i."""

    @abc.abstractmethod
    def in_subfamily(self, S: FrozenSet[int]) -> bool:
        """True iff S belongs to the realised subfamily."""

    @abc.abstractmethod
    def acceptance_probability(self, e: int) -> float:
        """Probability that a sampled, feasible e is accepted, before the subfamily draw."""

    def selectability(self, b: Optional[float] = None) -> float:
        """The c of the scheme's (b, c)-selectability guarantee."""
        return SELECTABILITY_CONSTANTS[self.family.kind](self.b if b is None else b)

    def competitive_ratio(self, b: Optional[float] = None) -> float:
        b = self.b if b is None else b
        return b * self.selectability(b)

    @property
    def alpha(self) -> float:
        """Proven competitive ratio at the scheme's own scale; used by the regret analytics."""
        return self.competitive_ratio()

    def init(self, x: FractionalPoint, rng: Optional[np.random.Generator], subfamily=None, check: bool = True):
        """
        Starts a run on x. Pass subfamily to fix the random subfamily explicitly (exact
        enumeration); otherwise it is drawn from rng.
        """
        if x.m != self.family.m:
            raise PreconditionError(f"Point has {x.m} coordinates, family has {self.family.m} elements")
        if check:
            self.check_point(x)
        self.x = x
        self.subfamily = subfamily if subfamily is not None else self.draw_subfamily(x, rng)
        self.selected = set()
        self.transcript = SelectionTranscript(self.name)

    def observe(self, e: int, sampled: bool, against: Optional[Iterable[int]] = None) -> bool:
        """
        Decides on arriving element e. Feasibility is tested against the selected set,
        or against `against` when a wrapper supplies its own blocking set.
        """
        context = frozenset(self.selected) if against is None else frozenset(against)
        candidate = context | {e}
        feasible = self.family.is_independent(candidate)
        probability = self.acceptance_probability(e) if feasible else 0.0
        accepted = bool(sampled) and feasible and self.in_subfamily(candidate)
        if accepted:
            self.selected.add(e)
        self.transcript.append(TranscriptEntry(element=e, sampled=bool(sampled), feasible_at_arrival=feasible,
                                               accepted=accepted, accept_probability=probability, x_value=self.x[e]))
        return accepted

    def prob(self, e: int) -> float:
        return selection_probability(self.transcript, e)

    def is_selectable(self, e: int, R: FrozenSet[int], pool: Iterable[int]) -> bool:
        """
        True iff I + e stays in the subfamily for every I in the subfamily drawn from
        R intersected with pool. Exhaustive; pairwise schemes override it.
        """
        candidates = [f for f in pool if f != e and f in R]
        for size in range(len(candidates) + 1):
            for subset in itertools.combinations(candidates, size):
                I = frozenset(subset)
                if self.in_subfamily(I) and not self.in_subfamily(I | {e}):
                    return False
        return True


def run_scheme(scheme: GreedyOcrs, x: FractionalPoint, order: Iterable[int], R: FrozenSet[int],
               rng: Optional[np.random.Generator], subfamily=None, check: bool = True) -> SelectionTranscript:
    """One plain (non-temporal) run of a scheme over a fixed sample set R."""
    scheme.init(x, rng, subfamily=subfamily, check=check)
    for e in order:
        scheme.observe(e, e in R)
    return scheme.transcript


def selection_probability(transcript: SelectionTranscript, e: int) -> float:
    """
    Probability that the run accepts e given the realised prefix: the sampling
    probability x_e times the conditional acceptance probability.
    """
    entry = transcript.entry(e)
    if entry is None or not entry.accepted:
        raise SelectionQueryError(f"Element {e} was not accepted in this transcript")
    return entry.x_value * entry.accept_probability
