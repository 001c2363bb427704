"""
The black-box temporal reduction: wraps any greedy OCRS so that selected elements only
block the constraint while they are active.

An arriving element e is handed to the base scheme only if (S_d ∩ E_e) + e still lies in
the base scheme's subfamily; otherwise it is discarded without consulting the base.
"""
import logging
from typing import Dict, FrozenSet, Iterable, Optional, Sequence, Tuple

import numpy as np

from ..constraints import TemporalPolytope, active_sets, is_temporally_feasible
from ..data_models import FractionalPoint, InstanceSequence, SelectionTranscript, TranscriptEntry
from ..errors import InvariantViolation, PreconditionError
from .base_ocrs import GreedyOcrs, sample_R
from .subfamily_ocrs import SubfamilyOcrs, acceptance_ratio

logger = logging.getLogger(__name__)


class TemporalOcrs(GreedyOcrs):
    """Temporal wrapper around another GreedyOcrs; behaves as a GreedyOcrs itself."""

    def __init__(self, base: GreedyOcrs, seq: InstanceSequence):
        if not isinstance(base, GreedyOcrs):
            raise TypeError(f"TemporalOcrs wraps a GreedyOcrs, got {type(base).__name__}")
        if isinstance(base, TemporalOcrs):
            raise TypeError("TemporalOcrs cannot wrap another TemporalOcrs")
        if base.family.m != seq.m:
            raise PreconditionError(f"Scheme has {base.family.m} elements but the sequence has {seq.m}")
        self.name = f"temporal-{base.name}"
        super().__init__(base.family, base.b)
        self.base = base
        self.seq = seq
        self.actives = active_sets(seq)
        self._polytope: Optional[TemporalPolytope] = None
        logger.debug(f"TemporalOcrs initialized, wrapping {type(base).__name__}")

    @property
    def polytope(self) -> TemporalPolytope:
        if self._polytope is None:
            self._polytope = TemporalPolytope.for_family(self.family, self.seq, self.b)
        return self._polytope

    def check_point(self, x: FractionalPoint):
        if not self.polytope.contains(x):
            raise PreconditionError(f"{self.name}: x is not in the temporal polytope at scale {self.b} (violation {self.polytope.violation(x.values):.3g})")

    def draw_subfamily(self, x: FractionalPoint, rng: np.random.Generator):
        return self.base.draw_subfamily(x, rng)

    def in_subfamily(self, S: FrozenSet[int]) -> bool:
        return self.base.in_subfamily(S)

    def acceptance_probability(self, e: int) -> float:
        return self.base.acceptance_probability(e)

    def init(self, x: FractionalPoint, rng: Optional[np.random.Generator], subfamily=None, check: bool = True):
        if check:
            self.check_point(x)
        self.base.init(x, rng, subfamily=subfamily, check=False)
        self.x = x
        self.subfamily = self.base.subfamily
        self.selected = set()
        self.transcript = SelectionTranscript(self.name)

    def observe(self, e: int, sampled: bool, against: Optional[Iterable[int]] = None) -> bool:
        """
        Hands e to the base scheme against the still-active part of the selection. A
        discarded entry records the same pre-draw acceptance probability the base scheme
        would have recorded: its acceptance_probability(e) when e is feasible at arrival, else 0.
        """
        blocking = frozenset(self.selected) & self.actives[e]
        if self.base.in_subfamily(blocking | {e}):
            accepted = self.base.observe(e, sampled, against=blocking)
            entry = self.base.transcript.entries[-1]
        else:
            accepted = False
            feasible = self.family.is_independent(blocking | {e})
            entry = TranscriptEntry(element=e, sampled=bool(sampled), feasible_at_arrival=feasible, accepted=False,
                                    accept_probability=self.base.acceptance_probability(e) if feasible else 0.0,
                                    x_value=self.x[e])
            if sampled:
                logger.debug(f"{self.name}: discarded sampled element {e} (blocked by {sorted(blocking)})")
        if accepted:
            self.selected.add(e)
        self.transcript.append(entry)
        return accepted

    def run(self, x: FractionalPoint, rng: np.random.Generator, R: Optional[FrozenSet[int]] = None,
            check: bool = True) -> Tuple[FrozenSet[int], SelectionTranscript]:
        """One full pass over the sequence. R is drawn before the subfamily when not given."""
        if R is None:
            R = sample_R(x, rng)
        self.init(x, rng, check=check)
        for e in self.seq.order:
            self.observe(e, e in R)
        S_d = frozenset(self.selected)
        if not is_temporally_feasible(S_d, self.seq, self.family):
            raise InvariantViolation(f"{self.name} produced a temporally infeasible set {sorted(S_d)}")
        return S_d, self.transcript


def run_temporal(base: GreedyOcrs, x: FractionalPoint, seq: InstanceSequence,
                 rng: np.random.Generator) -> Tuple[FrozenSet[int], SelectionTranscript]:
    return TemporalOcrs(base, seq).run(x, rng)


def run_direct(base: GreedyOcrs, x: FractionalPoint, order: Sequence[int],
               rng: np.random.Generator) -> Tuple[FrozenSet[int], SelectionTranscript]:
    """The base scheme on its own, with the same draw order as TemporalOcrs.run."""
    R = sample_R(x, rng)
    base.init(x, rng)
    for e in order:
        base.observe(e, e in R)
    return frozenset(base.selected), base.transcript


def _conflict_setup(scheme: GreedyOcrs, seq: InstanceSequence) -> Tuple[SubfamilyOcrs, np.ndarray, np.ndarray]:
    base = scheme.base if isinstance(scheme, TemporalOcrs) else scheme
    if not isinstance(base, SubfamilyOcrs) or not base.family.pairwise:
        raise PreconditionError("Selectability estimates need an H(x)-subfamily scheme on a pairwise family")
    C = base.conflict_matrix(seq)
    singleton_ok = np.array([base.family.is_independent(frozenset((e,))) for e in range(seq.m)])
    return base, C, singleton_ok


def estimate_selectability(scheme: GreedyOcrs, x: FractionalPoint, seq: InstanceSequence, n_runs: int,
                           rng: np.random.Generator, keep_transcripts: int = 0) -> Dict[str, object]:
    """
    Monte-Carlo selectability from full temporal runs of the scheme. Each run draws R,
    then the subfamily, and feeds the arrivals through observe; per element it records
    whether e was sampled, whether it was selected, and whether it was selectable on that
    run's realised R and subfamily.

    'selection_rate' is Pr[e selected | e sampled] (nan for never-sampled elements) and
    'selectable' the fraction of runs where e was selectable, each with its binomial
    standard error.
    """
    base, _, _ = _conflict_setup(scheme, seq)
    runner = scheme if isinstance(scheme, TemporalOcrs) else TemporalOcrs(scheme, seq)
    actives = active_sets(seq)
    m = seq.m
    sampled = np.zeros(m, dtype=int)
    selected = np.zeros(m, dtype=int)
    selectable = np.zeros(m, dtype=int)
    feasible = 0
    transcripts = []
    for r in range(n_runs):
        S, transcript = runner.run(x, rng)
        R = frozenset(entry.element for entry in transcript.entries if entry.sampled)
        for e in range(m):
            selectable[e] += base.is_selectable(e, R, actives[e])
            if e in R:
                sampled[e] += 1
                selected[e] += e in S
        feasible += is_temporally_feasible(S, seq, runner.family)
        if r < keep_transcripts:
            transcripts.append(transcript)
    with np.errstate(invalid="ignore", divide="ignore"):
        rate = np.where(sampled > 0, selected / np.maximum(sampled, 1), np.nan)
        rate_stderr = np.where(sampled > 0, np.sqrt(rate * (1.0 - rate) / np.maximum(sampled, 1)), np.nan)
    mean = selectable / max(n_runs, 1)
    return {"sampled": sampled, "selected": selected, "selection_rate": rate, "selection_stderr": rate_stderr,
            "selectable": mean, "stderr": np.sqrt(mean * (1.0 - mean) / max(n_runs, 1)),
            "feasible_runs": feasible, "transcripts": transcripts}


def exact_selectability(scheme: GreedyOcrs, x: FractionalPoint, seq: InstanceSequence) -> np.ndarray:
    """ratio(x_e) * exp(-sum of x_f over the active conflicts f of e)."""
    _, C, singleton_ok = _conflict_setup(scheme, seq)
    values = acceptance_ratio(x.values) * np.exp(-(C @ x.values))
    return np.where(singleton_ok, values, 0.0)
