import json
import math
from dataclasses import dataclass, field, asdict
from typing import Optional, List, Tuple, FrozenSet, Dict, Any, Sequence

import numpy as np

from .errors import InstanceError, PreconditionError, InvariantViolation

# Absolute tolerance on every linear constraint check.
TAU_POLY = 1e-9

# Activity that never expires: the element blocks every later arrival.
INFINITE_ACTIVITY = math.inf


def activity_to_json(activity: float) -> int:
    """Encodes an activity time for instance files; infinity becomes -1."""
    return -1 if math.isinf(activity) else int(activity)


def activity_from_json(value: Any) -> float:
    if value == -1:
        return INFINITE_ACTIVITY
    if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0 or value != int(value):
        raise InstanceError(f"Invalid activity value {value!r}: expected a non-negative integer or -1 for infinity")
    return int(value)


@dataclass(frozen=True)
class Element:
    """A ground-set item with weight w_e, activity time d_e and arrival slot s_e."""
    id: int
    weight: float
    activity: float
    arrival: int

    def __post_init__(self):
        if self.id < 0:
            raise InstanceError(f"Element id must be non-negative, got {self.id}")
        if not self.weight >= 0:
            raise InstanceError(f"Element {self.id}: weight must be >= 0, got {self.weight}")
        if not (math.isinf(self.activity) or (self.activity >= 0 and self.activity == int(self.activity))):
            raise InstanceError(f"Element {self.id}: activity must be a non-negative integer or infinite, got {self.activity}")
        if self.arrival < 1:
            raise InstanceError(f"Element {self.id}: arrival slot must be >= 1, got {self.arrival}")

    @property
    def expires(self) -> float:
        """Last arrival slot this element still blocks (inclusive)."""
        return self.arrival + self.activity

    def as_dict(self) -> Dict[str, Any]:
        return {"id": self.id, "weight": self.weight, "activity": activity_to_json(self.activity), "arrival": self.arrival}


@dataclass(frozen=True)
class InstanceSequence:
    """The ground set in arrival order. Every element occurs exactly once."""
    elements: Tuple[Element, ...]
    _by_id: Tuple[Element, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ordered = tuple(sorted(self.elements, key=lambda el: el.arrival))
        ids = sorted(el.id for el in ordered)
        if ids != list(range(len(ordered))):
            raise InstanceError(f"Element ids must be exactly 0..{len(ordered) - 1}, got {ids}")
        arrivals = [el.arrival for el in ordered]
        if len(set(arrivals)) != len(arrivals):
            raise InstanceError(f"Arrival slots must be distinct, got {arrivals}")
        if arrivals and arrivals[-1] > len(arrivals):
            raise InstanceError(f"Arrival slots must lie in 1..{len(arrivals)}, got {arrivals}")
        object.__setattr__(self, "elements", ordered)
        object.__setattr__(self, "_by_id", tuple(sorted(ordered, key=lambda el: el.id)))

    @classmethod
    def from_lists(cls, weights: Sequence[float], activities: Sequence[float],
                   arrivals: Optional[Sequence[int]] = None) -> "InstanceSequence":
        """Builds a sequence where element i has weights[i], activities[i], arrivals[i] (default i + 1)."""
        if len(weights) != len(activities):
            raise InstanceError("weights and activities must have the same length")
        if arrivals is None:
            arrivals = range(1, len(weights) + 1)
        elif len(arrivals) != len(weights):
            raise InstanceError("arrivals must have the same length as weights")
        return cls(tuple(Element(i, float(w), d, int(s)) for i, (w, d, s) in enumerate(zip(weights, activities, arrivals))))

    @property
    def m(self) -> int:
        return len(self.elements)

    @property
    def order(self) -> Tuple[int, ...]:
        """Element ids in arrival order."""
        return tuple(el.id for el in self.elements)

    def element(self, e: int) -> Element:
        if not 0 <= e < self.m:
            raise InstanceError(f"Element id {e} out of range [0, {self.m})")
        return self._by_id[e]

    @property
    def weights(self) -> np.ndarray:
        return np.array([el.weight for el in self._by_id], dtype=float)

    @property
    def activities(self) -> Tuple[float, ...]:
        return tuple(el.activity for el in self._by_id)

    @property
    def arrivals(self) -> Tuple[int, ...]:
        return tuple(el.arrival for el in self._by_id)

    def with_activities(self, activities: Sequence[float]) -> "InstanceSequence":
        return InstanceSequence.from_lists(self.weights.tolist(), list(activities), list(self.arrivals))

    def with_weights(self, weights: Sequence[float]) -> "InstanceSequence":
        return InstanceSequence.from_lists(list(weights), list(self.activities), list(self.arrivals))

    def with_arrivals(self, arrivals: Sequence[int]) -> "InstanceSequence":
        return InstanceSequence.from_lists(self.weights.tolist(), list(self.activities), list(arrivals))

    def elements_as_dicts(self) -> List[dict]:
        return [el.as_dict() for el in self._by_id]


@dataclass(frozen=True, eq=False)
class FractionalPoint:
    """A vector x in [0,1]^m, optionally tagged with the scale b it was certified against."""
    values: np.ndarray
    scale_hint: Optional[float] = None

    def __post_init__(self):
        arr = np.array(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(arr)):
            raise PreconditionError("Fractional point has non-finite entries")
        if arr.size and (arr.min() < -TAU_POLY or arr.max() > 1 + TAU_POLY):
            raise PreconditionError(f"Fractional point must lie in [0,1]^m, got range [{arr.min()}, {arr.max()}]")
        arr = np.clip(arr, 0.0, 1.0)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        if self.scale_hint is not None and not 0 < self.scale_hint <= 1:
            raise PreconditionError(f"scale_hint must be in (0,1], got {self.scale_hint}")

    @classmethod
    def zeros(cls, m: int) -> "FractionalPoint":
        return cls(np.zeros(m))

    @classmethod
    def indicator(cls, m: int, members) -> "FractionalPoint":
        values = np.zeros(m)
        values[list(members)] = 1.0
        return cls(values)

    @property
    def m(self) -> int:
        return self.values.size

    def __getitem__(self, e: int) -> float:
        return float(self.values[e])

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class TranscriptEntry:
    """What happened to one element when it arrived."""
    element: int
    sampled: bool
    feasible_at_arrival: bool
    accepted: bool
    accept_probability: float
    x_value: float

    def __post_init__(self):
        if self.accepted and not (self.sampled and self.feasible_at_arrival):
            raise InvariantViolation(f"Element {self.element} accepted without being sampled and feasible")


@dataclass
class SelectionTranscript:
    """Per-element record of one OCRS run, in arrival order."""
    scheme: str
    entries: List[TranscriptEntry] = field(default_factory=list)

    def append(self, entry: TranscriptEntry):
        self.entries.append(entry)

    def entry(self, e: int) -> Optional[TranscriptEntry]:
        for item in self.entries:
            if item.element == e:
                return item
        return None

    def accepted_set(self) -> FrozenSet[int]:
        return frozenset(item.element for item in self.entries if item.accepted)

    def accepted_in_order(self) -> List[int]:
        return [item.element for item in self.entries if item.accepted]

    def as_dicts(self) -> List[dict]:
        return [dict(asdict(item), scheme=self.scheme) for item in self.entries]

    def to_jsonl(self, run_id: Optional[int] = None) -> str:
        lines = []
        for record in self.as_dicts():
            if run_id is not None:
                record = {"run_id": run_id, **record}
            lines.append(json.dumps(record, sort_keys=True))
        return "\n".join(lines) + ("\n" if lines else "")


OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class LpSolution:
    """Result of one of the fractional relaxations."""
    x: FractionalPoint
    objective: float
    status: str = OPTIMAL

    def as_matrix(self, n_machines: int, n_jobs: int) -> np.ndarray:
        """Reshapes a matching-LP solution (stored machine-major) into x[u, v]."""
        return np.asarray(self.x.values).reshape(n_machines, n_jobs)


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finite-support distribution; support values may include INFINITE_ACTIVITY."""
    values: Tuple[float, ...]
    probs: Tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.probs) or not self.values:
            raise InstanceError("Distribution needs the same non-zero number of values and probabilities")
        if any(p < 0 for p in self.probs) or abs(sum(self.probs) - 1.0) > 1e-9:
            raise InstanceError(f"Probabilities must be non-negative and sum to 1, got {self.probs}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))

    @classmethod
    def point(cls, value: float) -> "DiscreteDistribution":
        return cls((value,), (1.0,))

    @property
    def mean(self) -> float:
        return float(sum(v * p for v, p in zip(self.values, self.probs) if p > 0))

    def tail_at_least(self, k: float) -> float:
        """Pr[d >= k]."""
        return float(sum(p for v, p in zip(self.values, self.probs) if v >= k))

    def tail_above(self, k: float) -> float:
        """Pr[d > k]."""
        return float(sum(p for v, p in zip(self.values, self.probs) if v > k))

    def sample(self, rng: np.random.Generator) -> float:
        return self.values[int(rng.choice(len(self.values), p=self.probs))]

    def support(self) -> List[Tuple[float, float]]:
        return [(v, p) for v, p in zip(self.values, self.probs) if p > 0]

    def as_dicts(self) -> List[dict]:
        return [{"value": activity_to_json(v) if math.isinf(v) else v, "prob": p} for v, p in zip(self.values, self.probs)]


@dataclass(frozen=True)
class Job:
    """An online job: arrival slot, per-machine mean weights and activity laws."""
    arrival: int
    weights: Tuple[float, ...]
    activity: Tuple[DiscreteDistribution, ...]
    weight_dists: Optional[Tuple[DiscreteDistribution, ...]] = None

    def __post_init__(self):
        if len(self.activity) != len(self.weights):
            raise InstanceError(f"Job at slot {self.arrival}: need one activity distribution per machine")
        if any(w < 0 for w in self.weights):
            raise InstanceError(f"Job at slot {self.arrival}: weights must be non-negative")
        if self.weight_dists is not None:
            if len(self.weight_dists) != len(self.weights):
                raise InstanceError(f"Job at slot {self.arrival}: need one weight distribution per machine")
            for u, (mean, dist) in enumerate(zip(self.weights, self.weight_dists)):
                if abs(dist.mean - mean) > 1e-9:
                    raise InstanceError(f"Job at slot {self.arrival}: weight mean for machine {u} is {dist.mean}, declared {mean}")


@dataclass(frozen=True)
class MatchingInstance:
    """Machines U (0..n_machines-1) and jobs V sorted by arrival."""
    n_machines: int
    jobs: Tuple[Job, ...]

    def __post_init__(self):
        if self.n_machines < 1:
            raise InstanceError("A matching instance needs at least one machine")
        ordered = tuple(sorted(self.jobs, key=lambda job: job.arrival))
        arrivals = [job.arrival for job in ordered]
        if len(set(arrivals)) != len(arrivals):
            raise InstanceError(f"Job arrival slots must be distinct, got {arrivals}")
        for job in ordered:
            if len(job.weights) != self.n_machines:
                raise InstanceError(f"Job at slot {job.arrival} lists {len(job.weights)} weights for {self.n_machines} machines")
        object.__setattr__(self, "jobs", ordered)

    @property
    def n_jobs(self) -> int:
        return len(self.jobs)

    def mean_weights(self) -> np.ndarray:
        """w_bar[u, v]."""
        return np.array([[job.weights[u] for job in self.jobs] for u in range(self.n_machines)], dtype=float)

    def index(self, u: int, v: int) -> int:
        return u * self.n_jobs + v


@dataclass
class RegretTrace:
    """Everything a regret run produced, stage by stage."""
    alpha: float
    fractional: np.ndarray
    actions: np.ndarray
    weights: np.ndarray
    rewards: np.ndarray
    fractional_rewards: np.ndarray
    estimates: Optional[np.ndarray] = None
    exploration_misses: int = 0

    @property
    def horizon(self) -> int:
        return int(self.rewards.size)

    @property
    def total_reward(self) -> float:
        return float(self.rewards.sum())


@dataclass(frozen=True, eq=False)
class WeightEstimate:
    """Importance-weighted weight vector; zero outside the played super-arm."""
    values: np.ndarray

    @classmethod
    def from_selection(cls, action: np.ndarray, observed: np.ndarray, probabilities: np.ndarray) -> "WeightEstimate":
        values = np.zeros_like(observed, dtype=float)
        chosen = action > 0
        if np.any(probabilities[chosen] <= 0):
            raise InvariantViolation("Selected element has zero selection probability")
        values[chosen] = observed[chosen] / probabilities[chosen]
        return cls(values)
