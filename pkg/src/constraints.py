"""
Packing constraint families, their polytopes, and the temporal (activity-time-aware)
versions of both.

A family answers two questions: is a set of element ids independent, and which linear
rows ``A x <= rhs`` (on top of ``0 <= x <= 1``) describe its polytope. The temporal
versions restrict every row to the active set E_e of each arriving element e.
"""
import abc
import logging
import math
from typing import Callable, Dict, FrozenSet, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .data_models import FractionalPoint, InstanceSequence, TAU_POLY
from .errors import InstanceError, PreconditionError

logger = logging.getLogger(__name__)


class ConstraintFamily(abc.ABC):
    """A downward-closed family of independent sets over element ids 0..m-1."""

    kind: str = "abstract"
    # True when a feasible set plus e is infeasible iff some member conflicts with e pairwise.
    pairwise: bool = False

    def __init__(self, m: int):
        if m < 0:
            raise InstanceError(f"Ground-set size must be non-negative, got {m}")
        self.m = m

    @abc.abstractmethod
    def is_independent(self, S: FrozenSet[int]) -> bool:
        """Membership test without range checking; callers go through is_feasible."""

    @abc.abstractmethod
    def constraint_rows(self) -> Tuple[np.ndarray, np.ndarray]:
        """Rows (A, rhs) of the static polytope, beyond the unit box."""

    @abc.abstractmethod
    def kind_params(self) -> Dict:
        """Parameters needed to rebuild this family from an instance file."""

    def conflicts(self, e: int, f: int) -> bool:
        return not self.is_independent(frozenset((e, f)))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(m={self.m})"


class Rank1Family(ConstraintFamily):
    """Single choice: at most one element."""

    kind = "rank1"
    pairwise = True

    def is_independent(self, S: FrozenSet[int]) -> bool:
        return len(S) <= 1

    def constraint_rows(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.ones((1, self.m)), np.ones(1)

    def kind_params(self) -> Dict:
        return {}


class MatchingFamily(ConstraintFamily):
    """Graph matching: element e is the edge edges[e]; no two chosen edges share a vertex."""

    kind = "matching"
    pairwise = True

    def __init__(self, edges: Sequence[Tuple[Hashable, Hashable]]):
        super().__init__(len(edges))
        self.edges = tuple((u, v) for u, v in edges)
        vertices: List[Hashable] = []
        for e, (u, v) in enumerate(self.edges):
            if u == v:
                raise InstanceError(f"Edge {e} is a self-loop on vertex {u!r}")
            for vertex in (u, v):
                if vertex not in vertices:
                    vertices.append(vertex)
        self.vertices = tuple(vertices)
        self._incidence = np.zeros((len(vertices), self.m))
        for e, (u, v) in enumerate(self.edges):
            self._incidence[vertices.index(u), e] = 1.0
            self._incidence[vertices.index(v), e] = 1.0

    def is_independent(self, S: FrozenSet[int]) -> bool:
        seen = set()
        for e in S:
            u, v = self.edges[e]
            if u in seen or v in seen:
                return False
            seen.add(u)
            seen.add(v)
        return True

    def constraint_rows(self) -> Tuple[np.ndarray, np.ndarray]:
        return self._incidence.copy(), np.ones(len(self.vertices))

    def incident(self, vertex: Hashable) -> List[int]:
        """delta(vertex): ids of the edges touching it."""
        return [e for e, (u, v) in enumerate(self.edges) if vertex in (u, v)]

    def kind_params(self) -> Dict:
        return {"edges": [list(edge) for edge in self.edges]}


class KnapsackFamily(ConstraintFamily):
    """Knapsack: total size of a feasible set stays within the budget."""

    kind = "knapsack"

    def __init__(self, sizes: Sequence[float], budget: float):
        super().__init__(len(sizes))
        if budget <= 0:
            raise InstanceError(f"Knapsack budget must be positive, got {budget}")
        if any(c < 0 for c in sizes):
            raise InstanceError("Knapsack sizes must be non-negative")
        self.sizes = np.array(sizes, dtype=float)
        self.budget = float(budget)

    def is_independent(self, S: FrozenSet[int]) -> bool:
        return float(sum(self.sizes[e] for e in S)) <= self.budget + TAU_POLY

    def constraint_rows(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.sizes.reshape(1, -1).copy(), np.array([self.budget])

    def kind_params(self) -> Dict:
        return {"sizes": self.sizes.tolist(), "budget": self.budget}


class OracleFamily(ConstraintFamily):
    """
    A family known only through a user-supplied independence oracle, e.g. a general
    matroid. Polytope queries are unavailable since there is no separation oracle.
    """

    kind = "oracle"

    def __init__(self, m: int, oracle: Callable[[FrozenSet[int]], bool], name: str = "oracle"):
        super().__init__(m)
        self._oracle = oracle
        self.name = name

    def is_independent(self, S: FrozenSet[int]) -> bool:
        return bool(self._oracle(frozenset(S)))

    def constraint_rows(self) -> Tuple[np.ndarray, np.ndarray]:
        raise PreconditionError(f"Family '{self.name}' has no closed-form polytope; only feasibility queries are supported")

    def kind_params(self) -> Dict:
        raise PreconditionError(f"Family '{self.name}' cannot be serialised: its oracle is arbitrary code")


def create_family(kind: str, m: int, kind_params: Optional[Dict] = None) -> ConstraintFamily:
    """Builds a built-in family from its instance-file description."""
    kind_params = kind_params or {}
    kind = kind.lower()
    if kind == "rank1":
        return Rank1Family(m)
    if kind == "matching":
        edges = kind_params.get("edges")
        if edges is None or len(edges) != m:
            raise InstanceError(f"Matching family needs exactly {m} edges in kind_params['edges']")
        return MatchingFamily([tuple(edge) for edge in edges])
    if kind == "knapsack":
        if "sizes" not in kind_params or "budget" not in kind_params:
            raise InstanceError("Knapsack family needs kind_params 'sizes' and 'budget'")
        if len(kind_params["sizes"]) != m:
            raise InstanceError(f"Knapsack family needs {m} sizes")
        return KnapsackFamily(kind_params["sizes"], kind_params["budget"])
    raise InstanceError(f"Unknown constraint kind: {kind}")


def _check_ids(S: Iterable[int], m: int) -> FrozenSet[int]:
    S = frozenset(S)
    for e in S:
        if not isinstance(e, (int, np.integer)) or not 0 <= e < m:
            raise InstanceError(f"Element id {e!r} out of range [0, {m})")
    return frozenset(int(e) for e in S)


def _check_scale(b: float):
    if not 0 < b <= 1:
        raise PreconditionError(f"Scale b must lie in (0, 1], got {b}")


def _check_sizes(family: ConstraintFamily, seq: InstanceSequence):
    if family.m != seq.m:
        raise InstanceError(f"Family has {family.m} elements but the sequence has {seq.m}")


def is_feasible(S: Iterable[int], family: ConstraintFamily) -> bool:
    return family.is_independent(_check_ids(S, family.m))


def active_elements(e: int, seq: InstanceSequence) -> FrozenSet[int]:
    """E_e: elements whose activity window [s_e', s_e' + d_e'] covers s_e (always includes e)."""
    s_e = seq.element(e).arrival
    return frozenset(el.id for el in seq.elements if el.arrival <= s_e <= el.expires)


def active_sets(seq: InstanceSequence) -> List[FrozenSet[int]]:
    """E_e for every element, indexed by id."""
    return [active_elements(e, seq) for e in range(seq.m)]


def is_temporally_feasible(S: Iterable[int], seq: InstanceSequence, family: ConstraintFamily) -> bool:
    _check_sizes(family, seq)
    S = _check_ids(S, family.m)
    return all(family.is_independent(S & active) for active in active_sets(seq))


def temporal_constraint_rows(family: ConstraintFamily, seq: InstanceSequence) -> Tuple[np.ndarray, np.ndarray]:
    """Every static row restricted to every active set, duplicates removed."""
    _check_sizes(family, seq)
    A, rhs = family.constraint_rows()
    rows, bounds, seen = [], [], set()
    for active in active_sets(seq):
        mask = np.zeros(family.m)
        mask[list(active)] = 1.0
        for row, bound in zip(A * mask, rhs):
            if not np.any(row):
                continue
            key = (tuple(row.tolist()), float(bound))
            if key not in seen:
                seen.add(key)
                rows.append(row)
                bounds.append(bound)
    if not rows:
        return np.zeros((0, family.m)), np.zeros(0)
    return np.array(rows), np.array(bounds, dtype=float)


class TemporalPolytope:
    """
    The closed-form system {x in [0,1]^m : A x <= b * rhs}. All built-in families have
    non-negative rows, so the origin is inside and scaling towards it restores feasibility.
    """

    def __init__(self, A: np.ndarray, rhs: np.ndarray, b: float = 1.0):
        _check_scale(b)
        self.A = np.asarray(A, dtype=float)
        self.rhs = np.asarray(rhs, dtype=float) * b
        self.b = b
        self.m = self.A.shape[1]
        if np.any(self.A < 0) or np.any(self.rhs <= 0):
            raise PreconditionError("Polytope rows must be non-negative with positive right-hand sides")
        self._row_norms = np.einsum("ij,ij->i", self.A, self.A)

    @classmethod
    def for_family(cls, family: ConstraintFamily, seq: Optional[InstanceSequence] = None, b: float = 1.0) -> "TemporalPolytope":
        """The temporal polytope scaled by b when a sequence is given, the static one otherwise."""
        if seq is None:
            A, rhs = family.constraint_rows()
        else:
            A, rhs = temporal_constraint_rows(family, seq)
        return cls(A, rhs, b)

    def violation(self, x: np.ndarray) -> float:
        """Largest constraint excess (0 when x is inside)."""
        x = np.asarray(x, dtype=float)
        excess = [0.0, float(-x.min(initial=0.0)), float(x.max(initial=0.0) - 1.0)]
        if self.A.shape[0]:
            excess.append(float((self.A @ x - self.rhs).max()))
        return max(excess)

    def contains(self, x, tol: float = TAU_POLY) -> bool:
        values = x.values if isinstance(x, FractionalPoint) else np.asarray(x, dtype=float)
        if values.size != self.m:
            raise PreconditionError(f"Point has {values.size} coordinates, polytope has {self.m}")
        return self.violation(values) <= tol

    def max_scale(self, direction: np.ndarray) -> float:
        """Largest t >= 0 with t * direction inside (direction must be non-negative)."""
        direction = np.asarray(direction, dtype=float)
        limits = [1.0 / v for v in direction if v > 0]
        if self.A.shape[0]:
            load = self.A @ direction
            limits.extend(self.rhs[load > 0] / load[load > 0])
        return min(limits) if limits else math.inf

    def repair(self, x: np.ndarray) -> np.ndarray:
        """Clips to the box and scales towards the origin until every row holds."""
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        if self.A.shape[0]:
            load = self.A @ x
            over = load > self.rhs
            if np.any(over):
                x = x * float(np.min(self.rhs[over] / load[over]))
        return x

    def project(self, y: np.ndarray, max_sweeps: int = 500, tol: float = TAU_POLY) -> np.ndarray:
        """
        Euclidean projection by Dykstra's alternating projections over the halfspaces
        and the unit box, finished with repair() so the output is always feasible.
        """
        y = np.asarray(y, dtype=float)
        if self.contains(y, tol=0.0):
            return y.copy()
        k = self.A.shape[0]
        x = y.copy()
        increments = np.zeros((k + 1, self.m))
        for _ in range(max_sweeps):
            previous = x.copy()
            for i in range(k):
                z = x + increments[i]
                excess = self.A[i] @ z - self.rhs[i]
                x = z - (excess / self._row_norms[i]) * self.A[i] if excess > 0 else z
                increments[i] = z - x
            z = x + increments[k]
            x = np.clip(z, 0.0, 1.0)
            increments[k] = z - x
            if np.abs(x - previous).max() <= tol and self.violation(x) <= tol:
                break
        return self.repair(x)

    def project_entropic(self, y: np.ndarray, max_sweeps: int = 500, tol: float = TAU_POLY) -> np.ndarray:
        """
        KL (unnormalised negative entropy) projection of a positive vector, by dual
        coordinate ascent: x = y * exp(-A^T lam - mu) with lam, mu >= 0 updated row by row.
        """
        y = np.maximum(np.asarray(y, dtype=float), 0.0)
        if self.contains(y, tol=0.0):
            return y.copy()
        k = self.A.shape[0]
        x = y.copy()
        lam = np.zeros(k)
        mu = np.zeros(self.m)
        for _ in range(max_sweeps):
            previous = x.copy()
            for i in range(k):
                row = self.A[i]
                z = x * np.exp(lam[i] * row)
                step = self._entropic_multiplier(z, row, self.rhs[i])
                x = z * np.exp(-step * row)
                lam[i] = step
            z = x * np.exp(mu)
            with np.errstate(divide="ignore"):
                mu = np.where(z > 1.0, np.log(np.where(z > 0, z, 1.0)), 0.0)
            x = np.minimum(z, 1.0)
            if np.abs(x - previous).max() <= tol and self.violation(x) <= tol:
                break
        return self.repair(x)

    @staticmethod
    def _entropic_multiplier(z: np.ndarray, row: np.ndarray, bound: float) -> float:
        """Smallest t >= 0 with row . (z * exp(-t row)) <= bound."""
        load = float(row @ z)
        if load <= bound:
            return 0.0
        support = row > 0
        if np.allclose(row[support], row[support][0]):
            return math.log(load / bound) / row[support][0]
        lo, hi = 0.0, 1.0
        while float(row @ (z * np.exp(-hi * row))) > bound:
            hi *= 2.0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if float(row @ (z * np.exp(-mid * row))) > bound:
                lo = mid
            else:
                hi = mid
        return hi


def in_polytope(x: FractionalPoint, family: ConstraintFamily, b: float) -> bool:
    _check_scale(b)
    return TemporalPolytope.for_family(family, None, b).contains(x)


def in_temporal_polytope(x: FractionalPoint, seq: InstanceSequence, family: ConstraintFamily, b: float) -> bool:
    _check_scale(b)
    return TemporalPolytope.for_family(family, seq, b).contains(x)


def enumerate_feasible_sets(seq: InstanceSequence, family: ConstraintFamily, limit: int = 16) -> List[FrozenSet[int]]:
    """
    All temporally feasible sets (including the empty set), by depth-first extension in
    id order; downward closure lets every infeasible branch be pruned.
    """
    _check_sizes(family, seq)
    if seq.m > limit:
        raise PreconditionError(f"Refusing to enumerate feasible sets for m = {seq.m} > {limit}")
    actives = active_sets(seq)
    found: List[FrozenSet[int]] = []

    def extend(current: FrozenSet[int], start: int):
        found.append(current)
        for e in range(start, seq.m):
            candidate = current | {e}
            if all(family.is_independent(candidate & active) for active in actives if e in active):
                extend(candidate, e + 1)

    extend(frozenset(), 0)
    return found


def feasible_set_matrix(seq: InstanceSequence, family: ConstraintFamily, limit: int = 16) -> np.ndarray:
    """Indicator rows of enumerate_feasible_sets."""
    sets = enumerate_feasible_sets(seq, family, limit)
    matrix = np.zeros((len(sets), seq.m))
    for i, S in enumerate(sets):
        matrix[i, list(S)] = 1.0
    return matrix
