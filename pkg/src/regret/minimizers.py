"""
Full-information regret minimizers over a temporal packing polytope. rec() always
returns a point of the polytope; update(g) feeds the linear reward vector of one round.
"""
import abc
import logging
import math
from typing import Optional

import numpy as np

from ..constraints import TemporalPolytope
from ..data_models import FractionalPoint

logger = logging.getLogger(__name__)

# Exponent cap for multiplicative updates fed with large importance weights.
_MAX_EXPONENT = 50.0


class RegretMinimizer(abc.ABC):
    """Interface: rec() -> x_t in the decision set, update(g_t) with the round's reward vector."""

    def __init__(self, polytope: TemporalPolytope):
        self.polytope = polytope
        self.m = polytope.m
        self.t = 0
        self._x = self.initial_point()

    @abc.abstractmethod
    def initial_point(self) -> np.ndarray:
        pass

    @abc.abstractmethod
    def step(self, x: np.ndarray, g: np.ndarray, eta: float) -> np.ndarray:
        """One projected ascent step from x along g."""

    @abc.abstractmethod
    def step_size(self, t: int) -> float:
        pass

    def rec(self) -> FractionalPoint:
        return FractionalPoint(self._x, scale_hint=self.polytope.b)

    def update(self, g) -> None:
        g = np.asarray(g, dtype=float).reshape(-1)
        if g.size != self.m:
            raise ValueError(f"Reward vector has {g.size} entries, expected {self.m}")
        self.t += 1
        self._x = self.step(self._x, g, self.step_size(self.t))


class OnlineGradientAscent(RegretMinimizer):
    """
    Projected online gradient ascent, eta_t = D / (G sqrt(t)) with D = G = sqrt(m) unless
    a constant is given.
    """

    def __init__(self, polytope: TemporalPolytope, eta: Optional[float] = None):
        self.eta = eta
        super().__init__(polytope)

    def initial_point(self) -> np.ndarray:
        return np.zeros(self.m)

    def step_size(self, t: int) -> float:
        if self.eta is not None:
            return self.eta
        diameter = gradient_bound = math.sqrt(self.m)
        return diameter / (gradient_bound * math.sqrt(t))

    def step(self, x: np.ndarray, g: np.ndarray, eta: float) -> np.ndarray:
        return self.polytope.project(x + eta * g)


class EntropicMirrorAscent(RegretMinimizer):
    """Online mirror ascent with the unnormalised negative entropy; KL projections."""

    def initial_point(self) -> np.ndarray:
        ones = np.ones(self.m)
        scale = min(1.0, self.polytope.max_scale(ones))
        return 0.5 * scale * ones

    def step_size(self, t: int) -> float:
        return math.sqrt(math.log(self.m + 1) / t)

    def step(self, x: np.ndarray, g: np.ndarray, eta: float) -> np.ndarray:
        y = x * np.exp(np.minimum(eta * g, _MAX_EXPONENT))
        return self.polytope.project_entropic(y)


def rm_ogd(polytope: TemporalPolytope, eta: Optional[float] = None) -> OnlineGradientAscent:
    return OnlineGradientAscent(polytope, eta)


def create_minimizer(name: str, polytope: TemporalPolytope) -> RegretMinimizer:
    name = name.lower()
    if name == "ogd":
        return OnlineGradientAscent(polytope)
    if name == "entropic":
        return EntropicMirrorAscent(polytope)
    raise ValueError(f"Unknown regret minimizer: {name}")
