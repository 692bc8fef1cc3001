from dataclasses import dataclass
from typing import Optional

import numpy as np

from varcalc.exceptions import DimensionError
from varcalc.models.core import as_vector


@dataclass(frozen=True)
class Jet:
    """Second-order jet (t, q, y, qdot, ydot) of a fiber curve."""

    t: float
    q: np.ndarray
    y: np.ndarray
    qdot: np.ndarray
    ydot: np.ndarray

    def __post_init__(self):
        for name in ("q", "y", "qdot", "ydot"):
            object.__setattr__(self, name, as_vector(getattr(self, name), what=name))
        if self.q.size != self.qdot.size:
            raise DimensionError(f"q has length {self.q.size} but qdot has length {self.qdot.size}")
        if self.y.size != self.ydot.size:
            raise DimensionError(f"y has length {self.y.size} but ydot has length {self.ydot.size}")
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class VakonomicState:
    q: np.ndarray
    y_free: np.ndarray
    mu_con: np.ndarray

    def __post_init__(self):
        for name in ("q", "y_free", "mu_con"):
            object.__setattr__(self, name, as_vector(getattr(self, name), what=name))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.y_free, self.mu_con])

    @classmethod
    def from_vector(cls, x, n: int, free: int) -> "VakonomicState":
        x = as_vector(x)
        return cls(q=x[:n], y_free=x[n:n + free], mu_con=x[n + free:])


@dataclass(frozen=True)
class PontryaginState:
    """
    A point (q, mu~, u) of the optimal-control phase space, optionally with the
    time derivatives needed to evaluate the extremality conditions.
    """

    q: np.ndarray
    mu_fiber: np.ndarray
    u: np.ndarray
    qdot: Optional[np.ndarray] = None
    mudot: Optional[np.ndarray] = None
    t: float = 0.0

    def __post_init__(self):
        for name in ("q", "mu_fiber", "u"):
            object.__setattr__(self, name, as_vector(getattr(self, name), what=name))
        if self.qdot is not None:
            object.__setattr__(self, "qdot", as_vector(self.qdot, self.q.size, "qdot"))
        if self.mudot is not None:
            object.__setattr__(self, "mudot", as_vector(self.mudot, self.mu_fiber.size, "mudot"))
