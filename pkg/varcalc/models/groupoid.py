"""
Local Lie-groupoid model: one symmetric-neighborhood chart with target map
b(q, v) and product p(q, v, w). The source of (q, v) is q, the identity section
is v = 0 and composability of (q, v) with (q2, w) means q2 = b(q, v).
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from varcalc.exceptions import ChartError
from varcalc.models.core import ControlField, ScalarField, as_vector


@dataclass(frozen=True)
class GroupoidModel:
    base_dim: int
    fiber_dim: int
    target: Callable[[np.ndarray, np.ndarray], np.ndarray]
    product: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    # analytic overrides; finite differences otherwise
    rho_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    left_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    right_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    chart_radius: float = np.inf
    name: str = ""

    def check_chart(self, v) -> np.ndarray:
        v = as_vector(v, self.fiber_dim, "v")
        radius = float(np.linalg.norm(v))
        if not np.all(np.isfinite(v)) or radius >= self.chart_radius:
            raise ChartError(f"{self.name or 'groupoid'}: |v| = {radius:.6g} outside chart radius {self.chart_radius:.6g}")
        return v

    def b(self, q, v) -> np.ndarray:
        q = as_vector(q, self.base_dim, "q")
        v = self.check_chart(v)
        return as_vector(self.target(q, v), self.base_dim, "b(q, v)")

    def p(self, q, v, w) -> np.ndarray:
        q = as_vector(q, self.base_dim, "q")
        v = self.check_chart(v)
        w = self.check_chart(w)
        return as_vector(self.product(q, v, w), self.fiber_dim, "p(q, v, w)")


@dataclass(frozen=True)
class LieGroupModel:
    """A Lie group seen as a groupoid over a single point, with its coadjoint action."""

    group: GroupoidModel
    coad: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __post_init__(self):
        if self.group.base_dim != 0:
            raise ChartError(f"a Lie group model needs base_dim 0, got {self.group.base_dim}")

    @property
    def dim(self) -> int:
        return self.group.fiber_dim


@dataclass(frozen=True)
class GroupoidElement:
    q: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", as_vector(self.q, what="q"))
        object.__setattr__(self, "v", as_vector(self.v, what="v"))


@dataclass(frozen=True)
class GroupoidControlSystem:
    """Discrete control on a groupoid: g_k = (q_k, Gamma_d(q_k, u_k)), q_{k+1} = b(g_k)."""

    gamma: ControlField
    cost: ScalarField

    @property
    def control_dim(self) -> int:
        return self.gamma.control_dim


@dataclass(frozen=True)
class EulerPoincareSequence:
    """
    Output of the discrete Euler-Poincare solver: the seed step v_0 with its momentum and
    the solved steps v_1..v_N with momenta mu_1..mu_N (rows).
    """

    seed: np.ndarray
    seed_momentum: np.ndarray
    steps: np.ndarray
    momenta: np.ndarray

    def __len__(self) -> int:
        return self.steps.shape[0]

    def all_steps(self) -> np.ndarray:
        return np.vstack([self.seed, self.steps])

    def all_momenta(self) -> np.ndarray:
        return np.vstack([self.seed_momentum, self.momenta])


@dataclass(frozen=True)
class GroupoidOcpSolution:
    """states q_0..q_N, controls u_0..u_{N-1}, and per-step costates mu1_k (base) and mu2_k (chart)."""

    states: np.ndarray
    controls: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
