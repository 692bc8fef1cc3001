from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from varcalc.config import SolverConfig
from varcalc.exceptions import DimensionError
from varcalc.models.core import ControlField, ScalarField, as_vector
from varcalc.services import numerics

SlotDerivative = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DiscreteLagrangian:
    """
    A function L_d(a, b) on Q x Q.

    `d1` and `d2` are optional analytic slot derivatives; central differences are
    used for a missing slot.
    """

    n: int
    value: Callable[[np.ndarray, np.ndarray], float]
    d1: Optional[SlotDerivative] = None
    d2: Optional[SlotDerivative] = None
    name: str = ""

    def __call__(self, a, b) -> float:
        return float(self.value(as_vector(a, self.n, "q"), as_vector(b, self.n, "q")))

    def D1(self, a, b, config: Optional[SolverConfig] = None) -> np.ndarray:
        a = as_vector(a, self.n, "q")
        b = as_vector(b, self.n, "q")
        if self.d1 is not None:
            return as_vector(self.d1(a, b), self.n, "D1 L_d")
        return numerics.fd_grad(lambda z: self(z, b), a, config)

    def D2(self, a, b, config: Optional[SolverConfig] = None) -> np.ndarray:
        a = as_vector(a, self.n, "q")
        b = as_vector(b, self.n, "q")
        if self.d2 is not None:
            return as_vector(self.d2(a, b), self.n, "D2 L_d")
        return numerics.fd_grad(lambda z: self(a, z), b, config)

    def slot_defect(self, a, b, config: Optional[SolverConfig] = None) -> float:
        """Largest relative gap between analytic slot derivatives and central differences."""
        a = as_vector(a, self.n, "q")
        b = as_vector(b, self.n, "q")
        worst = 0.0
        pairs = ((self.d1, lambda: numerics.fd_grad(lambda z: self(z, b), a, config), lambda: self.D1(a, b)),
                 (self.d2, lambda: numerics.fd_grad(lambda z: self(a, z), b, config), lambda: self.D2(a, b)))
        for analytic, fd, value in pairs:
            if analytic is None:
                continue
            ref = fd()
            scale = max(1.0, float(np.max(np.abs(ref), initial=0.0)))
            worst = max(worst, float(np.max(np.abs(value() - ref), initial=0.0)) / scale)
        return worst


@dataclass(frozen=True)
class DiscretePath:
    """Configurations sigma(0..N) with optional multipliers lambda^k (one row per step)."""

    configs: np.ndarray
    multipliers: Optional[np.ndarray] = None

    def __post_init__(self):
        configs = np.asarray(self.configs, dtype=float)
        if configs.ndim == 1:
            configs = configs.reshape(-1, 1)
        object.__setattr__(self, "configs", configs)
        if self.multipliers is not None:
            lam = np.asarray(self.multipliers, dtype=float)
            if lam.ndim == 1:
                lam = lam.reshape(configs.shape[0], -1)
            if lam.shape[0] != configs.shape[0]:
                raise DimensionError(f"{lam.shape[0]} multiplier rows for {configs.shape[0]} configurations")
            object.__setattr__(self, "multipliers", lam)

    def __len__(self) -> int:
        return self.configs.shape[0]

    @property
    def steps(self) -> int:
        return self.configs.shape[0] - 1


@dataclass(frozen=True)
class DiscreteControlSystem:
    """sigma(k+1) = Gamma_d(sigma(k), u(k)) with running cost L(q, u)."""

    n: int
    gamma: ControlField
    cost: ScalarField

    @property
    def control_dim(self) -> int:
        return self.gamma.control_dim
