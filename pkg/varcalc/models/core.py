"""
Domain types for algebroid geometry.

An AlgebroidStructure is the local data (rho^i_A(q), C^C_AB(q)) of a skew-symmetric
algebroid in one chart. With rho = I and C = 0 it is the coordinate frame of TQ; with
base_dim = 0 it is a Lie algebra and C holds its structure constants.
"""
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Tuple
import logging

import numpy as np

from varcalc.config import SolverConfig, resolve_config
from varcalc.exceptions import DimensionError
from varcalc.services import numerics

logger = logging.getLogger(__name__)

BLOCKS = ("t", "q", "y", "p", "u", "v")


def as_vector(x, size: Optional[int] = None, what: str = "vector") -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if size is not None and v.size != size:
        raise DimensionError(f"{what} has length {v.size}, expected {size}")
    return v


@dataclass(frozen=True)
class AlgebroidStructure:
    base_dim: int
    fiber_rank: int
    anchor: Callable[[np.ndarray], np.ndarray]
    structure: Callable[[np.ndarray], np.ndarray]
    name: str = ""
    # Finite-difference structure functions, consulted only in verification mode
    derived_structure: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def rho(self, q) -> np.ndarray:
        q = as_vector(q, self.base_dim, "q")
        R = np.asarray(self.anchor(q), dtype=float).reshape(self.base_dim, self.fiber_rank)
        return R

    def C(self, q, config: Optional[SolverConfig] = None) -> np.ndarray:
        q = as_vector(q, self.base_dim, "q")
        m = self.fiber_rank
        C = np.asarray(self.structure(q), dtype=float).reshape(m, m, m)
        config = resolve_config(config)
        if config.verification_mode and self.derived_structure is not None:
            gap = float(np.max(np.abs(C - self.derived_structure(q)), initial=0.0))
            if gap > 1e-6:
                logger.warning(f"structure {self.name or '?'}: analytic and derived C differ by {gap:.3e} at q={q}")
        return C

    def skew_defect(self, q) -> float:
        """max |C^C_AB + C^C_BA| at q"""
        C = self.C(q)
        return float(np.max(np.abs(C + C.transpose(0, 2, 1)), initial=0.0))


@dataclass(frozen=True)
class FiberVelocity:
    q: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", as_vector(self.q, what="q") if np.size(self.q) else np.zeros(0))
        object.__setattr__(self, "y", as_vector(self.y, what="y"))


@dataclass(frozen=True)
class CotangentValue:
    """Components (mu_i, mu~_A) of a 1-form fed to the Euler-Lagrange operator."""

    mu_base: np.ndarray
    mu_fiber: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu_base", np.asarray(self.mu_base, dtype=float).ravel())
        object.__setattr__(self, "mu_fiber", np.asarray(self.mu_fiber, dtype=float).ravel())


@dataclass(frozen=True)
class ScalarField:
    """
    A real function of some of the argument blocks t, q, y, p, u, v.

    `arity` names the blocks consumed, in the order the evaluator takes them.
    Blocks not in `arity` may still be passed and are ignored (zero derivative).
    `gradients` optionally maps a block name to an analytic gradient with the
    evaluator's signature.
    """

    arity: Tuple[str, ...]
    evaluator: Callable[..., float]
    gradients: Mapping[str, Callable[..., np.ndarray]] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        unknown = [b for b in self.arity if b not in BLOCKS]
        if unknown:
            raise DimensionError(f"unknown argument blocks {unknown}")
        object.__setattr__(self, "arity", tuple(self.arity))

    def _args(self, blocks: Mapping[str, object]) -> list:
        try:
            return [blocks[b] if b == "t" else as_vector(blocks[b]) for b in self.arity]
        except KeyError as e:
            raise DimensionError(f"{self.name or 'scalar field'} needs block {e.args[0]!r}")

    def __call__(self, **blocks) -> float:
        return float(self.evaluator(*self._args(blocks)))

    def _restricted(self, block: str, blocks: Mapping[str, object]) -> Callable[[np.ndarray], float]:
        def f(x):
            local = dict(blocks)
            local[block] = x[0] if block == "t" else x
            return self(**local)

        return f

    def grad(self, block: str, config: Optional[SolverConfig] = None, **blocks) -> np.ndarray:
        if block == "t":
            if "t" not in self.arity:
                return np.zeros(1)
            return numerics.fd_grad(self._restricted("t", blocks), [blocks["t"]], config)
        x = as_vector(blocks[block])
        if block not in self.arity:
            return np.zeros(x.size)
        if block in self.gradients:
            return as_vector(self.gradients[block](*self._args(blocks)), x.size, f"d{self.name}/d{block}")
        return numerics.fd_grad(self._restricted(block, blocks), x, config)

    def hessian(self, row: str, col: str, config: Optional[SolverConfig] = None, **blocks) -> np.ndarray:
        """Second derivatives d2f / d row d col, shape (len(row), len(col))."""
        xr = np.atleast_1d(blocks[row]).astype(float)
        xc = np.atleast_1d(blocks[col]).astype(float)
        if row not in self.arity or col not in self.arity or xr.size == 0 or xc.size == 0:
            return np.zeros((xr.size, xc.size))
        if row in self.gradients:
            def g(x):
                local = dict(blocks)
                local[col] = x[0] if col == "t" else x
                return self.grad(row, config, **local)

            return numerics.fd_jac(g, xc, config, out_dim=xr.size)
        if row == col:
            return numerics.fd_hess(self._restricted(row, blocks), xr, config)

        def f2(a, b):
            local = dict(blocks)
            local[row] = a[0] if row == "t" else a
            local[col] = b[0] if col == "t" else b
            return self(**local)

        return numerics.fd_mixed(f2, xr, xc, config)

    def gradient_defect(self, config: Optional[SolverConfig] = None, **blocks) -> float:
        """Largest relative gap between analytic gradients and central differences."""
        worst = 0.0
        for block in self.gradients:
            analytic = self.grad(block, config, **blocks)
            fd = numerics.fd_grad(self._restricted(block, blocks), as_vector(blocks[block]), config)
            scale = max(1.0, float(np.max(np.abs(fd), initial=0.0)))
            worst = max(worst, float(np.max(np.abs(analytic - fd), initial=0.0)) / scale)
        return worst


@dataclass(frozen=True)
class ControlField:
    """Gamma(q, u): the controlled velocity, in fiber (algebroid) or tangent components."""

    control_dim: int
    gamma: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac_q_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    jac_u_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def __call__(self, q, u) -> np.ndarray:
        return as_vector(self.gamma(as_vector(q) if np.size(q) else np.zeros(0), as_vector(u, self.control_dim, "u")))

    def jac_q(self, q, u, config: Optional[SolverConfig] = None) -> np.ndarray:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if self.jac_q_fn is not None:
            return np.atleast_2d(np.asarray(self.jac_q_fn(q, u), dtype=float))
        out = self(q, u).size
        if q.size == 0:
            return np.zeros((out, 0))
        return numerics.fd_jac(lambda z: self(z, u), q, config, out_dim=out)

    def jac_u(self, q, u, config: Optional[SolverConfig] = None) -> np.ndarray:
        if self.jac_u_fn is not None:
            return np.atleast_2d(np.asarray(self.jac_u_fn(q, u), dtype=float))
        out = self(q, u).size
        return numerics.fd_jac(lambda z: self(q, z), as_vector(u), config, out_dim=out)
