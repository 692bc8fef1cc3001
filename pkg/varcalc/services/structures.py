"""
Constructors for algebroid structures: coordinate frames, Lie algebras, moving
frames built from vector fields and nonholonomic (projected-bracket) structures.
"""
from typing import Callable, Iterable, List, Optional, Sequence
import logging

import numpy as np

from varcalc.config import SolverConfig, resolve_config
from varcalc.exceptions import DimensionError, StructureError
from varcalc.models.core import AlgebroidStructure, FiberVelocity, as_vector
from varcalc.services import numerics

logger = logging.getLogger(__name__)

VectorField = Callable[[np.ndarray], np.ndarray]

SKEW_TOL = 1e-12


def coordinate_frame(n: int) -> AlgebroidStructure:
    """The standard frame of TQ on R^n: rho = I, C = 0."""
    if n < 1:
        raise StructureError("coordinate_frame needs n >= 1; use lie_algebra for a zero-dimensional base")
    eye = np.eye(n)
    zero = np.zeros((n, n, n))
    return AlgebroidStructure(n, n, lambda q: eye, lambda q: zero, name=f"coordinate({n})")


def lie_algebra(m: int, constants, name: str = "") -> AlgebroidStructure:
    """A Lie algebra as an algebroid over a point; `constants[c, a, b]` = C^c_ab."""
    C = np.asarray(constants, dtype=float)
    if C.shape != (m, m, m):
        raise DimensionError(f"structure constants of shape {C.shape}, expected {(m, m, m)}")
    defect = float(np.max(np.abs(C + C.transpose(0, 2, 1)), initial=0.0))
    if defect > SKEW_TOL:
        raise StructureError(f"structure constants are not skew in the lower indices (defect {defect:.3e})")
    C = C.copy()
    C.setflags(write=False)
    empty = np.zeros((0, m))
    return AlgebroidStructure(0, m, lambda q: empty, lambda q: C, name=name or f"algebra({m})")


def so3_algebra() -> AlgebroidStructure:
    """so(3) with C^c_ab = epsilon_cab, i.e. [e_a, e_b] = e_a x e_b."""
    eps = np.zeros((3, 3, 3))
    for c, a, b in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[c, a, b] = 1.0
        eps[c, b, a] = -1.0
    return lie_algebra(3, eps, name="so3")


def _frame_matrix(fields: Sequence[VectorField], q: np.ndarray, n: int) -> np.ndarray:
    return np.column_stack([as_vector(Y(q), n, "frame vector") for Y in fields])


def lie_brackets(fields: Sequence[VectorField], q, config: Optional[SolverConfig] = None) -> np.ndarray:
    """
    Coordinate components of [Y_a, Y_b] at q, shape (n, m, m).

    [Y_a, Y_b]^k = Y_a^l d_l Y_b^k - Y_b^l d_l Y_a^k with central-difference Jacobians;
    only a < b is differenced, the rest follows by skew-symmetry.
    """
    q = as_vector(q)
    n = q.size
    m = len(fields)
    values = [as_vector(Y(q), n, "frame vector") for Y in fields]
    jacobians = [numerics.fd_jac(Y, q, config, out_dim=n) for Y in fields]
    out = np.zeros((n, m, m))
    for a in range(m):
        for b in range(a + 1, m):
            bracket = jacobians[b] @ values[a] - jacobians[a] @ values[b]
            out[:, a, b] = bracket
            out[:, b, a] = -bracket
    return out


def frame_from_vectorfields(fields: Sequence[VectorField], structure: Optional[Callable] = None,
                            config: Optional[SolverConfig] = None, name: str = "") -> AlgebroidStructure:
    """
    Moving frame {Y_1..Y_n} of TQ.

    Structure functions come from [Y_a, Y_b] = C^c_ab Y_c. When `structure` is given it
    is used as is, and the finite-difference version is only consulted in verification mode.
    """
    fields = list(fields)
    n = len(fields)
    if n == 0:
        raise StructureError("a frame needs at least one vector field")
    config = resolve_config(config)

    def anchor(q):
        return _frame_matrix(fields, q, n)

    def derived(q):
        q = as_vector(q, n, "q")
        F = anchor(q)
        brackets = lie_brackets(fields, q, config).reshape(n, n * n)
        coeffs, _ = numerics.linsolve(F, brackets, config, point=q, what="frame matrix")
        return coeffs.reshape(n, n, n)

    return AlgebroidStructure(n, n, anchor, structure or derived, name=name or "frame",
                              derived_structure=derived if structure is not None else None)


def _checked_metric(metric: Callable, q: np.ndarray, n: int) -> np.ndarray:
    G = np.asarray(metric(q), dtype=float).reshape(n, n)
    if float(np.max(np.abs(G - G.T), initial=0.0)) > 1e-12 * max(1.0, float(np.max(np.abs(G)))):
        raise StructureError(f"metric is not symmetric at q={q}")
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise StructureError(f"metric is not positive definite at q={q}")
    return G


def _gram(D: np.ndarray, G: np.ndarray, q: np.ndarray, config: SolverConfig) -> np.ndarray:
    gram = D.T @ G @ D
    if numerics.reciprocal_condition(gram) < config.condition_floor:
        raise StructureError(f"distribution is rank deficient at q={q}")
    return gram


def nonholonomic_projector(distribution: Sequence[VectorField], metric: Callable, q,
                           config: Optional[SolverConfig] = None) -> np.ndarray:
    """The g-orthogonal projector P = D (D^T g D)^-1 D^T g onto span(distribution)."""
    config = resolve_config(config)
    q = as_vector(q)
    n = q.size
    D = _frame_matrix(distribution, q, n)
    G = _checked_metric(metric, q, n)
    gram = _gram(D, G, q, config)
    coeffs, _ = numerics.linsolve(gram, D.T @ G, config, point=q, what="distribution Gram matrix")
    return D @ coeffs


def nonholonomic_structure(distribution: Sequence[VectorField], metric: Callable, base_dim: int,
                           structure: Optional[Callable] = None, config: Optional[SolverConfig] = None,
                           name: str = "") -> AlgebroidStructure:
    """
    Skew-symmetric algebroid on a distribution D with the projected bracket P[Y_a, Y_b].

    C[:, a, b] are the components of P[Y_a, Y_b] in the basis Y_1..Y_m.
    """
    distribution = list(distribution)
    m = len(distribution)
    n = base_dim
    if m == 0 or m > n:
        raise StructureError(f"a distribution of rank {m} does not fit in a base of dimension {n}")
    config = resolve_config(config)

    def anchor(q):
        return _frame_matrix(distribution, q, n)

    def derived(q):
        q = as_vector(q, n, "q")
        D = anchor(q)
        G = _checked_metric(metric, q, n)
        gram = _gram(D, G, q, config)
        brackets = lie_brackets(distribution, q, config).reshape(n, m * m)
        coeffs, _ = numerics.linsolve(gram, D.T @ G @ brackets, config, point=q, what="distribution Gram matrix")
        return coeffs.reshape(m, m, m)

    def checked(q):
        q = as_vector(q, n, "q")
        _gram(anchor(q), _checked_metric(metric, q, n), q, config)
        return structure(q)

    return AlgebroidStructure(n, m, anchor, derived if structure is None else checked, name=name or "nonholonomic",
                              derived_structure=derived if structure is not None else None)


def admissibility_defect(structure: AlgebroidStructure, qdot, v: FiberVelocity) -> np.ndarray:
    """q_dot - rho(q) y; zero iff the curve is rho-admissible at this instant."""
    qdot = as_vector(qdot, structure.base_dim, "qdot")
    y = as_vector(v.y, structure.fiber_rank, "y")
    return qdot - structure.rho(v.q) @ y


def check_skew(structure: AlgebroidStructure, points: Iterable) -> float:
    """Worst skew defect of C over the sample points."""
    return max((structure.skew_defect(q) for q in points), default=0.0)


def verify_structure(structure: AlgebroidStructure, points: Iterable) -> float:
    """Worst gap between analytic and finite-difference structure functions over the samples."""
    if structure.derived_structure is None:
        return 0.0
    m = structure.fiber_rank
    worst = 0.0
    for q in points:
        q = as_vector(q, structure.base_dim, "q")
        analytic = np.asarray(structure.structure(q), dtype=float).reshape(m, m, m)
        gap = np.abs(analytic - structure.derived_structure(q))
        worst = max(worst, float(np.max(gap, initial=0.0)))
    if worst > 1e-6:
        logger.warning(f"structure {structure.name}: analytic C differs from brackets by {worst:.3e}")
    return worst


def martinet_frame() -> AlgebroidStructure:
    """
    Frame {d2, d1 + (q2^2/2) d3, d3} on R^3, with C^3_12 = q2 = -C^3_21 and all other
    structure functions zero.
    """

    def martinet_c(q):
        C = np.zeros((3, 3, 3))
        C[2, 0, 1] = q[1]
        C[2, 1, 0] = -q[1]
        return C

    fields = [
        lambda q: np.array([0.0, 1.0, 0.0]),
        lambda q: np.array([1.0, 0.0, 0.5 * q[1] ** 2]),
        lambda q: np.array([0.0, 0.0, 1.0]),
    ]
    return frame_from_vectorfields(fields, structure=martinet_c, name="martinet")


def martinet_distribution() -> List[VectorField]:
    return [
        lambda q: np.array([0.0, 1.0, 0.0]),
        lambda q: np.array([1.0, 0.0, 0.5 * q[1] ** 2]),
    ]


def knife_edge_structure() -> AlgebroidStructure:
    """Knife edge on (x, y, theta): D = span{cos th d_x + sin th d_y, d_th}; the projected bracket vanishes."""
    fields = [
        lambda q: np.array([np.cos(q[2]), np.sin(q[2]), 0.0]),
        lambda q: np.array([0.0, 0.0, 1.0]),
    ]
    zero = np.zeros((2, 2, 2))
    return nonholonomic_structure(fields, lambda q: np.eye(3), 3, structure=lambda q: zero, name="knife_edge")


def scaled_frame(factors: Sequence[float]) -> AlgebroidStructure:
    """Constant diagonal frame Y_i = factors[i] d_i."""
    factors = as_vector(factors)
    if np.any(factors == 0.0):
        raise StructureError("scaled frame with a zero factor")
    n = factors.size
    fields = [(lambda q, i=i: factors[i] * np.eye(n)[i]) for i in range(n)]
    zero = np.zeros((n, n, n))
    return frame_from_vectorfields(fields, structure=lambda q: zero, name=f"scaled{tuple(factors.tolist())}")
