"""
Cross-module invariant suite behind `varcalc check`.

Each invariant measures one scalar (a worst-case defect, a drift or a convergence
ratio) and passes when it lies within its tolerance band. Invariants are independent
and are evaluated concurrently.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fnmatch import fnmatchcase
from pathlib import Path
from typing import Callable, List, Optional
import logging
import math
import tempfile
import time

import numpy as np

from varcalc.config import SolverConfig, resolve_config
from varcalc.exceptions import ConvergenceError, ExprSyntaxError
from varcalc.models.core import ControlField, ScalarField
from varcalc.models.discrete import DiscreteControlSystem
from varcalc.models.groupoid import GroupoidControlSystem, GroupoidElement
from varcalc.models.states import Jet, PontryaginState, VakonomicState
from varcalc.schemas.schemas import CheckReport, InvariantResult
from varcalc.services import continuous, discrete, expressions, groupoid, numerics, structures
from varcalc.services.catalog import CatalogService
from varcalc.services.runner import RunService

logger = logging.getLogger(__name__)

INERTIA = np.array([1.0, 2.0, 3.0])

NAMED_EXAMPLES = (
    "free_particle", "sho", "pendulum", "martinet", "rigid_body", "so3_lie_poisson", "lq_pontryagin",
    "discrete_free_particle", "discrete_sho", "discrete_lqr", "so3_discrete_lie_poisson", "pair_groupoid_del",
)


@dataclass(frozen=True)
class Invariant:
    name: str
    description: str
    tolerance: float
    check: Callable[[SolverConfig], float]
    lower: Optional[float] = None

    def accepts(self, value: float) -> bool:
        if not math.isfinite(value) or value > self.tolerance:
            return False
        return self.lower is None or value >= self.lower


INVARIANTS: List[Invariant] = []


def invariant(name: str, description: str, tolerance: float, lower: Optional[float] = None):
    def register(fn: Callable[[SolverConfig], float]):
        INVARIANTS.append(Invariant(name, description, tolerance, fn, lower))
        return fn

    return register


# -- fixtures ---------------------------------------------------------------------------------

def _sho(scale: float = 1.0) -> ScalarField:
    """(scale y)^2/2 - q^2/2"""
    return ScalarField(("q", "y"), lambda q, y: 0.5 * (scale * y[0]) ** 2 - 0.5 * q[0] ** 2,
                       {"q": lambda q, y: -q, "y": lambda q, y: scale * scale * y}, name="sho")


def _pendulum() -> ScalarField:
    return ScalarField(("q", "y"), lambda q, y: 0.5 * y[0] ** 2 + math.cos(q[0]),
                       {"q": lambda q, y: -np.sin(q), "y": lambda q, y: y}, name="pendulum")


def _kinetic(weights) -> ScalarField:
    w = np.asarray(weights, dtype=float)
    return ScalarField(("q", "y"), lambda q, y: 0.5 * float(y @ (w * y)),
                       {"q": lambda q, y: np.zeros(q.size), "y": lambda q, y: w * y}, name="kinetic")


def _rigid_body_hamiltonian() -> ScalarField:
    return ScalarField(("q", "p"), lambda q, p: 0.5 * float(p @ (p / INERTIA)),
                       {"q": lambda q, p: np.zeros(0), "p": lambda q, p: p / INERTIA}, name="rigid body H")


def _random_lagrangian(n: int, m: int, rng: np.random.Generator) -> ScalarField:
    """y.A y/2 + y.B sin(q) - q.K q/2 with A positive definite."""
    A = rng.uniform(-0.3, 0.3, (m, m))
    A = A + A.T + 2.0 * np.eye(m)
    B = rng.uniform(-0.5, 0.5, (m, n))
    K = rng.uniform(0.5, 1.5, n)
    return ScalarField(
        ("q", "y"),
        lambda q, y: 0.5 * float(y @ A @ y) + float(y @ B @ np.sin(q)) - 0.5 * float(K @ (q * q)),
        {"q": lambda q, y: np.cos(q) * (B.T @ y) - K * q, "y": lambda q, y: A @ y + B @ np.sin(q)},
        name="random",
    )


def _shear_frame():
    """X1 = d1, X2 = q1 d1 + d2, so [X1, X2] = X1."""
    return structures.frame_from_vectorfields([lambda q: np.array([1.0, 0.0]), lambda q: np.array([q[0], 1.0])],
                                              name="shear")


def _lq_problem():
    gamma = ControlField(1, lambda q, u: np.array(u, dtype=float),
                         lambda q, u: np.zeros((1, 1)), lambda q, u: np.eye(1))
    L = ScalarField(("q", "u"), lambda q, u: 0.5 * (q[0] ** 2 + u[0] ** 2),
                    {"q": lambda q, u: q, "u": lambda q, u: u}, name="lq")
    return structures.coordinate_frame(1), gamma, L


def _lqr_system() -> DiscreteControlSystem:
    gamma = ControlField(1, lambda q, u: 1.1 * q + 0.1 * u, lambda q, u: np.array([[1.1]]), lambda q, u: np.array([[0.1]]))
    cost = ScalarField(("q", "u"), lambda q, u: 0.05 * (q[0] ** 2 + u[0] ** 2),
                       {"q": lambda q, u: 0.1 * q, "u": lambda q, u: 0.1 * u}, name="lqr")
    return DiscreteControlSystem(1, gamma, cost)


# -- numerics ---------------------------------------------------------------------------------

@invariant("numerics.rk4_order", "RK4 error ratio when halving dt on xdot = x", 20.0, lower=12.0)
def _rk4_order(config: SolverConfig) -> float:
    def error(dt):
        return abs(numerics.rk4(lambda t, x: x, [1.0], 0.0, 1.0, dt).final[0] - math.e)

    return error(0.1) / error(0.05)


@invariant("numerics.newton_quadratic", "Newton on x^2 - 2: e_{k+1} / (10 e_k^2)", 1.0)
def _newton_quadratic(config: SolverConfig) -> float:
    iterates = [1.0]
    for k in range(1, 5):
        capped = config.model_copy(update={"newton_max_iter": k, "newton_tol": 1e-300})
        try:
            iterates.append(float(numerics.newton(lambda x: x * x - 2.0, [1.0], capped)[0]))
        except ConvergenceError as e:
            iterates.append(e.point[0])
    errors = [abs(x - math.sqrt(2.0)) for x in iterates]
    return max(errors[k + 1] / (10.0 * errors[k] ** 2) for k in range(len(errors) - 1) if errors[k] > 1e-7)


@invariant("numerics.fd_gradient", "central-difference gradient of a polynomial vs analytic", 1e-8)
def _fd_gradient(config: SolverConfig) -> float:
    rng = np.random.default_rng(3)

    def f(x):
        return float(x @ x + x[0] * x[1] ** 3 - 2.0 * x[2] * x[0])

    def grad(x):
        return np.array([2 * x[0] + x[1] ** 3 - 2 * x[2], 2 * x[1] + 3 * x[0] * x[1] ** 2, 2 * x[2] - 2 * x[0]])

    return max(float(np.max(np.abs(numerics.fd_grad(f, x, config) - grad(x)))) for x in rng.uniform(-2, 2, (20, 3)))


# -- core -------------------------------------------------------------------------------------

@invariant("core.bracket_skew", "C^c_ab + C^c_ba over built-in and derived structures", 1e-7)
def _bracket_skew(config: SolverConfig) -> float:
    rng = np.random.default_rng(1)
    cases = [
        structures.so3_algebra(), structures.martinet_frame(), structures.knife_edge_structure(),
        structures.scaled_frame([2.0, 0.5]), _shear_frame(),
        structures.nonholonomic_structure(structures.martinet_distribution(), lambda q: np.eye(3), 3),
    ]
    return max(structures.check_skew(S, rng.uniform(-1, 1, (100, S.base_dim))) for S in cases)


@invariant("core.projector_law", "P^2 = P and g-symmetry of the nonholonomic projector", 1e-10)
def _projector_law(config: SolverConfig) -> float:
    rng = np.random.default_rng(2)

    def metric(q):
        return np.array([[2.0 + q[1] ** 2, 0.3, 0.0], [0.3, 1.0, 0.1 * q[0]], [0.0, 0.1 * q[0], 1.5]])

    worst = 0.0
    for q in rng.uniform(-1, 1, (50, 3)):
        P = structures.nonholonomic_projector(structures.martinet_distribution(), metric, q, config)
        G = metric(q)
        worst = max(worst, float(np.max(np.abs(P @ P - P))), float(np.max(np.abs(P.T @ G - G @ P))))
    return worst


@invariant("core.frame_recovery", "coordinate basis fields give vanishing structure functions", 1e-9)
def _frame_recovery(config: SolverConfig) -> float:
    rng = np.random.default_rng(4)
    S = structures.frame_from_vectorfields([lambda q, i=i: np.eye(3)[i] for i in range(3)], config=config)
    return max(float(np.max(np.abs(S.C(q, config)))) for q in rng.uniform(-2, 2, (20, 3)))


@invariant("core.gradient_agreement", "analytic ScalarField gradients vs central differences (relative)", 1e-6)
def _gradient_agreement(config: SolverConfig) -> float:
    rng = np.random.default_rng(5)
    f = ScalarField(
        ("q", "y"),
        lambda q, y: math.sin(q[0]) * y[0] ** 2 + q[1] * y[1] + math.exp(q[0] * q[1]),
        {
            "q": lambda q, y: np.array([math.cos(q[0]) * y[0] ** 2 + q[1] * math.exp(q[0] * q[1]),
                                        y[1] + q[0] * math.exp(q[0] * q[1])]),
            "y": lambda q, y: np.array([2 * math.sin(q[0]) * y[0], q[1]]),
        },
    )
    return max(f.gradient_defect(config, q=q, y=y) for q, y in rng.uniform(-1, 1, (50, 2, 2)))


# -- continuous -------------------------------------------------------------------------------

@invariant("continuous.sho_hamel", "coordinate-frame SHO vs cos t on [0, 10]", 1e-6)
def _sho_hamel(config: SolverConfig) -> float:
    traj = continuous.integrate_hamel(structures.coordinate_frame(1), _sho(), [1.0], [0.0], 10.0, dt=1e-3, config=config)
    return float(np.max(np.abs(traj.column("q1") - np.cos(traj.times))))


@invariant("continuous.scaled_frame_sho", "SHO in the frame Y1 = 2 d/dq vs the coordinate frame", 1e-6)
def _scaled_frame_sho(config: SolverConfig) -> float:
    coord = continuous.integrate_hamel(structures.coordinate_frame(1), _sho(), [1.0], [0.0], 10.0, dt=1e-3,
                                       config=config)
    scaled = continuous.integrate_hamel(structures.scaled_frame([2.0]), _sho(2.0), [1.0], [0.0], 10.0, dt=1e-3,
                                        config=config)
    return float(np.max(np.abs(coord.column("q1") - scaled.column("q1"))))


@invariant("continuous.frame_invariance", "coordinate SHO solution re-expressed in a scaled frame solves Hamel", 1e-5)
def _frame_invariance(config: SolverConfig) -> float:
    S = structures.coordinate_frame(1)
    traj = continuous.integrate_hamel(S, _sho(), [1.0], [0.0], 2.0, dt=1e-3, config=config)
    field = continuous.hamel_vector_field(S, _sho(), config)
    scaled = structures.scaled_frame([2.0])
    worst = 0.0
    for t, x in zip(traj.times[::50], traj.states[::50]):
        qdot, ydot = field(t, x[:1], x[1:])
        jet = Jet(t, x[:1], qdot / 2.0, qdot, ydot / 2.0)
        worst = max(worst, float(np.max(np.abs(continuous.hamel_residual(scaled, _sho(2.0), jet, config)))))
    return worst


@invariant("continuous.legendre_pendulum", "Lagrangian and Legendre-transformed Hamiltonian pendulum flows on [0, 5]", 1e-6)
def _legendre_pendulum(config: SolverConfig) -> float:
    S = structures.coordinate_frame(1)
    L = _pendulum()
    lag = continuous.integrate_hamel(S, L, [1.0], [0.0], 5.0, dt=1e-3, config=config)
    ham = continuous.integrate_hamilton(S, continuous.legendre_transform(S, L, config), [1.0], [0.0], 5.0, dt=1e-3,
                                        config=config)
    return float(np.max(np.abs(lag.column("q1") - ham.column("q1"))))


def _martinet_flow(config: SolverConfig):
    S = structures.martinet_frame()
    l = _kinetic([1.0, 1.0])
    phi = [ScalarField(("q", "y"), lambda q, y: 0.0, name="y3")]
    state0 = VakonomicState([0.0, 1.0, 0.0], [1.0, 0.5], [0.7])
    traj = continuous.integrate_vakonomic(S, l, phi, state0, 1.0, dt=1e-3, config=config)
    return S, l, phi, traj


@invariant("continuous.martinet_first_integral", "drift of mu~_3 along the Martinet vakonomic flow", 1e-9)
def _martinet_first_integral(config: SolverConfig) -> float:
    traj = _martinet_flow(config)[3]
    mu3 = traj.column("mu3")
    return float(np.max(np.abs(mu3 - mu3[0])))


@invariant("continuous.martinet_system", "vakonomic field vs the closed-form Martinet equations", 1e-8)
def _martinet_system(config: SolverConfig) -> float:
    S, l, phi, traj = _martinet_flow(config)
    field = continuous.vakonomic_vector_field(S, l, phi, config)
    worst = 0.0
    for t, x in zip(traj.times[::50], traj.states[::50]):
        q, (y1, y2), mu = x[:3], x[3:5], x[5]
        d = field(t, VakonomicState(q, [y1, y2], [mu]))
        expected = np.array([y2, y1, 0.5 * q[1] ** 2 * y2, -mu * q[1] * y2, mu * q[1] * y1, 0.0])
        worst = max(worst, float(np.max(np.abs(d.to_vector() - expected))))
    return worst


def _euler_rhs(t, w):
    return np.cross(INERTIA * w, w) / INERTIA


@invariant("continuous.euler_poincare_lie_poisson",
           "rigid body: Euler-Poincare momenta vs Lie-Poisson flow vs Euler's equations", 1e-6)
def _euler_poincare_lie_poisson(config: SolverConfig) -> float:
    S = structures.so3_algebra()
    xi0 = np.array([1.0, 1.0, 1.0])
    ep = continuous.integrate_hamel(S, _kinetic(INERTIA), [], xi0, 1.0, dt=1e-3, config=config)
    lp = continuous.integrate_hamilton(S, _rigid_body_hamiltonian(), [], INERTIA * xi0, 1.0, dt=1e-3, config=config)
    euler = numerics.rk4(_euler_rhs, xi0, 0.0, 1.0, 1e-3)
    xi = ep.block("y")
    return max(float(np.max(np.abs(INERTIA * xi - lp.block("p")))), float(np.max(np.abs(xi - euler.states))))


@invariant("continuous.lie_poisson_casimir", "drift of |p| along the so(3) Lie-Poisson flow", 1e-9)
def _lie_poisson_casimir(config: SolverConfig) -> float:
    traj = continuous.integrate_hamilton(structures.so3_algebra(), _rigid_body_hamiltonian(), [], [1.0, 2.0, 3.0], 1.0,
                                         dt=1e-3, config=config)
    norms = np.linalg.norm(traj.block("p"), axis=1)
    return float(np.max(np.abs(norms - norms[0])))


@invariant("continuous.vakonomic_reduction", "unconstrained vakonomic field vs Hamel field", 1e-10)
def _vakonomic_reduction(config: SolverConfig) -> float:
    rng = np.random.default_rng(6)
    S = structures.martinet_frame()
    L = ScalarField(
        ("q", "y"),
        lambda q, y: 0.5 * (y[0] ** 2 + 2 * y[1] ** 2 + y[2] ** 2) + q[1] * y[0] * y[2] + math.cos(q[0]) * y[1],
        {
            "q": lambda q, y: np.array([-math.sin(q[0]) * y[1], y[0] * y[2], 0.0]),
            "y": lambda q, y: np.array([y[0] + q[1] * y[2], 2 * y[1] + math.cos(q[0]), y[2] + q[1] * y[0]]),
        },
    )
    hamel = continuous.hamel_vector_field(S, L, config)
    vak = continuous.vakonomic_vector_field(S, L, [], config)
    worst = 0.0
    for _ in range(100):
        q = rng.uniform(-0.5, 0.5, 3)
        y = rng.uniform(-1, 1, 3)
        qdot, ydot = hamel(0.0, q, y)
        d = vak(0.0, VakonomicState(q, y, []))
        worst = max(worst, float(np.max(np.abs(np.concatenate([qdot - d.q, ydot - d.y_free])))))
    return worst


@invariant("continuous.operator_identity", "Hamel residual vs generalized Euler-Lagrange operator at mu = dL", 1e-7)
def _operator_identity(config: SolverConfig) -> float:
    rng = np.random.default_rng(7)
    cases = [structures.coordinate_frame(2), structures.so3_algebra(), structures.martinet_frame(),
             structures.scaled_frame([2.0, 0.5]), structures.knife_edge_structure()]
    worst = 0.0
    for draw in range(200):
        S = cases[draw % len(cases)]
        n, m = S.base_dim, S.fiber_rank
        L = _random_lagrangian(n, m, rng)
        q = rng.uniform(-1, 1, n)
        y = rng.uniform(-1, 1, m)
        jet = Jet(0.0, q, y, S.rho(q) @ y, rng.uniform(-1, 1, m))
        gap = continuous.hamel_residual(S, L, jet, config) - continuous.el_residual(S, continuous.differential(L, config),
                                                                                  jet, config)
        worst = max(worst, float(np.max(np.abs(gap))))
    return worst


@invariant("continuous.pontryagin_lq", "shooting extremal of the scalar LQ problem vs cosh(t - T)/cosh T", 1e-5)
def _pontryagin_lq(config: SolverConfig) -> float:
    S, gamma, L = _lq_problem()
    traj = continuous.pontryagin_shooting(S, gamma, L, [1.0], 1.0, dt=0.01, config=config)
    exact = np.cosh(traj.times - 1.0) / math.cosh(1.0)
    return float(np.max(np.abs(traj.column("q1") - exact)))


@invariant("continuous.pontryagin_consistency", "reduced Hamiltonian flow vs the three Pontryagin residual blocks", 1e-7)
def _pontryagin_consistency(config: SolverConfig) -> float:
    rng = np.random.default_rng(8)
    S = structures.coordinate_frame(2)
    gamma = ControlField(1, lambda q, u: np.array([q[1], -math.sin(q[0]) + u[0]]))
    L = ScalarField(("q", "u"), lambda q, u: 0.5 * (q[0] ** 2 + q[1] ** 2 + u[0] ** 2),
                    {"q": lambda q, u: q, "u": lambda q, u: u})
    field = continuous.hamilton_vector_field(S, continuous.pontryagin_hamiltonian(S, gamma, L, config=config), config)
    worst = 0.0
    for _ in range(50):
        q = rng.uniform(-1, 1, 2)
        mu = rng.uniform(-1, 1, 2)
        qdot, mudot = field(0.0, q, mu)
        u = continuous.solve_control(S, gamma, L, q, mu, config=config)
        blocks = continuous.pontryagin_residual(S, gamma, L, PontryaginState(q, mu, u, qdot, mudot), config)
        worst = max(worst, max(float(np.max(np.abs(b))) for b in blocks))
    return worst


@invariant("continuous.dirac_step", "secondary constraint {q2, H} = p2 for H = |p|^2/2 + q1", 1e-10)
def _dirac_step(config: SolverConfig) -> float:
    rng = np.random.default_rng(9)
    H = ScalarField(("q", "p"), lambda q, p: 0.5 * float(p @ p) + q[0],
                    {"q": lambda q, p: np.array([1.0, 0.0]), "p": lambda q, p: p})
    phi = ScalarField(("q", "p"), lambda q, p: q[1],
                      {"q": lambda q, p: np.array([0.0, 1.0]), "p": lambda q, p: np.zeros(2)})
    worst = 0.0
    for q, p in rng.uniform(-2, 2, (50, 2, 2)):
        residual = continuous.dirac_secondary_residual(H, [phi], q, p, [0.0], config)
        worst = max(worst, abs(float(residual[0]) - p[1]))
    return worst


# -- discrete ---------------------------------------------------------------------------------

@invariant("discrete.free_particle", "discrete free particle steps q_{k+1} = 2 q_k - q_{k-1} over 1000 steps", 1e-9)
def _discrete_free_particle(config: SolverConfig) -> float:
    Ld = discrete.midpoint_lagrangian(_kinetic([1.0, 1.0]), 0.1, 2)
    sigma = discrete.del_solve(Ld, [0.0, 0.0], [0.1, 0.05], 1000, config).configs
    return float(np.max(np.abs(sigma[2:] - 2.0 * sigma[1:-1] + sigma[:-2])))


@invariant("discrete.noether", "total momentum of a translation-invariant pair over 1000 steps", 1e-9)
def _discrete_noether(config: SolverConfig) -> float:
    L = ScalarField(
        ("q", "y"),
        lambda q, y: 0.5 * float(y @ y) - math.cos(q[0] - q[1]),
        {"q": lambda q, y: math.sin(q[0] - q[1]) * np.array([1.0, -1.0]), "y": lambda q, y: y},
    )
    Ld = discrete.midpoint_lagrangian(L, 0.05, 2)
    sigma = discrete.del_solve(Ld, [0.0, 1.0], [0.05, 0.98], 1000, config).configs
    total = np.array([np.sum(discrete.discrete_momentum(Ld, a, b, config)) for a, b in zip(sigma[:-1], sigma[1:])])
    return float(np.max(np.abs(total - total[0])))


def _midpoint_sho_error(h: float, config: SolverConfig) -> float:
    N = int(round(10.0 / h))
    Ld = discrete.midpoint_lagrangian(_sho(), h, 1)
    sigma = discrete.del_solve(Ld, [1.0], [math.cos(h)], N, config).configs[:, 0]
    return float(np.max(np.abs(sigma - np.cos(h * np.arange(N + 1)))))


@invariant("discrete.midpoint_order", "midpoint SHO error ratio when halving h from 0.02", 4.5, lower=3.5)
def _midpoint_order(config: SolverConfig) -> float:
    return _midpoint_sho_error(0.02, config) / _midpoint_sho_error(0.01, config)


def _lqr_solution(config: SolverConfig):
    sys = _lqr_system()
    path, controls, costates = discrete.discrete_ocp_solve(sys, [1.0], 20, config=config)
    return sys, path, controls, costates


@invariant("discrete.lqr_riccati", "discrete OCP controls vs backward Riccati feedback, N = 20", 1e-8)
def _lqr_riccati(config: SolverConfig) -> float:
    sys, _, controls, _ = _lqr_solution(config)
    gains = discrete.riccati_gains(1.1, 0.1, 1.0, 1.0, 0.1, 20)
    q, expected = 1.0, []
    for K in gains:
        u = -K * q
        expected.append(u)
        q = 1.1 * q + 0.1 * u
    return float(np.max(np.abs(controls[:, 0] - np.array(expected))))


@invariant("discrete.ocp_optimality", "cost decrease under +-1e-4 single-control perturbations", 1e-9)
def _ocp_optimality(config: SolverConfig) -> float:
    sys, _, controls, _ = _lqr_solution(config)
    base = discrete.rollout_cost(sys, [1.0], controls)
    worst = -math.inf
    for k in range(controls.shape[0]):
        for delta in (1e-4, -1e-4):
            perturbed = controls.copy()
            perturbed[k, 0] += delta
            worst = max(worst, base - discrete.rollout_cost(sys, [1.0], perturbed))
    return max(worst, 0.0)


@invariant("discrete.constrained_feasibility", "|Phi_d| along a unit-speed constrained trajectory", 1e-10)
def _constrained_feasibility(config: SolverConfig) -> float:
    h = 0.01
    L = ScalarField(("q", "y"), lambda q, y: 0.5 * float(y @ y) - q[1],
                    {"q": lambda q, y: np.array([0.0, -1.0]), "y": lambda q, y: y})
    speed = ScalarField(("q", "y"), lambda q, y: float(y @ y) - 1.0,
                        {"q": lambda q, y: np.zeros(2), "y": lambda q, y: 2.0 * y})
    Ld = discrete.midpoint_lagrangian(L, h, 2)
    Phi = discrete.midpoint_lagrangian(speed, h, 2)
    sigma = discrete.discrete_constrained_solve(Ld, [Phi], [0.0, 0.0], [h, 0.0], 100, config=config).configs
    return max(abs(Phi(a, b)) for a, b in zip(sigma[1:-1], sigma[2:]))


# -- groupoid ---------------------------------------------------------------------------------

def _identity_defects(config: SolverConfig):
    rng = np.random.default_rng(10)
    worst = {}
    for G in (groupoid.pair_groupoid(2), groupoid.so3_group().group):
        samples = [(rng.uniform(-1, 1, G.base_dim), rng.uniform(-1, 1, G.fiber_dim)) for _ in range(100)]
        for key, value in groupoid.check_identities(G, samples, config).items():
            worst[key] = max(worst.get(key, 0.0), value)
    return worst


@invariant("groupoid.identities_first_order", "units and first-order identity relations of built-in groupoids", 1e-7)
def _identities_first_order(config: SolverConfig) -> float:
    worst = _identity_defects(config)
    return max(worst["target"], worst["right_unit"], worst["left_unit"], worst["first_order"])


@invariant("groupoid.identities_second_order", "vanishing second derivatives of the product at the units", 1e-5)
def _identities_second_order(config: SolverConfig) -> float:
    return _identity_defects(config)["second_order"]


@invariant("groupoid.pair_equivalence", "pair-groupoid DEL residual vs Q x Q DEL residual", 1e-6)
def _pair_equivalence(config: SolverConfig) -> float:
    rng = np.random.default_rng(11)
    L = ScalarField(
        ("q", "y"),
        lambda q, y: 0.5 * float(y @ y) + math.cos(q[0]) * q[1],
        {"q": lambda q, y: np.array([-math.sin(q[0]) * q[1], math.cos(q[0])]), "y": lambda q, y: y},
    )
    Ld = discrete.midpoint_lagrangian(L, 0.1, 2)
    G = groupoid.pair_groupoid(2)
    Lg = groupoid.pair_lagrangian(Ld, config)
    worst = 0.0
    for q0, q1, q2 in rng.uniform(-1, 1, (500, 3, 2)):
        g = GroupoidElement(q0, q1 - q0)
        h = GroupoidElement(G.b(q0, q1 - q0), q2 - q1)
        gap = groupoid.groupoid_del_residual(G, Lg, g, h, config) - discrete.del_residual(Ld, q0, q1, q2, config)
        worst = max(worst, float(np.max(np.abs(gap))))
    return worst


@invariant("groupoid.ocp_pair_equivalence", "pair-groupoid optimal control vs the discrete LQR solution", 1e-8)
def _ocp_pair_equivalence(config: SolverConfig) -> float:
    _, _, controls, costates = _lqr_solution(config)
    sys = _lqr_system()
    increment = ControlField(1, lambda q, u: sys.gamma(q, u) - q, lambda q, u: np.array([[0.1]]),
                             lambda q, u: np.array([[0.1]]))
    solution = groupoid.groupoid_ocp_solve(groupoid.pair_groupoid(1), GroupoidControlSystem(increment, sys.cost),
                                           [1.0], 20, config=config)
    return max(float(np.max(np.abs(solution.controls - controls))),
               float(np.max(np.abs(solution.mu2 + costates))))


@invariant("groupoid.lie_poisson_casimir", "|mu| under 10^4 SO(3) coadjoint updates", 1e-12)
def _discrete_casimir(config: SolverConfig) -> float:
    rng = np.random.default_rng(12)
    Gp = groupoid.so3_group()
    mu = np.array([1.0, 2.0, 3.0])
    norm0 = float(np.linalg.norm(mu))
    worst = 0.0
    for v in rng.uniform(-1, 1, (10_000, 3)):
        mu = groupoid.lie_poisson_update(Gp, v, mu)
        worst = max(worst, abs(float(np.linalg.norm(mu)) - norm0))
    return worst


@invariant("groupoid.momentum_update", "discrete Euler-Poincare momenta vs coadjoint update", 1e-9)
def _momentum_update(config: SolverConfig) -> float:
    Gp = groupoid.so3_group()
    Ld = ScalarField(("q", "v"), lambda q, v: 0.5 * float(v @ (INERTIA * v)),
                     {"q": lambda q, v: np.zeros(0), "v": lambda q, v: INERTIA * v}, name="rigid body L_d")
    seq = groupoid.discrete_euler_poincare_solve(Gp, Ld, [0.1, 0.05, 0.02], 100, config)
    V, MU = seq.all_steps(), seq.all_momenta()
    return max(float(np.max(np.abs(MU[k + 1] - groupoid.lie_poisson_update(Gp, V[k], MU[k])))) for k in range(len(seq)))


# -- command-line plumbing --------------------------------------------------------------------

_LEAVES = ("q1", "q2", "y1", "t", "0.5", "2", "3.25", "pi")
_WRAPPED = (
    "sin({})", "cos({})", "exp(sin({}))", "sqrt(1 + ({})^2)", "log(2 + cos({}))", "abs({})", "-({})",
    "({})^2", "({})^3", "1 / (1 + ({})^2)",
)
_BINARY = ("{} + {}", "{} - {}", "{} * {}", "({}) - ({})", "{} * ({} + 1)")

MALFORMED = (
    "q1 +", "(q1", "q1)", "2**3", "sin(q1", "foo(q1)", "q1 q2", "3 +* 4", ")", "",
    "q9", "y0", "sin()", "sin(q1, q2)", "1..2", "q1 @ 2", "q1 ^", "exp q1", "x1 + 1", "1e999",
)


def _random_expression(rng: np.random.Generator, depth: int) -> str:
    if depth == 0 or rng.random() < 0.2:
        return str(rng.choice(_LEAVES))
    if rng.random() < 0.5:
        return str(rng.choice(_WRAPPED)).format(_random_expression(rng, depth - 1))
    return str(rng.choice(_BINARY)).format(_random_expression(rng, depth - 1), _random_expression(rng, depth - 1))


@invariant("cli.parser_round_trip", "parse -> print -> parse keeps the value of 200 random expressions", 1e-12)
def _parser_round_trip(config: SolverConfig) -> float:
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(200):
        node = expressions.parse_expr(_random_expression(rng, 4))
        again = expressions.parse_expr(expressions.print_expr(node))
        for _ in range(3):
            env = {"q1": rng.uniform(-1, 1), "q2": rng.uniform(-1, 1), "y1": rng.uniform(-1, 1), "t": rng.uniform(0, 1)}
            a, b = expressions.evaluate(node, env), expressions.evaluate(again, env)
            worst = max(worst, abs(a - b) / max(1.0, abs(a)))
    return worst


@invariant("cli.parser_error_positions", "malformed expressions rejected with a character position", 0.0)
def _parser_error_positions(config: SolverConfig) -> float:
    unreported = 0
    for text in MALFORMED:
        try:
            expressions.parse_expr(text, {"q": 2, "y": 2})
            unreported += 1
        except ExprSyntaxError as e:
            unreported += e.position < 0
    return float(unreported)


@invariant("cli.csv_round_trip", "written trajectories read back bit-identically", 0.0)
def _csv_round_trip(config: SolverConfig) -> float:
    spec = RunService.apply_overrides(CatalogService.get("pendulum"), t1=0.5, dt=0.01)
    traj = RunService.run(spec, config).trajectory
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "pendulum.csv"
        RunService.write_csv(traj, path)
        back = RunService.read_csv(path)
    same = (back.labels == traj.labels and back.time_label == traj.time_label
            and np.array_equal(back.times, traj.times) and np.array_equal(back.states, traj.states))
    return 0.0 if same else 1.0


@invariant("cli.catalog_completeness", "named example problems missing from the catalog", 0.0)
def _catalog_completeness(config: SolverConfig) -> float:
    return float(len(set(NAMED_EXAMPLES) - set(CatalogService.names())))


class CheckService:
    @staticmethod
    def names() -> List[str]:
        return [inv.name for inv in INVARIANTS]

    @staticmethod
    def select(only: Optional[str] = None) -> List[Invariant]:
        """
        `only` filters by name: glob patterns (`groupoid.*`) match whole names, plain text is a
        substring match, and the empty string selects nothing.
        """
        if only is None:
            return list(INVARIANTS)
        if only == "":
            return []
        if any(c in only for c in "*?["):
            return [inv for inv in INVARIANTS if fnmatchcase(inv.name, only)]
        return [inv for inv in INVARIANTS if only in inv.name]

    @staticmethod
    def evaluate(inv: Invariant, config: Optional[SolverConfig] = None) -> InvariantResult:
        config = resolve_config(config)
        start = time.perf_counter()
        value, detail = None, ""
        try:
            value = float(inv.check(config))
            passed = inv.accepts(value)
        except Exception as e:
            logger.error(f"invariant {inv.name} raised {type(e).__name__}: {e}")
            passed, detail = False, f"{type(e).__name__}: {e}"
        seconds = time.perf_counter() - start
        if not passed and not detail:
            band = f"[{inv.lower:g}, {inv.tolerance:g}]" if inv.lower is not None else f"<= {inv.tolerance:g}"
            detail = f"measured {value:.3e}, expected {band}"
        logger.info(f"{inv.name}: {'pass' if passed else 'FAIL'} ({seconds:.2f}s)")
        return InvariantResult(name=inv.name, description=inv.description, passed=passed,
                               value=value if value is None or math.isfinite(value) else None,
                               tolerance=inv.tolerance, detail=detail, seconds=seconds)

    @staticmethod
    def run(only: Optional[str] = None, config: Optional[SolverConfig] = None,
            max_workers: Optional[int] = None) -> CheckReport:
        config = resolve_config(config)
        selected = CheckService.select(only)
        if not selected:
            logger.info("no invariants selected")
            return CheckReport(results=[], passed=0, failed=0)
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(lambda inv: CheckService.evaluate(inv, config), selected))
        passed = sum(r.passed for r in results)
        logger.info(f"invariant suite: {passed}/{len(results)} passed")
        return CheckReport(results=results, passed=passed, failed=len(results) - passed)
