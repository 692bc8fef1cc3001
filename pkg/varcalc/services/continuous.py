"""
Continuous equations of motion derived from one Euler-Lagrange operator over
algebroid data (rho, C): residuals and explicit vector fields for the Lagrangian,
Hamiltonian, vakonomic, constrained-Hamiltonian and optimal-control cases.

Sign convention: residual_A = d/dt mu~_A - rho^j_A mu_j + C^c_AB y^B mu~_c, so that on
a Lie algebra the Lagrangian flow is d/dt(dl/dxi) = ad*_xi dl/dxi.
"""
from typing import Callable, List, Optional, Sequence, Tuple
import logging

import numpy as np

from varcalc.config import SolverConfig, resolve_config
from varcalc.exceptions import (
    AdmissibilityError,
    DegenerateLagrangianError,
    DimensionError,
    InvalidArgumentError,
    SingularMatrixError,
)
from varcalc.models.core import AlgebroidStructure, ControlField, CotangentValue, ScalarField, as_vector
from varcalc.models.states import Jet, PontryaginState, VakonomicState
from varcalc.models.trajectory import Trajectory
from varcalc.services import numerics

logger = logging.getLogger(__name__)

MuField = Callable[[np.ndarray, np.ndarray], CotangentValue]


def contract_bracket(C: np.ndarray, y: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """(C^c_AB y^B mu_c)_A"""
    return np.einsum("cab,b,c->a", C, y, mu)


def _labels(prefix: str, count: int, start: int = 1) -> List[str]:
    return [f"{prefix}{i}" for i in range(start, start + count)]


def _check_jet(structure: AlgebroidStructure, jet: Jet, config: SolverConfig) -> None:
    if jet.q.size != structure.base_dim or jet.y.size != structure.fiber_rank:
        raise DimensionError(f"jet of shape (n={jet.q.size}, m={jet.y.size}) for structure "
                             f"(n={structure.base_dim}, m={structure.fiber_rank})")
    defect = jet.qdot - structure.rho(jet.q) @ jet.y
    if defect.size and float(np.max(np.abs(defect))) > config.admissibility_tol:
        raise AdmissibilityError(f"jet is not admissible: |qdot - rho y| = {np.max(np.abs(defect)):.3e}")


def el_residual(structure: AlgebroidStructure, mu_field: MuField, jet: Jet,
                config: Optional[SolverConfig] = None) -> np.ndarray:
    """
    Generalized Euler-Lagrange operator at a jet.

    d/dt mu~ is expanded by the chain rule: (dmu~/dq) qdot + (dmu~/dy) ydot.
    """
    config = resolve_config(config)
    _check_jet(structure, jet, config)
    m = structure.fiber_rank

    def fiber(q, y):
        return as_vector(mu_field(q, y).mu_fiber, m, "mu~")

    mu = mu_field(jet.q, jet.y)
    mu_tilde = as_vector(mu.mu_fiber, m, "mu~")
    mu_base = as_vector(mu.mu_base, structure.base_dim, "mu")
    scale = config.hessian_step_scale
    dmu = numerics.fd_jac(lambda y: fiber(jet.q, y), jet.y, config, scale=scale, out_dim=m) @ jet.ydot
    if structure.base_dim:
        dmu = dmu + numerics.fd_jac(lambda q: fiber(q, jet.y), jet.q, config, scale=scale, out_dim=m) @ jet.qdot
    rho = structure.rho(jet.q)
    return dmu - rho.T @ mu_base + contract_bracket(structure.C(jet.q, config), jet.y, mu_tilde)


def differential(L: ScalarField, config: Optional[SolverConfig] = None) -> MuField:
    """mu = dL as a mu_field: (dL/dq, dL/dy)."""

    def mu(q, y):
        return CotangentValue(L.grad("q", config, q=q, y=y), L.grad("y", config, q=q, y=y))

    return mu


def hamel_residual(structure: AlgebroidStructure, L: ScalarField, jet: Jet,
                   config: Optional[SolverConfig] = None) -> np.ndarray:
    """d/dt(dL/dy^A) - rho^i_A dL/dq^i + C^c_AB y^B dL/dy^c"""
    config = resolve_config(config)
    _check_jet(structure, jet, config)
    blocks = dict(t=jet.t, q=jet.q, y=jet.y)
    Ly = L.grad("y", config, **blocks)
    Lq = L.grad("q", config, **blocks)
    dLy = L.hessian("y", "y", config, **blocks) @ jet.ydot + L.hessian("y", "q", config, **blocks) @ jet.qdot
    if "t" in L.arity:
        dLy = dLy + L.hessian("y", "t", config, **blocks)[:, 0]
    rho = structure.rho(jet.q)
    return dLy - rho.T @ Lq + contract_bracket(structure.C(jet.q, config), jet.y, Ly)


def hamel_vector_field(structure: AlgebroidStructure, L: ScalarField,
                       config: Optional[SolverConfig] = None) -> Callable[[float, np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]:
    """
    Explicit Hamel equations.

    M ydot = rho^T dL/dq - C(y, dL/dy) - (d2L/dy dq) rho y, M = d2L/dy dy; qdot = rho y.

    Raises:
        DegenerateLagrangianError: M is singular at the evaluation point
    """
    config = resolve_config(config)

    def field(t, q, y):
        q = as_vector(q, structure.base_dim, "q")
        y = as_vector(y, structure.fiber_rank, "y")
        blocks = dict(t=t, q=q, y=y)
        rho = structure.rho(q)
        qdot = rho @ y
        Lq = L.grad("q", config, **blocks)
        Ly = L.grad("y", config, **blocks)
        G = rho.T @ Lq - contract_bracket(structure.C(q, config), y, Ly)
        rhs = G - L.hessian("y", "q", config, **blocks) @ qdot
        if "t" in L.arity:
            rhs = rhs - L.hessian("y", "t", config, **blocks)[:, 0]
        M = L.hessian("y", "y", config, **blocks)
        ydot, _ = numerics.linsolve(M, rhs, config, point=np.concatenate([q, y]),
                                    error_cls=DegenerateLagrangianError, what=f"fiber Hessian of {L.name or 'L'}")
        return qdot, ydot

    return field


def hamilton_vector_field(structure: AlgebroidStructure, H: ScalarField,
                          config: Optional[SolverConfig] = None) -> Callable[[float, np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]:
    """qdot = rho dH/dp,  pdot = -rho^T dH/dq - C(dH/dp, p)"""
    config = resolve_config(config)

    def field(t, q, p):
        q = as_vector(q, structure.base_dim, "q")
        p = as_vector(p, structure.fiber_rank, "p")
        blocks = dict(t=t, q=q, p=p)
        Hp = H.grad("p", config, **blocks)
        Hq = H.grad("q", config, **blocks)
        rho = structure.rho(q)
        return rho @ Hp, -rho.T @ Hq - contract_bracket(structure.C(q, config), Hp, p)

    return field


def legendre_transform(structure: AlgebroidStructure, L: ScalarField,
                       config: Optional[SolverConfig] = None) -> ScalarField:
    """
    H(q, p) = p.y* - L(q, y*) with y* solving p = dL/dy (Newton seeded at y = p).

    dH/dp = y* and dH/dq = -dL/dq(q, y*).
    """
    config = resolve_config(config)

    def velocity(q, p):
        def F(y):
            return p - L.grad("y", config, q=q, y=y)

        def J(y):
            return -L.hessian("y", "y", config, q=q, y=y)

        return numerics.newton(F, p, config, jac=J, what="Legendre transform")

    def value(q, p):
        y = velocity(q, p)
        return float(p @ y) - L(q=q, y=y)

    def grad_p(q, p):
        return velocity(q, p)

    def grad_q(q, p):
        return -L.grad("q", config, q=q, y=velocity(q, p))

    return ScalarField(("q", "p"), value, {"q": grad_q, "p": grad_p}, name=f"legendre({L.name})")


def lagrangian_energy(L: ScalarField, config: Optional[SolverConfig] = None) -> ScalarField:
    """E(q, y) = y.dL/dy - L"""

    def value(q, y):
        return float(y @ L.grad("y", config, q=q, y=y)) - L(q=q, y=y)

    return ScalarField(("q", "y"), value, name=f"energy({L.name})")


def solved_constraints(fn: Callable[[np.ndarray, np.ndarray], np.ndarray], r: int) -> List[ScalarField]:
    """Split a vector function (q, y_free) -> R^r into r scalar fields."""
    return [ScalarField(("q", "y"), (lambda q, y, a=a: float(as_vector(fn(q, y), r, "phi")[a])), name=f"phi{a + 1}")
            for a in range(r)]


def vakonomic_vector_field(structure: AlgebroidStructure, l: ScalarField, phi: Sequence[ScalarField],
                           config: Optional[SolverConfig] = None) -> Callable[[float, VakonomicState], VakonomicState]:
    """
    Vakonomic equations in quasi-coordinates for constraints y^alpha = phi^alpha(q, y^a).

    The fiber is ordered free components first, constrained last. With
    Lam = l - mu~_alpha phi^alpha, mu_i = dLam/dq^i, pi_a = dLam/dy^a and
    G_A = rho^i_A mu_i - C^c_AB y^B mu~_c over the full fiber (mu~ = (pi, mu~_alpha)):

        qdot = rho y,  d/dt mu~_alpha = G_alpha,
        (d2Lam/dy dy) ydot_a = G_a - (d2Lam/dy dq) qdot + (dphi/dy_a)^T d/dt mu~_alpha
    """
    config = resolve_config(config)
    phi = list(phi)
    m = structure.fiber_rank
    r = len(phi)
    free = m - r
    if r > m:
        raise InvalidArgumentError(f"{r} constraints for a fiber of rank {m}")

    def field(t, state: VakonomicState) -> VakonomicState:
        q = as_vector(state.q, structure.base_dim, "q")
        ya = as_vector(state.y_free, free, "y_free")
        mu_con = as_vector(state.mu_con, r, "mu_con")
        blocks = dict(t=t, q=q, y=ya)
        y = np.concatenate([ya, [c(**blocks) for c in phi]])
        rho = structure.rho(q)
        qdot = rho @ y

        mu_base = l.grad("q", config, **blocks)
        pi = l.grad("y", config, **blocks)
        M = l.hessian("y", "y", config, **blocks)
        Lyq = l.hessian("y", "q", config, **blocks)
        phi_y = np.zeros((r, free))
        for alpha, c in enumerate(phi):
            mu_base = mu_base - mu_con[alpha] * c.grad("q", config, **blocks)
            pi = pi - mu_con[alpha] * c.grad("y", config, **blocks)
            M = M - mu_con[alpha] * c.hessian("y", "y", config, **blocks)
            Lyq = Lyq - mu_con[alpha] * c.hessian("y", "q", config, **blocks)
            phi_y[alpha] = c.grad("y", config, **blocks)

        G = rho.T @ mu_base - contract_bracket(structure.C(q, config), y, np.concatenate([pi, mu_con]))
        mu_dot = G[free:]
        rhs = G[:free] - Lyq @ qdot + phi_y.T @ mu_dot
        if "t" in l.arity:
            rhs = rhs - l.hessian("y", "t", config, **blocks)[:, 0]
        ydot, _ = numerics.linsolve(M, rhs, config, point=state.to_vector(),
                                    error_cls=DegenerateLagrangianError, what="reduced vakonomic mass matrix")
        return VakonomicState(qdot, ydot, mu_dot)

    return field


def poisson_bracket(f: ScalarField, g: ScalarField, config: Optional[SolverConfig] = None, **blocks) -> float:
    """{f, g} = df/dq . dg/dp - df/dp . dg/dq"""
    return float(f.grad("q", config, **blocks) @ g.grad("p", config, **blocks)
                 - f.grad("p", config, **blocks) @ g.grad("q", config, **blocks))


def dirac_secondary_residual(H: ScalarField, phi: Sequence[ScalarField], q, p, lam,
                             config: Optional[SolverConfig] = None) -> np.ndarray:
    """{phi^alpha, H} + lambda_beta {phi^alpha, phi^beta}"""
    q = as_vector(q)
    p = as_vector(p, q.size, "p")
    lam = as_vector(lam, len(phi), "lambda")
    blocks = dict(q=q, p=p)
    out = np.empty(len(phi))
    for a, fa in enumerate(phi):
        out[a] = poisson_bracket(fa, H, config, **blocks)
        for b, fb in enumerate(phi):
            if lam[b] != 0.0:
                out[a] += lam[b] * poisson_bracket(fa, fb, config, **blocks)
    return out


def dirac_multipliers(H: ScalarField, phi: Sequence[ScalarField], q, p,
                      config: Optional[SolverConfig] = None) -> np.ndarray:
    """
    Solve {phi, phi} lambda = -{phi, H} for the multipliers.

    Raises:
        SingularMatrixError: {phi, phi} is singular, so the conditions are genuinely
            secondary constraints (the algorithm is not iterated further)
    """
    config = resolve_config(config)
    q = as_vector(q)
    p = as_vector(p, q.size, "p")
    blocks = dict(q=q, p=p)
    A = np.array([[poisson_bracket(fa, fb, config, **blocks) for fb in phi] for fa in phi]).reshape(len(phi), len(phi))
    b = np.array([poisson_bracket(fa, H, config, **blocks) for fa in phi])
    lam, _ = numerics.linsolve(A, -b, config, point=np.concatenate([q, p]), what="constraint bracket matrix")
    return lam


def _pontryagin_parts(structure, gamma, L, q, mu, u, config):
    blocks = dict(q=q, u=u)
    Gam = gamma(q, u)
    if Gam.size != structure.fiber_rank:
        raise DimensionError(f"control field has {Gam.size} components, fiber rank is {structure.fiber_rank}")
    Hu = gamma.jac_u(q, u, config).T @ mu - L.grad("u", config, **blocks)
    if structure.base_dim:
        Hq = gamma.jac_q(q, u, config).T @ mu - L.grad("q", config, **blocks)
    else:
        Hq = np.zeros(0)
    return Gam, Hu, Hq


def pontryagin_residual(structure: AlgebroidStructure, gamma: ControlField, L: ScalarField, state: PontryaginState,
                        config: Optional[SolverConfig] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Extremality conditions for H = mu~.Gamma - L.

    Returns:
        (dH/du, mudot + rho^T dH/dq + C(Gamma, mu~), qdot - rho Gamma)
    """
    config = resolve_config(config)
    if state.qdot is None or state.mudot is None:
        raise InvalidArgumentError("pontryagin_residual needs qdot and mudot on the state")
    q = as_vector(state.q, structure.base_dim, "q")
    mu = as_vector(state.mu_fiber, structure.fiber_rank, "mu~")
    u = as_vector(state.u, gamma.control_dim, "u")
    Gam, Hu, Hq = _pontryagin_parts(structure, gamma, L, q, mu, u, config)
    rho = structure.rho(q)
    costate = state.mudot + rho.T @ Hq + contract_bracket(structure.C(q, config), Gam, mu)
    return Hu, costate, state.qdot - rho @ Gam


def solve_control(structure: AlgebroidStructure, gamma: ControlField, L: ScalarField, q, mu,
                  u0=None, config: Optional[SolverConfig] = None) -> np.ndarray:
    """u with dH/du(q, mu~, u) = 0, by Newton from u0 (zeros by default)."""
    config = resolve_config(config)
    q = as_vector(q, structure.base_dim, "q")
    mu = as_vector(mu, structure.fiber_rank, "mu~")
    u0 = np.zeros(gamma.control_dim) if u0 is None else as_vector(u0, gamma.control_dim, "u")

    def stationarity(u):
        return gamma.jac_u(q, u, config).T @ mu - L.grad("u", config, q=q, u=u)

    return numerics.newton(stationarity, u0, config, what="control stationarity")


def pontryagin_hamiltonian(structure: AlgebroidStructure, gamma: ControlField, L: ScalarField,
                           u_seed=None, config: Optional[SolverConfig] = None) -> ScalarField:
    """
    H*(q, p) = p.Gamma(q, u*) - L(q, u*) with u* eliminated through dH/du = 0.

    By the envelope property dH*/dp = Gamma(q, u*) and dH*/dq = Gamma_q^T p - L_q.
    """
    config = resolve_config(config)

    def control(q, p):
        return solve_control(structure, gamma, L, q, p, u_seed, config)

    def value(q, p):
        u = control(q, p)
        return float(p @ gamma(q, u)) - L(q=q, u=u)

    def grad_p(q, p):
        return gamma(q, control(q, p))

    def grad_q(q, p):
        u = control(q, p)
        return gamma.jac_q(q, u, config).T @ p - L.grad("q", config, q=q, u=u)

    return ScalarField(("q", "p"), value, {"q": grad_q, "p": grad_p}, name="pontryagin")


def integrate_hamel(structure: AlgebroidStructure, L: ScalarField, q0, y0, t1: float, t0: float = 0.0,
                    dt: Optional[float] = None, config: Optional[SolverConfig] = None) -> Trajectory:
    config = resolve_config(config)
    n, m = structure.base_dim, structure.fiber_rank
    field = hamel_vector_field(structure, L, config)

    def rhs(t, x):
        qdot, ydot = field(t, x[:n], x[n:])
        return np.concatenate([qdot, ydot])

    x0 = np.concatenate([as_vector(q0, n, "q0"), as_vector(y0, m, "y0")])
    logger.info(f"integrating Hamel equations of {L.name or 'L'} on {structure.name} over [{t0}, {t1}]")
    return numerics.rk4(rhs, x0, t0, t1, dt or config.rk_dt, _labels("q", n) + _labels("y", m))


def integrate_hamilton(structure: AlgebroidStructure, H: ScalarField, q0, p0, t1: float, t0: float = 0.0,
                       dt: Optional[float] = None, config: Optional[SolverConfig] = None) -> Trajectory:
    config = resolve_config(config)
    n, m = structure.base_dim, structure.fiber_rank
    field = hamilton_vector_field(structure, H, config)

    def rhs(t, x):
        qdot, pdot = field(t, x[:n], x[n:])
        return np.concatenate([qdot, pdot])

    x0 = np.concatenate([as_vector(q0, n, "q0"), as_vector(p0, m, "p0")])
    logger.info(f"integrating Hamilton equations of {H.name or 'H'} on {structure.name} over [{t0}, {t1}]")
    return numerics.rk4(rhs, x0, t0, t1, dt or config.rk_dt, _labels("q", n) + _labels("p", m))


def integrate_vakonomic(structure: AlgebroidStructure, l: ScalarField, phi: Sequence[ScalarField], state0: VakonomicState,
                        t1: float, t0: float = 0.0, dt: Optional[float] = None,
                        config: Optional[SolverConfig] = None) -> Trajectory:
    """Columns q*, y* (free components) and mu* (constrained momenta, labelled by fiber index)."""
    config = resolve_config(config)
    n, m, r = structure.base_dim, structure.fiber_rank, len(phi)
    free = m - r
    field = vakonomic_vector_field(structure, l, phi, config)

    def rhs(t, x):
        return field(t, VakonomicState.from_vector(x, n, free)).to_vector()

    labels = _labels("q", n) + _labels("y", free) + _labels("mu", r, start=free + 1)
    logger.info(f"integrating vakonomic equations with {r} constraints on {structure.name} over [{t0}, {t1}]")
    return numerics.rk4(rhs, state0.to_vector(), t0, t1, dt or config.rk_dt, labels)


def pontryagin_shooting(structure: AlgebroidStructure, gamma: ControlField, L: ScalarField, q0, T: float,
                        qT=None, mu0_guess=None, u_seed=None, dt: Optional[float] = None,
                        config: Optional[SolverConfig] = None) -> Trajectory:
    """
    Single shooting on mu~(0) for the extremal flow of H*.

    With `qT` the terminal condition is q(T) = qT (needs n == m); otherwise mu~(T) = 0.
    Columns q*, mu*, u*.

    Raises:
        InvalidArgumentError: T <= 0, or a fixed endpoint with n != m
        ConvergenceError: the shooting Newton does not converge
    """
    config = resolve_config(config)
    if not T > 0:
        raise InvalidArgumentError(f"optimal-control horizon must be positive, got {T}")
    n, m, k = structure.base_dim, structure.fiber_rank, gamma.control_dim
    q0 = as_vector(q0, n, "q0")
    if qT is not None:
        qT = as_vector(qT, n, "qT")
        if n != m:
            raise InvalidArgumentError(f"fixed endpoint shooting needs n == m, got n={n}, m={m}")
    dt = dt or config.rk_dt
    H = pontryagin_hamiltonian(structure, gamma, L, u_seed, config)
    field = hamilton_vector_field(structure, H, config)

    def rhs(t, x):
        qdot, mudot = field(t, x[:n], x[n:])
        return np.concatenate([qdot, mudot])

    def flow(mu0):
        return numerics.rk4(rhs, np.concatenate([q0, mu0]), 0.0, T, dt)

    iterations = [0]

    def terminal(mu0):
        iterations[0] += 1
        xT = flow(mu0).final
        defect = xT[:n] - qT if qT is not None else xT[n:]
        logger.debug(f"shooting pass {iterations[0]}: terminal defect {np.max(np.abs(defect), initial=0.0):.3e}")
        return defect

    mu0 = np.zeros(m) if mu0_guess is None else as_vector(mu0_guess, m, "mu0")
    mu0 = numerics.newton(terminal, mu0, config, what="shooting")
    traj = flow(mu0)
    controls = np.array([solve_control(structure, gamma, L, x[:n], x[n:], u_seed, config) for x in traj.states])
    logger.info(f"shooting converged after {iterations[0]} integrations, mu~(0) = {mu0}")
    return Trajectory(traj.times, np.hstack([traj.states, controls.reshape(len(traj), k)]),
                      tuple(_labels("q", n) + _labels("mu", m) + _labels("u", k)))
