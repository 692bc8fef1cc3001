"""
Discrete variational calculus on Q x Q: discrete Euler-Lagrange residuals and
steppers, constrained stepping with multipliers, discrete optimal control and
discrete Noether momenta.

Endpoints sigma(0) and sigma(N) are data; the equations are imposed at 1 <= k <= N-1.
"""
from typing import List, Optional, Sequence, Tuple
import logging

import numpy as np

from varcalc.config import SolverConfig, resolve_config
from varcalc.exceptions import InvalidArgumentError
from varcalc.models.core import ScalarField, as_vector
from varcalc.models.discrete import DiscreteControlSystem, DiscreteLagrangian, DiscretePath
from varcalc.services import numerics

logger = logging.getLogger(__name__)


def midpoint_lagrangian(L: ScalarField, h: float, n: int, name: str = "") -> DiscreteLagrangian:
    """
    L_d(a, b) = h L((a+b)/2, (b-a)/h).

    Slot derivatives: D1 = (h/2) L_q - L_y and D2 = (h/2) L_q + L_y at the midpoint.
    """
    if not h > 0:
        raise InvalidArgumentError(f"time step must be positive, got {h}")

    def blocks(a, b):
        return dict(t=0.0, q=0.5 * (a + b), y=(b - a) / h)

    def value(a, b):
        return h * L(**blocks(a, b))

    def d1(a, b):
        z = blocks(a, b)
        return 0.5 * h * L.grad("q", **z) - L.grad("y", **z)

    def d2(a, b):
        z = blocks(a, b)
        return 0.5 * h * L.grad("q", **z) + L.grad("y", **z)

    return DiscreteLagrangian(n, value, d1, d2, name=name or f"midpoint({L.name}, h={h})")


def del_residual(Ld: DiscreteLagrangian, q_prev, q, q_next, config: Optional[SolverConfig] = None) -> np.ndarray:
    """D1 L_d(q, q_next) + D2 L_d(q_prev, q)"""
    return Ld.D1(q, q_next, config) + Ld.D2(q_prev, q, config)


def del_step(Ld: DiscreteLagrangian, q_prev, q, guess=None, config: Optional[SolverConfig] = None) -> np.ndarray:
    """q_next solving the discrete Euler-Lagrange equation; Newton from 2q - q_prev by default."""
    q_prev = as_vector(q_prev, Ld.n, "q_prev")
    q = as_vector(q, Ld.n, "q")
    guess = 2.0 * q - q_prev if guess is None else as_vector(guess, Ld.n, "guess")
    return numerics.newton(lambda z: del_residual(Ld, q_prev, q, z, config), guess, config,
                           what="discrete Euler-Lagrange", ensure_regular=True)


def del_solve(Ld: DiscreteLagrangian, q0, q1, N: int, config: Optional[SolverConfig] = None) -> DiscretePath:
    """sigma(0..N) from the two initial configurations."""
    if N < 1:
        raise InvalidArgumentError(f"a discrete path needs N >= 1, got {N}")
    configs = [as_vector(q0, Ld.n, "q0"), as_vector(q1, Ld.n, "q1")]
    for _ in range(N - 1):
        configs.append(del_step(Ld, configs[-2], configs[-1], config=config))
    logger.info(f"discrete Euler-Lagrange: {N} steps of {Ld.name or 'L_d'}")
    return DiscretePath(np.array(configs))


def discrete_momentum(Ld: DiscreteLagrangian, q_prev, q, config: Optional[SolverConfig] = None) -> np.ndarray:
    """p_k = D2 L_d(q_prev, q)"""
    return Ld.D2(q_prev, q, config)


def discrete_action(Ld: DiscreteLagrangian, configs) -> float:
    configs = np.asarray(configs, dtype=float)
    return float(sum(Ld(configs[k], configs[k + 1]) for k in range(configs.shape[0] - 1)))


def discrete_constrained_residual(Ld: DiscreteLagrangian, Phi: Sequence[DiscreteLagrangian], q_prev, q, q_next,
                                  lam_prev, lam_next, config: Optional[SolverConfig] = None) -> np.ndarray:
    """
    D1(L_d + lam^{k+1} Phi)(q, q_next) + D2(L_d + lam^k Phi)(q_prev, q), followed by Phi(q, q_next).
    """
    out = del_residual(Ld, q_prev, q, q_next, config)
    for alpha, c in enumerate(Phi):
        out = out + lam_next[alpha] * c.D1(q, q_next, config) + lam_prev[alpha] * c.D2(q_prev, q, config)
    return np.concatenate([out, [c(q, q_next) for c in Phi]])


def discrete_constrained_step(Ld: DiscreteLagrangian, Phi: Sequence[DiscreteLagrangian], q_prev, q, lam_prev=None,
                              guess=None, lam_guess=None,
                              config: Optional[SolverConfig] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    (q_next, lam^{k+1}) from (q_prev, q, lam^k); lam^{k+1} pairs with D1 and lam^k with D2.

    Raises:
        InvalidArgumentError: more constraints than configuration dimensions
    """
    Phi = list(Phi)
    n, r = Ld.n, len(Phi)
    if r > n:
        raise InvalidArgumentError(f"{r} constraints on a configuration space of dimension {n}")
    q_prev = as_vector(q_prev, n, "q_prev")
    q = as_vector(q, n, "q")
    lam_prev = np.zeros(r) if lam_prev is None else as_vector(lam_prev, r, "lambda")
    guess = 2.0 * q - q_prev if guess is None else as_vector(guess, n, "guess")
    lam_guess = lam_prev if lam_guess is None else as_vector(lam_guess, r, "lambda guess")

    def F(x):
        return discrete_constrained_residual(Ld, Phi, q_prev, q, x[:n], lam_prev, x[n:], config)

    x = numerics.newton(F, np.concatenate([guess, lam_guess]), config, what="discrete constrained step",
                        ensure_regular=True)
    return x[:n], x[n:]


def discrete_constrained_solve(Ld: DiscreteLagrangian, Phi: Sequence[DiscreteLagrangian], q0, q1, N: int,
                               lam1=None, config: Optional[SolverConfig] = None) -> DiscretePath:
    """
    Constrained trajectory sigma(0..N).

    Row k of the multipliers holds lam^k, the multiplier of the pair (sigma(k-1), sigma(k));
    row 0 is zero and lam^1 is seeded (zero unless given).
    """
    if N < 1:
        raise InvalidArgumentError(f"a discrete path needs N >= 1, got {N}")
    r = len(Phi)
    configs = [as_vector(q0, Ld.n, "q0"), as_vector(q1, Ld.n, "q1")]
    lams = [np.zeros(r), np.zeros(r) if lam1 is None else as_vector(lam1, r, "lambda")]
    for _ in range(N - 1):
        q_next, lam_next = discrete_constrained_step(Ld, Phi, configs[-2], configs[-1], lams[-1], config=config)
        configs.append(q_next)
        lams.append(lam_next)
    logger.info(f"discrete constrained mechanics: {N} steps with {r} constraints")
    return DiscretePath(np.array(configs), np.array(lams).reshape(N + 1, r))


def pontryagin_gradients(sys: DiscreteControlSystem, q, mu, u, config: Optional[SolverConfig] = None):
    """(dH/dq, dH/du) for H(q, mu_1, u) = mu_1.Gamma_d(q, u) + L(q, u)."""
    blocks = dict(q=q, u=u)
    Hq = sys.gamma.jac_q(q, u, config).T @ mu + sys.cost.grad("q", config, **blocks)
    Hu = sys.gamma.jac_u(q, u, config).T @ mu + sys.cost.grad("u", config, **blocks)
    return Hq, Hu


def _unpack(sys: DiscreteControlSystem, x: np.ndarray, N: int):
    n, k = sys.n, sys.control_dim
    states = x[:n * N].reshape(N, n)
    costates = x[n * N:2 * n * N].reshape(N, n)
    controls = x[2 * n * N:].reshape(N, k)
    return states, costates, controls


def discrete_ocp_residual(sys: DiscreteControlSystem, q0, N: int, states, costates, controls, qN=None,
                          config: Optional[SolverConfig] = None) -> np.ndarray:
    """
    Stacked discrete optimal-control conditions.

    `states` holds sigma(1..N), `costates` mu_1(1..N), `controls` u(0..N-1). For each k:
    sigma(k+1) - Gamma_d(sigma(k), u(k)), dH/du(sigma(k), mu_1(k+1), u(k)), and for
    1 <= k <= N-1 mu_1(k) - dH/dq(sigma(k), mu_1(k+1), u(k)). The terminal block is
    sigma(N) - qN for a fixed endpoint, mu_1(N) otherwise.
    """
    q0 = as_vector(q0, sys.n, "q0")
    sigma = np.vstack([q0, np.asarray(states, dtype=float).reshape(N, sys.n)])
    mu = np.asarray(costates, dtype=float).reshape(N, sys.n)
    u = np.asarray(controls, dtype=float).reshape(N, sys.control_dim)
    blocks = []
    for k in range(N):
        Hq, Hu = pontryagin_gradients(sys, sigma[k], mu[k], u[k], config)
        blocks.append(sigma[k + 1] - sys.gamma(sigma[k], u[k]))
        blocks.append(Hu)
        if k >= 1:
            blocks.append(mu[k - 1] - Hq)
    blocks.append(sigma[N] - as_vector(qN, sys.n, "qN") if qN is not None else mu[N - 1])
    return np.concatenate(blocks)


def _reject_singular_control(sys, q, mu, u, config, what):
    def Hu(z):
        return pontryagin_gradients(sys, q, mu, z, config)[1]

    H_uu = numerics.fd_jac(Hu, u, config, scale=config.hessian_step_scale, out_dim=sys.control_dim)
    numerics.linsolve(H_uu, np.zeros(sys.control_dim), config, point=np.concatenate([q, u]),
                      what=f"control Hessian d2H/du2 ({what})")


def discrete_ocp_solve(sys: DiscreteControlSystem, q0, N: int, qN=None, config: Optional[SolverConfig] = None
                       ) -> Tuple[DiscretePath, np.ndarray, np.ndarray]:
    """
    Solve the discrete optimal-control equations as one stacked Newton system.

    Returns:
        (path sigma(0..N), controls u(0..N-1) of shape (N, k), costates mu_1(1..N) of shape (N, n))

    Raises:
        InvalidArgumentError: N < 1
        SingularMatrixError: d2H/du2 is singular at the seed
    """
    config = resolve_config(config)
    if N < 1:
        raise InvalidArgumentError(f"optimal-control horizon must be at least one step, got {N}")
    n, k = sys.n, sys.control_dim
    q0 = as_vector(q0, n, "q0")
    if qN is not None:
        qN = as_vector(qN, n, "qN")
        states0 = np.array([q0 + (j + 1) / N * (qN - q0) for j in range(N)])
    else:
        states0 = np.tile(q0, (N, 1))
    costates0 = np.zeros((N, n))
    controls0 = np.zeros((N, k))
    _reject_singular_control(sys, q0, costates0[0], controls0[0], config, "seed")

    def F(x):
        states, costates, controls = _unpack(sys, x, N)
        return discrete_ocp_residual(sys, q0, N, states, costates, controls, qN, config)

    x = numerics.newton(F, np.concatenate([states0.ravel(), costates0.ravel(), controls0.ravel()]), config,
                        what="discrete optimal control")
    states, costates, controls = _unpack(sys, x, N)
    logger.info(f"discrete optimal control solved over {N} steps ({'fixed' if qN is not None else 'free'} endpoint)")
    return DiscretePath(np.vstack([q0, states])), controls, costates


def rollout_cost(sys: DiscreteControlSystem, q0, controls) -> float:
    """Summed running cost of the open-loop trajectory driven by `controls`."""
    q = as_vector(q0, sys.n, "q0")
    total = 0.0
    for u in np.asarray(controls, dtype=float).reshape(-1, sys.control_dim):
        total += sys.cost(q=q, u=u)
        q = sys.gamma(q, u)
    return total


def riccati_gains(a: float, b: float, Q: float, R: float, h: float, N: int) -> np.ndarray:
    """
    Backward Riccati recursion for sigma(k+1) = a sigma(k) + b u(k), cost sum (Q q^2 + R u^2) h / 2,
    free endpoint: P_N = 0, K_k = (R h + b^2 P_{k+1})^-1 b P_{k+1} a, P_k = Q h + a^2 P_{k+1} - a P_{k+1} b K_k.
    u(k) = -K_k sigma(k).
    """
    P = 0.0
    gains = np.empty(N)
    for j in range(N - 1, -1, -1):
        K = b * P * a / (R * h + b * b * P)
        gains[j] = K
        P = Q * h + a * a * P - a * P * b * K
    return gains
