"""
Discrete mechanics on a local Lie groupoid.

rho, L and R are extracted from the chart maps,
    rho(q) = db/dv(q, 0),  L(q, v) = dp/dw(q, v, 0),  R(q, w) = dp/dv(q, 0, w),
and the discrete Euler-Lagrange residual of a composable pair g = (q, v), h = (q2, w) is
    rho(q2)^T dLd/dq(h) + L(g)^T dLd/dv(g) - R(h)^T dLd/dv(h).
"""
from typing import Dict, Optional, Sequence, Tuple
import logging

import numpy as np
from scipy.spatial.transform import Rotation

from varcalc.config import SolverConfig, resolve_config
from varcalc.exceptions import ChartError, InvalidArgumentError
from varcalc.models.core import ScalarField, as_vector
from varcalc.models.discrete import DiscreteLagrangian
from varcalc.models.groupoid import (
    EulerPoincareSequence,
    GroupoidControlSystem,
    GroupoidElement,
    GroupoidModel,
    GroupoidOcpSolution,
    LieGroupModel,
)
from varcalc.services import numerics

logger = logging.getLogger(__name__)


def _cross_check(G: GroupoidModel, what: str, analytic: np.ndarray, fd, config: SolverConfig) -> np.ndarray:
    if config.verification_mode:
        gap = float(np.max(np.abs(analytic - fd()), initial=0.0))
        if gap > 1e-6:
            logger.warning(f"{G.name}: analytic {what} differs from finite differences by {gap:.3e}")
    return analytic


def extract_rho(G: GroupoidModel, q, config: Optional[SolverConfig] = None) -> np.ndarray:
    """rho(q) = db/dv(q, 0), shape (n, m)."""
    config = resolve_config(config)
    q = as_vector(q, G.base_dim, "q")
    n, m = G.base_dim, G.fiber_dim
    if n == 0:
        return np.zeros((0, m))

    def fd():
        return numerics.fd_jac(lambda v: G.b(q, v), np.zeros(m), config, out_dim=n)

    if G.rho_fn is not None:
        return _cross_check(G, "rho", np.asarray(G.rho_fn(q), dtype=float).reshape(n, m), fd, config)
    return fd()


def extract_L(G: GroupoidModel, q, v, config: Optional[SolverConfig] = None) -> np.ndarray:
    """L(q, v) = dp/dw(q, v, 0), shape (m, m)."""
    config = resolve_config(config)
    q = as_vector(q, G.base_dim, "q")
    v = G.check_chart(v)
    m = G.fiber_dim

    def fd():
        return numerics.fd_jac(lambda w: G.p(q, v, w), np.zeros(m), config, out_dim=m)

    if G.left_fn is not None:
        return _cross_check(G, "L", np.asarray(G.left_fn(q, v), dtype=float).reshape(m, m), fd, config)
    return fd()


def extract_R(G: GroupoidModel, q, w, config: Optional[SolverConfig] = None) -> np.ndarray:
    """R(q, w) = dp/dv(q, 0, w), shape (m, m)."""
    config = resolve_config(config)
    q = as_vector(q, G.base_dim, "q")
    w = G.check_chart(w)
    m = G.fiber_dim

    def fd():
        return numerics.fd_jac(lambda v: G.p(q, v, w), np.zeros(m), config, out_dim=m)

    if G.right_fn is not None:
        return _cross_check(G, "R", np.asarray(G.right_fn(q, w), dtype=float).reshape(m, m), fd, config)
    return fd()


def check_composable(G: GroupoidModel, g: GroupoidElement, h: GroupoidElement,
                     config: Optional[SolverConfig] = None) -> None:
    config = resolve_config(config)
    gap = h.q - G.b(g.q, g.v)
    if gap.size and float(np.max(np.abs(gap))) > config.composability_tol:
        raise ChartError(f"pair is not composable: |q2 - b(q, v)| = {np.max(np.abs(gap)):.3e}")


def groupoid_inverse(G: GroupoidModel, g: GroupoidElement, config: Optional[SolverConfig] = None) -> GroupoidElement:
    """g^-1 = (b(q, v), w) with p(q, v, w) = 0, by Newton from w = -v."""
    q = as_vector(g.q, G.base_dim, "q")
    v = G.check_chart(g.v)
    w = numerics.newton(lambda z: G.p(q, v, z), -v, config, what="groupoid inverse")
    return GroupoidElement(G.b(q, v), w)


def _terms(G, Ld, g, h, config):
    blocks_g = dict(q=g.q, v=g.v)
    blocks_h = dict(q=h.q, v=h.v)
    rho_term = extract_rho(G, h.q, config).T @ Ld.grad("q", config, **blocks_h)
    left_term = extract_L(G, g.q, g.v, config).T @ Ld.grad("v", config, **blocks_g)
    right_term = extract_R(G, h.q, h.v, config).T @ Ld.grad("v", config, **blocks_h)
    return rho_term, left_term, right_term


def groupoid_del_residual(G: GroupoidModel, Ld: ScalarField, g: GroupoidElement, h: GroupoidElement,
                          config: Optional[SolverConfig] = None) -> np.ndarray:
    """
    Groupoid discrete Euler-Lagrange residual of a composable pair.

    Raises:
        ChartError: h.q != b(g) within composability_tol, or a chart violation
    """
    config = resolve_config(config)
    check_composable(G, g, h, config)
    rho_term, left_term, right_term = _terms(G, Ld, g, h, config)
    return rho_term + left_term - right_term


def groupoid_del_step(G: GroupoidModel, Ld: ScalarField, g: GroupoidElement, guess=None,
                      config: Optional[SolverConfig] = None) -> GroupoidElement:
    """h = (b(g), w) with w solving the residual; Newton from w = v by default."""
    q2 = G.b(g.q, g.v)
    guess = g.v if guess is None else as_vector(guess, G.fiber_dim, "guess")
    w = numerics.newton(lambda z: groupoid_del_residual(G, Ld, g, GroupoidElement(q2, z), config), guess, config,
                        what="groupoid discrete Euler-Lagrange", ensure_regular=True)
    return GroupoidElement(q2, w)


def groupoid_del_solve(G: GroupoidModel, Ld: ScalarField, g0: GroupoidElement, N: int,
                       config: Optional[SolverConfig] = None) -> Sequence[GroupoidElement]:
    """g_0..g_N starting from g0."""
    if N < 0:
        raise InvalidArgumentError(f"number of steps must be non-negative, got {N}")
    out = [g0]
    for _ in range(N):
        out.append(groupoid_del_step(G, Ld, out[-1], config=config))
    logger.info(f"groupoid discrete Euler-Lagrange on {G.name}: {N} steps")
    return out


def groupoid_constrained_residual(G: GroupoidModel, Ld: ScalarField, Phi: Sequence[ScalarField], g: GroupoidElement,
                                  h: GroupoidElement, lam_prev, lam_next,
                                  config: Optional[SolverConfig] = None) -> np.ndarray:
    """Residual of L_d + lam^{k+1} Phi on h and L_d + lam^k Phi on g, followed by Phi(h)."""
    config = resolve_config(config)
    out = groupoid_del_residual(G, Ld, g, h, config)
    for alpha, c in enumerate(Phi):
        rho_term, left_term, right_term = _terms(G, c, g, h, config)
        out = out + lam_next[alpha] * (rho_term - right_term) + lam_prev[alpha] * left_term
    return np.concatenate([out, [c(q=h.q, v=h.v) for c in Phi]])


def groupoid_constrained_step(G: GroupoidModel, Ld: ScalarField, Phi: Sequence[ScalarField], g: GroupoidElement,
                              lam_prev=None, guess=None, lam_guess=None,
                              config: Optional[SolverConfig] = None) -> Tuple[GroupoidElement, np.ndarray]:
    """(h, lam^{k+1}) with h composable with g and Phi(h) = 0."""
    Phi = list(Phi)
    m, r = G.fiber_dim, len(Phi)
    if r > m:
        raise InvalidArgumentError(f"{r} constraints on a groupoid of fiber dimension {m}")
    q2 = G.b(g.q, g.v)
    lam_prev = np.zeros(r) if lam_prev is None else as_vector(lam_prev, r, "lambda")
    guess = g.v if guess is None else as_vector(guess, m, "guess")
    lam_guess = lam_prev if lam_guess is None else as_vector(lam_guess, r, "lambda guess")

    def F(x):
        return groupoid_constrained_residual(G, Ld, Phi, g, GroupoidElement(q2, x[:m]), lam_prev, x[m:], config)

    x = numerics.newton(F, np.concatenate([guess, lam_guess]), config, what="groupoid constrained step",
                        ensure_regular=True)
    return GroupoidElement(q2, x[:m]), x[m:]


def lie_poisson_update(Gp: LieGroupModel, v, mu) -> np.ndarray:
    """mu_{k+1} = Ad*_{g_k} mu_k"""
    v = Gp.group.check_chart(v)
    return as_vector(Gp.coad(v, as_vector(mu, Gp.dim, "mu")), Gp.dim, "Ad* mu")


def _momentum(Gp: LieGroupModel, Ld: ScalarField, v, config) -> np.ndarray:
    """mu_k = R(v_k)^T dLd(v_k)"""
    empty = np.zeros(0)
    return extract_R(Gp.group, empty, v, config).T @ Ld.grad("v", config, q=empty, v=v)


def discrete_euler_poincare_solve(Gp: LieGroupModel, Ld: ScalarField, v0, N: int,
                                  config: Optional[SolverConfig] = None) -> EulerPoincareSequence:
    """
    Discrete Euler-Poincare steps v_1..v_N from v_0, with momenta mu_k = R(v_k)^T dLd(v_k).

    The momenta satisfy mu_{k+1} = Ad*_{v_k} mu_k up to the Newton tolerance.
    """
    config = resolve_config(config)
    if N < 0:
        raise InvalidArgumentError(f"number of steps must be non-negative, got {N}")
    m = Gp.dim
    empty = np.zeros(0)
    seed = Gp.group.check_chart(v0)
    g = GroupoidElement(empty, seed)
    steps = []
    for _ in range(N):
        g = groupoid_del_step(Gp.group, Ld, g, config=config)
        steps.append(g.v)
    steps = np.array(steps).reshape(N, m)
    momenta = np.array([_momentum(Gp, Ld, v, config) for v in steps]).reshape(N, m)
    logger.info(f"discrete Euler-Poincare on {Gp.group.name}: {N} steps")
    return EulerPoincareSequence(seed, _momentum(Gp, Ld, seed, config), steps, momenta)


def pair_lagrangian(Ld: DiscreteLagrangian, config: Optional[SolverConfig] = None) -> ScalarField:
    """L_d(q, v) = Lhat_d(q, q + v) on the pair groupoid, with dq = D1 + D2 and dv = D2."""

    def value(q, v):
        return Ld(q, q + v)

    def grad_q(q, v):
        return Ld.D1(q, q + v, config) + Ld.D2(q, q + v, config)

    def grad_v(q, v):
        return Ld.D2(q, q + v, config)

    return ScalarField(("q", "v"), value, {"q": grad_q, "v": grad_v}, name=f"pair({Ld.name})")


def pair_groupoid(n: int) -> GroupoidModel:
    """Q x Q on R^n: b(q, v) = q + v, p(q, v, w) = v + w."""
    if n < 1:
        raise InvalidArgumentError(f"pair groupoid needs n >= 1, got {n}")
    return GroupoidModel(n, n, lambda q, v: q + v, lambda q, v, w: v + w, name=f"pair({n})")


def _hat(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def _inverse_jacobian(v: np.ndarray, sign: float) -> np.ndarray:
    """I + sign/2 [v]x + c [v]x^2 with c = (1 - (th/2) cot(th/2)) / th^2"""
    theta = float(np.linalg.norm(v))
    if theta < 1e-4:
        c = 1.0 / 12.0 + theta * theta / 720.0
    else:
        c = (1.0 - 0.5 * theta / np.tan(0.5 * theta)) / (theta * theta)
    V = _hat(v)
    return np.eye(3) + 0.5 * sign * V + c * V @ V


def so3_group() -> LieGroupModel:
    """
    SO(3) in rotation-vector coordinates: p(v, w) = log(exp(v) exp(w)).

    Analytic L(v) = J_r(v)^-1 and R(w) = J_l(w)^-1; Ad*_v mu = R(v)^T mu.
    """

    def product(q, v, w):
        return (Rotation.from_rotvec(v) * Rotation.from_rotvec(w)).as_rotvec()

    def coad(v, mu):
        return Rotation.from_rotvec(v).as_matrix().T @ mu

    group = GroupoidModel(
        0, 3,
        target=lambda q, v: np.zeros(0),
        product=product,
        rho_fn=lambda q: np.zeros((0, 3)),
        left_fn=lambda q, v: _inverse_jacobian(v, 1.0),
        right_fn=lambda q, w: _inverse_jacobian(w, -1.0),
        chart_radius=np.pi - 0.1,
        name="so3",
    )
    return LieGroupModel(group, coad)


def abelian_group(m: int) -> LieGroupModel:
    """R^m under addition; Ad* is the identity."""
    group = GroupoidModel(0, m, lambda q, v: np.zeros(0), lambda q, v, w: v + w, name=f"abelian({m})")
    return LieGroupModel(group, lambda v, mu: np.array(mu, dtype=float))


def check_identities(G: GroupoidModel, samples: Sequence[Tuple[np.ndarray, np.ndarray]],
                     config: Optional[SolverConfig] = None) -> Dict[str, float]:
    """
    Worst defects of the local identity relations over (q, v) samples:
    b(q,0) = q, p(q,v,0) = v, p(q,0,v) = v, dp/dw(q,0,0) = dp/dv(q,0,0) = I, L(q,0) = R(q,0) = I,
    and the vanishing second derivatives d2p/dv2(q,v,0), d2p/dw2(q,0,w).
    """
    config = resolve_config(config)
    m = G.fiber_dim
    zero = np.zeros(m)
    eye = np.eye(m)
    worst = dict.fromkeys(("target", "right_unit", "left_unit", "first_order", "second_order"), 0.0)

    def bump(key, value):
        worst[key] = max(worst[key], float(value))

    for q, v in samples:
        q = as_vector(q, G.base_dim, "q")
        v = G.check_chart(v)
        if G.base_dim:
            bump("target", np.max(np.abs(G.b(q, zero) - q)))
        bump("right_unit", np.max(np.abs(G.p(q, v, zero) - v)))
        bump("left_unit", np.max(np.abs(G.p(q, zero, v) - v)))
        for J in (extract_L(G, q, zero, config), extract_R(G, q, zero, config),
                  numerics.fd_jac(lambda z: G.p(q, z, zero), v, config, out_dim=m),
                  numerics.fd_jac(lambda z: G.p(q, zero, z), v, config, out_dim=m)):
            bump("first_order", np.max(np.abs(J - eye)))
        for c in range(m):
            Hv = numerics.fd_hess(lambda z: G.p(q, z, zero)[c], v, config)
            Hw = numerics.fd_hess(lambda z: G.p(q, zero, z)[c], v, config)
            bump("second_order", max(np.max(np.abs(Hv)), np.max(np.abs(Hw))))
    return worst


def _ocp_unpack(G: GroupoidModel, sys: GroupoidControlSystem, x: np.ndarray, N: int):
    n, m, k = G.base_dim, G.fiber_dim, sys.control_dim
    sizes = [N * n, N * k, N * n, N * m]
    parts = np.split(x, np.cumsum(sizes)[:-1])
    return (parts[0].reshape(N, n), parts[1].reshape(N, k), parts[2].reshape(N, n), parts[3].reshape(N, m))


def groupoid_ocp_residual(G: GroupoidModel, sys: GroupoidControlSystem, q0, states, controls, mu1, mu2,
                          qN=None, config: Optional[SolverConfig] = None) -> Dict[str, np.ndarray]:
    """
    Optimal-control conditions on a groupoid, g_k = (q_k, Gamma_d(q_k, u_k)).

    `states` holds q_1..q_N; `controls`, `mu1` and `mu2` one row per step k = 0..N-1.

    Blocks:
        cost_q    dL/dq - mu1_k - Gamma_q^T mu2_k
        cost_u    dL/du - Gamma_u^T mu2_k
        dynamics  q_{k+1} - b(g_k)
        del       rho(q_k)^T mu1_k + L(g_{k-1})^T mu2_{k-1} - R(g_k)^T mu2_k,  1 <= k <= N-1
        terminal  q_N - qN for a fixed endpoint, L(g_{N-1})^T mu2_{N-1} otherwise
    """
    config = resolve_config(config)
    n, m, k = G.base_dim, G.fiber_dim, sys.control_dim
    controls = np.asarray(controls, dtype=float).reshape(-1, k)
    N = controls.shape[0]
    q = np.vstack([as_vector(q0, n, "q0"), np.asarray(states, dtype=float).reshape(N, n)])
    mu1 = np.asarray(mu1, dtype=float).reshape(N, n)
    mu2 = np.asarray(mu2, dtype=float).reshape(N, m)
    blocks = {"cost_q": [], "cost_u": [], "dynamics": [], "del": []}
    v = []
    for j in range(N):
        u = controls[j]
        v.append(sys.gamma(q[j], u))
        fields = dict(q=q[j], u=u)
        if n:
            blocks["cost_q"].append(sys.cost.grad("q", config, **fields) - mu1[j]
                                    - sys.gamma.jac_q(q[j], u, config).T @ mu2[j])
        blocks["cost_u"].append(sys.cost.grad("u", config, **fields) - sys.gamma.jac_u(q[j], u, config).T @ mu2[j])
        blocks["dynamics"].append(q[j + 1] - G.b(q[j], v[j]))
        if j >= 1:
            blocks["del"].append(extract_rho(G, q[j], config).T @ mu1[j]
                                 + extract_L(G, q[j - 1], v[j - 1], config).T @ mu2[j - 1]
                                 - extract_R(G, q[j], v[j], config).T @ mu2[j])
    out = {key: np.array(rows, dtype=float).reshape(len(rows), -1) for key, rows in blocks.items()}
    if qN is not None:
        out["terminal"] = q[N] - as_vector(qN, n, "qN")
    else:
        out["terminal"] = extract_L(G, q[N - 1], v[N - 1], config).T @ mu2[N - 1]
    return out


def groupoid_ocp_solve(G: GroupoidModel, sys: GroupoidControlSystem, q0, N: int, qN=None,
                       config: Optional[SolverConfig] = None) -> GroupoidOcpSolution:
    """
    Stacked Newton solve of groupoid_ocp_residual.

    Raises:
        InvalidArgumentError: N < 1, or a fixed endpoint with n != m
        SingularMatrixError: d2H/du2 singular at the seed
    """
    config = resolve_config(config)
    n, m, k = G.base_dim, G.fiber_dim, sys.control_dim
    if N < 1:
        raise InvalidArgumentError(f"optimal-control horizon must be at least one step, got {N}")
    if qN is not None and n != m:
        raise InvalidArgumentError(f"a fixed endpoint needs n == m, got n={n}, m={m}")
    q0 = as_vector(q0, n, "q0")
    u_seed = np.zeros(k)

    def Hu(u):
        return sys.cost.grad("u", config, q=q0, u=u)

    H_uu = numerics.fd_jac(Hu, u_seed, config, scale=config.hessian_step_scale, out_dim=k)
    numerics.linsolve(H_uu, np.zeros(k), config, point=np.concatenate([q0, u_seed]),
                      what="control Hessian d2H/du2 (seed)")

    def F(x):
        states, controls, mu1, mu2 = _ocp_unpack(G, sys, x, N)
        blocks = groupoid_ocp_residual(G, sys, q0, states, controls, mu1, mu2, qN, config)
        return np.concatenate([blocks[key].ravel() for key in ("cost_q", "cost_u", "dynamics", "del", "terminal")])

    if qN is not None:
        states0 = np.array([q0 + (j + 1) / N * (as_vector(qN, n, "qN") - q0) for j in range(N)])
    else:
        states0 = np.tile(q0, (N, 1))
    x0 = np.concatenate([states0.ravel(), np.zeros(N * k), np.zeros(N * n), np.zeros(N * m)])
    x = numerics.newton(F, x0, config, what="groupoid optimal control")
    states, controls, mu1, mu2 = _ocp_unpack(G, sys, x, N)
    logger.info(f"groupoid optimal control on {G.name} solved over {N} steps")
    return GroupoidOcpSolution(np.vstack([q0, states]), controls, mu1, mu2)
