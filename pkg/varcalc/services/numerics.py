"""
Shared numerical kernels: central finite differences, dense LU solves with a
reciprocal-condition floor, Newton root finding and fixed-step RK4.

All routines are pure; every workspace is local to the call.
"""
from typing import Callable, Optional, Sequence, Tuple
import logging
import warnings

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from varcalc.config import SolverConfig, resolve_config
from varcalc.exceptions import (
    ConvergenceError,
    DimensionError,
    InvalidArgumentError,
    NonFiniteError,
    SingularMatrixError,
)
from varcalc.models.trajectory import Trajectory

logger = logging.getLogger(__name__)


def fd_steps(x: np.ndarray, scale: float) -> np.ndarray:
    """Per-component step h_i = scale * max(1, |x_i|)."""
    return scale * np.maximum(1.0, np.abs(x))


def _as_vector(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float)).copy()


def fd_grad(f: Callable[[np.ndarray], float], x, config: Optional[SolverConfig] = None,
            scale: Optional[float] = None) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    config = resolve_config(config)
    x = _as_vector(x)
    h = fd_steps(x, scale or config.fd_step_scale)
    g = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        g[i] = (f(xp) - f(xm)) / (xp[i] - xm[i])
    return g


def fd_jac(F: Callable[[np.ndarray], np.ndarray], x, config: Optional[SolverConfig] = None,
           scale: Optional[float] = None, out_dim: Optional[int] = None) -> np.ndarray:
    """Central-difference Jacobian, shape (len(F(x)), len(x))."""
    config = resolve_config(config)
    x = _as_vector(x)
    h = fd_steps(x, scale or config.fd_step_scale)
    if out_dim is None:
        out_dim = np.atleast_1d(np.asarray(F(x), dtype=float)).size
    J = np.empty((out_dim, x.size))
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        fp = np.atleast_1d(np.asarray(F(xp), dtype=float))
        fm = np.atleast_1d(np.asarray(F(xm), dtype=float))
        J[:, i] = (fp - fm) / (xp[i] - xm[i])
    return J


def fd_hess(f: Callable[[np.ndarray], float], x, config: Optional[SolverConfig] = None,
            scale: Optional[float] = None) -> np.ndarray:
    """Nested central-difference Hessian, symmetrized."""
    config = resolve_config(config)
    x = _as_vector(x)
    h = fd_steps(x, scale or config.hessian_step_scale)
    d = x.size
    H = np.empty((d, d))
    f0 = f(x)
    for i in range(d):
        xp = x.copy()
        xm = x.copy()
        xp[i] += 2.0 * h[i]
        xm[i] -= 2.0 * h[i]
        H[i, i] = (f(xp) - 2.0 * f0 + f(xm)) / (4.0 * h[i] * h[i])
        for j in range(i + 1, d):
            H[i, j] = _cross_difference(f, x, i, j, h[i], h[j])
            H[j, i] = H[i, j]
    return 0.5 * (H + H.T)


def _cross_difference(f, x, i, j, hi, hj) -> float:
    def shifted(si, sj):
        z = x.copy()
        z[i] += si * hi
        z[j] += sj * hj
        return f(z)

    return (shifted(1, 1) - shifted(1, -1) - shifted(-1, 1) + shifted(-1, -1)) / (4.0 * hi * hj)


def fd_mixed(f: Callable[[np.ndarray, np.ndarray], float], x, y,
             config: Optional[SolverConfig] = None) -> np.ndarray:
    """Cross second derivatives d2f/dx_i dy_j, shape (len(x), len(y))."""
    config = resolve_config(config)
    x = _as_vector(x)
    y = _as_vector(y)
    hx = fd_steps(x, config.hessian_step_scale)
    hy = fd_steps(y, config.hessian_step_scale)
    M = np.empty((x.size, y.size))
    for i in range(x.size):
        for j in range(y.size):
            acc = 0.0
            for si, sj, w in ((1, 1, 1.0), (1, -1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0)):
                xs = x.copy()
                ys = y.copy()
                xs[i] += si * hx[i]
                ys[j] += sj * hy[j]
                acc += w * f(xs, ys)
            M[i, j] = acc / (4.0 * hx[i] * hy[j])
    return M


def reciprocal_condition(A: np.ndarray) -> float:
    """Exact 1-norm reciprocal condition number; 0 for singular matrices."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        warnings.simplefilter("ignore", RuntimeWarning)
        lu, piv = lu_factor(A, check_finite=False)
        if np.any(np.diag(lu) == 0.0):
            return 0.0
        inv = lu_solve((lu, piv), np.eye(A.shape[0]), check_finite=False)
    if not np.all(np.isfinite(inv)):
        return 0.0
    anorm = np.linalg.norm(A, 1)
    if anorm == 0.0:
        return 0.0
    return float(1.0 / (anorm * np.linalg.norm(inv, 1)))


def linsolve(A, b, config: Optional[SolverConfig] = None, point: Optional[Sequence[float]] = None,
             error_cls=SingularMatrixError, what: str = "matrix") -> Tuple[np.ndarray, float]:
    """
    Solve A x = b by LU with partial pivoting.

    Returns:
        (x, rcond) where rcond is the 1-norm reciprocal condition number.

    Raises:
        SingularMatrixError (or `error_cls`) when rcond < condition_floor.
    """
    config = resolve_config(config)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    if A.size == 0:
        return np.zeros(b.shape), 1.0
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"linsolve needs a square matrix, got shape {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise DimensionError(f"right-hand side of length {b.shape[0]} for a {A.shape[0]}x{A.shape[0]} system")
    if not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)):
        raise NonFiniteError(f"non-finite entries in linear system ({what})", point)
    rcond = reciprocal_condition(A)
    if rcond < config.condition_floor:
        raise error_cls(f"singular {what}: reciprocal condition {rcond:.3e} below floor "
                        f"{config.condition_floor:.1e}", rcond=rcond, point=point)
    x = lu_solve(lu_factor(A, check_finite=False), b, check_finite=False)
    return x, rcond


def newton(F: Callable[[np.ndarray], np.ndarray], x0, config: Optional[SolverConfig] = None,
           jac: Optional[Callable[[np.ndarray], np.ndarray]] = None, what: str = "system",
           ensure_regular: bool = False) -> np.ndarray:
    """
    Newton's method with a finite-difference Jacobian refreshed every iteration.

    Converged when max|F(x)| <= newton_tol. With `ensure_regular` the Jacobian is
    also checked at the returned point, so a residual that vanishes everywhere is
    rejected instead of accepting the initial guess.

    Raises:
        SingularMatrixError: Jacobian below the condition floor
        ConvergenceError: no convergence within newton_max_iter iterations
        NonFiniteError: F produced NaN/inf
    """
    config = resolve_config(config)
    x = _as_vector(x0)
    fx = _checked(F, x, what)
    norm = float(np.max(np.abs(fx))) if fx.size else 0.0
    for iteration in range(config.newton_max_iter):
        if norm <= config.newton_tol:
            logger.debug(f"newton[{what}] converged after {iteration} iterations, |F|={norm:.3e}")
            return _regular(F, x, fx, config, jac, what) if ensure_regular else x
        J = jac(x) if jac is not None else fd_jac(lambda z: _checked(F, z, what), x, config, out_dim=fx.size)
        dx, _ = linsolve(J, -fx, config, point=x, what=f"Jacobian of {what}")
        x = x + dx
        fx = _checked(F, x, what)
        norm = float(np.max(np.abs(fx))) if fx.size else 0.0
        logger.debug(f"newton[{what}] iteration {iteration + 1}: |F|={norm:.3e}")
    if norm <= config.newton_tol:
        return _regular(F, x, fx, config, jac, what) if ensure_regular else x
    raise ConvergenceError(
        f"newton[{what}] did not converge in {config.newton_max_iter} iterations (|F|={norm:.3e})",
        iterations=config.newton_max_iter, residual_norm=norm, point=x,
    )


def _regular(F, x, fx, config: SolverConfig, jac, what) -> np.ndarray:
    J = jac(x) if jac is not None else fd_jac(lambda z: _checked(F, z, what), x, config, out_dim=fx.size)
    J = np.atleast_2d(np.asarray(J, dtype=float))
    if J.size == 0:
        return x
    rcond = reciprocal_condition(J)
    if rcond < config.condition_floor:
        raise SingularMatrixError(
            f"singular Jacobian of {what} at the solution: reciprocal condition {rcond:.3e} "
            f"below floor {config.condition_floor:.1e}", rcond=rcond, point=x,
        )
    return x


def _checked(F, x, what) -> np.ndarray:
    fx = np.atleast_1d(np.asarray(F(x), dtype=float))
    if not np.all(np.isfinite(fx)):
        raise NonFiniteError(f"non-finite residual in {what}", point=x)
    return fx


def time_grid(t0: float, t1: float, dt: float) -> np.ndarray:
    """Uniform grid from t0 with spacing dt; the last step is shortened to land on t1."""
    if not dt > 0:
        raise InvalidArgumentError(f"time step must be positive, got {dt}")
    if not t1 > t0:
        raise InvalidArgumentError(f"empty time interval [{t0}, {t1}]")
    n_full = int(np.floor((t1 - t0) / dt + 1e-9))
    grid = t0 + dt * np.arange(n_full + 1)
    if t1 - grid[-1] > 1e-12 * max(1.0, abs(t1)):
        grid = np.append(grid, t1)
    else:
        grid[-1] = t1
    return grid


def rk4(rhs: Callable[[float, np.ndarray], np.ndarray], x0, t0: float, t1: float, dt: float,
        labels: Optional[Sequence[str]] = None) -> Trajectory:
    """Classical fixed-step fourth-order Runge-Kutta, both endpoints included."""
    times = time_grid(t0, t1, dt)
    x = _as_vector(x0)
    states = np.empty((times.size, x.size))
    states[0] = x
    for k in range(times.size - 1):
        t = times[k]
        h = times[k + 1] - t
        k1 = _rhs(rhs, t, x)
        k2 = _rhs(rhs, t + 0.5 * h, x + 0.5 * h * k1)
        k3 = _rhs(rhs, t + 0.5 * h, x + 0.5 * h * k2)
        k4 = _rhs(rhs, t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[k + 1] = x
    if labels is None:
        labels = [f"x{i + 1}" for i in range(x.size)]
    return Trajectory(times=times, states=states, labels=tuple(labels))


def _rhs(rhs, t, x) -> np.ndarray:
    dx = np.asarray(rhs(t, x), dtype=float)
    if not np.all(np.isfinite(dx)):
        raise NonFiniteError(f"non-finite right-hand side at t={t}", point=x)
    return dx
