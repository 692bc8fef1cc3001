import math

import numpy as np
import pytest

from varcalc.exceptions import (
    ConvergenceError,
    DimensionError,
    InvalidArgumentError,
    NonFiniteError,
    SingularMatrixError,
)
from varcalc.services import numerics


class TestTimeGrid:
    def test_exact_multiple(self):
        grid = numerics.time_grid(0.0, 1.0, 0.25)
        np.testing.assert_allclose(grid, [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_last_step_shortened(self):
        grid = numerics.time_grid(0.0, 1.0, 0.3)
        assert grid.size == 5
        assert grid[-1] == 1.0
        assert grid[-2] == pytest.approx(0.9)

    @pytest.mark.parametrize("t0,t1,dt", [(0.0, 0.0, 0.1), (1.0, 0.5, 0.1), (0.0, 1.0, 0.0)])
    def test_rejects_empty_or_bad_step(self, t0, t1, dt):
        with pytest.raises(InvalidArgumentError):
            numerics.time_grid(t0, t1, dt)


class TestRk4:
    def test_constant_state(self):
        traj = numerics.rk4(lambda t, x: np.zeros(1), [3.0], 0.0, 1.0, 0.1)
        assert np.all(traj.states == 3.0)
        assert traj.labels == ("x1",)

    def test_exponential(self):
        traj = numerics.rk4(lambda t, x: x, [1.0], 0.0, 1.0, 1e-3)
        assert traj.final[0] == pytest.approx(math.e, abs=1e-10)
        assert traj.times[0] == 0.0 and traj.times[-1] == 1.0

    def test_interval_shorter_than_step(self):
        traj = numerics.rk4(lambda t, x: -x, [1.0], 0.0, 0.05, 0.1)
        np.testing.assert_array_equal(traj.times, [0.0, 0.05])
        assert traj.final[0] == pytest.approx(math.exp(-0.05), abs=1e-8)

    def test_fourth_order(self):
        def error(dt):
            return abs(numerics.rk4(lambda t, x: x, [1.0], 0.0, 1.0, dt).final[0] - math.e)

        assert 12.0 <= error(0.1) / error(0.05) <= 20.0

    def test_non_finite_rhs(self):
        with pytest.raises(NonFiniteError):
            numerics.rk4(lambda t, x: np.array([np.nan]), [1.0], 0.0, 1.0, 0.1)


class TestNewton:
    def test_linear(self, config):
        x = numerics.newton(lambda x: x - 2.0, [0.0], config)
        assert x[0] == pytest.approx(2.0, abs=1e-12)

    def test_square_root(self, config):
        x = numerics.newton(lambda x: x * x - 2.0, [1.0], config)
        assert x[0] == pytest.approx(math.sqrt(2.0), abs=1e-10)

    def test_system(self, config):
        def F(x):
            return np.array([x[0] ** 2 + x[1] ** 2 - 1.0, x[0] - x[1]])

        x = numerics.newton(F, [1.0, 0.5], config)
        np.testing.assert_allclose(x, [math.sqrt(0.5)] * 2, atol=1e-10)

    def test_double_root_hits_iteration_cap(self, config):
        capped = config.model_copy(update={"newton_max_iter": 10})
        with pytest.raises(ConvergenceError) as info:
            numerics.newton(lambda x: x * x, [1.0], capped)
        assert info.value.iterations == 10
        assert info.value.residual_norm > capped.newton_tol
        assert info.value.point is not None

    def test_non_finite_residual(self, config):
        with pytest.raises(NonFiniteError):
            numerics.newton(lambda x: np.array([np.inf]), [1.0], config)

    def test_singular_jacobian(self, config):
        with pytest.raises(SingularMatrixError):
            numerics.newton(lambda x: np.array([1.0 + 0.0 * x[0]]), [1.0], config)

    def test_regularity_checked_at_solution(self, config):
        zero = numerics.newton(lambda x: np.zeros(2), [0.3, 0.4], config)
        np.testing.assert_array_equal(zero, [0.3, 0.4])
        with pytest.raises(SingularMatrixError):
            numerics.newton(lambda x: np.zeros(2), [0.3, 0.4], config, ensure_regular=True)
        x = numerics.newton(lambda x: x - 2.0, [2.0], config, ensure_regular=True)
        assert x[0] == 2.0


class TestFiniteDifferences:
    def test_gradient_of_quadratic(self, config):
        x = np.array([0.3, -1.2, 2.5])
        np.testing.assert_allclose(numerics.fd_grad(lambda z: float(z @ z), x, config), 2 * x, atol=1e-8)

    def test_gradient_of_transcendental(self, config):
        assert numerics.fd_grad(lambda z: math.sin(z[0]), [0.0], config)[0] == pytest.approx(1.0, abs=1e-10)
        assert numerics.fd_grad(lambda z: math.exp(z[0]), [1.0], config)[0] == pytest.approx(math.e, abs=1e-8)

    def test_jacobian_shape(self, config):
        J = numerics.fd_jac(lambda z: np.array([z[0] * z[1], z[0], 3 * z[1]]), [2.0, 3.0], config)
        assert J.shape == (3, 2)
        np.testing.assert_allclose(J, [[3.0, 2.0], [1.0, 0.0], [0.0, 3.0]], atol=1e-8)

    def test_hessian_of_cubic(self, config):
        def f(z):
            return z[0] ** 2 * z[1] + z[1] ** 3

        H = numerics.fd_hess(f, [1.0, 2.0], config)
        np.testing.assert_allclose(H, [[4.0, 2.0], [2.0, 12.0]], atol=1e-5)
        assert np.array_equal(H, H.T)

    def test_mixed(self, config):
        M = numerics.fd_mixed(lambda x, y: x[0] * y[0] + x[0] ** 2 * y[1], [1.5], [0.5, -1.0], config)
        np.testing.assert_allclose(M, [[1.0, 3.0]], atol=1e-6)


class TestLinsolve:
    def test_identity(self, config):
        x, rcond = numerics.linsolve(np.eye(3), [1.0, 2.0, 3.0], config)
        np.testing.assert_array_equal(x, [1.0, 2.0, 3.0])
        assert rcond == pytest.approx(1.0)

    def test_random_well_conditioned(self, config, rng):
        A = 5.0 * np.eye(5) + rng.uniform(-1, 1, (5, 5))
        b = rng.uniform(-1, 1, 5)
        x, _ = numerics.linsolve(A, b, config)
        assert np.max(np.abs(A @ x - b)) <= 1e-12

    def test_near_singular(self, config):
        with pytest.raises(SingularMatrixError) as info:
            numerics.linsolve(np.diag([1.0, 1e-14]), [1.0, 1.0], config)
        assert info.value.rcond < config.condition_floor

    def test_exactly_singular(self, config):
        with pytest.raises(SingularMatrixError) as info:
            numerics.linsolve([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0], config)
        assert info.value.rcond == 0.0

    def test_non_square(self, config):
        with pytest.raises(DimensionError):
            numerics.linsolve(np.ones((2, 3)), [1.0, 1.0], config)

    def test_empty_system(self, config):
        x, rcond = numerics.linsolve(np.zeros((0, 0)), np.zeros(0), config)
        assert x.size == 0 and rcond == 1.0
