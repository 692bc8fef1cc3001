import math

import numpy as np
import pytest

from varcalc.exceptions import (
    AdmissibilityError,
    DegenerateLagrangianError,
    DimensionError,
    InvalidArgumentError,
    SingularMatrixError,
)
from varcalc.models.core import ControlField, ScalarField
from varcalc.models.states import Jet, PontryaginState, VakonomicState
from varcalc.services import continuous, structures
from varcalc.services.expressions import compile_expr

INERTIA = np.array([1.0, 2.0, 3.0])


def kinetic(weights):
    w = np.asarray(weights, dtype=float)
    return ScalarField(("q", "y"), lambda q, y: 0.5 * float(y @ (w * y)),
                       {"q": lambda q, y: np.zeros(q.size), "y": lambda q, y: w * y})


def sho():
    return ScalarField(("q", "y"), lambda q, y: 0.5 * y[0] ** 2 - 0.5 * q[0] ** 2,
                       {"q": lambda q, y: -q, "y": lambda q, y: y.copy()})


def rigid_body_hamiltonian():
    return ScalarField(("q", "p"), lambda q, p: 0.5 * float(p @ (p / INERTIA)),
                       {"q": lambda q, p: np.zeros(0), "p": lambda q, p: p / INERTIA})


def lq_problem():
    gamma = ControlField(1, lambda q, u: np.array(u, dtype=float))
    L = ScalarField(("q", "u"), lambda q, u: 0.5 * (q[0] ** 2 + u[0] ** 2),
                    {"q": lambda q, u: q, "u": lambda q, u: u})
    return structures.coordinate_frame(1), gamma, L


class TestBracket:
    def test_so3_contraction_is_cross_product(self):
        C = structures.so3_algebra().C([])
        y, mu = np.array([0.3, -1.0, 2.0]), np.array([1.0, 0.5, -0.25])
        np.testing.assert_allclose(continuous.contract_bracket(C, y, mu), np.cross(y, mu))


class TestHamel:
    def test_rigid_body_field(self, config):
        field = continuous.hamel_vector_field(structures.so3_algebra(), kinetic(INERTIA), config)
        qdot, ydot = field(0.0, [], [1.0, 1.0, 1.0])
        assert qdot.size == 0
        np.testing.assert_allclose(ydot, [-1.0, 1.0, -1.0 / 3.0], atol=1e-7)

    def test_rigid_body_residual(self, config):
        jet = Jet(0.0, [], [1.0, 1.0, 1.0], [], [0.0, 0.0, 0.0])
        residual = continuous.hamel_residual(structures.so3_algebra(), kinetic(INERTIA), jet, config)
        np.testing.assert_allclose(residual, [1.0, -2.0, 1.0], atol=1e-7)

    def test_field_zeroes_residual(self, config):
        S = structures.martinet_frame()
        L = kinetic([1.0, 2.0, 0.5])
        q, y = np.array([0.2, 0.9, -0.1]), np.array([0.5, -0.3, 0.8])
        qdot, ydot = continuous.hamel_vector_field(S, L, config)(0.0, q, y)
        residual = continuous.hamel_residual(S, L, Jet(0.0, q, y, qdot, ydot), config)
        assert np.max(np.abs(residual)) <= 1e-6

    def test_operator_identity(self, config):
        S = structures.martinet_frame()
        L = kinetic([1.0, 2.0, 0.5])
        q, y = np.array([0.2, 0.9, -0.1]), np.array([0.5, -0.3, 0.8])
        jet = Jet(0.0, q, y, S.rho(q) @ y, [0.1, 0.2, -0.3])
        a = continuous.hamel_residual(S, L, jet, config)
        b = continuous.el_residual(S, continuous.differential(L, config), jet, config)
        np.testing.assert_allclose(a, b, atol=1e-6)

    def test_non_admissible_jet(self, config):
        jet = Jet(0.0, [0.0], [1.0], [2.0], [0.0])
        with pytest.raises(AdmissibilityError):
            continuous.hamel_residual(structures.coordinate_frame(1), sho(), jet, config)

    def test_jet_shape(self, config):
        jet = Jet(0.0, [0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 0.0])
        with pytest.raises(DimensionError):
            continuous.hamel_residual(structures.coordinate_frame(1), sho(), jet, config)

    def test_degenerate_lagrangian(self, config):
        L = ScalarField(("q", "y"), lambda q, y: y[0] - 0.5 * q[0] ** 2,
                        {"q": lambda q, y: -q, "y": lambda q, y: np.ones(1)})
        field = continuous.hamel_vector_field(structures.coordinate_frame(1), L, config)
        with pytest.raises(DegenerateLagrangianError) as info:
            field(0.0, [1.0], [0.0])
        assert isinstance(info.value, SingularMatrixError)
        assert info.value.point == [1.0, 0.0]

    def test_sho_short_run(self, config):
        traj = continuous.integrate_hamel(structures.coordinate_frame(1), sho(), [1.0], [0.0], 1.0, config=config)
        assert traj.labels == ("q1", "y1")
        assert np.max(np.abs(traj.column("q1") - np.cos(traj.times))) <= 1e-9

    def test_scaled_frame_matches_coordinates(self, config):
        scaled = ScalarField(("q", "y"), lambda q, y: 0.5 * (2.0 * y[0]) ** 2 - 0.5 * q[0] ** 2,
                             {"q": lambda q, y: -q, "y": lambda q, y: 4.0 * y})
        a = continuous.integrate_hamel(structures.coordinate_frame(1), sho(), [1.0], [0.0], 2.0, config=config)
        b = continuous.integrate_hamel(structures.scaled_frame([2.0]), scaled, [1.0], [0.0], 2.0, config=config)
        assert np.max(np.abs(a.column("q1") - b.column("q1"))) <= 1e-9
        np.testing.assert_allclose(2.0 * b.column("y1"), a.column("y1"), atol=1e-9)

    @pytest.mark.slow
    def test_sho_ten_seconds(self, config):
        traj = continuous.integrate_hamel(structures.coordinate_frame(1), sho(), [1.0], [0.0], 10.0, config=config)
        assert np.max(np.abs(traj.column("q1") - np.cos(traj.times))) <= 1e-6


class TestHamiltonian:
    def test_lie_poisson_field(self, config):
        qdot, pdot = continuous.hamilton_vector_field(structures.so3_algebra(), rigid_body_hamiltonian(), config)(
            0.0, [], [1.0, 2.0, 3.0])
        np.testing.assert_allclose(pdot, np.cross([1.0, 2.0, 3.0], [1.0, 1.0, 1.0]))

    def test_casimir(self, config):
        traj = continuous.integrate_hamilton(structures.so3_algebra(), rigid_body_hamiltonian(), [], [1.0, 2.0, 3.0],
                                             1.0, config=config)
        norms = np.linalg.norm(traj.block("p"), axis=1)
        assert np.max(np.abs(norms - norms[0])) <= 1e-9

    def test_euler_poincare_momenta_follow_lie_poisson(self, config):
        S = structures.so3_algebra()
        ep = continuous.integrate_hamel(S, kinetic(INERTIA), [], [1.0, 1.0, 1.0], 0.5, dt=1e-3, config=config)
        lp = continuous.integrate_hamilton(S, rigid_body_hamiltonian(), [], INERTIA, 0.5, dt=1e-3, config=config)
        np.testing.assert_allclose(INERTIA * ep.block("y"), lp.block("p"), atol=1e-6)

    def test_legendre_transform(self, config):
        L = compile_expr("0.5*y1^2 + cos(q1)", {"q": 1, "y": 1})
        H = continuous.legendre_transform(structures.coordinate_frame(1), L, config)
        assert H(q=[0.3], p=[1.5]) == pytest.approx(0.5 * 1.5 ** 2 - math.cos(0.3), abs=1e-8)
        np.testing.assert_allclose(H.grad("p", config, q=[0.3], p=[1.5]), [1.5], atol=1e-8)
        np.testing.assert_allclose(H.grad("q", config, q=[0.3], p=[1.5]), [math.sin(0.3)], atol=1e-8)

    def test_energy(self, config):
        E = continuous.lagrangian_energy(sho(), config)
        assert E(q=[0.6], y=[0.8]) == pytest.approx(0.5)


class TestVakonomic:
    def test_unconstrained_reduces_to_hamel(self, config):
        S = structures.martinet_frame()
        L = kinetic([1.0, 2.0, 0.5])
        q, y = np.array([0.2, 0.9, -0.1]), np.array([0.5, -0.3, 0.8])
        state = continuous.vakonomic_vector_field(S, L, [], config)(0.0, VakonomicState(q, y, []))
        qdot, ydot = continuous.hamel_vector_field(S, L, config)(0.0, q, y)
        np.testing.assert_allclose(state.q, qdot, atol=1e-12)
        np.testing.assert_allclose(state.y_free, ydot, atol=1e-10)
        assert state.mu_con.size == 0

    def test_martinet_closed_form(self, config):
        S = structures.martinet_frame()
        l = ScalarField(("q", "y"), lambda q, y: 0.5 * float(y @ y), {"q": lambda q, y: np.zeros(3), "y": lambda q, y: y})
        phi = continuous.solved_constraints(lambda q, y: np.zeros(1), 1)
        q, y, mu = np.array([0.1, 1.3, 0.2]), np.array([0.6, -0.4]), 0.7
        state = continuous.vakonomic_vector_field(S, l, phi, config)(0.0, VakonomicState(q, y, [mu]))
        np.testing.assert_allclose(state.q, [y[1], y[0], 0.5 * q[1] ** 2 * y[1]], atol=1e-12)
        np.testing.assert_allclose(state.y_free, [-mu * q[1] * y[1], mu * q[1] * y[0]], atol=1e-8)
        assert abs(state.mu_con[0]) <= 1e-12

    def test_too_many_constraints(self, config):
        phi = continuous.solved_constraints(lambda q, y: np.zeros(2), 2)
        with pytest.raises(InvalidArgumentError):
            continuous.vakonomic_vector_field(structures.coordinate_frame(1), sho(), phi, config)

    def test_labels(self, config):
        S = structures.martinet_frame()
        l = kinetic([1.0, 1.0])
        phi = continuous.solved_constraints(lambda q, y: np.zeros(1), 1)
        traj = continuous.integrate_vakonomic(S, l, phi, VakonomicState([0.0, 1.0, 0.0], [1.0, 0.5], [0.7]), 0.1,
                                              config=config)
        assert traj.labels == ("q1", "q2", "q3", "y1", "y2", "mu3")


class TestDirac:
    def _hamiltonian(self):
        return ScalarField(("q", "p"), lambda q, p: 0.5 * float(p @ p) + q[0],
                           {"q": lambda q, p: np.array([1.0, 0.0]), "p": lambda q, p: p})

    def _coordinate(self, block, index):
        return ScalarField(("q", "p"), lambda q, p: (q if block == "q" else p)[index])

    def test_secondary_constraint(self, config):
        residual = continuous.dirac_secondary_residual(self._hamiltonian(), [self._coordinate("q", 1)],
                                                       [0.4, 0.0], [0.3, 0.8], [0.0], config)
        assert residual[0] == pytest.approx(0.8, abs=1e-10)

    def test_single_constraint_is_singular(self, config):
        with pytest.raises(SingularMatrixError):
            continuous.dirac_multipliers(self._hamiltonian(), [self._coordinate("q", 1)], [0.4, 0.0], [0.3, 0.8], config)

    def test_second_class_pair(self, config):
        H = self._hamiltonian()
        phi = [self._coordinate("q", 1), self._coordinate("p", 1)]
        q, p = [0.4, 0.0], [0.3, 0.8]
        lam = continuous.dirac_multipliers(H, phi, q, p, config)
        np.testing.assert_allclose(lam, [0.0, -0.8], atol=1e-8)
        assert np.max(np.abs(continuous.dirac_secondary_residual(H, phi, q, p, lam, config))) <= 1e-8


class TestPontryagin:
    def test_lq_extremal(self, config):
        S, gamma, L = lq_problem()
        traj = continuous.pontryagin_shooting(S, gamma, L, [1.0], 1.0, dt=0.01, config=config)
        assert traj.labels == ("q1", "mu1", "u1")
        exact = np.cosh(traj.times - 1.0) / np.cosh(1.0)
        assert np.max(np.abs(traj.column("q1") - exact)) <= 1e-5
        assert abs(traj.column("mu1")[-1]) <= 1e-9
        np.testing.assert_allclose(traj.column("u1"), traj.column("mu1"), atol=1e-9)

    def test_control_cost_only(self, config):
        gamma = ControlField(1, lambda q, u: np.array(u, dtype=float))
        L = ScalarField(("q", "u"), lambda q, u: 0.5 * u[0] ** 2, {"q": lambda q, u: np.zeros(1), "u": lambda q, u: u})
        traj = continuous.pontryagin_shooting(structures.coordinate_frame(1), gamma, L, [0.7], 1.0, dt=0.01,
                                              config=config)
        np.testing.assert_allclose(traj.column("u1"), 0.0, atol=1e-9)
        np.testing.assert_allclose(traj.column("q1"), 0.7, atol=1e-9)

    def test_fixed_endpoint(self, config):
        S, gamma, L = lq_problem()
        traj = continuous.pontryagin_shooting(S, gamma, L, [1.0], 1.0, qT=[0.5], dt=0.01, config=config)
        assert traj.column("q1")[-1] == pytest.approx(0.5, abs=1e-9)

    def test_horizon_must_be_positive(self, config):
        S, gamma, L = lq_problem()
        with pytest.raises(InvalidArgumentError):
            continuous.pontryagin_shooting(S, gamma, L, [1.0], 0.0, config=config)

    def test_fixed_endpoint_needs_square_structure(self, config):
        S = structures.knife_edge_structure()
        gamma = ControlField(2, lambda q, u: np.array(u, dtype=float))
        L = ScalarField(("q", "u"), lambda q, u: 0.5 * float(u @ u))
        with pytest.raises(InvalidArgumentError):
            continuous.pontryagin_shooting(S, gamma, L, [0.0, 0.0, 0.0], 1.0, qT=[1.0, 0.0, 0.0], config=config)

    def test_residual_needs_derivatives(self, config):
        S, gamma, L = lq_problem()
        with pytest.raises(InvalidArgumentError):
            continuous.pontryagin_residual(S, gamma, L, PontryaginState([1.0], [0.0], [0.0]), config)

    def test_residual_on_extremal(self, config):
        S, gamma, L = lq_problem()
        q, mu = 0.8, -0.3
        state = PontryaginState([q], [mu], [mu], qdot=[mu], mudot=[q])
        Hu, costate, dynamics = continuous.pontryagin_residual(S, gamma, L, state, config)
        assert max(abs(Hu[0]), abs(costate[0]), abs(dynamics[0])) <= 1e-9

    def test_solve_control(self, config):
        S, gamma, L = lq_problem()
        u = continuous.solve_control(S, gamma, L, [0.2], [0.7], config=config)
        assert u[0] == pytest.approx(0.7, abs=1e-9)
