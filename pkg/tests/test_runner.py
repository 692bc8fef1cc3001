from pathlib import Path

import numpy as np
import pytest

import varcalc
from varcalc.exceptions import ExprSyntaxError, SpecError, UnknownProblemError
from varcalc.schemas.schemas import ProblemSpec, StructureSpec
from varcalc.services.catalog import CatalogService
from varcalc.services.runner import RunService
from varcalc.services.specfile import load_spec

DATA = Path(varcalc.__file__).parent / "data"
COORD1 = StructureSpec(kind="coordinate", dim=1)


def catalog(name, **overrides):
    return RunService.apply_overrides(CatalogService.get(name), **overrides)


class TestCatalog:
    def test_names(self):
        names = CatalogService.names()
        assert len(names) == 16
        assert len(set(names)) == 16
        assert {"sho", "martinet", "rigid_body", "discrete_lqr", "pair_groupoid_del"} <= set(names)

    def test_entries(self):
        entries = CatalogService.entries()
        assert [e.name for e in entries] == CatalogService.names()
        assert all(e.description for e in entries)

    def test_unknown(self):
        with pytest.raises(UnknownProblemError, match="sho"):
            CatalogService.get("nope")


class TestOverrides:
    def test_override_copies(self):
        spec = CatalogService.get("sho")
        changed = RunService.apply_overrides(spec, t1=1.0, dt=0.01)
        assert changed.t1 == 1.0 and changed.dt == 0.01
        assert spec.t1 == 10.0

    def test_no_override_keeps_spec(self):
        spec = CatalogService.get("discrete_lqr")
        assert RunService.apply_overrides(spec) is spec


class TestContinuousRuns:
    def test_sho(self, config):
        result = RunService.run(catalog("sho", t1=1.0), config)
        traj = result.trajectory
        assert traj.time_label == "t"
        assert traj.labels == ("q1", "y1")
        assert np.max(np.abs(traj.column("q1") - np.cos(traj.times))) <= 1e-6
        assert result.summary.drifts["energy_drift"] <= 1e-9
        assert result.summary.samples == len(traj)

    def test_martinet_multiplier_is_constant(self, config):
        result = RunService.run(catalog("martinet"), config)
        assert result.trajectory.labels == ("q1", "q2", "q3", "y1", "y2", "mu3")
        assert result.summary.drifts["mu3_drift"] <= 1e-9

    def test_martinet_spec_file_matches_catalog(self, config):
        from_file = RunService.run(RunService.apply_overrides(load_spec(DATA / "martinet.spec"), dt=0.01), config)
        built_in = RunService.run(catalog("martinet", dt=0.01), config)
        np.testing.assert_allclose(from_file.trajectory.final, built_in.trajectory.final, atol=1e-6)

    def test_rigid_body_casimir(self, config):
        result = RunService.run(catalog("rigid_body"), config)
        assert result.summary.drifts["casimir_drift"] <= 1e-8
        assert result.summary.drifts["energy_drift"] <= 1e-8

    def test_rigid_body_from_constants(self, config):
        result = RunService.run(RunService.apply_overrides(load_spec(DATA / "rigid_body.spec"), t1=0.1), config)
        built_in = RunService.run(catalog("rigid_body", t1=0.1), config)
        np.testing.assert_allclose(result.trajectory.final, built_in.trajectory.final, atol=1e-10)

    def test_lie_poisson(self, config):
        result = RunService.run(catalog("so3_lie_poisson"), config)
        assert result.trajectory.labels == ("p1", "p2", "p3")
        assert result.summary.drifts["casimir_drift"] <= 1e-8


class TestDiscreteRuns:
    def test_discrete_lqr_columns(self, config):
        result = RunService.run(catalog("discrete_lqr"), config)
        traj = result.trajectory
        assert traj.time_label == "k"
        assert traj.labels == ("q1", "u1", "mu1")
        np.testing.assert_array_equal(traj.times, np.arange(21.0))
        assert np.isnan(traj.column("u1")[-1]) and not np.any(np.isnan(traj.column("u1")[:-1]))
        assert np.isnan(traj.column("mu1")[0]) and not np.any(np.isnan(traj.column("mu1")[1:]))
        assert result.summary.drifts["residual_max"] <= 1e-9

    def test_discrete_free_particle_momentum(self, config):
        result = RunService.run(catalog("discrete_free_particle", steps=20), config)
        assert result.summary.drifts["momentum_drift"] <= 1e-9
        np.testing.assert_allclose(result.trajectory.column("q1"), 0.1 * np.arange(21), atol=1e-9)

    def test_so3_discrete_lie_poisson(self, config):
        result = RunService.run(catalog("so3_discrete_lie_poisson"), config)
        assert result.trajectory.labels == ("v1", "v2", "v3", "mu1", "mu2", "mu3")
        assert result.summary.drifts["update_defect"] <= 1e-9
        assert result.summary.drifts["casimir_drift"] <= 1e-8

    def test_pair_groupoid(self, config):
        result = RunService.run(catalog("pair_groupoid_del", steps=20), config)
        assert len(result.trajectory) == 21
        assert result.summary.drifts["residual_max"] <= 1e-8


class TestBuildErrors:
    def test_algebra_constants_count(self):
        with pytest.raises(SpecError, match="structure constants"):
            RunService.build_structure(StructureSpec(kind="algebra", dim=2, constants=[1.0]))

    def test_groupoid_is_not_an_algebroid(self):
        with pytest.raises(SpecError, match="groupoid"):
            RunService.build_structure(StructureSpec(kind="pair_groupoid", dim=1))

    def test_algebroid_is_not_a_groupoid(self):
        with pytest.raises(SpecError, match="groupoid structure"):
            RunService.build_groupoid(COORD1)

    def test_euler_poincare_needs_algebra(self, config):
        spec = ProblemSpec(kind="euler_poincare", structure=COORD1, lagrangian="0.5*y1^2", q0=[0.0], y0=[1.0])
        with pytest.raises(SpecError, match="Lie algebra"):
            RunService.run(spec, config)

    def test_bad_expression_reports_position(self, config):
        spec = ProblemSpec(kind="lagrangian", structure=COORD1, lagrangian="0.5*y1^^2", q0=[0.0], y0=[1.0])
        with pytest.raises(ExprSyntaxError, match="lagrangian") as info:
            RunService.run(spec, config)
        assert isinstance(info.value.position, int)

    def test_missing_expression(self, config):
        with pytest.raises(SpecError, match="needs a lagrangian"):
            RunService.run(ProblemSpec(kind="lagrangian", structure=COORD1, q0=[0.0], y0=[1.0]), config)

    def test_wrong_initial_length(self, config):
        spec = ProblemSpec(kind="lagrangian", structure=COORD1, lagrangian="0.5*y1^2", q0=[0.0, 1.0], y0=[1.0])
        with pytest.raises(SpecError, match="q0"):
            RunService.run(spec, config)

    def test_discrete_needs_steps(self, config):
        with pytest.raises(SpecError, match="steps"):
            RunService.run(catalog("discrete_sho", steps=0), config)


class TestCsv:
    def test_round_trip_keeps_missing_entries(self, config, tmp_path):
        traj = RunService.run(catalog("discrete_lqr"), config).trajectory
        path = tmp_path / "lqr.csv"
        RunService.write_csv(traj, path)
        assert path.read_text().splitlines()[0] == "k,q1,u1,mu1"
        back = RunService.read_csv(path)
        assert back.time_label == "k" and back.labels == traj.labels
        np.testing.assert_array_equal(back.times, traj.times)
        np.testing.assert_array_equal(back.states, traj.states)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(SpecError):
            RunService.read_csv(path)
