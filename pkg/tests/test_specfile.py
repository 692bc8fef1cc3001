from pathlib import Path

import numpy as np
import pytest

import varcalc
from varcalc.exceptions import SpecError
from varcalc.services.specfile import load_spec, parse_spec

DATA = Path(varcalc.__file__).parent / "data"


class TestBundledSpecs:
    def test_sho(self):
        spec = load_spec(DATA / "sho.spec")
        assert spec.name == "sho"
        assert spec.kind == "lagrangian"
        assert spec.structure.kind == "coordinate" and spec.structure.dim == 1
        assert spec.q0 == [1.0] and spec.y0 == [0.0]
        assert spec.t1 == 10.0 and spec.dt == 0.001

    def test_constants_are_antisymmetrized(self):
        spec = load_spec(DATA / "rigid_body.spec")
        C = np.reshape(spec.structure.constants, (3, 3, 3))
        assert C[2, 0, 1] == 1.0 and C[2, 1, 0] == -1.0
        assert C[0, 1, 2] == 1.0 and C[0, 2, 1] == -1.0
        np.testing.assert_array_equal(C, -np.transpose(C, (0, 2, 1)))

    def test_frame_fields_and_lists(self):
        spec = load_spec(DATA / "martinet.spec")
        assert spec.structure.fields == [["0", "1", "0"], ["1", "0", "0.5*q2^2"], ["0", "0", "1"]]
        assert spec.constraints == ["0"]
        assert spec.mu0 == [0.7]

    def test_discrete_control(self):
        spec = load_spec(DATA / "discrete_lqr.spec")
        assert spec.control_dim == 1
        assert spec.control == ["1.1*q1 + 0.1*u1"]
        assert spec.steps == 20

    @pytest.mark.parametrize("name", ["sho", "martinet", "rigid_body", "discrete_lqr", "knife_edge"])
    def test_all_load(self, name):
        assert load_spec(DATA / f"{name}.spec").kind


class TestErrors:
    def test_unknown_section(self):
        with pytest.raises(SpecError, match="unknown sections"):
            parse_spec("[problem]\nkind = lagrangian\n[solver]\ntol = 1\n")

    def test_unknown_key(self):
        with pytest.raises(SpecError, match="unknown key 'speed'"):
            parse_spec("[problem]\nkind = lagrangian\n[initial]\nspeed = 1\n")

    def test_unknown_structure_key(self):
        with pytest.raises(SpecError, match="unknown key"):
            parse_spec("[problem]\nkind = lagrangian\n[structure]\nkind = coordinate\nrank = 2\n")

    def test_bad_float(self):
        with pytest.raises(SpecError, match="q0"):
            parse_spec("[problem]\nkind = lagrangian\n[initial]\nq0 = 1.0, one\n")

    def test_bad_constant(self):
        with pytest.raises(SpecError, match="constants"):
            parse_spec("[problem]\nkind = lie_poisson\n[structure]\nkind = algebra\ndim = 2\nconstants = 3,1,2:1\n")

    def test_constants_need_dim(self):
        with pytest.raises(SpecError, match="need dim"):
            parse_spec("[problem]\nkind = lie_poisson\n[structure]\nkind = algebra\nconstants = 1,1,2:1\n")

    def test_fixed_terminal_without_target(self):
        with pytest.raises(SpecError, match="qT"):
            parse_spec("[problem]\nkind = pontryagin\n[horizon]\nterminal = fixed\n")

    def test_invalid_value(self):
        with pytest.raises(SpecError):
            parse_spec("[problem]\nkind = lagrangian\n[horizon]\nt1 = -1\n")

    def test_unknown_kind(self):
        with pytest.raises(SpecError):
            parse_spec("[problem]\nkind = quantum\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(SpecError, match="cannot read"):
            load_spec(tmp_path / "absent.spec")

    def test_not_ini(self):
        with pytest.raises(SpecError):
            parse_spec("kind = lagrangian\n")
