import pytest

from varcalc.cli import EXIT_OK, EXIT_SOLVER, EXIT_SPEC, main

DEGENERATE = """
[problem]
name = degenerate
kind = lagrangian

[structure]
kind = coordinate
dim = 1

[functions]
lagrangian = y1

[initial]
q0 = 0.0
y0 = 0.0
"""


class TestList:
    def test_lists_catalog(self, capsys):
        assert main(["list"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "sho" in out and "discrete_lqr" in out
        assert len(out.strip().splitlines()) == 16


class TestRun:
    def test_catalog_problem(self, tmp_path, capsys):
        out = tmp_path / "pendulum.csv"
        assert main(["run", "--catalog", "pendulum", "--t1", "0.5", "--out", str(out)]) == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "t,q1,y1"
        assert len(lines) == 502
        assert "pendulum" in capsys.readouterr().out

    def test_spec_file(self, tmp_path):
        spec = tmp_path / "free.spec"
        spec.write_text("[problem]\nname = free\nkind = lagrangian\n[structure]\ndim = 1\n"
                        "[functions]\nlagrangian = 0.5*y1^2\n[initial]\nq0 = 0\ny0 = 1\n[horizon]\nt1 = 0.1\ndt = 0.01\n")
        out = tmp_path / "free.csv"
        assert main(["run", str(spec), "--out", str(out)]) == EXIT_OK
        t, q, y = (float(x) for x in out.read_text().splitlines()[-1].split(","))
        assert t == 0.1
        assert q == pytest.approx(0.1, abs=1e-12) and y == 1.0

    def test_bad_expression(self, tmp_path, capsys):
        spec = tmp_path / "bad.spec"
        spec.write_text(DEGENERATE.replace("lagrangian = y1", "lagrangian = 0.5*y1 +"))
        assert main(["run", str(spec), "--out", str(tmp_path / "bad.csv")]) == EXIT_SPEC
        assert "position" in capsys.readouterr().err

    def test_unknown_catalog_name(self, tmp_path, capsys):
        assert main(["run", "--catalog", "nope", "--out", str(tmp_path / "x.csv")]) == EXIT_SPEC
        assert "nope" in capsys.readouterr().err

    def test_missing_spec_file(self, tmp_path):
        assert main(["run", str(tmp_path / "absent.spec")]) == EXIT_SPEC

    def test_degenerate_lagrangian(self, tmp_path, capsys):
        spec = tmp_path / "degenerate.spec"
        spec.write_text(DEGENERATE)
        assert main(["run", str(spec), "--out", str(tmp_path / "d.csv")]) == EXIT_SOLVER
        assert "DegenerateLagrangianError" in capsys.readouterr().err

    def test_source_is_required(self):
        with pytest.raises(SystemExit):
            main(["run"])


class TestCheck:
    def test_empty_selection(self, capsys):
        assert main(["check", "--only", ""]) == EXIT_OK
        assert "0 passed, 0 failed" in capsys.readouterr().out

    def test_single_invariant(self, capsys):
        assert main(["check", "--only", "cli.catalog_completeness"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "PASS  cli.catalog_completeness" in out
        assert "1 passed, 0 failed" in out
