import pytest
from fastapi.testclient import TestClient

from varcalc.main import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


class TestService:
    def test_root(self, client):
        response = client.get("/")
        assert response.status_code == 200
        assert response.json()["docs"] == "/docs"

    def test_health(self, client):
        assert client.get("/health").json() == {"status": "healthy", "service": "varcalc"}


class TestCatalog:
    def test_lists_all_problems(self, client):
        body = client.get("/api/v1/catalog").json()
        assert body["total"] == 16
        assert {"name": "sho", "kind": "lagrangian", "description": "harmonic oscillator, q(t) = cos t"} in body["problems"]


class TestRun:
    def test_catalog_run(self, client):
        response = client.post("/api/v1/run", json={"catalog": "sho", "t1": 0.1, "dt": 0.01})
        assert response.status_code == 200
        body = response.json()
        assert body["time_label"] == "t"
        assert body["labels"] == ["q1", "y1"]
        assert len(body["rows"]) == 11
        assert body["summary"]["name"] == "sho"

    def test_undefined_entries_are_null(self, client):
        body = client.post("/api/v1/run", json={"catalog": "discrete_lqr", "steps": 5}).json()
        assert body["time_label"] == "k"
        assert body["labels"] == ["q1", "u1", "mu1"]
        assert len(body["rows"]) == 6
        assert body["rows"][-1][2] is None
        assert body["rows"][0][3] is None
        assert all(v is not None for row in body["rows"][1:-1] for v in row)

    def test_inline_spec(self, client):
        text = "[problem]\nkind = lagrangian\n[structure]\ndim = 1\n[functions]\nlagrangian = 0.5*y1^2\n" \
               "[initial]\nq0 = 0\ny0 = 1\n[horizon]\nt1 = 0.1\ndt = 0.05\n"
        response = client.post("/api/v1/run", json={"spec_text": text})
        assert response.status_code == 200
        assert len(response.json()["rows"]) == 3

    def test_unknown_problem(self, client):
        assert client.post("/api/v1/run", json={"catalog": "nope"}).status_code == 404

    def test_both_sources(self, client):
        assert client.post("/api/v1/run", json={"catalog": "sho", "spec_text": "x"}).status_code == 422

    def test_no_source(self, client):
        assert client.post("/api/v1/run", json={}).status_code == 422

    def test_bad_expression(self, client):
        text = "[problem]\nkind = lagrangian\n[structure]\ndim = 1\n[functions]\nlagrangian = sin(\n" \
               "[initial]\nq0 = 0\ny0 = 1\n"
        response = client.post("/api/v1/run", json={"spec_text": text})
        assert response.status_code == 400
        assert "position" in response.json()["detail"]

    def test_degenerate_problem(self, client):
        text = "[problem]\nkind = lagrangian\n[structure]\ndim = 1\n[functions]\nlagrangian = y1\n" \
               "[initial]\nq0 = 0\ny0 = 0\n"
        response = client.post("/api/v1/run", json={"spec_text": text})
        assert response.status_code == 422
        assert response.json()["detail"].startswith("DegenerateLagrangianError")


class TestCheck:
    def test_filtered(self, client):
        body = client.post("/api/v1/check", json={"only": "cli.*"}).json()
        names = [r["name"] for r in body["results"]]
        assert names and all(name.startswith("cli.") for name in names)
        assert body["passed"] == len(names) and body["failed"] == 0

    def test_empty_filter(self, client):
        assert client.post("/api/v1/check", json={"only": ""}).json() == {"results": [], "passed": 0, "failed": 0}
