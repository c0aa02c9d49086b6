"""
Tests for the read-only results API.

Tests cover:
- Listing runs with method filter and limit, skipping unreadable summaries
- Run detail with per-repetition results
- Persistence CSV for one repetition and combined
- 404 for unknown runs and 400 for names escaping the results directory
"""

import json

import pytest
from fastapi.testclient import TestClient

from app.main import app
from app.models.run_report import RepetitionResult, RunSummary, StatBlock
from app.routers.runs import get_results_dir


def _write_run(root, name, method, n_reps=2):
    run_dir = root / name
    run_dir.mkdir(parents=True)
    summary = RunSummary(method=method, dataset="toy", repetitions=n_reps, n_ok=n_reps, n_failed=0,
                         elbo=StatBlock(mean=-10.0, q25=-11.0, q75=-9.0))
    (run_dir / "summary.json").write_text(summary.model_dump_json())
    for rep in range(n_reps):
        rep_dir = run_dir / f"rep_{rep:03d}"
        rep_dir.mkdir()
        result = RepetitionResult(repetition=rep, seed=rep, method=method, dataset="toy", status="ok", elbo=-10.0)
        (rep_dir / "result.json").write_text(result.model_dump_json())
        (rep_dir / "persistence.csv").write_text("epsilon_degrees,covering_number\n0.01,3\n1,1\n")
    return run_dir


@pytest.fixture
def results_root(tmp_path):
    root = tmp_path / "results"
    root.mkdir()
    _write_run(root, "a_rrt", "rrt_onvi")
    _write_run(root, "b_hmc", "hmc_onvi", n_reps=1)
    broken = root / "c_broken"
    broken.mkdir()
    (broken / "summary.json").write_text("{")
    return root


@pytest.fixture
def client(results_root):
    app.dependency_overrides[get_results_dir] = lambda: results_root
    yield TestClient(app)
    app.dependency_overrides.clear()


class TestListRuns:

    def test_lists_readable_runs(self, client):
        response = client.get("/api/v1/runs")
        assert response.status_code == 200
        body = response.json()
        assert body["total"] == 2
        assert body["unreadable"] == 1
        assert [r["name"] for r in body["runs"]] == ["a_rrt", "b_hmc"]
        assert body["runs"][0]["elbo_mean"] == -10.0

    def test_method_filter_and_limit(self, client):
        assert client.get("/api/v1/runs", params={"method": "hmc_onvi"}).json()["total"] == 1
        assert len(client.get("/api/v1/runs", params={"limit": 1}).json()["runs"]) == 1

    def test_missing_results_dir(self, tmp_path):
        app.dependency_overrides[get_results_dir] = lambda: tmp_path / "absent"
        try:
            assert TestClient(app).get("/api/v1/runs").status_code == 503
        finally:
            app.dependency_overrides.clear()


class TestRunDetail:

    def test_summary_and_repetitions(self, client):
        body = client.get("/api/v1/runs/a_rrt").json()
        assert body["summary"]["method"] == "rrt_onvi"
        assert [r["repetition"] for r in body["repetitions"]] == [0, 1]

    def test_unreadable_repetition_is_reported(self, client, results_root):
        (results_root / "a_rrt" / "rep_001" / "result.json").write_text("[]")
        body = client.get("/api/v1/runs/a_rrt").json()
        assert body["repetitions"][1]["file"] == "rep_001/result.json"

    def test_unreadable_summary(self, client):
        assert client.get("/api/v1/runs/c_broken").status_code == 500

    def test_unknown_run(self, client):
        assert client.get("/api/v1/runs/nope").status_code == 404

    def test_name_escaping_root(self, client, results_root):
        outside = results_root.parent / "outside"
        outside.mkdir()
        (outside / "summary.json").write_text(json.dumps({}))
        assert client.get("/api/v1/runs/..%2Foutside").status_code == 400


class TestPersistence:

    def test_single_repetition(self, client):
        response = client.get("/api/v1/runs/a_rrt/persistence", params={"repetition": 0})
        assert response.status_code == 200
        assert response.text.startswith("epsilon_degrees,covering_number")

    def test_combined(self, client):
        lines = client.get("/api/v1/runs/a_rrt/persistence").text.strip().splitlines()
        assert lines[0] == "repetition,epsilon_degrees,covering_number"
        assert len(lines) == 1 + 2 * 2

    def test_missing_repetition(self, client):
        assert client.get("/api/v1/runs/a_rrt/persistence", params={"repetition": 7}).status_code == 404


def test_health(client):
    assert client.get("/health").json()["status"] == "ok"
