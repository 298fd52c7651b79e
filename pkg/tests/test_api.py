import pytest
from fastapi.testclient import TestClient

from core.background_tasks import create_suite_run, get_suite_run, process_suite_run
from main import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_root_and_health(client):
    assert client.get("/health").json() == {"status": "healthy"}
    assert "lambda" in client.get("/").json()["languages"]


def test_trace(client):
    response = client.post("/api/trace", json={"language": "xtcl", "term": "S K I e"})
    assert response.status_code == 200
    body = response.json()
    assert [e["term"] for e in body["entries"]][-1] == "e"
    assert body["entries"][-1]["kind"] == "terminal"
    assert body["diverged"] is False


def test_trace_rejects_bad_terms(client):
    response = client.post("/api/trace", json={"language": "xtcl", "term": "S I I e"})
    assert response.status_code == 400
    assert response.json()["detail"].startswith("IllTyped")
    assert client.post("/api/trace", json={"language": "xtcl", "term": "I e", "fuel": -1}).status_code == 422


def test_denote(client):
    response = client.post("/api/denote", json={"language": "xtcl", "term": "I e", "depth": 2, "probe_size": 3})
    body = response.json()
    assert body["tree"]["tag"] == "reduct"
    assert body["tree"]["branches"][0]["tree"]["tag"] == "terminal"
    assert body["unravelling"] == "(1, ✓)"
    assert body["sort"] == "unit"


def test_bisim(client):
    response = client.post("/api/bisim", json={"language": "xtcl", "left": "e", "right": "I e", "depth": 1})
    body = response.json()
    assert body["verdict"] == "distinguished"
    assert body["witness"] == "root tags ✓ vs →"


def test_rules(client):
    body = client.get("/api/rules/xnccl").json()
    assert body["flat"] is True
    assert body["law"].startswith("law xnccl\n")
    assert client.get("/api/rules/ski").status_code == 400


def test_stages(client):
    body = client.get("/api/stages/xcl/1").json()
    assert body["count"] == 6
    assert len(body["elements"]) == 6
    assert client.get("/api/stages/xnccl/2").status_code == 413
    assert client.get("/api/stages/xtcl/0").status_code == 400


def test_suite_listing(client):
    body = client.get("/api/suites").json()
    assert "bound" in body["suites"]["tower"]
    assert "plus-biased" in body["mutations"]


def test_suite_run_lifecycle(client):
    response = client.post(
        "/api/suites/tower", json={"languages": ["xcl"], "params": {"bound": 2}}
    )
    assert response.status_code == 202
    run_id = response.json()["run_id"]
    run = client.get(f"/api/suites/runs/{run_id}").json()
    assert run["status"] == "done"
    assert run["records"][0]["verdict"] == "pass"


def test_suite_run_validation(client):
    assert client.post("/api/suites/smoke", json={}).status_code == 404
    assert client.post("/api/suites/tower", json={"params": {"width": 1}}).status_code == 400
    assert client.post("/api/suites/tower", json={"mutation": "K-forgets"}).status_code == 400
    assert client.get("/api/suites/runs/missing").status_code == 404


def test_failed_background_runs_keep_the_error():
    run = create_suite_run("tower", ["ski"])
    process_suite_run(run.run_id, "tower", ["ski"], 0, None, {})
    stored = get_suite_run(run.run_id)
    assert stored.status == "failed"
    assert "ski" in stored.error
    assert stored.finished_at is not None
