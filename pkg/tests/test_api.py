import pytest
from fastapi.testclient import TestClient

from app.formats.idfile import parse_id, write_id
from app.main import app

client = TestClient(app)


def test_root_and_health():
    root = client.get("/")
    assert root.status_code == 200
    assert "prox-one" in root.json()["solvers"]
    assert client.get("/health").json()["status"] == "ok"


def test_routes_listing():
    body = client.get("/api/routes").json()
    methods = {r["path"]: r["methods"] for r in body["routes"]}
    assert {"/api/solve", "/api/solve/uai", "/api/generate/random", "/api/generate/sensor"} <= set(methods)
    assert methods["/api/solve"] == ["POST"]
    assert methods["/health"] == ["GET"]
    assert body["total_routes"] == len(body["routes"])


def test_solve_text_diagram(blind_pair_id):
    resp = client.post("/api/solve", json={"diagram": write_id(blind_pair_id), "algo": "prox", "include_trace": True})
    assert resp.status_code == 200
    body = resp.json()
    assert body["success"] is True
    assert body["eu"] == pytest.approx(2.0)
    assert body["strategy"] == {"0": [1], "1": [1]}
    assert body["algorithm"] == "prox-one"
    assert len(body["trace"]) == body["iterations"]


def test_solve_rejects_bad_diagram():
    resp = client.post("/api/solve", json={"diagram": "MODE MUL\nVARS x\n"})
    assert resp.status_code == 400
    assert resp.json()["success"] is False
    assert "line 2" in resp.json()["error"]


def test_solve_validates_options(blind_pair_id):
    resp = client.post("/api/solve", json={"diagram": write_id(blind_pair_id), "restarts": 0})
    assert resp.status_code == 422


def test_solve_uai_upload(chain_uai_text):
    resp = client.post(
        "/api/solve/uai",
        files={"file": ("chain.uai", chain_uai_text, "text/plain")},
        data={"decisions": "0.5", "algo": "spu"},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["algorithm"] == "spu"
    assert len(body["strategy"]) == 1


def test_solve_uai_bad_algorithm(chain_uai_text):
    resp = client.post(
        "/api/solve/uai",
        files={"file": ("chain.uai", chain_uai_text, "text/plain")},
        data={"algo": "simplex"},
    )
    assert resp.status_code == 422
    assert resp.json()["success"] is False


def test_generate_sensor():
    resp = client.post("/api/generate/sensor", json={"width": 2, "height": 1})
    assert resp.status_code == 200
    body = resp.json()
    assert body["n_vars"] == 7
    assert body["decisions"] == 3
    assert parse_id(body["diagram"]).n_vars == 7


def test_generate_random_error_is_reported():
    resp = client.post("/api/generate/random", json={"n_vars": 3, "max_parents": 0, "decision_fraction": 0.3})
    assert resp.status_code == 400
    assert resp.json()["success"] is False
