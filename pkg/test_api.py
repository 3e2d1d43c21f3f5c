"""
API 테스트
=========
FastAPI TestClient 로 라우터 / 예외 핸들러 확인
"""

import pytest
from fastapi.testclient import TestClient

from main import app


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as client:
        yield client


def test_root(client):
    response = client.get("/")
    assert response.status_code == 200
    body = response.json()
    assert body["success"] is True
    assert body["data"]["status"] == "healthy"


def test_health_reports_the_cache(client):
    client.get("/api/groups/info", params={"group": "sym:3"})
    body = client.get("/api/health").json()
    assert body["status"] == "healthy"
    assert "sym:3" in body["cache"]["groups"]
    assert body["settings"]["table_cap"] > 0


def test_group_info(client):
    response = client.get("/api/groups/info", params={"group": "gl2:3"})
    assert response.status_code == 200
    data = response.json()["data"]
    assert (data["kappa"], data["epsilon"], data["iota"]) == (8, 6, 14)
    assert data["cp"] == "1/6"


def test_group_info_rejects_bad_spec(client):
    response = client.get("/api/groups/info", params={"group": "sym:x"})
    assert response.status_code == 400
    assert response.json()["success"] is False


def test_energy(client):
    response = client.post("/api/groups/energy", json={"group": "cyclic:100", "a": [0, 1, 3, 7]})
    assert response.status_code == 200
    data = response.json()["data"]
    assert data["energy"] == 28
    assert data["product_set_size"] == 10

    response = client.post("/api/groups/energy", json={
        "group": "sym:3", "a": [0, 1, 2, 3, 4, 5], "d": [0, 1, 2], "action": "natural",
    })
    assert response.json()["data"]["energy"] == 108


def test_energy_validation(client):
    response = client.post("/api/groups/energy", json={"group": "cyclic:5", "a": [1], "variant": "XY"})
    assert response.status_code == 422
    response = client.post("/api/groups/energy", json={"group": "cyclic:5", "a": [7]})
    assert response.status_code == 400


def test_expectation(client):
    response = client.get("/api/groups/expectation", params={"group": "sym:3", "k": 2})
    assert response.status_code == 200
    data = response.json()["data"]
    assert data["value"] == "28/5"
    assert data["method"] == "BINOMIAL_Q"

    response = client.get("/api/groups/expectation", params={"group": "sym:3", "k": 2, "variant": "ACTION"})
    assert response.status_code == 400


def test_mc_estimate(client):
    request = {"group": "sym:4", "k": 5, "trials": 200, "seed": 3}
    first = client.post("/api/experiments/mc-estimate", json=request).json()
    second = client.post("/api/experiments/mc-estimate", json=request).json()
    assert first["success"] is True
    assert first["data"] == second["data"]

    ball = client.post("/api/experiments/mc-estimate", json={"model": "lattice:1", "radius": 20, "k": 2, "trials": 50})
    assert ball.json()["data"]["mean"] == 6


@pytest.mark.parametrize("request_body", [
    {"k": 2},
    {"group": "sym:3", "model": "free:2", "radius": 1, "k": 2},
    {"model": "free:2", "k": 2},
    {"group": "sym:3", "k": 2, "statistic": "ENERGY_ACTION", "h": 2},
    {"group": "sym:3", "k": 2, "statistic": "NOT_A_STATISTIC"},
])
def test_mc_estimate_rejects(client, request_body):
    assert client.post("/api/experiments/mc-estimate", json=request_body).status_code == 400


def test_mc_estimate_trial_limit(client):
    response = client.post("/api/experiments/mc-estimate", json={"group": "sym:3", "k": 2, "trials": 200_000})
    assert response.status_code == 422


def test_ball_densities(client):
    response = client.get("/api/experiments/ball-densities", params={"model": "free:2", "n_max": 3})
    assert response.status_code == 200
    rows = response.json()["data"]["rows"]
    assert [row["ball"] for row in rows] == [1, 5, 17, 53]


def test_thin_basis(client):
    data = client.get("/api/experiments/thin-basis", params={"n": 4}).json()["data"]
    assert (data["a_count"], data["residue_count"], data["sumset_count"]) == (5, 7, 9)


def test_power_cover(client):
    response = client.post("/api/experiments/power-cover", json={"group": "sym:3", "a": [0, 2, 3], "m": 3})
    assert response.status_code == 200
    assert response.json()["data"]["sizes"] == [3, 6, 6]
    assert client.post("/api/experiments/power-cover", json={"group": "sym:3", "a": [0], "m": 9}).status_code == 422
