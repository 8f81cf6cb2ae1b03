import warnings

import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from fastapi.testclient import TestClient

from loclearn.service.app import create_app


@pytest.fixture()
def client():
    with TestClient(create_app()) as c:
        yield c


SESSION = {"L": 20, "epsilon": 0.5, "dims": 1, "seed": 3, "pool_size": 500, "sample_cap": 20}


def test_health(client):
    assert client.get("/health").json()["status"] == "ok"


def test_preprocess_returns_partition_json(client):
    doc = client.post("/preprocess", json={"L": 10, "epsilon": 0.5, "dims": 1, "seed": 0}).json()
    assert doc["L"] == 10 and doc["parity"][0][0] in ("long", "short")


def test_degenerate_scale_is_a_422_with_the_error_name(client):
    resp = client.post("/preprocess", json={"L": 4, "epsilon": 0.5, "dims": 1})
    assert resp.status_code == 422 and resp.json()["error"] == "DegenerateScale"


def test_request_validation(client):
    assert client.post("/preprocess", json={"L": -1, "epsilon": 0.5}).status_code == 422


def test_session_lifecycle(client):
    info = client.post("/sessions", json=SESSION).json()
    sid = info["session_id"]
    assert info["pool_size"] == 500 and info["sample_cap"] == 20
    pts = [[0.05], [0.33], [0.71], [1.0]]
    first = client.post(f"/sessions/{sid}/query", json={"points": pts}).json()
    assert all(0 <= v <= 1 for v in first["values"])
    budget = client.get(f"/sessions/{sid}/budget").json()
    assert budget["distinct_labels"] == first["distinct_labels"] == sum(budget["per_cell"].values())

    ckpt = client.get(f"/sessions/{sid}/checkpoint").json()
    sid2 = client.post("/sessions/restore", json={"checkpoint": ckpt}).json()["session_id"]
    again = client.post(f"/sessions/{sid2}/query", json={"points": pts}).json()
    assert again == first

    client.delete(f"/sessions/{sid}")
    assert client.get(f"/sessions/{sid}/budget").status_code == 404


def test_out_of_domain_query_is_rejected(client):
    sid = client.post("/sessions", json=SESSION).json()["session_id"]
    resp = client.post(f"/sessions/{sid}/query", json={"points": [[1.5]]})
    assert resp.status_code == 422 and resp.json()["error"] == "OutOfDomain"


def test_table_labelled_pool(client):
    body = dict(SESSION, points=[[0.1], [0.5], [0.9]], labels=[0.2, 0.2, 0.2])
    sid = client.post("/sessions", json=body).json()["session_id"]
    vals = client.post(f"/sessions/{sid}/query", json={"points": [[0.1]]}).json()["values"]
    assert vals[0] in (0.2, 0.5)  # 0.5 only if 0.1 falls in a short interval with an empty neighbour


def test_estimate_endpoint(client):
    doc = client.post("/estimate-error", json={"L": 20, "epsilon": 0.5, "dims": 1, "seed": 1}).json()
    assert doc["n_fresh_labels"] == 4 and 0 <= doc["estimate"] <= 1


def test_nw_endpoint(client):
    body = {"epsilon": 0.5, "dims": 1, "points": [[0.1], [0.2], [0.8], [0.9]], "labels": [0, 0, 1, 1]}
    doc = client.post("/nw-error", json=body).json()
    assert doc["N"] == 4 and doc["n_labels"] <= 2 * doc["M"]


def test_nw_rejects_fractional_labels(client):
    body = {"epsilon": 0.5, "dims": 1, "points": [[0.1]], "labels": [0.5]}
    assert client.post("/nw-error", json=body).json()["error"] == "InvalidLabel"


def test_experiment_config_errors_carry_fields(client):
    resp = client.post("/experiment", json={"config": {"mode": "ERROR_EST", "seeds": []}})
    assert resp.status_code == 422
    assert "seeds" in {f for f, _ in resp.json()["errors"]}


def test_properties_endpoint(client):
    doc = client.post("/properties", json={"seed": 1, "checks": ["partition_tiles_domain"]}).json()
    assert doc["passed"] and len(doc["checks"]) == 1
