import json
import os

import pytest
from fastapi.testclient import TestClient

from casimirctl.service import app

CONFIG_PATH = os.path.join(os.path.dirname(__file__), "..", "configs", "pendulum.json")


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


@pytest.fixture(scope="module")
def base_config():
    with open(CONFIG_PATH) as f:
        cfg = json.load(f)
    cfg["optimizer"] = {"step_size": 1e-4, "epochs": 5}
    cfg["simulation"] = {
        "dt": 0.01,
        "horizon": 0.5,
        "n_trajectories": 2,
        "init_box": [[-2, 2], [-2, 2], [-2, 2]],
    }
    return cfg


@pytest.fixture(scope="module")
def trained(client, base_config):
    r = client.post("/train", json={"config": base_config, "verify": False})
    assert r.status_code == 200
    return r.json()


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json()["status"] == "ok"


def test_validate(client, base_config):
    r = client.post("/validate", json={"config": base_config})
    assert r.status_code == 200
    body = r.json()
    assert body["config_valid"] and body["structure_valid"]


def test_validate_bad_config_is_400(client, base_config):
    bad = dict(base_config)
    bad["mystery_field"] = 1
    r = client.post("/validate", json={"config": bad})
    assert r.status_code == 400
    assert "mystery_field" in r.json()["detail"]


def test_train_returns_report_and_model(client, trained):
    assert trained["epochs_run"] == 5
    assert trained["epsilon"] >= 0.0
    assert "H_c" in trained["model"]["networks"]
    assert len(trained["report"]["history"]) == 6


def test_verify_bound_endpoint(client, trained):
    r = client.post(
        "/verify-bound",
        json={"report": trained["report"], "model": trained["model"]},
    )
    # 5-epoch model: either a clean verdict or a 422 numeric failure
    assert r.status_code in (200, 422)
    if r.status_code == 200:
        body = r.json()
        assert set(body) >= {"passed", "distance", "bound", "z_bar"}


def test_simulate_endpoint(client, base_config, trained):
    r = client.post(
        "/simulate", json={"config": base_config, "model": trained["model"]}
    )
    assert r.status_code == 200
    body = r.json()
    assert len(body["trajectories"]) == 2
    assert all(not t["aborted"] for t in body["trajectories"])


def test_surface_endpoint(client, trained):
    r = client.post(
        "/export-surface", json={"model": trained["model"], "grid": [6, 4]}
    )
    assert r.status_code == 200
    body = r.json()
    assert len(body["q"]) == 6 and len(body["q"][0]) == 4
    assert len(body["V"]) == 6


def test_surface_bad_grid_is_400(client, trained):
    r = client.post(
        "/export-surface", json={"model": trained["model"], "grid": [1, 1]}
    )
    assert r.status_code == 400


def test_sweep_endpoint(client, base_config):
    r = client.post(
        "/sweep-a", json={"config": base_config, "values": [0.5]}
    )
    assert r.status_code == 200
    rows = r.json()["rows"]
    assert len(rows) == 1 and rows[0]["a"] == 0.5
