import pytest
from fastapi.testclient import TestClient

from mre_spring import __version__
from mre_spring.api.main import create_app


@pytest.fixture
def client(fast_config, tmp_path):
    return TestClient(create_app(fast_config, cache_dir=tmp_path / "cache"))


def test_root(client):
    response = client.get("/")
    assert response.status_code == 200
    assert response.json() == {"message": "MRE Spring API", "version": __version__}


def test_materials(client):
    response = client.get("/api/materials")
    assert response.status_code == 200
    items = {m["name"]: m for m in response.json()}
    assert set(items) == {"air", "SIL_RTV", "SIL_MS10", "SIL_DS15", "MRE_RTV", "MRE_MS10", "MRE_DS15", "NdFeB"}
    assert items["MRE_RTV"]["matrix"] == "SIL_RTV"
    assert not items["SIL_RTV"]["gripper"]
    assert items["MRE_RTV"]["gripper"]
    assert items["MRE_RTV"]["e_mod_mpa"] == pytest.approx(0.81)
    assert items["NdFeB"]["b_r"] == pytest.approx(1.23)
    assert not items["air"]["gripper"]


def test_geometry_report(client):
    response = client.post("/api/geometry")
    assert response.status_code == 200
    body = response.json()
    assert body["r_open_mm"] == pytest.approx(8.0)
    assert body["r_close_mm"] == pytest.approx(4.3301, rel=1e-4)


def test_geometry_report_custom(client):
    response = client.post("/api/geometry", json={"n_fingers": 2})
    assert response.status_code == 200
    assert response.json()["r_close_mm"] is None

    response = client.post("/api/geometry", json={"r_frame_mm": 5.0})
    assert response.status_code == 422


def test_capacity(client):
    response = client.post("/api/capacity", json={})
    assert response.status_code == 200
    rows = response.json()
    assert [r["material"] for r in rows] == ["MRE_RTV", "MRE_MS10", "MRE_DS15"]
    assert rows[0]["predicted_mass_g"] == pytest.approx(97.4)

    response = client.post("/api/capacity", json={"friction_coeff": 0})
    assert all(r["predicted_mass_g"] == 0 for r in response.json())


def test_sweep(client):
    response = client.post("/api/sweep", json={"stop_deg": 70, "step_deg": 10})
    assert response.status_code == 200
    body = response.json()
    assert body["theta_deg"] == pytest.approx([0, 10, 20, 30, 40, 50, 60, 70])
    assert len(body["w_co_j"]) == len(body["t_mnm"]) == len(body["fd_t_mnm"]) == 8
    assert body["summary"]["n_samples"] == 8
    assert body["summary"]["spline"]["method"] == "gcv"
    finger = body["summary"]["finger_force"]
    assert finger["plateau_torque_mNm"] == pytest.approx(body["summary"]["plateau"]["mean_mNm"])
    assert finger["implied_torque_mNm"] == pytest.approx(8.05)


@pytest.mark.parametrize("payload", [
    {"stop_deg": 70, "step_deg": 10, "stripe": "MRE_XYZ"},
    {"stop_deg": 400, "step_deg": 10},
])
def test_sweep_bad_request(client, payload):
    response = client.post("/api/sweep", json=payload)
    assert response.status_code == 400
