import pytest
from fastapi.testclient import TestClient

from ahoguard.data import HOMES_DIR
from ahoguard.platform import Platform
from ahoguard.service.app import create_app

LOCAL = {"Authorization": "Bearer dashboard"}
TRACKER = {"Authorization": "Bearer tracker"}
KASA = {"Authorization": "Bearer kasa"}


@pytest.fixture
def client():
    return TestClient(create_app(Platform.from_config(HOMES_DIR / "entry.json")))


def test_auth_required(client):
    assert client.get("/api/states").status_code == 401
    assert client.get("/api/states", headers={"Authorization": "Bearer nobody"}).status_code == 401
    assert client.get("/api/states", headers={"Authorization": "Basic dashboard"}).status_code == 401


def test_states(client):
    body = client.get("/api/states", headers=TRACKER).json()
    assert body["ahos"] == {"home": "away"}
    assert body["devices"]["lock-1"] == {"lock": "LOCKED"}


def test_endorsement_denial_maps_to_409_and_notifies(client):
    r = client.post("/api/aho/home", json={"value": "home"}, headers=TRACKER)
    assert r.status_code == 409
    body = r.json()
    assert body["reason"] == "endorsement_denied" and body["target"] == "aho:home=home"
    assert any("lock-1.lock==UNLOCKED(owner)" in f for f in body["failed_checks"])
    notes = client.get("/api/notifications", headers=LOCAL).json()
    assert len(notes) == 1 and notes[0]["principal"] == "third_party:tracker"


def test_physical_simulation_then_allow(client):
    for dev, verb, params in [("lock-1", "unlock", {"method": "owner"}), ("door-1", "open", {}),
                              ("motion-1", "walk-past", {})]:
        r = client.post("/sim/physical", json={"device": dev, "verb": verb, "params": params}, headers=LOCAL)
        assert r.status_code == 200, r.text
        client.post("/sim/advance", json={"ms": 1000}, headers=LOCAL)
    r = client.post("/api/aho/home", json={"value": "home"}, headers=TRACKER)
    assert r.status_code == 200 and r.json()["status"] == "APPLIED"


def test_permission_and_tamper_codes(client):
    r = client.post("/api/device/lock-1/lock", json={"value": "UNLOCKED(owner)"}, headers=TRACKER)
    assert r.status_code == 409 and r.json()["reason"] == "tamper_denied"
    r = client.post("/api/device/switch-1/power", json={"value": "ON"}, headers=TRACKER)
    assert r.status_code == 403 and r.json()["reason"] == "permission_denied"
    r = client.post("/api/device/switch-1/power", json={"value": "ON"}, headers=KASA)
    assert r.status_code == 200


def test_local_user_bypasses_endorsement(client):
    assert client.post("/api/aho/home", json={"value": "home"}, headers=LOCAL).status_code == 200


@pytest.mark.parametrize("path,body,code", [
    ("/api/aho/ghost", {"value": "x"}, 404),
    ("/api/aho/home", {"value": "mars"}, 400),
    ("/api/aho/home", {"value": ""}, 422),
    ("/api/device/ghost/power", {"value": "ON"}, 404),
    ("/api/device/switch-1/volume", {"value": "ON"}, 404),
    ("/api/device/switch-1/power", {"value": "HALF"}, 400),
    ("/api/device/switch-1/power", {"value": "ON("}, 400),
])
def test_bad_requests(client, path, body, code):
    assert client.post(path, json=body, headers=TRACKER).status_code == code


def test_sim_endpoints_need_local_token(client):
    assert client.post("/sim/advance", json={"ms": 5}, headers=TRACKER).status_code == 403
    assert client.post("/sim/advance", json={"ms": -5}, headers=LOCAL).status_code == 422
    assert client.post("/sim/advance", json={"ms": 5}, headers=LOCAL).json() == {"time": 5}
    r = client.post("/sim/physical", json={"device": "lock-1", "verb": "dance"}, headers=LOCAL)
    assert r.status_code == 400
    r = client.post("/sim/physical", json={"device": "ghost", "verb": "x"}, headers=LOCAL)
    assert r.status_code == 404


def test_policies_listing(client):
    body = client.get("/api/policies", headers=LOCAL).json()
    (pol,) = body["active"]
    assert pol["aho"] == "home" and pol["value"] == "home"
    ids = {c["device_id"] for p in pol["predicates"] for c in p["checks"]}
    assert ids == {"lock-1", "door-1", "motion-1"}
    assert body["unprotectable"] == []


def test_wall_clock_moves_time_forward():
    p = Platform.from_config(HOMES_DIR / "entry.json")
    c = TestClient(create_app(p, wall_clock=True))
    c.post("/sim/advance", json={"ms": 2000}, headers=LOCAL)
    t = c.get("/api/states", headers=LOCAL).json()["time"]
    assert t >= 2000
