import io
import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from tumorscope.data.types import mask_bbox
from tumorscope.engine.types import Detection
from tumorscope.service import ServiceConfig, create_app, hash_password, load_config
from tumorscope.service.auth import verify_password


class StubModel:
    """Deterministic stand-in: bright images get one detection, dark none."""

    def predict(self, image):
        if image.mean() < 10:
            return []
        mask = np.zeros(image.shape[:2], bool)
        mask[4:14, 4:14] = True
        return [Detection(box=mask_bbox(mask), class_label="tumor", score=0.93, mask=mask)]


class FakeClock:
    def __init__(self, start=1000.0):
        self.now = start

    def __call__(self):
        return self.now


def png_bytes(value=128, size=32, noise=False):
    if noise:
        arr = np.random.default_rng(0).integers(0, 256, (size, size, 3), dtype=np.uint8)
    else:
        arr = np.full((size, size, 3), value, np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


@pytest.fixture()
def service(tmp_path):
    clock = FakeClock()
    config = ServiceConfig(
        storage_root=tmp_path / "storage",
        database_path=tmp_path / "db.sqlite",
        run_dir=tmp_path / "run",
        token_secret="test-secret",
        initial_username="doc",
        initial_password="s3cret",
    )
    app = create_app(config, model=StubModel(), clock=clock)
    with TestClient(app) as client:
        yield client, clock, app


def login(client, username="doc", password="s3cret"):
    resp = client.post("/api/login", json={"username": username, "password": password})
    assert resp.status_code == 200, resp.text
    return {"Authorization": f"Bearer {resp.json()['token']}"}


def upload(client, headers, payload=None, patient_id="P-17"):
    return client.post(
        "/api/scans",
        headers=headers,
        files={"file": ("scan.png", payload or png_bytes(), "image/png")},
        data={"patient_id": patient_id},
    )


def wait_done(client, headers, upload_id, timeout=20.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        resp = client.get(f"/api/scans/{upload_id}/result", headers=headers)
        if resp.status_code != 202:
            return resp
        time.sleep(0.02)
    raise TimeoutError("upload never finished")


# --- auth -------------------------------------------------------------------

def test_password_hashing_roundtrip():
    stored = hash_password("pw")
    assert "pw" not in stored
    assert verify_password("pw", stored)
    assert not verify_password("other", stored)


def test_login_ok_and_bad_password(service):
    client, _, _ = service
    headers = login(client)
    assert headers["Authorization"].startswith("Bearer ")
    resp = client.post("/api/login", json={"username": "doc", "password": "nope"})
    assert resp.status_code == 401
    assert "token" not in resp.json()
    assert resp.json()["code"] == "bad_credentials"


def test_login_malformed_body(service):
    client, _, _ = service
    resp = client.post("/api/login", json={"username": "doc"})
    assert resp.status_code == 400
    assert resp.json()["field"] == "password"


def test_endpoints_require_token(service):
    client, _, _ = service
    assert upload(client, {}).status_code == 401
    assert client.get("/api/scans/x/result").status_code == 401
    assert client.get("/api/patients/p/results").status_code == 401
    assert client.get("/api/artifacts/x.png").status_code == 401


def test_token_expiry(service):
    client, clock, _ = service
    headers = login(client)
    assert client.get("/api/patients/p/results", headers=headers).status_code == 200
    clock.now += 3600 + 1
    assert client.get("/api/patients/p/results", headers=headers).status_code == 401
    assert upload(client, headers).status_code == 401


# --- upload validation ---------------------------------------------------------

def test_upload_happy_path_full_result(service):
    client, _, _ = service
    headers = login(client)
    resp = upload(client, headers, patient_id="P-17")
    assert resp.status_code == 202
    body = resp.json()
    assert body["status"] == "received"
    result = wait_done(client, headers, body["upload_id"])
    assert result.status_code == 200
    data = result.json()
    assert data["patient_id"] == "P-17"
    assert data["label"] == "tumor"
    assert data["confidence"] == pytest.approx(0.93)
    overlay = client.get(data["overlay_ref"], headers=headers)
    assert overlay.status_code == 200
    assert overlay.headers["content-type"] == "image/png"


def test_upload_negative_scan(service):
    client, _, _ = service
    headers = login(client)
    resp = upload(client, headers, payload=png_bytes(value=0))
    result = wait_done(client, headers, resp.json()["upload_id"])
    assert result.json()["label"] == "no_tumor"


def test_upload_rejects_text_file(service):
    client, _, _ = service
    headers = login(client)
    resp = client.post(
        "/api/scans",
        headers=headers,
        files={"file": ("notes.txt", b"hello", "text/plain")},
        data={"patient_id": "P-1"},
    )
    assert resp.status_code == 400
    assert resp.json()["code"] == "unsupported_media"


def test_upload_missing_patient_id(service):
    client, _, _ = service
    headers = login(client)
    resp = client.post(
        "/api/scans",
        headers=headers,
        files={"file": ("scan.png", png_bytes(), "image/png")},
    )
    assert resp.status_code == 400
    assert resp.json()["field"] == "patient_id"


def test_upload_oversize(tmp_path):
    config = ServiceConfig(
        storage_root=tmp_path / "st",
        database_path=tmp_path / "db.sqlite",
        run_dir=tmp_path / "run",
        max_upload_bytes=1024,
        initial_username="doc",
        initial_password="pw",
    )
    app = create_app(config, model=StubModel())
    with TestClient(app) as client:
        headers = login(client, password="pw")
        resp = upload(client, headers, payload=png_bytes(size=256, noise=True))
        assert resp.status_code == 413


# --- results -----------------------------------------------------------------

def test_unknown_upload_404(service):
    client, _, _ = service
    headers = login(client)
    resp = client.get("/api/scans/doesnotexist/result", headers=headers)
    assert resp.status_code == 404


def test_patient_history_ordering(service):
    client, clock, _ = service
    headers = login(client)
    ids = []
    for _ in range(3):
        resp = upload(client, headers, patient_id="P-9")
        ids.append(resp.json()["upload_id"])
        wait_done(client, headers, ids[-1])
        clock.now += 10
    resp = client.get("/api/patients/P-9/results", headers=headers)
    results = resp.json()
    assert [r["upload_id"] for r in results] == list(reversed(ids))
    created = [r["created_at"] for r in results]
    assert created == sorted(created, reverse=True)


def test_unknown_patient_empty_list(service):
    client, _, _ = service
    headers = login(client)
    resp = client.get("/api/patients/ghost/results", headers=headers)
    assert resp.status_code == 200 and resp.json() == []


def test_status_monotonic_under_polling(service):
    client, _, _ = service
    headers = login(client)
    resp = upload(client, headers)
    upload_id = resp.json()["upload_id"]
    observed = ["received"]
    deadline = time.monotonic() + 20
    while time.monotonic() < deadline:
        r = client.get(f"/api/scans/{upload_id}/result", headers=headers)
        status = r.json().get("status", "done") if r.status_code == 202 else "done"
        if status != observed[-1]:
            observed.append(status)
        if r.status_code == 200:
            break
        time.sleep(0.01)
    allowed = ["received", "processing", "done"]
    assert observed == [s for s in allowed if s in observed]


# --- artifacts ------------------------------------------------------------------

def test_artifact_traversal_rejected(service):
    client, _, _ = service
    headers = login(client)
    # names containing ".." are rejected by the handler
    resp = client.get("/api/artifacts/..config.json", headers=headers)
    assert resp.status_code == 400
    # an encoded "../" never reaches the filesystem: the router either
    # normalizes it away (404) or the handler rejects it (400)
    resp = client.get("/api/artifacts/..%2Fconfig.json", headers=headers)
    assert resp.status_code in (400, 404)


def test_artifact_unknown_404(service):
    client, _, _ = service
    headers = login(client)
    assert client.get("/api/artifacts/nope.png", headers=headers).status_code == 404


def test_artifact_of_deleted_result_404(service):
    client, _, app = service
    headers = login(client)
    resp = upload(client, headers)
    upload_id = resp.json()["upload_id"]
    result = wait_done(client, headers, upload_id).json()
    name = result["overlay_ref"].rsplit("/", 1)[-1]
    assert client.get(f"/api/artifacts/{name}", headers=headers).status_code == 200
    app.state.store.delete_result(upload_id)
    assert client.get(f"/api/artifacts/{name}", headers=headers).status_code == 404


def test_stored_paths_confined_to_storage_root(service, tmp_path):
    client, _, app = service
    headers = login(client)
    resp = upload(client, headers)
    upload_id = resp.json()["upload_id"]
    wait_done(client, headers, upload_id)
    from pathlib import Path

    storage_root = Path(app.state.config.storage_root).resolve()
    row = app.state.store.get_upload(upload_id)
    assert Path(row["stored_path"]).resolve().is_relative_to(storage_root)
    result = app.state.store.get_result(upload_id)
    overlay = storage_root / "overlays" / result["overlay_name"]
    assert overlay.resolve().is_relative_to(storage_root)
    assert overlay.exists()


# --- concurrency -----------------------------------------------------------------

def test_sixteen_concurrent_uploads(service):
    client, _, _ = service
    headers = login(client)
    results = {}
    errors = []

    def worker(i):
        try:
            resp = upload(client, headers, patient_id=f"P-{i:02d}")
            assert resp.status_code == 202
            results[i] = resp.json()["upload_id"]
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert len(set(results.values())) == 16
    for i, upload_id in results.items():
        final = wait_done(client, headers, upload_id, timeout=60)
        assert final.status_code == 200
        assert final.json()["patient_id"] == f"P-{i:02d}"


# --- config loading -----------------------------------------------------------------

def test_load_config_env_overrides(tmp_path):
    import json

    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"port": 9001, "detection_threshold": 0.4}))
    config = load_config(path, env={"TUMORSCOPE_PORT": "9100", "TUMORSCOPE_TOKEN_SECRET": "x"})
    assert config.port == 9100
    assert config.detection_threshold == 0.4
    assert config.token_secret == "x"
