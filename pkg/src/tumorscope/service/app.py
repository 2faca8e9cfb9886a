"""FastAPI application: login, scan upload, result retrieval, artifacts."""
from __future__ import annotations

import io
import json
import time
import uuid
from contextlib import asynccontextmanager
from pathlib import Path
from typing import List, Optional

from fastapi import Depends, FastAPI, File, Form, HTTPException, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse
from PIL import Image

from .auth import hash_password, new_token, token_digest, verify_password
from .config import ServiceConfig
from .schemas import (
    DiagnosisResultModel,
    ErrorBody,
    LoginRequest,
    LoginResponse,
    StatusResponse,
    UploadResponse,
)
from .store import Store
from .worker import InferenceWorker

_IMAGE_FORMATS = {"PNG": ".png", "JPEG": ".jpg"}


def _error(status: int, code: str, message: str, field: Optional[str] = None):
    body = ErrorBody(code=code, message=message, field=field)
    return JSONResponse(status_code=status, content=body.model_dump(exclude_none=True))


def _load_model(config: ServiceConfig):
    from ..engine import ModelConfig, load_inference_model

    with open(Path(config.run_dir) / "config.json") as fh:
        model_config = ModelConfig.from_dict(json.load(fh))
    return load_inference_model(config.run_dir, model_config)


def create_app(config: ServiceConfig, model=None, clock=time.time) -> FastAPI:
    """Build the service; `model` and `clock` are injectable for tests."""
    store = Store(config.database_path)
    storage_root = Path(config.storage_root).resolve()
    (storage_root / "uploads").mkdir(parents=True, exist_ok=True)
    (storage_root / "overlays").mkdir(parents=True, exist_ok=True)
    if config.initial_username and config.initial_password:
        if store.get_user(config.initial_username) is None:
            store.create_user(config.initial_username, hash_password(config.initial_password))

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        inference_model = model if model is not None else _load_model(config)
        worker = InferenceWorker(
            store, storage_root, inference_model, config.detection_threshold, clock=clock
        )
        worker.start()
        app.state.worker = worker
        yield
        worker.stop()
        store.close()

    app = FastAPI(title="tumorscope", lifespan=lifespan)
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.store = store
    app.state.config = config
    app.state.clock = clock

    @app.exception_handler(HTTPException)
    async def http_error(request: Request, exc: HTTPException):
        if isinstance(exc.detail, dict):
            return _error(exc.status_code, **exc.detail)
        return _error(exc.status_code, code=f"http_{exc.status_code}", message=str(exc.detail))

    @app.exception_handler(RequestValidationError)
    async def validation_error(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        loc = first.get("loc", ())
        field = str(loc[-1]) if loc else None
        return _error(400, code="validation_error", message=first.get("msg", "invalid request"), field=field)

    def require_auth(request: Request) -> str:
        header = request.headers.get("Authorization", "")
        if not header.startswith("Bearer "):
            raise HTTPException(401, {"code": "unauthorized", "message": "missing bearer token"})
        row = store.get_token(token_digest(header.removeprefix("Bearer "), config.token_secret))
        if row is None or row["expires_at"] <= clock():
            raise HTTPException(401, {"code": "unauthorized", "message": "invalid or expired token"})
        return row["username"]

    @app.post("/api/login", response_model=LoginResponse)
    async def login(body: LoginRequest):
        user = store.get_user(body.username)
        if user is None or not verify_password(body.password, user["password_digest"]):
            raise HTTPException(401, {"code": "bad_credentials", "message": "invalid username or password"})
        token = new_token()
        expires_at = clock() + config.token_ttl_seconds
        store.save_token(token_digest(token, config.token_secret), body.username, expires_at)
        return LoginResponse(token=token, expires_at=expires_at)

    @app.post("/api/scans", response_model=UploadResponse, status_code=202)
    async def upload_scan(
        request: Request,
        file: UploadFile = File(...),
        patient_id: str = Form(...),
        _user: str = Depends(require_auth),
    ):
        if not patient_id.strip():
            raise HTTPException(
                400, {"code": "validation_error", "message": "patient_id must not be empty", "field": "patient_id"}
            )
        payload = await file.read()
        if len(payload) > config.max_upload_bytes:
            raise HTTPException(
                413,
                {"code": "payload_too_large",
                 "message": f"upload exceeds {config.max_upload_bytes} bytes"},
            )
        try:
            with Image.open(io.BytesIO(payload)) as im:
                ext = _IMAGE_FORMATS[im.format]
                im.verify()
        except Exception:
            raise HTTPException(
                400, {"code": "unsupported_media", "message": "file must be a PNG or JPEG image", "field": "file"}
            )
        upload_id = uuid.uuid4().hex
        stored_path = storage_root / "uploads" / f"{upload_id}{ext}"
        stored_path.write_bytes(payload)
        created_at = clock()
        store.create_upload(upload_id, patient_id, str(stored_path), created_at)
        request.app.state.worker.enqueue(upload_id)
        return UploadResponse(
            upload_id=upload_id, patient_id=patient_id, status="received", created_at=created_at
        )

    def _result_model(row) -> DiagnosisResultModel:
        return DiagnosisResultModel(
            upload_id=row["upload_id"],
            patient_id=row["patient_id"],
            label=row["label"],
            confidence=row["confidence"],
            overlay_ref=f"/api/artifacts/{row['overlay_name']}",
            detections=json.loads(row["detections_json"]),
            created_at=row["created_at"],
        )

    @app.get("/api/scans/{upload_id}/result", response_model=DiagnosisResultModel)
    async def get_result(upload_id: str, _user: str = Depends(require_auth)):
        upload = store.get_upload(upload_id)
        if upload is None:
            raise HTTPException(404, {"code": "not_found", "message": f"unknown upload {upload_id}"})
        if upload["status"] == "failed":
            return _error(500, code="processing_failed", message=upload["error"] or "inference failed")
        if upload["status"] != "done":
            return JSONResponse(
                status_code=202,
                content=StatusResponse(upload_id=upload_id, status=upload["status"]).model_dump(),
            )
        row = store.get_result(upload_id)
        if row is None:
            raise HTTPException(404, {"code": "not_found", "message": "result was deleted"})
        return _result_model(row)

    @app.get("/api/patients/{patient_id}/results", response_model=List[DiagnosisResultModel])
    async def patient_results(patient_id: str, _user: str = Depends(require_auth)):
        return [_result_model(r) for r in store.results_for_patient(patient_id)]

    @app.get("/api/artifacts/{name}")
    async def get_artifact(name: str, _user: str = Depends(require_auth)):
        if "/" in name or "\\" in name or ".." in name:
            raise HTTPException(400, {"code": "bad_name", "message": "illegal artifact name"})
        path = (storage_root / "overlays" / name).resolve()
        if not str(path).startswith(str(storage_root)):
            raise HTTPException(400, {"code": "bad_name", "message": "illegal artifact name"})
        if not store.artifact_exists(name) or not path.exists():
            raise HTTPException(404, {"code": "not_found", "message": f"no artifact {name}"})
        return FileResponse(path, media_type="image/png")

    return app
