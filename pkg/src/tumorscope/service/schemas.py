"""Pydantic request/response models for the REST API."""
from __future__ import annotations

from typing import List, Optional

from pydantic import BaseModel


class LoginRequest(BaseModel):
    username: str
    password: str


class LoginResponse(BaseModel):
    token: str
    expires_at: float


class UploadResponse(BaseModel):
    upload_id: str
    patient_id: str
    status: str
    created_at: float


class StatusResponse(BaseModel):
    upload_id: str
    status: str


class DetectionModel(BaseModel):
    box: List[int]
    class_label: str
    score: float


class DiagnosisResultModel(BaseModel):
    upload_id: str
    patient_id: str
    label: str
    confidence: float
    overlay_ref: str
    detections: List[DetectionModel]
    created_at: float


class ErrorBody(BaseModel):
    code: str
    message: str
    field: Optional[str] = None
