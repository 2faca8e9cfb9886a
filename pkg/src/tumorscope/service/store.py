"""Embedded SQLite persistence for accounts, tokens, uploads, and results."""
from __future__ import annotations

import json
import sqlite3
import threading
from pathlib import Path
from typing import List, Optional

from ..errors import ValidationError

_SCHEMA = """
CREATE TABLE IF NOT EXISTS users (
    username TEXT PRIMARY KEY,
    password_digest TEXT NOT NULL,
    role TEXT NOT NULL DEFAULT 'clinician'
);
CREATE TABLE IF NOT EXISTS tokens (
    token_digest TEXT PRIMARY KEY,
    username TEXT NOT NULL,
    expires_at REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS uploads (
    upload_id TEXT PRIMARY KEY,
    patient_id TEXT NOT NULL,
    stored_path TEXT NOT NULL,
    status TEXT NOT NULL,
    error TEXT,
    created_at REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS results (
    upload_id TEXT PRIMARY KEY,
    patient_id TEXT NOT NULL,
    label TEXT NOT NULL,
    confidence REAL NOT NULL,
    overlay_name TEXT NOT NULL,
    detections_json TEXT NOT NULL,
    created_at REAL NOT NULL
);
"""

_STATUS_ORDER = {"received": 0, "processing": 1, "done": 2, "failed": 2}


class Store:
    """Thread-safe wrapper over one SQLite database file."""

    def __init__(self, database_path):
        Path(database_path).parent.mkdir(parents=True, exist_ok=True)
        self._conn = sqlite3.connect(str(database_path), check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._lock = threading.Lock()
        with self._lock:
            self._conn.executescript(_SCHEMA)
            self._conn.commit()

    def close(self) -> None:
        self._conn.close()

    # --- users / tokens -------------------------------------------------
    def create_user(self, username: str, password_digest: str) -> None:
        with self._lock:
            self._conn.execute(
                "INSERT OR REPLACE INTO users (username, password_digest) VALUES (?, ?)",
                (username, password_digest),
            )
            self._conn.commit()

    def get_user(self, username: str) -> Optional[sqlite3.Row]:
        return self._conn.execute(
            "SELECT * FROM users WHERE username = ?", (username,)
        ).fetchone()

    def save_token(self, token_digest: str, username: str, expires_at: float) -> None:
        with self._lock:
            self._conn.execute(
                "INSERT INTO tokens (token_digest, username, expires_at) VALUES (?, ?, ?)",
                (token_digest, username, expires_at),
            )
            self._conn.commit()

    def get_token(self, token_digest: str) -> Optional[sqlite3.Row]:
        return self._conn.execute(
            "SELECT * FROM tokens WHERE token_digest = ?", (token_digest,)
        ).fetchone()

    # --- uploads ----------------------------------------------------------
    def create_upload(
        self, upload_id: str, patient_id: str, stored_path: str, created_at: float
    ) -> None:
        with self._lock:
            self._conn.execute(
                "INSERT INTO uploads (upload_id, patient_id, stored_path, status, created_at)"
                " VALUES (?, ?, ?, 'received', ?)",
                (upload_id, patient_id, stored_path, created_at),
            )
            self._conn.commit()

    def get_upload(self, upload_id: str) -> Optional[sqlite3.Row]:
        return self._conn.execute(
            "SELECT * FROM uploads WHERE upload_id = ?", (upload_id,)
        ).fetchone()

    def set_status(self, upload_id: str, status: str, error: Optional[str] = None) -> None:
        with self._lock:
            row = self._conn.execute(
                "SELECT status FROM uploads WHERE upload_id = ?", (upload_id,)
            ).fetchone()
            if row is None:
                raise ValidationError(f"unknown upload {upload_id}")
            if _STATUS_ORDER[status] <= _STATUS_ORDER[row["status"]]:
                raise ValidationError(
                    f"illegal status transition {row['status']} -> {status}"
                )
            self._conn.execute(
                "UPDATE uploads SET status = ?, error = ? WHERE upload_id = ?",
                (status, error, upload_id),
            )
            self._conn.commit()

    # --- results ----------------------------------------------------------
    def save_result(
        self,
        upload_id: str,
        patient_id: str,
        label: str,
        confidence: float,
        overlay_name: str,
        detections: list,
        created_at: float,
    ) -> None:
        with self._lock:
            self._conn.execute(
                "INSERT OR REPLACE INTO results VALUES (?, ?, ?, ?, ?, ?, ?)",
                (
                    upload_id,
                    patient_id,
                    label,
                    confidence,
                    overlay_name,
                    json.dumps(detections),
                    created_at,
                ),
            )
            self._conn.commit()

    def get_result(self, upload_id: str) -> Optional[sqlite3.Row]:
        return self._conn.execute(
            "SELECT * FROM results WHERE upload_id = ?", (upload_id,)
        ).fetchone()

    def results_for_patient(self, patient_id: str) -> List[sqlite3.Row]:
        return self._conn.execute(
            "SELECT * FROM results WHERE patient_id = ? ORDER BY created_at DESC, upload_id DESC",
            (patient_id,),
        ).fetchall()

    def delete_result(self, upload_id: str) -> None:
        with self._lock:
            self._conn.execute("DELETE FROM results WHERE upload_id = ?", (upload_id,))
            self._conn.commit()

    def artifact_exists(self, overlay_name: str) -> bool:
        row = self._conn.execute(
            "SELECT 1 FROM results WHERE overlay_name = ?", (overlay_name,)
        ).fetchone()
        return row is not None
