"""Service configuration: JSON file plus TUMORSCOPE_* environment overrides."""
from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Mapping, Optional

from pydantic import BaseModel, Field


class ServiceConfig(BaseModel):
    storage_root: Path = Path("storage")
    database_path: Path = Path("storage/tumorscope.db")
    run_dir: Path = Path("run")
    detection_threshold: float = 0.5
    token_secret: str = "change-me"
    token_ttl_seconds: int = 3600
    host: str = "127.0.0.1"
    port: int = 8000
    max_upload_bytes: int = 16 * 1024 * 1024
    initial_username: Optional[str] = None
    initial_password: Optional[str] = None


_ENV_PREFIX = "TUMORSCOPE_"


def load_config(
    path: Optional[os.PathLike] = None, env: Optional[Mapping[str, str]] = None
) -> ServiceConfig:
    """Read the config file (if given), then apply environment overrides
    like TUMORSCOPE_STORAGE_ROOT or TUMORSCOPE_PORT."""
    data: dict = {}
    if path is not None:
        with open(path) as fh:
            data.update(json.load(fh))
    env = os.environ if env is None else env
    for field in ServiceConfig.model_fields:
        key = _ENV_PREFIX + field.upper()
        if key in env:
            data[field] = env[key]
    return ServiceConfig(**data)
