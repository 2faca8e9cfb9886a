from .app import create_app
from .auth import hash_password, verify_password
from .config import ServiceConfig, load_config
from .store import Store
from .worker import InferenceWorker

__all__ = [
    "InferenceWorker",
    "ServiceConfig",
    "Store",
    "create_app",
    "hash_password",
    "load_config",
    "verify_password",
]
