"""Credential hashing and opaque bearer tokens."""
from __future__ import annotations

import hashlib
import hmac
import secrets

_ITERATIONS = 60_000


def hash_password(password: str, salt: str | None = None) -> str:
    """Salted PBKDF2 digest, encoded as pbkdf2$<iterations>$<salt>$<hex>."""
    salt = salt or secrets.token_hex(8)
    digest = hashlib.pbkdf2_hmac(
        "sha256", password.encode(), salt.encode(), _ITERATIONS
    ).hex()
    return f"pbkdf2${_ITERATIONS}${salt}${digest}"


def verify_password(password: str, stored: str) -> bool:
    try:
        _, iterations, salt, digest = stored.split("$")
    except ValueError:
        return False
    candidate = hashlib.pbkdf2_hmac(
        "sha256", password.encode(), salt.encode(), int(iterations)
    ).hex()
    return hmac.compare_digest(candidate, digest)


def new_token() -> str:
    return secrets.token_urlsafe(32)


def token_digest(token: str, secret: str) -> str:
    """Tokens are stored only as an HMAC keyed by the service secret."""
    return hmac.new(secret.encode(), token.encode(), hashlib.sha256).hexdigest()
