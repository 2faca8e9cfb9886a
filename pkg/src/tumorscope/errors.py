"""Exception hierarchy shared across the package."""


class TumorscopeError(Exception):
    """Base class for all package errors."""


class ConfigurationError(TumorscopeError):
    """Invalid configuration value or combination."""


class ValidationError(TumorscopeError):
    """Input data violates a documented invariant."""


class DataError(TumorscopeError):
    """Dataset-level problem (missing scans, bad ground truth, ...)."""


class LoadError(DataError):
    """Itemized loading failure; ``items`` lists one message per bad file."""

    def __init__(self, message: str, items: list[str] | None = None):
        super().__init__(message)
        self.items = items or []

    def __str__(self) -> str:  # pragma: no cover - formatting only
        base = super().__str__()
        if self.items:
            return base + "\n" + "\n".join("  - " + it for it in self.items)
        return base


class UnknownScanError(TumorscopeError, LookupError):
    """Lookup for a scan_id that is not present."""


class WeightsShapeError(TumorscopeError):
    """Pretrained weights do not match the declared tensor-shape manifest."""


class CheckpointNotFoundError(TumorscopeError):
    """A run directory contains no usable checkpoint."""


class CheckpointMismatchError(TumorscopeError):
    """Checkpoint was produced under a different model configuration."""
