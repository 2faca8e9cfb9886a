"""Model configuration and its digest (checkpoint compatibility key)."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from typing import Dict

from ..errors import ConfigurationError


@dataclass(frozen=True)
class ModelConfig:
    num_classes: int = 2  # background + tumor
    input_size: int = 96
    epochs: int = 20
    steps_per_epoch: int = 0  # 0 = one step per training scan
    learning_rate: float = 1e-3
    roi_iou_threshold: float = 0.5
    detection_score_threshold: float = 0.5
    max_detections_per_image: int = 5
    mask_threshold: float = 0.5
    backbone_id: str = "smallconv-s8"
    random_seed: int = 0

    def validate(self, for_training: bool = False) -> None:
        if self.num_classes < 2:
            raise ConfigurationError("num_classes must be >= 2 (background + tumor)")
        if not (0.0 < self.roi_iou_threshold < 1.0):
            raise ConfigurationError("roi_iou_threshold must be in (0, 1)")
        if not (0.0 <= self.detection_score_threshold <= 1.0):
            raise ConfigurationError("detection_score_threshold must be in [0, 1]")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.input_size < 16 or self.input_size % 8 != 0:
            raise ConfigurationError("input_size must be >= 16 and a multiple of 8")
        if self.max_detections_per_image < 1:
            raise ConfigurationError("max_detections_per_image must be >= 1")
        if for_training and self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1 for training")

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> "ModelConfig":
        fields = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**fields)

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]
