"""Engine result types: detections, diagnoses, training history."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..data.types import Box


@dataclass(frozen=True)
class Detection:
    box: Box
    class_label: str  # always "tumor" in this single-class setting
    score: float
    mask: np.ndarray  # bool, image-sized; foreground confined to box


@dataclass(frozen=True)
class Diagnosis:
    label: str  # "tumor" | "no_tumor"
    confidence: float
    detections: Tuple[Detection, ...] = ()


@dataclass(frozen=True)
class EpochRecord:
    epoch_index: int  # 1-based
    train_loss: float
    val_loss: Optional[float]


@dataclass(frozen=True)
class TrainingHistory:
    records: Tuple[EpochRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def train_losses(self) -> List[float]:
        return [r.train_loss for r in self.records]
