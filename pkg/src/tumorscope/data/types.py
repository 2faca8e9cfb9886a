"""Core dataset types: scans, ground truth, splits, patient-ID maps."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import UnknownScanError, ValidationError

# (r0, c0, r1, c1), half-open: rows r0..r1-1 and cols c0..c1-1 are inside.
Box = Tuple[int, int, int, int]

LABEL_TUMOR = "tumor"
LABEL_NO_TUMOR = "no_tumor"
MIN_SIDE = 16


def mask_bbox(mask: np.ndarray) -> Box:
    """Tight half-open bounding box of a binary mask's foreground.

    Raises ValidationError when the mask has no foreground pixel.
    """
    mask = np.asarray(mask)
    rows = np.any(mask, axis=1)
    cols = np.any(mask, axis=0)
    if not rows.any():
        raise ValidationError("cannot derive a box from an all-zero mask")
    r = np.flatnonzero(rows)
    c = np.flatnonzero(cols)
    return (int(r[0]), int(c[0]), int(r[-1]) + 1, int(c[-1]) + 1)


@dataclass(frozen=True)
class GroundTruth:
    label: str
    masks: Tuple[np.ndarray, ...] = ()
    boxes: Tuple[Box, ...] = ()

    @classmethod
    def from_masks(cls, label: str, masks: Sequence[np.ndarray]) -> "GroundTruth":
        masks = tuple(np.asarray(m).astype(bool) for m in masks)
        if label == LABEL_NO_TUMOR and masks:
            raise ValidationError("no_tumor ground truth must not carry masks")
        boxes = tuple(mask_bbox(m) for m in masks)
        return cls(label=label, masks=masks, boxes=boxes)

    def validate(self, image_shape: Tuple[int, int]) -> None:
        if self.label not in (LABEL_TUMOR, LABEL_NO_TUMOR):
            raise ValidationError(f"unknown label {self.label!r}")
        if self.label == LABEL_NO_TUMOR and self.masks:
            raise ValidationError("no_tumor ground truth must not carry masks")
        for i, m in enumerate(self.masks):
            if m.shape != image_shape:
                raise ValidationError(
                    f"mask {i} shape {m.shape} does not match image {image_shape}"
                )
            if not m.any():
                raise ValidationError(f"mask {i} has no foreground pixel")
        if len(self.boxes) != len(self.masks):
            raise ValidationError("boxes/masks count mismatch")
        for i, (m, b) in enumerate(zip(self.masks, self.boxes)):
            if mask_bbox(m) != tuple(b):
                raise ValidationError(f"box {i} is not the tight bbox of its mask")


@dataclass(frozen=True)
class ScanRecord:
    scan_id: str
    image: np.ndarray  # uint8, H x W x C, C in {1, 3}
    patient_id: Optional[str] = None
    ground_truth: Optional[GroundTruth] = None

    def validate(self) -> None:
        img = self.image
        if img.ndim != 3 or img.shape[2] not in (1, 3):
            raise ValidationError(
                f"scan {self.scan_id}: image must be HxWxC with C in {{1,3}}, got {img.shape}"
            )
        if img.shape[0] < MIN_SIDE or img.shape[1] < MIN_SIDE:
            raise ValidationError(
                f"scan {self.scan_id}: image sides must be >= {MIN_SIDE}, got {img.shape[:2]}"
            )
        if self.ground_truth is not None:
            try:
                self.ground_truth.validate(img.shape[:2])
            except ValidationError as exc:
                raise ValidationError(f"scan {self.scan_id}: {exc}") from exc

    def without_patient_id(self) -> "ScanRecord":
        return replace(self, patient_id=None)

    @property
    def label(self) -> Optional[str]:
        return self.ground_truth.label if self.ground_truth else None


@dataclass
class Dataset:
    scans: List[ScanRecord] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen = set()
        for scan in self.scans:
            if scan.scan_id in seen:
                raise ValidationError(f"duplicate scan_id {scan.scan_id!r}")
            seen.add(scan.scan_id)
            scan.validate()

    def __len__(self) -> int:
        return len(self.scans)

    def __iter__(self) -> Iterator[ScanRecord]:
        return iter(self.scans)

    def get(self, scan_id: str) -> ScanRecord:
        for scan in self.scans:
            if scan.scan_id == scan_id:
                return scan
        raise UnknownScanError(scan_id)

    def subset(self, scan_ids: Sequence[str]) -> "Dataset":
        wanted = set(scan_ids)
        return Dataset([s for s in self.scans if s.scan_id in wanted])

    def label_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for scan in self.scans:
            key = scan.label or "unlabeled"
            counts[key] = counts.get(key, 0) + 1
        return counts


@dataclass(frozen=True)
class DatasetSplit:
    train: Tuple[str, ...]
    validation: Tuple[str, ...]
    test: Tuple[str, ...]
    seed: int
    ratios: Tuple[float, float, float]


@dataclass(frozen=True)
class PatientIdMap:
    entries: Dict[str, str]

    def lookup(self, scan_id: str) -> str:
        if scan_id not in self.entries:
            raise UnknownScanError(f"no patient_id recorded for scan {scan_id!r}")
        return self.entries[scan_id]
