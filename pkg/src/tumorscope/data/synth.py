"""Synthetic MRI-like dataset generator with exact instance masks.

Tumor scans get 1-2 bright elliptical blobs painted over a smooth noisy
background; the stored mask is the very rasterization used to paint, so
ground truth is pixel-exact by construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage

from ..errors import ConfigurationError
from .types import LABEL_NO_TUMOR, LABEL_TUMOR, Dataset, GroundTruth, ScanRecord


@dataclass(frozen=True)
class SynthParams:
    image_size: int = 96
    axis_range: Tuple[int, int] = (7, 16)  # ellipse semi-axes, pixels
    blob_intensity: Tuple[int, int] = (190, 250)
    background_level: Tuple[int, int] = (25, 90)
    noise_sigma: float = 6.0
    max_blobs: int = 2


def _background(rng: np.random.Generator, size: int, params: SynthParams) -> np.ndarray:
    lo, hi = params.background_level
    coarse = rng.uniform(lo, hi, size=(6, 6))
    smooth = ndimage.zoom(coarse, size / 6.0, order=1)[:size, :size]
    noisy = smooth + rng.normal(0.0, params.noise_sigma, size=(size, size))
    return np.clip(noisy, 0, 255)


def _ellipse_mask(size: int, cr: float, cc: float, a: float, b: float) -> np.ndarray:
    rr, cc_grid = np.mgrid[0:size, 0:size]
    return ((rr - cr) / a) ** 2 + ((cc_grid - cc) / b) ** 2 <= 1.0


def _sample_blob(rng: np.random.Generator, size: int, params: SynthParams) -> np.ndarray:
    a = rng.integers(params.axis_range[0], params.axis_range[1] + 1)
    b = rng.integers(params.axis_range[0], params.axis_range[1] + 1)
    cr = rng.integers(a + 1, size - a - 1)
    cc = rng.integers(b + 1, size - b - 1)
    return _ellipse_mask(size, float(cr), float(cc), float(a), float(b))


def generate_synthetic_dataset(
    n: int, seed: int, params: Optional[SynthParams] = None
) -> Dataset:
    """Generate `n` scans, alternating tumor / no_tumor (balance within 1)."""
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    params = params or SynthParams()
    rng = np.random.default_rng(seed)
    size = params.image_size

    scans: List[ScanRecord] = []
    for i in range(n):
        label = LABEL_TUMOR if i % 2 == 0 else LABEL_NO_TUMOR
        gray = _background(rng, size, params)
        masks: List[np.ndarray] = []
        if label == LABEL_TUMOR:
            n_blobs = int(rng.integers(1, params.max_blobs + 1))
            for _ in range(n_blobs):
                # a few retries to keep instances disjoint; overlap is allowed
                for _attempt in range(8):
                    mask = _sample_blob(rng, size, params)
                    if not any((mask & m).any() for m in masks):
                        break
                masks.append(mask)
            for mask in masks:
                level = rng.uniform(*params.blob_intensity)
                gray[mask] = np.clip(
                    level + rng.normal(0.0, 3.0, size=int(mask.sum())), 0, 255
                )
        image = np.repeat(gray.astype(np.uint8)[:, :, None], 3, axis=2)
        scans.append(
            ScanRecord(
                scan_id=f"synth_{i:04d}",
                patient_id=f"P-{i:04d}",
                image=image,
                ground_truth=GroundTruth.from_masks(label, masks),
            )
        )
    return Dataset(scans)
