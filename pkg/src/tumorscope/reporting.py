"""File artifacts: segmentation overlays, PR-curve CSV, loss-series CSV."""
from __future__ import annotations

import colorsys
import csv
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
from PIL import Image

from .errors import ValidationError
from .metrics import PRPoint

_PALETTE: Tuple[Tuple[int, int, int], ...] = (
    (230, 60, 60),
    (60, 140, 230),
    (70, 200, 110),
    (240, 190, 50),
    (180, 90, 230),
    (60, 210, 210),
)


def detection_color(rank: int) -> Tuple[int, int, int]:
    """Deterministic, distinct color per detection rank."""
    if rank < len(_PALETTE):
        return _PALETTE[rank]
    hue = (rank * 0.61803398875) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.85, 0.95)
    return (int(r * 255), int(g * 255), int(b * 255))


@dataclass(frozen=True)
class OverlayArtifact:
    scan_id: str
    image: np.ndarray  # uint8 HxWx3
    legend: Tuple[Tuple[Tuple[int, int, int], float, str], ...]  # (color, score, label)


def render_overlay(
    image: np.ndarray, detections: Sequence, scan_id: str = "", alpha: float = 0.4
) -> OverlayArtifact:
    """Alpha-blend each detection mask over the scan and draw its box.

    With no detections the output is pixel-identical to the input.
    """
    image = np.asarray(image)
    if image.ndim == 2:
        image = image[:, :, None]
    if image.shape[2] == 1:
        image = np.repeat(image, 3, axis=2)
    out = image.astype(np.float64).copy()
    legend = []
    for rank, det in enumerate(detections):
        mask = np.asarray(det.mask, dtype=bool)
        if mask.shape != image.shape[:2]:
            raise ValidationError(
                f"detection {rank} mask shape {mask.shape} does not match image "
                f"{image.shape[:2]}"
            )
        color = np.array(detection_color(rank), dtype=np.float64)
        out[mask] = (1.0 - alpha) * out[mask] + alpha * color
        r0, c0, r1, c1 = det.box
        out[r0, c0:c1] = color
        out[r1 - 1, c0:c1] = color
        out[r0:r1, c0] = color
        out[r0:r1, c1 - 1] = color
        legend.append((detection_color(rank), float(det.score), det.class_label))
    rendered = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return OverlayArtifact(scan_id=scan_id, image=rendered, legend=tuple(legend))


def write_overlay(artifact: OverlayArtifact, out_dir) -> Path:
    """Save as `<scan_id>_overlay.png` under out_dir, returning the path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{artifact.scan_id}_overlay.png"
    Image.fromarray(artifact.image).save(path)
    return path


def export_pr_csv(curve: Sequence[PRPoint], path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "precision", "recall"])
        for p in curve:
            writer.writerow([f"{p.threshold:.6f}", f"{p.precision:.6f}", f"{p.recall:.6f}"])
    return path


def export_loss_series(history, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for rec in history:
            val = f"{rec.val_loss:.6f}" if rec.val_loss is not None else ""
            writer.writerow([rec.epoch_index, f"{rec.train_loss:.6f}", val])
    return path
