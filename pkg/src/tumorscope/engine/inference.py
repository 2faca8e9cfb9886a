"""Checkpoint reload, prediction, and the yes/no diagnosis rule."""
from __future__ import annotations

import re
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import torch

from ..errors import CheckpointMismatchError, CheckpointNotFoundError, ConfigurationError
from .config import ModelConfig
from .model import SegmentationModel
from .transforms import box_to_image_frame, mask_to_image_frame, preprocess
from .types import Detection, Diagnosis

_CKPT_RE = re.compile(r"checkpoint_(\d+)\.weights$")


def latest_checkpoint(run_dir) -> Path:
    run_dir = Path(run_dir)
    best: Optional[Path] = None
    best_epoch = -1
    for path in run_dir.glob("checkpoint_*.weights"):
        m = _CKPT_RE.search(path.name)
        if m and int(m.group(1)) > best_epoch:
            best_epoch = int(m.group(1))
            best = path
    if best is None:
        raise CheckpointNotFoundError(f"no checkpoints in {run_dir}")
    return best


def load_inference_model(run_dir, config: ModelConfig) -> SegmentationModel:
    """Rebuild the model from the highest-epoch checkpoint, in eval mode."""
    path = latest_checkpoint(run_dir)
    ckpt = torch.load(path, map_location="cpu", weights_only=True)
    digest = config.digest()
    if ckpt.get("config_digest") != digest:
        raise CheckpointMismatchError(
            f"checkpoint digest {ckpt.get('config_digest')!r} does not match "
            f"config digest {digest!r} for {path}"
        )
    model = SegmentationModel(config)
    model.load_state_dict(ckpt["state_dict"])
    model.eval()
    return model


def predict(model: SegmentationModel, image: np.ndarray) -> List[Detection]:
    """Detections for one scan, score-sorted, in scan coordinates."""
    cfg = model.config
    x, meta = preprocess(image, cfg.input_size, model.normalization)
    was_training = model.training
    model.eval()
    try:
        boxes, scores, mask_probs = model.detect(x)
    finally:
        if was_training:
            model.train()
    detections: List[Detection] = []
    for i in range(len(boxes)):
        box = box_to_image_frame(boxes[i], meta)
        probs = mask_to_image_frame(mask_probs[i], meta)
        mask = probs >= cfg.mask_threshold
        confined = np.zeros_like(mask)
        confined[box[0] : box[2], box[1] : box[3]] = mask[box[0] : box[2], box[1] : box[3]]
        detections.append(
            Detection(box=box, class_label="tumor", score=float(scores[i]), mask=confined)
        )
    return detections


def diagnose(detections: Sequence[Detection], threshold: float) -> Diagnosis:
    """Yes/no call: any detection scoring at or above the threshold means
    tumor with confidence = best score; otherwise no_tumor with
    confidence 1 - best sub-threshold score (1.0 with no candidates)."""
    if not (0.0 <= threshold <= 1.0):
        raise ConfigurationError(f"threshold must be in [0, 1], got {threshold}")
    kept = tuple(d for d in detections if d.score >= threshold)
    if kept:
        return Diagnosis(label="tumor", confidence=max(d.score for d in kept), detections=kept)
    if detections:
        return Diagnosis(label="no_tumor", confidence=1.0 - max(d.score for d in detections))
    return Diagnosis(label="no_tumor", confidence=1.0)
