"""Training loop with per-epoch checkpointing.

Region-candidate supervision follows the IoU pre-filter rule: only
candidate boxes whose IoU against a ground-truth box strictly exceeds
config.roi_iou_threshold are passed to the RoI heads as positives (the
vectorized twin of regions.filter_regions_by_iou; parity is tested).
Ground-truth boxes themselves are part of the candidate pool, which they
pass trivially at IoU 1.0.
"""
from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Tuple

import torch
import torch.nn.functional as F
from torchvision.ops import roi_align

from ..data.types import LABEL_TUMOR, Dataset
from ..errors import ConfigurationError, DataError, TumorscopeError
from .config import ModelConfig
from .model import MASK_POOL, MASK_SIZE, ROI_POOL, SegmentationModel, apply_deltas, encode_deltas
from .transforms import boxes_to_model_frame, masks_to_model_frame, preprocess

_NEG_IOU = 0.3
_MAX_POS_ROIS = 16
_MAX_NEG_ROIS = 16
_RPN_NEG_SAMPLE = 64


def box_iou_matrix(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Pairwise IoU of two [N,4] / [M,4] rc box tensors."""
    if len(a) == 0 or len(b) == 0:
        return torch.zeros(len(a), len(b))
    r0 = torch.maximum(a[:, None, 0], b[None, :, 0])
    c0 = torch.maximum(a[:, None, 1], b[None, :, 1])
    r1 = torch.minimum(a[:, None, 2], b[None, :, 2])
    c1 = torch.minimum(a[:, None, 3], b[None, :, 3])
    inter = (r1 - r0).clamp(min=0) * (c1 - c0).clamp(min=0)
    area_a = ((a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1]))[:, None]
    area_b = ((b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1]))[None, :]
    return inter / (area_a + area_b - inter)


class _Sample:
    """A scan prepared once in the model frame."""

    def __init__(self, scan, model: SegmentationModel):
        cfg = model.config
        self.x, meta = preprocess(scan.image, cfg.input_size, model.normalization)
        gt = scan.ground_truth
        boxes = list(gt.boxes) if gt else []
        masks = list(gt.masks) if gt else []
        self.gt_boxes = boxes_to_model_frame(boxes, meta, cfg.input_size)
        self.gt_masks = masks_to_model_frame(masks, meta, cfg.input_size)


def _sample_indices(
    eligible: torch.Tensor, limit: int, gen: torch.Generator
) -> torch.Tensor:
    idx = torch.nonzero(eligible, as_tuple=False).flatten()
    if len(idx) <= limit:
        return idx
    perm = torch.randperm(len(idx), generator=gen)[:limit]
    return idx[perm]


def _loss_for_sample(
    model: SegmentationModel, sample: _Sample, gen: torch.Generator
) -> torch.Tensor:
    cfg = model.config
    size = cfg.input_size
    feats = model.features(sample.x)
    obj, deltas = model.rpn_outputs(feats)
    anchors = model.anchors
    gt_boxes = sample.gt_boxes

    losses: List[torch.Tensor] = []
    if len(gt_boxes) > 0:
        iou = box_iou_matrix(anchors, gt_boxes)
        max_iou, argmax_gt = iou.max(dim=1)
        pos = max_iou > cfg.roi_iou_threshold
        pos[iou.argmax(dim=0)] = True  # the best anchor per GT is always positive
        neg = max_iou < _NEG_IOU
        neg_idx = _sample_indices(neg, _RPN_NEG_SAMPLE, gen)
        pos_idx = torch.nonzero(pos, as_tuple=False).flatten()
        sel = torch.cat([pos_idx, neg_idx])
        targets = torch.zeros(len(sel))
        targets[: len(pos_idx)] = 1.0
        losses.append(F.binary_cross_entropy_with_logits(obj[sel], targets))
        losses.append(
            F.smooth_l1_loss(
                deltas[pos_idx], encode_deltas(anchors[pos_idx], gt_boxes[argmax_gt[pos_idx]])
            )
        )
    else:
        neg_idx = _sample_indices(torch.ones(len(anchors), dtype=torch.bool), _RPN_NEG_SAMPLE, gen)
        losses.append(
            F.binary_cross_entropy_with_logits(obj[neg_idx], torch.zeros(len(neg_idx)))
        )

    # RoI stage: candidates are the anchor grid plus the GT boxes;
    # positives are exactly those passing the strict IoU threshold.
    candidates = torch.cat([anchors, gt_boxes]) if len(gt_boxes) else anchors
    if len(gt_boxes) > 0:
        cand_iou = box_iou_matrix(candidates, gt_boxes)
        cand_max, cand_arg = cand_iou.max(dim=1)
        keep = cand_max > cfg.roi_iou_threshold
        pos_idx = torch.nonzero(keep, as_tuple=False).flatten()
        if len(pos_idx) > _MAX_POS_ROIS:
            top = torch.topk(cand_max[pos_idx], _MAX_POS_ROIS).indices
            pos_idx = pos_idx[top]
        neg_idx = _sample_indices(cand_max < _NEG_IOU, _MAX_NEG_ROIS, gen)
    else:
        cand_arg = torch.zeros(len(candidates), dtype=torch.long)
        pos_idx = torch.zeros(0, dtype=torch.long)
        neg_idx = _sample_indices(
            torch.ones(len(candidates), dtype=torch.bool), _MAX_NEG_ROIS, gen
        )
    rois = candidates[torch.cat([pos_idx, neg_idx])]
    labels = torch.zeros(len(rois), dtype=torch.long)
    labels[: len(pos_idx)] = 1
    pooled = model.pool(feats, rois, ROI_POOL)
    cls_logits, box_deltas = model.roi_heads.class_and_box(pooled)
    losses.append(F.cross_entropy(cls_logits, labels))

    if len(pos_idx) > 0:
        pos_boxes = candidates[pos_idx]
        matched = sample.gt_boxes[cand_arg[pos_idx]]
        losses.append(F.smooth_l1_loss(box_deltas[: len(pos_idx)], encode_deltas(pos_boxes, matched)))
        # mask targets: GT mask of each matched instance, cropped to the RoI
        # (masks live at model-input resolution, hence spatial_scale=1)
        rois_t = torch.cat(
            [
                torch.arange(len(pos_boxes), dtype=torch.float32)[:, None],
                pos_boxes[:, [1, 0, 3, 2]],
            ],
            dim=1,
        )
        targets = roi_align(
            sample.gt_masks[cand_arg[pos_idx]][:, None],
            rois_t,
            output_size=MASK_SIZE,
            spatial_scale=1.0,
            aligned=True,
        )[:, 0]
        mask_logits = model.roi_heads.masks(model.pool(feats, pos_boxes, MASK_POOL))[:, 0]
        losses.append(
            F.binary_cross_entropy_with_logits(mask_logits, (targets > 0.5).float())
        )
    return torch.stack([l for l in losses]).sum()


def _save_checkpoint(run_dir: Path, epoch: int, model, train_loss, val_loss, digest) -> None:
    payload = {
        "epoch_index": epoch,
        "state_dict": model.state_dict(),
        "train_loss": train_loss,
        "val_loss": val_loss,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "config_digest": digest,
    }
    try:
        torch.save(payload, run_dir / f"checkpoint_{epoch:03d}.weights")
    except OSError as exc:
        try:
            (run_dir / "ABORTED").write_text(f"checkpoint {epoch} failed: {exc}\n")
        except OSError:
            pass
        raise TumorscopeError(f"aborted: could not write checkpoint {epoch}: {exc}") from exc


def _write_history(run_dir: Path, records) -> None:
    with open(run_dir / "history.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for rec in records:
            val = f"{rec.val_loss:.6f}" if rec.val_loss is not None else ""
            writer.writerow([rec.epoch_index, f"{rec.train_loss:.6f}", val])


def train(
    model: SegmentationModel,
    train_set: Dataset,
    validation_set: Optional[Dataset],
    config: ModelConfig,
    run_dir,
) -> "TrainingHistory":
    from .types import EpochRecord, TrainingHistory

    config.validate(for_training=True)
    if len(train_set) == 0:
        raise DataError("training set is empty")
    for scan in train_set:
        gt = scan.ground_truth
        if gt is None:
            raise DataError(f"scan {scan.scan_id} has no ground truth")
        if gt.label == LABEL_TUMOR and not gt.masks:
            raise DataError(f"tumor scan {scan.scan_id} has no instance mask")

    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    digest = config.digest()
    with open(run_dir / "config.json", "w") as fh:
        json.dump({**config.to_dict(), "digest": digest}, fh, indent=2, sort_keys=True)

    samples = [_Sample(scan, model) for scan in train_set]
    val_samples = [_Sample(scan, model) for scan in (validation_set or [])]
    gen = torch.Generator().manual_seed(config.random_seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    steps = config.steps_per_epoch or len(samples)

    records = []
    for epoch in range(1, config.epochs + 1):
        model.train()
        order = torch.randperm(len(samples), generator=gen)
        epoch_loss = 0.0
        for step in range(steps):
            sample = samples[int(order[step % len(samples)])]
            optimizer.zero_grad()
            loss = _loss_for_sample(model, sample, gen)
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach())
        train_loss = epoch_loss / steps

        val_loss = None
        if val_samples:
            model.eval()
            with torch.no_grad():
                val_loss = float(
                    sum(float(_loss_for_sample(model, s, gen)) for s in val_samples)
                    / len(val_samples)
                )
        _save_checkpoint(run_dir, epoch, model, train_loss, val_loss, digest)
        records.append(EpochRecord(epoch, train_loss, val_loss))
        _write_history(run_dir, records)
    model.eval()
    return TrainingHistory(tuple(records))
