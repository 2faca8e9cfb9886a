"""Pure evaluation math: IoU, greedy matching, PR curves, AP, mean IoU.

All functions are side-effect free and safe for concurrent use.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DataError, ValidationError


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection-over-union of two binary masks.

    Both empty -> 1.0 (they agree nothing is present); exactly one empty -> 0.0.
    """
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValidationError(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def box_iou(a: Sequence[float], b: Sequence[float]) -> float:
    """IoU of two half-open (r0, c0, r1, c1) boxes; 0 when disjoint."""
    for box in (a, b):
        r0, c0, r1, c1 = box
        if r1 <= r0 or c1 <= c0:
            raise ValidationError(f"degenerate box {tuple(box)}")
    inter_h = min(a[2], b[2]) - max(a[0], b[0])
    inter_w = min(a[3], b[3]) - max(a[1], b[1])
    if inter_h <= 0 or inter_w <= 0:
        return 0.0
    inter = inter_h * inter_w
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


@dataclass(frozen=True)
class MatchRecord:
    scan_id: str
    prediction_index: int
    score: float
    matched_gt_index: Optional[int]
    iou: float
    kind: str  # "TP" | "FP"


@dataclass(frozen=True)
class ImageMatches:
    records: Tuple[MatchRecord, ...]
    fn: int  # ground-truth instances left unmatched in this image


def match_detections(
    predictions: Sequence,
    gt_masks: Sequence[np.ndarray],
    iou_threshold: float,
    scan_id: str = "",
) -> ImageMatches:
    """Greedy score-ordered matching of predictions to ground-truth masks.

    Each prediction, in descending score order, claims the still-unclaimed
    ground truth with the highest mask IoU, provided that IoU is strictly
    above the threshold; otherwise it is an FP. Unclaimed GTs count as FN.
    Predictions need `.score` and `.mask` attributes.
    """
    order = sorted(range(len(predictions)), key=lambda i: -predictions[i].score)
    claimed: set = set()
    records: List[MatchRecord] = []
    for rank, pi in enumerate(order):
        pred = predictions[pi]
        best_iou, best_gt = 0.0, None
        for gi, gt in enumerate(gt_masks):
            if gi in claimed:
                continue
            iou = mask_iou(pred.mask, gt)
            if iou > best_iou:
                best_iou, best_gt = iou, gi
        if best_gt is not None and best_iou > iou_threshold:
            claimed.add(best_gt)
            records.append(
                MatchRecord(scan_id, pi, float(pred.score), best_gt, best_iou, "TP")
            )
        else:
            records.append(
                MatchRecord(scan_id, pi, float(pred.score), None, best_iou, "FP")
            )
    return ImageMatches(tuple(records), fn=len(gt_masks) - len(claimed))


@dataclass(frozen=True)
class PRPoint:
    threshold: float
    precision: float
    recall: float


def pr_curve(records: Sequence[MatchRecord], total_gt: int) -> List[PRPoint]:
    """Cumulative precision/recall at every distinct score threshold.

    Records from all images are pooled and swept by descending score; one
    point per distinct score. Precision 0/0 is defined as 1; recall with
    zero ground truth is defined as 0.
    """
    if total_gt < 0:
        raise ValidationError("total_gt must be >= 0")
    ordered = sorted(records, key=lambda r: -r.score)
    points: List[PRPoint] = []
    tp = fp = 0
    for i, rec in enumerate(ordered):
        if rec.kind == "TP":
            tp += 1
        else:
            fp += 1
        if i + 1 < len(ordered) and ordered[i + 1].score == rec.score:
            continue  # emit one point per distinct threshold
        precision = tp / (tp + fp) if (tp + fp) else 1.0
        recall = tp / total_gt if total_gt else 0.0
        points.append(PRPoint(rec.score, precision, recall))
    return points


def average_precision(curve: Sequence[PRPoint]) -> float:
    """All-points interpolated AP: sum of recall increments times the best
    precision achieved at that recall or beyond."""
    if not curve:
        return 0.0
    recalls = [p.recall for p in curve]
    precisions = [p.precision for p in curve]
    # best precision from here to the end of the sweep (recall >= r_i)
    interp = list(precisions)
    for i in range(len(interp) - 2, -1, -1):
        interp[i] = max(interp[i], interp[i + 1])
    ap = 0.0
    prev_recall = 0.0
    for r, p in zip(recalls, interp):
        if r > prev_recall:
            ap += (r - prev_recall) * p
            prev_recall = r
    return ap


@dataclass(frozen=True)
class MeanIouResult:
    value: float
    empty: bool  # true when there were no ground-truth instances at all


def mean_iou(best_ious: Sequence[float]) -> MeanIouResult:
    """Mean of per-ground-truth best-match IoUs (0 for unmatched GTs)."""
    if len(best_ious) == 0:
        return MeanIouResult(0.0, empty=True)
    return MeanIouResult(float(np.mean(best_ious)), empty=False)


@dataclass
class EvalReport:
    mean_iou: float
    ap: float
    pr_curve: List[PRPoint]
    per_image: List[MatchRecord]
    tp: int
    fp: int
    fn: int
    empty: bool = False

    def to_dict(self) -> Dict:
        return {
            "mean_iou": self.mean_iou,
            "ap": self.ap,
            "pr_curve": [
                {"threshold": p.threshold, "precision": p.precision, "recall": p.recall}
                for p in self.pr_curve
            ],
            "per_image": [
                {
                    "scan_id": r.scan_id,
                    "prediction_index": r.prediction_index,
                    "score": r.score,
                    "matched_gt_index": r.matched_gt_index,
                    "iou": r.iou,
                    "kind": r.kind,
                }
                for r in self.per_image
            ],
            "counts": {"tp": self.tp, "fp": self.fp, "fn": self.fn},
            "empty": self.empty,
        }


def evaluate(model, test_set, config) -> EvalReport:
    """Run `model.predict` over every scan and assemble an EvalReport.

    `config` needs `roi_iou_threshold` (match threshold); every scan in
    the test set must carry ground truth.
    """
    all_records: List[MatchRecord] = []
    best_ious: List[float] = []
    total_gt = tp = fp = fn = 0
    for scan in test_set:
        if scan.ground_truth is None:
            raise DataError(f"scan {scan.scan_id} has no ground truth")
        detections = model.predict(scan.image)
        gt_masks = list(scan.ground_truth.masks)
        matches = match_detections(
            detections, gt_masks, config.roi_iou_threshold, scan_id=scan.scan_id
        )
        all_records.extend(matches.records)
        total_gt += len(gt_masks)
        fn += matches.fn
        per_gt_iou = {r.matched_gt_index: r.iou for r in matches.records if r.kind == "TP"}
        tp += len(per_gt_iou)
        fp += sum(1 for r in matches.records if r.kind == "FP")
        for gi in range(len(gt_masks)):
            best_ious.append(per_gt_iou.get(gi, 0.0))
    curve = pr_curve(all_records, total_gt)
    miou = mean_iou(best_ious)
    return EvalReport(
        mean_iou=miou.value,
        ap=average_precision(curve),
        pr_curve=curve,
        per_image=all_records,
        tp=tp,
        fp=fp,
        fn=fn,
        empty=miou.empty,
    )
