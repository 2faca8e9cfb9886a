"""Independent brute-force oracles used to check the metrics implementation.

Everything here is written against the definitions only: explicit pixel
loops, exhaustive assignment enumeration, and exact Fraction arithmetic.
None of it calls into tumorscope.metrics.
"""
from fractions import Fraction
from itertools import permutations

import numpy as np


def mask_iou_oracle(a, b):
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    inter = union = 0
    for r in range(a.shape[0]):
        for c in range(a.shape[1]):
            if a[r, c] and b[r, c]:
                inter += 1
            if a[r, c] or b[r, c]:
                union += 1
    if union == 0:
        return 1.0
    return inter / union


def rasterize_box(box, frame):
    m = np.zeros(frame, dtype=bool)
    r0, c0, r1, c1 = box
    m[r0:r1, c0:c1] = True
    return m


def box_iou_oracle(a, b, frame=(80, 80)):
    return mask_iou_oracle(rasterize_box(a, frame), rasterize_box(b, frame))


def optimal_tp_count(pred_masks, gt_masks, threshold):
    """Best achievable TP count over all one-to-one assignments."""
    n_pred, n_gt = len(pred_masks), len(gt_masks)
    best = 0
    if n_gt == 0 or n_pred == 0:
        return 0
    # pad predictions with "unassigned" slots and enumerate injections
    slots = list(range(n_gt)) + [None] * n_pred
    for perm in set(permutations(slots, n_pred)):
        count = 0
        ok = True
        used = set()
        for pi, gi in enumerate(perm):
            if gi is None:
                continue
            if gi in used:
                ok = False
                break
            used.add(gi)
            if mask_iou_oracle(pred_masks[pi], gt_masks[gi]) > threshold:
                count += 1
        if ok:
            best = max(best, count)
    return best


def pr_points_oracle(scored_kinds, total_gt):
    """(threshold, precision, recall) per distinct score, by direct counting.

    scored_kinds: iterable of (score, kind) with kind in {"TP", "FP"}.
    """
    scores = sorted({s for s, _ in scored_kinds}, reverse=True)
    points = []
    for t in scores:
        tp = sum(1 for s, k in scored_kinds if s >= t and k == "TP")
        fp = sum(1 for s, k in scored_kinds if s >= t and k == "FP")
        precision = Fraction(tp, tp + fp) if tp + fp else Fraction(1)
        recall = Fraction(tp, total_gt) if total_gt else Fraction(0)
        points.append((t, precision, recall))
    return points


def average_precision_oracle(scored_kinds, total_gt):
    """All-points interpolated AP with exact Fraction arithmetic."""
    points = pr_points_oracle(scored_kinds, total_gt)
    if not points:
        return Fraction(0)
    ap = Fraction(0)
    prev_recall = Fraction(0)
    for i, (_, _, recall) in enumerate(points):
        if recall > prev_recall:
            best_prec = max(p for _, p, r in points[i:] if r >= recall)
            ap += (recall - prev_recall) * best_prec
            prev_recall = recall
    return ap
