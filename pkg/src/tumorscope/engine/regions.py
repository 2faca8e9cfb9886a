"""Region pre-filtering by IoU against reference boxes."""
from __future__ import annotations

from typing import List, Sequence

from ..errors import ConfigurationError
from ..metrics import box_iou


def filter_regions_by_iou(
    candidates: Sequence, references: Sequence, threshold: float
) -> List:
    """Keep candidates whose best IoU against any reference is strictly
    greater than the threshold; relative order is preserved.

    The strict `>` follows the region-acceptance rule this engine trains
    with (0.5 by default). No references means nothing can pass.
    """
    if not (0.0 < threshold < 1.0):
        raise ConfigurationError(f"threshold must be in (0, 1), got {threshold}")
    kept = []
    for cand in candidates:
        best = max((box_iou(cand, ref) for ref in references), default=0.0)
        if best > threshold:
            kept.append(cand)
    return kept
