"""Deterministic stratified train/validation/test splitting."""
from __future__ import annotations

import math
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..errors import ConfigurationError, DataError
from .types import Dataset, DatasetSplit

_N_SPLITS = 3


def _largest_remainder(total: int, fractions: Sequence[float]) -> List[int]:
    """Integer apportionment of `total` by `fractions`, largest remainder first.

    Ties on the fractional part go to the later split index.
    """
    exact = [total * f for f in fractions]
    sizes = [math.floor(e) for e in exact]
    leftover = total - sum(sizes)
    # sort by (fraction desc, index desc): later split wins ties
    order = sorted(range(len(fractions)), key=lambda i: (exact[i] - sizes[i], i), reverse=True)
    for i in order[:leftover]:
        sizes[i] += 1
    return sizes


def split_dataset(dataset: Dataset, ratios: Tuple[float, float, float], seed: int) -> DatasetSplit:
    """Partition scan ids into train/validation/test, stratified by label.

    Overall split sizes are fixed by largest-remainder rounding of the
    ratios; within each label stratum the per-split counts stay within one
    scan of the exact proportion. The assignment is a pure function of
    (dataset ids, ratios, seed).
    """
    if len(ratios) != _N_SPLITS:
        raise ConfigurationError("exactly three ratios required")
    if any(r <= 0 for r in ratios):
        raise ConfigurationError(f"all split ratios must be > 0, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigurationError(f"split ratios must sum to 1, got {sum(ratios)}")
    if len(dataset) == 0:
        raise DataError("cannot split an empty dataset")

    strata: Dict[str, List[str]] = {}
    for scan in dataset:
        strata.setdefault(scan.label or "unlabeled", []).append(scan.scan_id)
    labels = sorted(strata)

    total_sizes = _largest_remainder(len(dataset), ratios)

    # Per-stratum quotas: floor everything, then hand out each stratum's
    # remainder to its highest-fraction splits that still have global
    # capacity (ties again go to the later split).
    floors: Dict[str, List[int]] = {}
    fracs: Dict[str, List[float]] = {}
    for label in labels:
        exact = [len(strata[label]) * r for r in ratios]
        floors[label] = [math.floor(e) for e in exact]
        fracs[label] = [e - f for e, f in zip(exact, floors[label])]
    capacity = [
        total_sizes[k] - sum(floors[label][k] for label in labels) for k in range(_N_SPLITS)
    ]
    counts: Dict[str, List[int]] = {label: list(floors[label]) for label in labels}
    for label in labels:
        missing = len(strata[label]) - sum(floors[label])
        order = sorted(
            range(_N_SPLITS), key=lambda k: (fracs[label][k], k), reverse=True
        )
        for k in order:
            if missing == 0:
                break
            take = min(missing, capacity[k])
            counts[label][k] += take
            capacity[k] -= take
            missing -= take

    rng = np.random.default_rng(seed)
    parts: List[List[str]] = [[], [], []]
    for label in labels:
        ids = sorted(strata[label])
        perm = rng.permutation(len(ids))
        shuffled = [ids[i] for i in perm]
        a, b, _ = counts[label]
        parts[0].extend(shuffled[:a])
        parts[1].extend(shuffled[a : a + b])
        parts[2].extend(shuffled[a + b :])

    return DatasetSplit(
        train=tuple(sorted(parts[0])),
        validation=tuple(sorted(parts[1])),
        test=tuple(sorted(parts[2])),
        seed=seed,
        ratios=tuple(ratios),
    )
