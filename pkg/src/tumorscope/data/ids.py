"""Strip patient IDs before inference and re-attach them for display."""
from __future__ import annotations

from dataclasses import is_dataclass, replace
from typing import Any, Tuple

from .types import Dataset, PatientIdMap


def strip_patient_ids(dataset: Dataset) -> Tuple[Dataset, PatientIdMap]:
    """Remove patient_id from every scan, keeping a lossless lookup map."""
    entries = {s.scan_id: s.patient_id for s in dataset if s.patient_id is not None}
    stripped = Dataset([s.without_patient_id() for s in dataset])
    return stripped, PatientIdMap(entries=entries)


def reattach_patient_id(result: Any, id_map: PatientIdMap, scan_id: str) -> Any:
    """Return `result` with the patient_id for `scan_id` filled in.

    Works on plain dicts (copied) and on dataclasses with a patient_id field.
    Raises UnknownScanError when the scan_id is not in the map.
    """
    patient_id = id_map.lookup(scan_id)
    if isinstance(result, dict):
        out = dict(result)
        out["patient_id"] = patient_id
        return out
    if is_dataclass(result):
        return replace(result, patient_id=patient_id)
    raise TypeError(f"cannot attach patient_id to {type(result).__name__}")
