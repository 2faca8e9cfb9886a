from .ids import reattach_patient_id, strip_patient_ids
from .loader import (
    LAYOUT_ANNOTATION_JSON,
    LAYOUT_MASK_DIRS,
    load_dataset,
    save_mask_dirs,
)
from .split import split_dataset
from .synth import SynthParams, generate_synthetic_dataset
from .types import (
    LABEL_NO_TUMOR,
    LABEL_TUMOR,
    Box,
    Dataset,
    DatasetSplit,
    GroundTruth,
    PatientIdMap,
    ScanRecord,
    mask_bbox,
)

__all__ = [
    "Box",
    "Dataset",
    "DatasetSplit",
    "GroundTruth",
    "LABEL_NO_TUMOR",
    "LABEL_TUMOR",
    "LAYOUT_ANNOTATION_JSON",
    "LAYOUT_MASK_DIRS",
    "PatientIdMap",
    "ScanRecord",
    "SynthParams",
    "generate_synthetic_dataset",
    "load_dataset",
    "mask_bbox",
    "reattach_patient_id",
    "save_mask_dirs",
    "split_dataset",
    "strip_patient_ids",
]
