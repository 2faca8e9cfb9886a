from .config import ModelConfig
from .inference import diagnose, latest_checkpoint, load_inference_model, predict
from .model import (
    BACKBONES,
    SegmentationModel,
    backbone_shape_manifest,
    build_model,
    save_pretrained_backbone,
)
from .regions import filter_regions_by_iou
from .train import train
from .types import Detection, Diagnosis, EpochRecord, TrainingHistory

__all__ = [
    "BACKBONES",
    "Detection",
    "Diagnosis",
    "EpochRecord",
    "ModelConfig",
    "SegmentationModel",
    "TrainingHistory",
    "backbone_shape_manifest",
    "build_model",
    "diagnose",
    "filter_regions_by_iou",
    "latest_checkpoint",
    "load_inference_model",
    "predict",
    "save_pretrained_backbone",
    "train",
]
