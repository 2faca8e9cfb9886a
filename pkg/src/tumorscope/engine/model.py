"""A compact region-based instance-segmentation network.

Anatomy: convolutional feature extractor (the transferable backbone), a
region-proposal stage scoring dense anchors and regressing box deltas,
RoI-aligned pooling of proposed regions, classification and box-refinement
heads, and a mask head emitting a per-region segmentation mask.

Small on purpose: it trains to convergence on desk-scale datasets on a
CPU in minutes while keeping the full pipeline shape.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Dict, List, Tuple

import torch
import torch.nn.functional as F
from torch import nn
from torchvision.ops import nms, roi_align

from ..errors import ConfigurationError, WeightsShapeError
from .config import ModelConfig

# backbone_id -> architecture + the input normalization it was trained with
BACKBONES: Dict[str, Dict] = {
    "smallconv-s8": {
        "channels": (16, 32, 48),
        "stride": 8,
        "normalization": {"mean": 0.5, "std": 0.25},
    },
}

ROI_POOL = 7
MASK_POOL = 14
MASK_SIZE = 28
PROPOSALS_PER_IMAGE = 32
_DELTA_CLAMP = 2.0
_FG_BIAS = -4.0  # background-favoring prior so untrained scores stay low


def _seeded_init(module: nn.Module, gen: torch.Generator) -> None:
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            fan_in = m.weight.shape[1] * (
                m.weight.shape[2] * m.weight.shape[3] if m.weight.dim() == 4 else 1
            )
            std = math.sqrt(2.0 / fan_in)
            with torch.no_grad():
                m.weight.normal_(0.0, std, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()


class Backbone(nn.Module):
    def __init__(self, channels: Tuple[int, int, int]):
        super().__init__()
        c1, c2, c3 = channels
        self.layers = nn.Sequential(
            nn.Conv2d(3, c1, 3, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(c1, c1, 3, stride=2, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(c1, c2, 3, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(c2, c2, 3, stride=2, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(c2, c3, 3, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(c3, c3, 3, stride=2, padding=1), nn.ReLU(inplace=True),
        )
        self.out_channels = c3

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.layers(x)


class ProposalHead(nn.Module):
    """Per-anchor objectness scores and box deltas over the feature grid."""

    def __init__(self, channels: int, num_anchors: int):
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 3, padding=1)
        self.objectness = nn.Conv2d(channels, num_anchors, 1)
        self.deltas = nn.Conv2d(channels, num_anchors * 4, 1)

    def forward(self, feats: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        h = F.relu(self.conv(feats))
        return self.objectness(h), self.deltas(h)


class RoiHeads(nn.Module):
    """Classification, box refinement, and mask prediction on pooled RoIs."""

    def __init__(self, channels: int, num_classes: int):
        super().__init__()
        self.fc = nn.Linear(channels * ROI_POOL * ROI_POOL, 128)
        self.classifier = nn.Linear(128, num_classes)
        self.box_regressor = nn.Linear(128, 4)
        self.mask_head = nn.Sequential(
            nn.Conv2d(channels, 32, 3, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(32, 32, 3, padding=1), nn.ReLU(inplace=True),
            nn.ConvTranspose2d(32, 32, 2, stride=2), nn.ReLU(inplace=True),
            nn.Conv2d(32, 1, 1),
        )

    def class_and_box(self, pooled: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        h = F.relu(self.fc(pooled.flatten(1)))
        return self.classifier(h), self.box_regressor(h)

    def masks(self, pooled14: torch.Tensor) -> torch.Tensor:
        return self.mask_head(pooled14)  # [N, 1, MASK_SIZE, MASK_SIZE]


def make_anchors(input_size: int, stride: int) -> torch.Tensor:
    """Square anchors at three scales, one set per feature-grid cell.

    Returned as [N, 4] (r0, c0, r1, c1) floats clipped to the image.
    """
    scales = [input_size / 6.0, input_size / 3.0, input_size / 2.0]
    grid = input_size // stride
    boxes: List[List[float]] = []
    for gr in range(grid):
        for gc in range(grid):
            cr = (gr + 0.5) * stride
            cc = (gc + 0.5) * stride
            for s in scales:
                half = s / 2.0
                boxes.append(
                    [
                        max(0.0, cr - half),
                        max(0.0, cc - half),
                        min(float(input_size), cr + half),
                        min(float(input_size), cc + half),
                    ]
                )
    return torch.tensor(boxes, dtype=torch.float32)


def encode_deltas(src: torch.Tensor, dst: torch.Tensor) -> torch.Tensor:
    """Box regression targets taking `src` boxes onto `dst` boxes."""
    sh = src[:, 2] - src[:, 0]
    sw = src[:, 3] - src[:, 1]
    scr = src[:, 0] + 0.5 * sh
    scc = src[:, 1] + 0.5 * sw
    dh = dst[:, 2] - dst[:, 0]
    dw = dst[:, 3] - dst[:, 1]
    dcr = dst[:, 0] + 0.5 * dh
    dcc = dst[:, 1] + 0.5 * dw
    return torch.stack(
        [(dcr - scr) / sh, (dcc - scc) / sw, torch.log(dh / sh), torch.log(dw / sw)],
        dim=1,
    )


def apply_deltas(boxes: torch.Tensor, deltas: torch.Tensor, input_size: int) -> torch.Tensor:
    h = boxes[:, 2] - boxes[:, 0]
    w = boxes[:, 3] - boxes[:, 1]
    cr = boxes[:, 0] + 0.5 * h
    cc = boxes[:, 1] + 0.5 * w
    d = deltas.clamp(-_DELTA_CLAMP, _DELTA_CLAMP)
    cr = cr + d[:, 0] * h
    cc = cc + d[:, 1] * w
    h = h * torch.exp(d[:, 2])
    w = w * torch.exp(d[:, 3])
    out = torch.stack([cr - 0.5 * h, cc - 0.5 * w, cr + 0.5 * h, cc + 0.5 * w], dim=1)
    return out.clamp(0.0, float(input_size))


def _to_xyxy(boxes_rc: torch.Tensor) -> torch.Tensor:
    return boxes_rc[:, [1, 0, 3, 2]]


class SegmentationModel(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        config.validate()
        if config.backbone_id not in BACKBONES:
            raise ConfigurationError(f"unknown backbone_id {config.backbone_id!r}")
        arch = BACKBONES[config.backbone_id]
        self.config = config
        self.stride = arch["stride"]
        self.normalization = arch["normalization"]
        self.backbone = Backbone(arch["channels"])
        anchors = make_anchors(config.input_size, self.stride)
        self.register_buffer("anchors", anchors)
        self.num_anchor_scales = 3
        self.rpn = ProposalHead(self.backbone.out_channels, self.num_anchor_scales)
        self.roi_heads = RoiHeads(self.backbone.out_channels, config.num_classes)
        self.reinit_heads(config.random_seed)
        gen = torch.Generator().manual_seed(config.random_seed)
        _seeded_init(self.backbone, gen)

    def reinit_heads(self, seed: int) -> None:
        """Freshly initialize all task heads from a seeded generator."""
        gen = torch.Generator().manual_seed(seed + 1)
        _seeded_init(self.rpn, gen)
        _seeded_init(self.roi_heads, gen)
        with torch.no_grad():
            self.roi_heads.classifier.bias.fill_(_FG_BIAS)
            self.roi_heads.classifier.bias[0] = 0.0
            self.rpn.objectness.bias.fill_(_FG_BIAS)

    # --- shared pieces -------------------------------------------------
    def features(self, x: torch.Tensor) -> torch.Tensor:
        return self.backbone(x)

    def rpn_outputs(self, feats: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """Flattened objectness [N] and deltas [N, 4] aligned with anchors."""
        obj, deltas = self.rpn(feats)
        n, a, gh, gw = obj.shape
        obj = obj.permute(0, 2, 3, 1).reshape(-1)
        deltas = deltas.reshape(n, a, 4, gh, gw).permute(0, 3, 4, 1, 2).reshape(-1, 4)
        return obj, deltas

    def pool(self, feats: torch.Tensor, boxes_rc: torch.Tensor, size: int) -> torch.Tensor:
        rois = torch.cat(
            [torch.zeros(len(boxes_rc), 1, device=feats.device), _to_xyxy(boxes_rc)],
            dim=1,
        )
        return roi_align(
            feats, rois, output_size=size, spatial_scale=1.0 / self.stride, aligned=True
        )

    # --- inference ------------------------------------------------------
    @torch.no_grad()
    def detect(
        self, x: torch.Tensor
    ) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Detections in the model's input frame.

        Returns (boxes [M,4] rc floats, scores [M], mask probability maps
        [M, S, S]), already score-sorted, NMS-deduplicated, and capped at
        max_detections_per_image.
        """
        size = self.config.input_size
        feats = self.features(x)
        obj, deltas = self.rpn_outputs(feats)
        proposals = apply_deltas(self.anchors, deltas, size)
        valid = (proposals[:, 2] - proposals[:, 0] > 1.0) & (
            proposals[:, 3] - proposals[:, 1] > 1.0
        )
        obj = torch.where(valid, obj, torch.full_like(obj, -1e9))
        k = min(PROPOSALS_PER_IMAGE, len(proposals))
        top = torch.topk(obj, k).indices
        proposals = proposals[top]

        pooled = self.pool(feats, proposals, ROI_POOL)
        cls_logits, box_deltas = self.roi_heads.class_and_box(pooled)
        probs = F.softmax(cls_logits, dim=1)
        scores = 1.0 - probs[:, 0]
        boxes = apply_deltas(proposals, box_deltas, size)
        valid = (boxes[:, 2] - boxes[:, 0] > 1.0) & (boxes[:, 3] - boxes[:, 1] > 1.0)
        boxes, scores = boxes[valid], scores[valid]
        if len(boxes) == 0:
            return boxes, scores, torch.zeros(0, size, size)
        keep = nms(_to_xyxy(boxes), scores, iou_threshold=0.5)
        keep = keep[: self.config.max_detections_per_image]
        boxes, scores = boxes[keep], scores[keep]
        order = torch.argsort(scores, descending=True)
        boxes, scores = boxes[order], scores[order]

        pooled14 = self.pool(feats, boxes, MASK_POOL)
        mask_logits = self.roi_heads.masks(pooled14)
        mask_probs = torch.sigmoid(mask_logits)[:, 0]

        full = torch.zeros(len(boxes), size, size)
        for i, box in enumerate(boxes):
            r0 = int(torch.floor(box[0]).clamp(0, size - 1))
            c0 = int(torch.floor(box[1]).clamp(0, size - 1))
            r1 = int(torch.ceil(box[2]).clamp(r0 + 1, size))
            c1 = int(torch.ceil(box[3]).clamp(c0 + 1, size))
            patch = F.interpolate(
                mask_probs[i][None, None], size=(r1 - r0, c1 - c0),
                mode="bilinear", align_corners=False,
            )[0, 0]
            full[i, r0:r1, c0:c1] = patch
        return boxes, scores, full


def backbone_shape_manifest(backbone_id: str) -> Dict[str, List[int]]:
    if backbone_id not in BACKBONES:
        raise ConfigurationError(f"unknown backbone_id {backbone_id!r}")
    backbone = Backbone(BACKBONES[backbone_id]["channels"])
    return {name: list(t.shape) for name, t in backbone.state_dict().items()}


def manifest_path(weights_path) -> Path:
    return Path(str(weights_path) + ".manifest.json")


def save_pretrained_backbone(path, backbone_id: str = "smallconv-s8", seed: int = 0) -> Path:
    """Write a backbone weights file plus its JSON shape manifest.

    Stands in for downloading published pretrained weights; initialization
    is deterministic per seed.
    """
    if backbone_id not in BACKBONES:
        raise ConfigurationError(f"unknown backbone_id {backbone_id!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    backbone = Backbone(BACKBONES[backbone_id]["channels"])
    gen = torch.Generator().manual_seed(seed)
    _seeded_init(backbone, gen)
    torch.save(backbone.state_dict(), path)
    manifest = {name: list(t.shape) for name, t in backbone.state_dict().items()}
    with open(manifest_path(path), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path


def build_model(
    config: ModelConfig, pretrained_weights_path, exclude_heads: bool = True
) -> SegmentationModel:
    """Assemble the network with backbone weights taken from a file.

    The file's JSON shape manifest is checked against the architecture
    declared by config.backbone_id before anything is loaded. With
    exclude_heads=True (transfer learning) the proposal/class/box/mask
    heads keep their seeded fresh initialization; otherwise any head
    tensors present in the file are loaded as well.
    """
    weights_path = Path(pretrained_weights_path)
    if not weights_path.exists():
        raise ConfigurationError(f"weights file not found: {weights_path}")
    expected = backbone_shape_manifest(config.backbone_id)
    mpath = manifest_path(weights_path)
    if not mpath.exists():
        raise ConfigurationError(f"missing shape manifest: {mpath}")
    with open(mpath) as fh:
        declared = json.load(fh)
    for name in sorted(expected):
        if name not in declared:
            raise WeightsShapeError(f"manifest missing backbone tensor {name!r}")
        if list(declared[name]) != expected[name]:
            raise WeightsShapeError(
                f"tensor {name!r}: file shape {declared[name]} does not match "
                f"backbone {config.backbone_id!r} shape {expected[name]}"
            )

    model = SegmentationModel(config)
    state = torch.load(weights_path, map_location="cpu", weights_only=True)
    backbone_state = {
        k.removeprefix("backbone."): v
        for k, v in state.items()
        if k.removeprefix("backbone.") in expected
    }
    for name in expected:
        if name not in backbone_state:
            raise WeightsShapeError(f"weights file missing backbone tensor {name!r}")
        if list(backbone_state[name].shape) != expected[name]:
            raise WeightsShapeError(
                f"tensor {name!r}: stored shape {list(backbone_state[name].shape)} "
                f"does not match backbone shape {expected[name]}"
            )
    model.backbone.load_state_dict(backbone_state)
    if not exclude_heads:
        head_state = {
            k: v for k, v in state.items() if k.startswith(("rpn.", "roi_heads."))
        }
        if head_state:
            model.load_state_dict(head_state, strict=False)
    return model
