"""Image pre/post-processing between the scan frame and the model frame.

Scans are resized with a preserved aspect ratio, padded bottom/right to
the square model input, and normalized per the backbone's declared
normalization. The returned metadata inverts the mapping for boxes and
masks coming back out of the model.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from ..data.types import Box
from ..errors import ValidationError


@dataclass(frozen=True)
class FrameMeta:
    scale: float
    new_h: int
    new_w: int
    orig_h: int
    orig_w: int


def to_three_channels(image: np.ndarray) -> np.ndarray:
    if image.ndim == 2:
        image = image[:, :, None]
    if image.shape[2] == 1:
        image = np.repeat(image, 3, axis=2)
    return image


def preprocess(
    image: np.ndarray, input_size: int, normalization: dict
) -> Tuple[torch.Tensor, FrameMeta]:
    image = to_three_channels(np.asarray(image))
    h, w = image.shape[:2]
    if h < 16 or w < 16:
        raise ValidationError(f"image sides must be >= 16, got {(h, w)}")
    scale = input_size / max(h, w)
    new_h = max(1, round(h * scale))
    new_w = max(1, round(w * scale))
    x = torch.from_numpy(np.ascontiguousarray(image)).permute(2, 0, 1).float() / 255.0
    x = F.interpolate(x[None], size=(new_h, new_w), mode="bilinear", align_corners=False)
    x = F.pad(x, (0, input_size - new_w, 0, input_size - new_h))
    x = (x - normalization["mean"]) / normalization["std"]
    return x, FrameMeta(scale, new_h, new_w, h, w)


def boxes_to_model_frame(boxes: List[Box], meta: FrameMeta, input_size: int) -> torch.Tensor:
    if not boxes:
        return torch.zeros(0, 4)
    arr = torch.tensor(boxes, dtype=torch.float32) * meta.scale
    return arr.clamp(0.0, float(input_size))


def masks_to_model_frame(
    masks: List[np.ndarray], meta: FrameMeta, input_size: int
) -> torch.Tensor:
    if not masks:
        return torch.zeros(0, input_size, input_size)
    stack = torch.from_numpy(np.stack(masks).astype(np.float32))
    resized = F.interpolate(
        stack[:, None], size=(meta.new_h, meta.new_w), mode="nearest"
    )[:, 0]
    out = torch.zeros(len(masks), input_size, input_size)
    out[:, : meta.new_h, : meta.new_w] = resized
    return out


def mask_to_image_frame(prob_map: torch.Tensor, meta: FrameMeta) -> np.ndarray:
    """Map a model-frame probability map back to scan-frame probabilities."""
    cropped = prob_map[: meta.new_h, : meta.new_w]
    resized = F.interpolate(
        cropped[None, None], size=(meta.orig_h, meta.orig_w),
        mode="bilinear", align_corners=False,
    )[0, 0]
    return resized.numpy()


def box_to_image_frame(box: torch.Tensor, meta: FrameMeta) -> Box:
    r0 = int(np.floor(float(box[0]) / meta.scale))
    c0 = int(np.floor(float(box[1]) / meta.scale))
    r1 = int(np.ceil(float(box[2]) / meta.scale))
    c1 = int(np.ceil(float(box[3]) / meta.scale))
    r0 = min(max(r0, 0), meta.orig_h - 1)
    c0 = min(max(c0, 0), meta.orig_w - 1)
    r1 = min(max(r1, r0 + 1), meta.orig_h)
    c1 = min(max(c1, c0 + 1), meta.orig_w)
    return (r0, c0, r1, c1)
