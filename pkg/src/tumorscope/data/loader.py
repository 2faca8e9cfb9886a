"""Load and save datasets in the two supported on-disk layouts.

mask_dirs layout::

    root/images/<scan_id>.png|.jpg
    root/masks/<scan_id>.png          (one connected component per instance)
    root/masks/<scan_id>_<k>.png      (or one file per instance)
    root/manifest.csv                 (header: scan_id,patient_id,label; label in {yes,no})

annotation_json layout: a single JSON file with per-image records
{scan_id, patient_id, label, image_path, instances: [{polygon} | {rle}]}.
Polygons are [[x, y], ...] vertex lists; RLE is row-major
{"size": [h, w], "counts": [...]} starting with a background run.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from PIL import Image, ImageDraw
from scipy import ndimage

from ..errors import DataError, LoadError, ValidationError
from .types import LABEL_NO_TUMOR, LABEL_TUMOR, Dataset, GroundTruth, ScanRecord

LAYOUT_MASK_DIRS = "mask_dirs"
LAYOUT_ANNOTATION_JSON = "annotation_json"

_LABEL_FROM_CSV = {"yes": LABEL_TUMOR, "no": LABEL_NO_TUMOR}
_LABEL_TO_CSV = {LABEL_TUMOR: "yes", LABEL_NO_TUMOR: "no"}


def _read_image(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        im.load()
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def _read_mask(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return arr >= 128


def _split_instances(mask: np.ndarray) -> List[np.ndarray]:
    labeled, n = ndimage.label(mask)
    return [(labeled == i) for i in range(1, n + 1)]


def _load_mask_dirs(root: Path) -> Dataset:
    manifest = root / "manifest.csv"
    images_dir = root / "images"
    masks_dir = root / "masks"
    if not manifest.exists():
        raise DataError(f"no scans found: missing manifest {manifest}")
    with open(manifest, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"no scans found in {root}")

    scans: List[ScanRecord] = []
    problems: List[str] = []
    for row in rows:
        scan_id = row["scan_id"]
        label = _LABEL_FROM_CSV.get(row["label"].strip().lower())
        if label is None:
            problems.append(f"{scan_id}: unknown label {row['label']!r}")
            continue
        image_path = None
        for ext in (".png", ".jpg", ".jpeg"):
            candidate = images_dir / f"{scan_id}{ext}"
            if candidate.exists():
                image_path = candidate
                break
        if image_path is None:
            problems.append(f"{scan_id}: image file missing under {images_dir}")
            continue
        try:
            image = _read_image(image_path)
        except Exception as exc:
            problems.append(f"{scan_id}: corrupt image {image_path.name}: {exc}")
            continue

        masks: List[np.ndarray] = []
        if label == LABEL_TUMOR:
            per_instance = sorted(masks_dir.glob(f"{scan_id}_*.png"))
            try:
                if per_instance:
                    masks = [_read_mask(p) for p in per_instance]
                elif (masks_dir / f"{scan_id}.png").exists():
                    masks = _split_instances(_read_mask(masks_dir / f"{scan_id}.png"))
                else:
                    problems.append(f"{scan_id}: tumor scan has no mask file")
                    continue
            except Exception as exc:
                problems.append(f"{scan_id}: corrupt mask: {exc}")
                continue
            for m in masks:
                if m.shape != image.shape[:2]:
                    raise ValidationError(
                        f"scan {scan_id}: mask shape {m.shape} does not match "
                        f"image shape {image.shape[:2]}"
                    )

        patient_id = row.get("patient_id") or None
        scans.append(
            ScanRecord(
                scan_id=scan_id,
                image=image,
                patient_id=patient_id,
                ground_truth=GroundTruth.from_masks(label, masks),
            )
        )
    if problems:
        raise LoadError(f"{len(problems)} scan(s) failed to load from {root}", problems)
    return Dataset(scans)


def _rasterize_polygon(points: Sequence[Sequence[float]], shape) -> np.ndarray:
    im = Image.new("L", (shape[1], shape[0]), 0)
    ImageDraw.Draw(im).polygon([(float(x), float(y)) for x, y in points], fill=255)
    return np.asarray(im) >= 128


def _decode_rle(rle: dict) -> np.ndarray:
    h, w = rle["size"]
    flat = np.zeros(h * w, dtype=bool)
    pos = 0
    value = False  # counts start with a background run
    for run in rle["counts"]:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    if pos != h * w:
        raise ValidationError(f"RLE covers {pos} pixels, expected {h * w}")
    return flat.reshape(h, w)


def _load_annotation_json(root: Path) -> Dataset:
    json_path = root if root.is_file() else root / "annotations.json"
    if not json_path.exists():
        raise DataError(f"no scans found: missing annotation file {json_path}")
    with open(json_path) as fh:
        records = json.load(fh)
    if not records:
        raise DataError(f"no scans found in {json_path}")

    base = json_path.parent
    scans: List[ScanRecord] = []
    problems: List[str] = []
    for rec in records:
        scan_id = rec["scan_id"]
        try:
            image = _read_image(base / rec["image_path"])
        except Exception as exc:
            problems.append(f"{scan_id}: cannot read image: {exc}")
            continue
        label = rec["label"]
        if label in _LABEL_FROM_CSV:
            label = _LABEL_FROM_CSV[label]
        masks = []
        for inst in rec.get("instances", []):
            if "polygon" in inst:
                masks.append(_rasterize_polygon(inst["polygon"], image.shape[:2]))
            elif "rle" in inst:
                mask = _decode_rle(inst["rle"])
                if mask.shape != image.shape[:2]:
                    raise ValidationError(
                        f"scan {scan_id}: mask shape {mask.shape} does not match "
                        f"image shape {image.shape[:2]}"
                    )
                masks.append(mask)
            else:
                problems.append(f"{scan_id}: instance without polygon or rle")
        scans.append(
            ScanRecord(
                scan_id=scan_id,
                image=image,
                patient_id=rec.get("patient_id") or None,
                ground_truth=GroundTruth.from_masks(label, masks),
            )
        )
    if problems:
        raise LoadError(f"{len(problems)} scan(s) failed to load from {json_path}", problems)
    return Dataset(scans)


def load_dataset(root_path, layout: str = LAYOUT_MASK_DIRS) -> Dataset:
    root = Path(root_path)
    if layout == LAYOUT_MASK_DIRS:
        if not root.is_dir():
            raise DataError(f"no scans found: {root} is not a directory")
        return _load_mask_dirs(root)
    if layout == LAYOUT_ANNOTATION_JSON:
        return _load_annotation_json(root)
    raise DataError(f"unknown layout {layout!r}")


def save_mask_dirs(dataset: Dataset, root) -> None:
    """Write a dataset in the mask_dirs layout (pixel-exact round trip)."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    rows = []
    for scan in dataset:
        img = scan.image
        pil = Image.fromarray(img[:, :, 0] if img.shape[2] == 1 else img)
        pil.save(root / "images" / f"{scan.scan_id}.png")
        gt = scan.ground_truth
        if gt and gt.label == LABEL_TUMOR:
            if len(gt.masks) == 1:
                Image.fromarray(gt.masks[0].astype(np.uint8) * 255).save(
                    root / "masks" / f"{scan.scan_id}.png"
                )
            else:
                for k, m in enumerate(gt.masks):
                    Image.fromarray(m.astype(np.uint8) * 255).save(
                        root / "masks" / f"{scan.scan_id}_{k}.png"
                    )
        rows.append(
            {
                "scan_id": scan.scan_id,
                "patient_id": scan.patient_id or "",
                "label": _LABEL_TO_CSV[gt.label] if gt else "",
            }
        )
    with open(root / "manifest.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["scan_id", "patient_id", "label"])
        writer.writeheader()
        writer.writerows(sorted(rows, key=lambda r: r["scan_id"]))
