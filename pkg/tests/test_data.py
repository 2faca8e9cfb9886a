import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tumorscope.data import (
    Dataset,
    GroundTruth,
    ScanRecord,
    SynthParams,
    generate_synthetic_dataset,
    load_dataset,
    mask_bbox,
    reattach_patient_id,
    save_mask_dirs,
    split_dataset,
    strip_patient_ids,
)
from tumorscope.errors import (
    ConfigurationError,
    DataError,
    LoadError,
    UnknownScanError,
    ValidationError,
)


def metadata_dataset(n_tumor, n_no_tumor):
    """Tiny images, real labels: enough to exercise split logic cheaply."""
    scans = []
    for i in range(n_tumor):
        mask = np.zeros((16, 16), bool)
        mask[4:8, 4:8] = True
        scans.append(
            ScanRecord(
                f"t{i:04d}",
                np.zeros((16, 16, 1), np.uint8),
                ground_truth=GroundTruth.from_masks("tumor", [mask]),
            )
        )
    for i in range(n_no_tumor):
        scans.append(
            ScanRecord(
                f"n{i:04d}",
                np.zeros((16, 16, 1), np.uint8),
                ground_truth=GroundTruth.from_masks("no_tumor", []),
            )
        )
    return Dataset(scans)


# --- mask_bbox ---------------------------------------------------------------

def test_mask_bbox_single_pixel():
    m = np.zeros((6, 6), bool)
    m[2, 3] = True
    assert mask_bbox(m) == (2, 3, 3, 4)


def test_mask_bbox_full_frame():
    assert mask_bbox(np.ones((5, 9), bool)) == (0, 0, 5, 9)


def test_mask_bbox_empty_raises():
    with pytest.raises(ValidationError):
        mask_bbox(np.zeros((4, 4), bool))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mask_bbox_matches_exhaustive_scan(seed):
    rng = np.random.default_rng(seed)
    m = rng.random((12, 15)) < 0.2
    if not m.any():
        return
    rows = [r for r in range(12) for c in range(15) if m[r, c]]
    cols = [c for r in range(12) for c in range(15) if m[r, c]]
    assert mask_bbox(m) == (min(rows), min(cols), max(rows) + 1, max(cols) + 1)


# --- split --------------------------------------------------------------------

def test_split_paper_sizes():
    ds = metadata_dataset(155, 155)
    split = split_dataset(ds, (0.7, 0.15, 0.15), seed=42)
    assert (len(split.train), len(split.validation), len(split.test)) == (217, 46, 47)


def test_split_partition_and_stratification():
    ds = metadata_dataset(155, 155)
    split = split_dataset(ds, (0.7, 0.15, 0.15), seed=42)
    all_ids = set(split.train) | set(split.validation) | set(split.test)
    assert len(all_ids) == 310
    assert not set(split.train) & set(split.validation)
    assert not set(split.train) & set(split.test)
    assert not set(split.validation) & set(split.test)
    for part, total in ((split.train, 217), (split.validation, 46), (split.test, 47)):
        tumor = sum(1 for sid in part if sid.startswith("t"))
        assert abs(tumor - total / 2) <= 1


def test_split_deterministic():
    ds = metadata_dataset(31, 30)
    a = split_dataset(ds, (0.7, 0.15, 0.15), seed=9)
    b = split_dataset(ds, (0.7, 0.15, 0.15), seed=9)
    assert a == b
    c = split_dataset(ds, (0.7, 0.15, 0.15), seed=10)
    assert a != c


def test_split_rejects_bad_ratios():
    ds = metadata_dataset(4, 4)
    with pytest.raises(ConfigurationError):
        split_dataset(ds, (1.0, 0.0, 0.0), seed=1)
    with pytest.raises(ConfigurationError):
        split_dataset(ds, (0.5, 0.4, 0.2), seed=1)
    with pytest.raises(DataError):
        split_dataset(Dataset([]), (0.7, 0.15, 0.15), seed=1)


# --- patient ids ---------------------------------------------------------------

def test_strip_nothing():
    ds = metadata_dataset(2, 2)
    stripped, id_map = strip_patient_ids(ds)
    assert id_map.entries == {}
    assert [s.scan_id for s in stripped] == [s.scan_id for s in ds]


def test_strip_and_reattach():
    ds = generate_synthetic_dataset(3, seed=1)
    stripped, id_map = strip_patient_ids(ds)
    assert all(s.patient_id is None for s in stripped)
    assert len(id_map.entries) == 3
    for scan in ds:
        rec = reattach_patient_id({"scan_id": scan.scan_id}, id_map, scan.scan_id)
        assert rec["patient_id"] == scan.patient_id


def test_reattach_unknown_scan():
    ds = generate_synthetic_dataset(2, seed=1)
    _, id_map = strip_patient_ids(ds)
    with pytest.raises(UnknownScanError):
        reattach_patient_id({}, id_map, "s404")


def test_strip_reattach_roundtrip_manifest(tmp_path):
    ds = generate_synthetic_dataset(6, seed=5)
    save_mask_dirs(ds, tmp_path / "a")
    stripped, id_map = strip_patient_ids(ds)
    restored = Dataset(
        [reattach_patient_id(s, id_map, s.scan_id) for s in stripped]
    )
    save_mask_dirs(restored, tmp_path / "b")
    assert (tmp_path / "a" / "manifest.csv").read_bytes() == (
        tmp_path / "b" / "manifest.csv"
    ).read_bytes()


# --- synthetic generator --------------------------------------------------------

def test_synth_deterministic():
    a = generate_synthetic_dataset(1, seed=7)
    b = generate_synthetic_dataset(1, seed=7)
    assert len(a) == 1
    assert np.array_equal(a.scans[0].image, b.scans[0].image)


def test_synth_balance():
    ds = generate_synthetic_dataset(40, seed=3)
    counts = ds.label_counts()
    assert 19 <= counts["tumor"] <= 21


def test_synth_rejects_n_zero():
    with pytest.raises(ConfigurationError):
        generate_synthetic_dataset(0, seed=1)


def test_synth_masks_are_exact_and_boxes_tight():
    ds = generate_synthetic_dataset(10, seed=2)
    for scan in ds:
        gt = scan.ground_truth
        if gt.label != "tumor":
            assert not gt.masks
            continue
        assert len(gt.masks) >= 1
        for mask, box in zip(gt.masks, gt.boxes):
            assert mask_bbox(mask) == box
            # painted pixels are bright relative to the background
            assert scan.image[:, :, 0][mask].mean() > 150


def test_synth_blob_count_range():
    ds = generate_synthetic_dataset(30, seed=4, params=SynthParams())
    for scan in ds:
        if scan.label == "tumor":
            assert 1 <= len(scan.ground_truth.masks) <= 2


# --- loader ----------------------------------------------------------------------

def test_save_load_roundtrip_pixel_exact(tmp_path):
    ds = generate_synthetic_dataset(10, seed=6)
    save_mask_dirs(ds, tmp_path)
    loaded = load_dataset(tmp_path, "mask_dirs")
    assert len(loaded) == 10
    for scan in ds:
        got = loaded.get(scan.scan_id)
        assert np.array_equal(got.image, scan.image)
        assert got.patient_id == scan.patient_id
        assert got.ground_truth.label == scan.ground_truth.label
        assert len(got.ground_truth.masks) == len(scan.ground_truth.masks)
        got_masks = sorted(got.ground_truth.boxes)
        assert got_masks == sorted(scan.ground_truth.boxes)
        for m in scan.ground_truth.masks:
            assert any(np.array_equal(m, g) for g in got.ground_truth.masks)


def test_load_empty_dir(tmp_path):
    with pytest.raises(DataError, match="no scans found"):
        load_dataset(tmp_path, "mask_dirs")


def test_load_missing_image_is_itemized(tmp_path):
    ds = generate_synthetic_dataset(4, seed=8)
    save_mask_dirs(ds, tmp_path)
    (tmp_path / "images" / "synth_0001.png").unlink()
    (tmp_path / "images" / "synth_0002.png").write_bytes(b"not a png")
    with pytest.raises(LoadError) as exc:
        load_dataset(tmp_path, "mask_dirs")
    joined = " ".join(exc.value.items)
    assert "synth_0001" in joined and "synth_0002" in joined


def test_load_mask_shape_mismatch_names_scan(tmp_path):
    ds = generate_synthetic_dataset(2, seed=9)
    save_mask_dirs(ds, tmp_path)
    from PIL import Image

    bad = np.zeros((10, 10), np.uint8)
    bad[2:5, 2:5] = 255
    Image.fromarray(bad).save(tmp_path / "masks" / "synth_0000.png")
    with pytest.raises(ValidationError, match="synth_0000"):
        load_dataset(tmp_path, "mask_dirs")


def test_load_annotation_json(tmp_path):
    ds = generate_synthetic_dataset(4, seed=10)
    save_mask_dirs(ds, tmp_path)  # reuse the images on disk
    records = []
    for scan in ds:
        instances = []
        for mask in scan.ground_truth.masks if scan.ground_truth else []:
            flat = mask.flatten()
            counts, run, value = [], 0, False
            for px in flat:
                if bool(px) == value:
                    run += 1
                else:
                    counts.append(run)
                    run, value = 1, bool(px)
            counts.append(run)
            instances.append({"rle": {"size": list(mask.shape), "counts": counts}})
        records.append(
            {
                "scan_id": scan.scan_id,
                "patient_id": scan.patient_id,
                "label": scan.ground_truth.label,
                "image_path": f"images/{scan.scan_id}.png",
                "instances": instances,
            }
        )
    with open(tmp_path / "annotations.json", "w") as fh:
        json.dump(records, fh)
    loaded = load_dataset(tmp_path / "annotations.json", "annotation_json")
    assert len(loaded) == 4
    for scan in ds:
        got = loaded.get(scan.scan_id)
        assert got.ground_truth.label == scan.ground_truth.label
        for m in scan.ground_truth.masks:
            assert any(np.array_equal(m, g) for g in got.ground_truth.masks)


def test_load_annotation_json_polygon(tmp_path):
    ds = generate_synthetic_dataset(1, seed=11)
    save_mask_dirs(ds, tmp_path)
    rec = {
        "scan_id": "synth_0000",
        "patient_id": "P-0000",
        "label": "tumor",
        "image_path": "images/synth_0000.png",
        "instances": [{"polygon": [[10, 10], [40, 10], [40, 40], [10, 40]]}],
    }
    with open(tmp_path / "poly.json", "w") as fh:
        json.dump([rec], fh)
    loaded = load_dataset(tmp_path / "poly.json", "annotation_json")
    mask = loaded.get("synth_0000").ground_truth.masks[0]
    assert mask[20, 20] and not mask[5, 5]


def test_dataset_rejects_duplicates():
    scan = ScanRecord("dup", np.zeros((16, 16, 1), np.uint8))
    with pytest.raises(ValidationError):
        Dataset([scan, scan])


def test_scan_record_invariants():
    with pytest.raises(ValidationError):
        ScanRecord("s", np.zeros((8, 20, 1), np.uint8)).validate()
    with pytest.raises(ValidationError):
        ScanRecord("s", np.zeros((20, 20, 2), np.uint8)).validate()
    with pytest.raises(ValidationError):
        GroundTruth.from_masks("no_tumor", [np.ones((4, 4), bool)])
