"""Single-consumer inference worker.

Model inference is not safe for concurrent callers, so every upload goes
through one queue owned by one thread holding the loaded model. Patient
IDs are stripped before anything reaches the model and re-attached to the
persisted result afterwards.
"""
from __future__ import annotations

import logging
import queue
import threading
import time
from pathlib import Path

import numpy as np
from PIL import Image

from ..data import Dataset, ScanRecord, reattach_patient_id, strip_patient_ids
from ..reporting import render_overlay, write_overlay
from .store import Store

log = logging.getLogger(__name__)

_STOP = object()


class InferenceWorker:
    def __init__(
        self,
        store: Store,
        storage_root,
        model,
        detection_threshold: float,
        clock=time.time,
    ):
        self._store = store
        self._storage_root = Path(storage_root)
        self._model = model
        self._threshold = detection_threshold
        self._clock = clock
        self._queue: "queue.Queue" = queue.Queue()
        self._thread = threading.Thread(target=self._run, daemon=True, name="inference")

    def start(self) -> None:
        self._thread.start()

    def stop(self, timeout: float = 30.0) -> None:
        self._queue.put(_STOP)
        self._thread.join(timeout=timeout)

    def enqueue(self, upload_id: str) -> None:
        self._queue.put(upload_id)

    def _run(self) -> None:
        while True:
            item = self._queue.get()
            if item is _STOP:
                return
            try:
                self._process(item)
            except Exception as exc:  # keep the worker alive on bad uploads
                log.exception("upload %s failed", item)
                try:
                    self._store.set_status(item, "failed", error=str(exc))
                except Exception:
                    pass

    def _process(self, upload_id: str) -> None:
        from ..engine import diagnose, predict

        upload = self._store.get_upload(upload_id)
        if upload is None:
            raise RuntimeError(f"unknown upload {upload_id}")
        self._store.set_status(upload_id, "processing")

        with Image.open(upload["stored_path"]) as im:
            image = np.asarray(im.convert("RGB"), dtype=np.uint8)
        scan = ScanRecord(
            scan_id=upload_id, image=image, patient_id=upload["patient_id"]
        )
        anonymized, id_map = strip_patient_ids(Dataset([scan]))
        model_input = anonymized.scans[0]

        if hasattr(self._model, "predict"):
            detections = self._model.predict(model_input.image)
        else:
            detections = predict(self._model, model_input.image)
        diagnosis = diagnose(detections, self._threshold)
        overlay = render_overlay(
            model_input.image, diagnosis.detections, scan_id=upload_id
        )
        overlay_path = write_overlay(overlay, self._storage_root / "overlays")

        result = {
            "upload_id": upload_id,
            "label": diagnosis.label,
            "confidence": diagnosis.confidence,
            "overlay_name": overlay_path.name,
            "detections": [
                {"box": list(d.box), "class_label": d.class_label, "score": d.score}
                for d in diagnosis.detections
            ],
        }
        result = reattach_patient_id(result, id_map, upload_id)
        self._store.save_result(
            upload_id=upload_id,
            patient_id=result["patient_id"],
            label=result["label"],
            confidence=result["confidence"],
            overlay_name=result["overlay_name"],
            detections=result["detections"],
            created_at=self._clock(),
        )
        self._store.set_status(upload_id, "done")
