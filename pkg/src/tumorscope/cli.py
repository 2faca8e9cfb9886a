"""Operator command line: synth, init-weights, train, evaluate, predict, serve.

Exit codes: 0 success, 1 runtime failure, 2 usage/configuration error.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import ConfigurationError, TumorscopeError


def _fail(exc: Exception, code: int) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


@click.group()
def main() -> None:
    """Brain MRI tumor detection and segmentation toolkit."""


@main.command()
@click.option("--n", type=int, required=True, help="number of scans to generate")
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--image-size", type=int, default=96, show_default=True)
def synth(n: int, seed: int, out: Path, image_size: int) -> None:
    """Generate a synthetic dataset in the mask_dirs layout."""
    from .data import SynthParams, generate_synthetic_dataset, save_mask_dirs

    try:
        dataset = generate_synthetic_dataset(n, seed, SynthParams(image_size=image_size))
    except ConfigurationError as exc:
        _fail(exc, 2)
    try:
        save_mask_dirs(dataset, out)
    except OSError as exc:
        _fail(exc, 1)
    counts = dataset.label_counts()
    click.echo(f"wrote {len(dataset)} scans to {out} ({counts})")


@main.command("init-weights")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--backbone", default="smallconv-s8", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def init_weights(out: Path, backbone: str, seed: int) -> None:
    """Write a pretrained-backbone weights file plus its shape manifest."""
    from .engine import save_pretrained_backbone

    try:
        path = save_pretrained_backbone(out, backbone, seed)
    except ConfigurationError as exc:
        _fail(exc, 2)
    except OSError as exc:
        _fail(exc, 1)
    click.echo(f"wrote {path}")


@main.command()
@click.option("--data", type=click.Path(path_type=Path), required=True)
@click.option("--run-dir", type=click.Path(path_type=Path), required=True)
@click.option("--weights", type=click.Path(path_type=Path), required=True,
              help="pretrained backbone weights file")
@click.option("--epochs", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--input-size", type=int, default=96, show_default=True)
@click.option("--learning-rate", type=float, default=1e-3, show_default=True)
@click.option("--steps-per-epoch", type=int, default=0, show_default=True,
              help="0 = one step per training scan")
@click.option("--val-ratio", type=float, default=0.15, show_default=True)
def train(data, run_dir, weights, epochs, seed, input_size, learning_rate,
          steps_per_epoch, val_ratio) -> None:
    """Train on a dataset root and checkpoint every epoch into RUN_DIR."""
    from .data import load_dataset, split_dataset
    from .engine import ModelConfig, build_model
    from .engine import train as train_model

    try:
        config = ModelConfig(
            epochs=epochs,
            random_seed=seed,
            input_size=input_size,
            learning_rate=learning_rate,
            steps_per_epoch=steps_per_epoch,
        )
        config.validate(for_training=True)
    except ConfigurationError as exc:
        _fail(exc, 2)
    try:
        dataset = load_dataset(data)
        split = split_dataset(dataset, (1.0 - 2 * val_ratio, val_ratio, val_ratio), seed)
        model = build_model(config, weights, exclude_heads=True)
        history = train_model(
            model, dataset.subset(split.train), dataset.subset(split.validation),
            config, run_dir,
        )
    except ConfigurationError as exc:
        _fail(exc, 2)
    except (TumorscopeError, OSError) as exc:
        _fail(exc, 1)
    click.echo(
        f"trained {len(history)} epochs; final train_loss "
        f"{history.records[-1].train_loss:.4f}; run dir {run_dir}"
    )


def _config_from_run_dir(run_dir: Path):
    from .engine import ModelConfig
    from .errors import CheckpointNotFoundError

    config_path = Path(run_dir) / "config.json"
    if not config_path.exists():
        raise CheckpointNotFoundError(f"no checkpoints in {run_dir}")
    with open(config_path) as fh:
        return ModelConfig.from_dict(json.load(fh))


@main.command()
@click.option("--data", type=click.Path(path_type=Path), required=True)
@click.option("--run-dir", type=click.Path(path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True,
              help="directory for report JSON and PR CSV")
def evaluate(data, run_dir, out) -> None:
    """Evaluate the latest checkpoint on a dataset; print mean IoU and AP."""
    from . import metrics
    from .data import load_dataset
    from .engine import load_inference_model, predict
    from .reporting import export_pr_csv

    try:
        config = _config_from_run_dir(run_dir)
        model = load_inference_model(run_dir, config)
        dataset = load_dataset(data)

        class _Predictor:
            def predict(self, image):
                return predict(model, image)

        report = metrics.evaluate(_Predictor(), dataset, config)
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "eval_report.json", "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
        export_pr_csv(report.pr_curve, out / "pr_curve.csv")
    except (TumorscopeError, OSError) as exc:
        _fail(exc, 1)
    click.echo(f"mean_iou {report.mean_iou:.6f}")
    click.echo(f"ap {report.ap:.6f}")


@main.command()
@click.option("--image", type=click.Path(path_type=Path), required=True)
@click.option("--run-dir", type=click.Path(path_type=Path), required=True)
@click.option("--out-overlay", type=click.Path(path_type=Path), required=True,
              help="directory for the rendered overlay PNG")
def predict(image, run_dir, out_overlay) -> None:
    """Diagnose one image; print the diagnosis JSON and write an overlay."""
    import numpy as np
    from PIL import Image as PILImage

    from .engine import diagnose, load_inference_model
    from .engine import predict as run_predict
    from .reporting import render_overlay, write_overlay

    try:
        config = _config_from_run_dir(run_dir)
        model = load_inference_model(run_dir, config)
        with PILImage.open(image) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
        detections = run_predict(model, arr)
        diagnosis = diagnose(detections, config.detection_score_threshold)
        overlay = render_overlay(arr, diagnosis.detections, scan_id=Path(image).stem)
        write_overlay(overlay, out_overlay)
    except (TumorscopeError, OSError) as exc:
        _fail(exc, 1)
    click.echo(
        json.dumps(
            {
                "label": diagnosis.label,
                "confidence": diagnosis.confidence,
                "detections": [
                    {"box": list(d.box), "class_label": d.class_label, "score": d.score}
                    for d in diagnosis.detections
                ],
            },
            indent=2,
        )
    )


@main.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help="service config JSON (TUMORSCOPE_* env vars override)")
def serve(config_path) -> None:
    """Run the REST service (blocks)."""
    import uvicorn

    from .service import create_app, load_config

    try:
        config = load_config(config_path)
        app = create_app(config)
        uvicorn.run(app, host=config.host, port=config.port)
    except (TumorscopeError, OSError, SystemExit) as exc:
        if isinstance(exc, SystemExit) and not exc.code:
            return
        _fail(exc, 1)


if __name__ == "__main__":
    main()
