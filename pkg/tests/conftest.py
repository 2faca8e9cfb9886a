import numpy as np
import pytest
import torch

from tumorscope import data, engine

torch.set_num_threads(4)

ACCEPT_SEED = 7
ACCEPT_N = 40


@pytest.fixture(scope="session")
def synth40():
    return data.generate_synthetic_dataset(ACCEPT_N, seed=ACCEPT_SEED)


@pytest.fixture(scope="session")
def accept_config():
    return engine.ModelConfig(epochs=20, random_seed=3)


@pytest.fixture(scope="session")
def overfit_run(tmp_path_factory, synth40, accept_config):
    """One full 40-scan / 20-epoch training run, shared across the suite."""
    base = tmp_path_factory.mktemp("overfit")
    weights = engine.save_pretrained_backbone(base / "backbone.weights", seed=1)
    model = engine.build_model(accept_config, weights, exclude_heads=True)
    history = engine.train(model, synth40, None, accept_config, base / "run")
    return {
        "model": model,
        "history": history,
        "run_dir": base / "run",
        "weights": weights,
        "config": accept_config,
        "dataset": synth40,
    }


class PredictorWrapper:
    """Adapts an engine model to the `.predict(image)` surface evaluate uses."""

    def __init__(self, model):
        self.model = model

    def predict(self, image):
        return engine.predict(self.model, image)


@pytest.fixture
def wrap_predictor():
    return PredictorWrapper
