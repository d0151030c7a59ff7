"""
Shared fixtures: tiny model configs, seeded generators and a small synthetic dataset
"""

import numpy as np
import pytest

from src.core.config_manager import RunConfig, TrainConfig
from src.data.dataset import save_dataset
from src.data.synth import SynthConfig, synth_dataset
from src.model.sgmnet import ModelConfig

TINY_MODEL = {
    "widths": [4, 4, 8, 8, 8],
    "fpm_channels": 4,
    "detail_channels": 4,
    "fusion_channels": 4,
    "se_reduction": 4,
    "input_size": 32,
}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_model_config():
    return ModelConfig(**TINY_MODEL)


@pytest.fixture
def tiny_run_config(tiny_model_config):
    train = TrainConfig(epochs=1, batch=2, iterations=2, holdout=0.25, checkpoint_every=1, dtype="float64")
    return RunConfig(model=tiny_model_config, train=train)


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    """Eight 32x32 samples on disk; treat as read-only"""
    root = tmp_path_factory.mktemp("synth")
    save_dataset(synth_dataset(SynthConfig(seed=3, count=8, size=32)), root)
    return root
