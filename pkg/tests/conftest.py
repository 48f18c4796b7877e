from pathlib import Path

import numpy as np
import pytest
import yaml

from src.settings import TrainConfig, load_curve_params
from src.sncurve_data import split_series, synthesize_series

REPO_ROOT = Path(__file__).resolve().parents[1]
CURVES_PATH = REPO_ROOT / "configs" / "curves.yaml"

TINY_CONFIG = {
    "experiment": {"seed": 7, "curves": str(CURVES_PATH), "n_points": 120},
    "data": {"train_count_axial": 72, "train_count_torsional": 40},
    "lstm": {"window_len": 10, "lstm_hidden": 4, "fc_units": 4, "epochs": 5},
    "dnn": {"dnn_layers": 2, "dnn_units": 4, "epochs": 5},
}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config() -> TrainConfig:
    return TrainConfig.model_validate(TINY_CONFIG)


@pytest.fixture
def tiny_config_file(tmp_path) -> Path:
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(TINY_CONFIG), encoding="utf-8")
    return path


@pytest.fixture
def curves():
    return load_curve_params(CURVES_PATH)


@pytest.fixture
def tiny_series(curves, tiny_config):
    """Axial and torsional series on a 120-point grid, split per the tiny config"""
    out = {}
    for label in ("axial", "torsional"):
        params = curves[label].model_copy(update={"n_points": 120})
        series = synthesize_series(params, label)
        out[label] = split_series(series, tiny_config.train_count(label))
    return out
