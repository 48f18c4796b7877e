"""
Experiment configuration
Loads config.yaml / curves.yaml into validated pydantic models
"""
import os
import logging
from pathlib import Path
from typing import Dict, Literal, Optional

import numpy as np
import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError, MissingInputError
from .sncurve_data import SnCurveParams

load_dotenv()

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path("configs/config.yaml")
DEFAULT_OUT_DIR = "outputs"

# Independent random streams derived from the single experiment seed
SEED_STREAMS = {
    "noise_axial": 1,
    "noise_torsional": 2,
    "source_lstm_axial": 10,
    "tr_lstm_torsional": 11,
    "baseline_lstm_torsional": 12,
    "dnn_axial": 13,
    "dnn_torsional": 14,
}


def stream_seed(seed: int, stream: str) -> list:
    """Seed entropy for one named stream of the experiment seed"""
    return [int(seed), SEED_STREAMS[stream]]


def make_rng(seed: int, stream: str) -> np.random.Generator:
    return np.random.default_rng(stream_seed(seed, stream))


def default_out_dir() -> str:
    return os.getenv("SN_FORECAST_OUT") or DEFAULT_OUT_DIR


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ExperimentSection(_Section):
    seed: int = Field(42, ge=0, lt=2**64)
    curves: str = "configs/curves.yaml"
    noise_std: float = Field(0.0, ge=0.0)
    n_points: Optional[int] = Field(None, ge=2)


class DataSection(_Section):
    train_count_axial: int = Field(600, ge=0)
    train_count_torsional: int = Field(300, ge=0)


class LstmSection(_Section):
    window_len: int = Field(50, ge=1)
    lstm_hidden: int = Field(64, ge=1)
    lstm_layers: int = Field(1, ge=1)
    fc_units: int = Field(64, ge=1)
    epochs: int = Field(500, ge=1)
    clip_norm: Optional[float] = Field(5.0, gt=0.0)
    # LSTM runs only; null falls back to optimizer.learning_rate
    learning_rate: Optional[float] = Field(5e-3, gt=0.0)
    lr_schedule: Literal["constant", "cosine"] = "cosine"
    min_learning_rate: float = Field(1e-5, ge=0.0)
    residual_steps: bool = True


class DnnSection(_Section):
    dnn_layers: int = Field(4, ge=1)
    dnn_units: int = Field(32, ge=1)
    epochs: int = Field(500, ge=1)


class OptimizerSection(_Section):
    learning_rate: float = Field(1e-3, gt=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(1e-8, gt=0.0)


class TrainConfig(BaseModel):
    """Full experiment configuration; every key has a default"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    experiment: ExperimentSection = ExperimentSection()
    data: DataSection = DataSection()
    lstm: LstmSection = LstmSection()
    dnn: DnnSection = DnnSection()
    optimizer: OptimizerSection = OptimizerSection()

    @model_validator(mode="after")
    def _check_windows(self):
        window = self.lstm.window_len
        for name in ("train_count_axial", "train_count_torsional"):
            count = getattr(self.data, name)
            if count <= window:
                raise ValueError(f"data.{name}={count} must exceed lstm.window_len={window}")
        return self

    @property
    def seed(self) -> int:
        return self.experiment.seed

    def train_count(self, label: str) -> int:
        return getattr(self.data, f"train_count_{label}")

    def with_seed(self, seed: Optional[int]) -> "TrainConfig":
        if seed is None:
            return self
        experiment = self.experiment.model_copy(update={"seed": seed})
        return self.model_copy(update={"experiment": experiment})


def _read_yaml(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(path, "configuration file")
    try:
        with open(path, "r", encoding="utf-8") as f:
            content = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML: {e}") from e
    if content is None:
        return {}
    if not isinstance(content, dict):
        raise ConfigError(f"{path}: expected a key-value document")
    return content


def load_config(path=DEFAULT_CONFIG_PATH) -> TrainConfig:
    """Load and validate the experiment configuration"""
    raw = _read_yaml(path)
    try:
        config = TrainConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}") from e
    logger.debug(f"Loaded configuration from {path}")
    return config


def load_curve_params(path, n_points: Optional[int] = None) -> Dict[str, SnCurveParams]:
    """
    Load the curve parameter file: one section per curve with keys
    a, b, d, n_min, n_max, n_points, label
    """
    raw = _read_yaml(path)
    curves = {}
    for section, values in raw.items():
        if not isinstance(values, dict):
            raise ConfigError(f"{path}: section '{section}' is not a key-value block")
        values = dict(values)
        values.setdefault("label", section)
        if n_points is not None:
            values["n_points"] = n_points
        try:
            params = SnCurveParams.model_validate(values)
        except ValidationError as e:
            raise ConfigError(f"{path}: curve '{section}': {e}") from e
        curves[params.label] = params
    for required in ("axial", "torsional"):
        if required not in curves:
            raise ConfigError(f"{path}: missing curve '{required}'")
    return curves
