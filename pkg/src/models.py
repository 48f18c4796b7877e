"""
Predictive models
LSTM regressor (LSTM layers -> 64-unit tanh FC -> linear output), DNN baseline,
transfer surgery and the versioned checkpoint container
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from .errors import (
    ArgumentError,
    CheckpointShapeError,
    CorruptCheckpointError,
    MissingInputError,
    UnsupportedCheckpointVersionError,
)
from .lstm import BpttCache, LstmParams, sequence_forward, bptt_backward
from .nncore import LinearCache, ParamSet, add_linear, linear_backward, linear_forward, tanh_act
from .sncurve_data import ScalerState

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
CHECKPOINT_MAGIC = b"SNFORECAST-CHECKPOINT\n"


class TrainingMetadata(BaseModel):
    seed: Optional[int] = None
    epochs_run: int = 0
    final_loss: Optional[float] = None


# ---------------------------------------------------------------- LSTM model

@dataclass
class RegressorCache:
    layer_caches: List[BpttCache]
    fc: LinearCache
    fc_act: np.ndarray
    out: LinearCache
    steps: int
    batch: int


class LstmRegressor:
    """
    Maps a window of scaled stresses to the next scaled stress.

    With step_scale unset the head output is the prediction. With step_scale
    set the head predicts the next step in units of step_scale and the model
    returns window[-1] + step_scale * head output.
    """

    kind = "lstm_regressor"

    def __init__(self, params: ParamSet, layers: List[LstmParams], window_len: int, fc_units: int,
                 scaler: Optional[ScalerState] = None, metadata: Optional[TrainingMetadata] = None,
                 step_scale: Optional[float] = None):
        if window_len < 1:
            raise ArgumentError(f"window_len must be >= 1, got {window_len}")
        if step_scale is not None and not step_scale > 0.0:
            raise ArgumentError(f"step_scale must be positive, got {step_scale}")
        self.params = params
        self.layers = layers
        self.window_len = window_len
        self.fc_units = fc_units
        self.scaler = scaler
        self.step_scale = step_scale
        self.metadata = metadata or TrainingMetadata()

    @property
    def hidden_size(self) -> int:
        return self.layers[-1].hidden_size

    @property
    def architecture(self) -> Dict[str, int]:
        return {
            "input_size": self.layers[0].input_size,
            "hidden_size": self.hidden_size,
            "num_layers": len(self.layers),
            "fc_units": self.fc_units,
            "window_len": self.window_len,
        }

    def lstm_names(self) -> List[str]:
        return [name for layer in self.layers for name in layer.names()]

    def head_names(self) -> List[str]:
        return [f"head.{layer}.{kind}" for layer in ("fc", "out") for kind in ("W", "b")]

    def lstm_frozen(self) -> bool:
        return all(self.params[name].frozen for name in self.lstm_names())

    def forward_batch(self, windows: np.ndarray):
        """windows: (batch, window_len) scaled stresses -> predictions (batch,)"""
        windows = np.atleast_2d(np.asarray(windows, dtype=np.float64))
        if windows.shape[1] != self.window_len:
            raise ArgumentError(f"window length {windows.shape[1]} != model window_len {self.window_len}")
        sequence = windows.T[:, :, None]
        caches = []
        for layer in self.layers:
            sequence, _, cache = sequence_forward(layer, sequence)
            caches.append(cache)
        pre, fc_cache = linear_forward(self.params, "head.fc", sequence[-1])
        act = tanh_act(pre)
        out, out_cache = linear_forward(self.params, "head.out", act)
        cache = RegressorCache(caches, fc_cache, act, out_cache, windows.shape[1], windows.shape[0])
        if self.step_scale is None:
            return out[:, 0], cache
        return windows[:, -1] + self.step_scale * out[:, 0], cache

    def backward_batch(self, cache: RegressorCache, grad: np.ndarray) -> None:
        if self.step_scale is not None:
            grad = self.step_scale * np.asarray(grad)
        d_act = linear_backward(self.params, cache.out, np.reshape(grad, (-1, 1)))
        d_h = linear_backward(self.params, cache.fc, d_act * (1.0 - cache.fc_act ** 2))
        if self.lstm_frozen():
            return
        output_grads = np.zeros((cache.steps, cache.batch, self.hidden_size))
        output_grads[-1] = d_h
        for layer, layer_cache in zip(reversed(self.layers), reversed(cache.layer_caches)):
            output_grads = bptt_backward(layer, layer_cache, output_grads).dx

    @staticmethod
    def expected_parameter_count(hidden_size: int, fc_units: int, num_layers: int = 1, input_size: int = 1) -> int:
        lstm = LstmParams.parameter_count(input_size, hidden_size)
        lstm += (num_layers - 1) * LstmParams.parameter_count(hidden_size, hidden_size)
        head = fc_units * hidden_size + fc_units + fc_units + 1
        return lstm + head


def _add_head(params: ParamSet, hidden_size: int, fc_units: int, rng: np.random.Generator) -> None:
    add_linear(params, "head.fc", hidden_size, fc_units, rng)
    add_linear(params, "head.out", fc_units, 1, rng)


def build_lstm_regressor(rng: np.random.Generator, hidden_size: int = 64, fc_units: int = 64,
                         window_len: int = 50, num_layers: int = 1, input_size: int = 1) -> LstmRegressor:
    """Seeded LSTM regressor; defaults give the 64-unit LSTM, 64-unit FC head, window 50"""
    for name, value in (("hidden_size", hidden_size), ("fc_units", fc_units),
                        ("window_len", window_len), ("num_layers", num_layers)):
        if value < 1:
            raise ArgumentError(f"{name} must be >= 1, got {value}")
    params = ParamSet()
    layers = []
    for k in range(num_layers):
        layer_input = input_size if k == 0 else hidden_size
        layers.append(LstmParams.create(params, f"lstm{k}", layer_input, hidden_size, rng))
    _add_head(params, hidden_size, fc_units, rng)
    return LstmRegressor(params, layers, window_len, fc_units)


def regressor_forward(model: LstmRegressor, window) -> float:
    """Next scaled stress from one window, starting from the zero state"""
    window = np.asarray(window, dtype=np.float64).reshape(-1)
    if window.size != model.window_len:
        raise ArgumentError(f"window length {window.size} != model window_len {model.window_len}")
    pred, _ = model.forward_batch(window[None, :])
    return float(pred[0])


def transfer_surgery(source: LstmRegressor, rng: np.random.Generator) -> LstmRegressor:
    """
    Copy the source LSTM layers into a new model and freeze them; the FC head
    is freshly initialised from rng and stays trainable. The scaler and
    step_scale are left unset until fitted on the target dataset.
    """
    params = ParamSet()
    layers = []
    for layer in source.layers:
        for name in layer.names():
            params.add(name, source.params.value(name), frozen=True)
        layers.append(LstmParams(params, layer.prefix, layer.input_size, layer.hidden_size))
    _add_head(params, source.hidden_size, source.fc_units, rng)
    logger.info(f"🔀 Transferred {len(layers)} LSTM layer(s), {len(source.lstm_names())} tensors frozen")
    return LstmRegressor(params, layers, source.window_len, source.fc_units)


# ----------------------------------------------------------------- DNN model

@dataclass
class DnnCache:
    linear: List[LinearCache]
    activations: List[np.ndarray]


class DnnBaseline:
    """Pointwise regression from scaled log10(cycles) to scaled stress"""

    kind = "dnn"

    def __init__(self, params: ParamSet, hidden_layers: int, hidden_units: int,
                 scaler: Optional[ScalerState] = None, cycle_scaler: Optional[ScalerState] = None,
                 metadata: Optional[TrainingMetadata] = None):
        self.params = params
        self.hidden_layers = hidden_layers
        self.hidden_units = hidden_units
        self.scaler = scaler
        self.cycle_scaler = cycle_scaler
        self.metadata = metadata or TrainingMetadata()

    @property
    def architecture(self) -> Dict[str, int]:
        return {"hidden_layers": self.hidden_layers, "hidden_units": self.hidden_units}

    def layer_names(self) -> List[str]:
        return [f"dnn.hidden{k}" for k in range(self.hidden_layers)] + ["dnn.out"]

    def forward_batch(self, x: np.ndarray):
        """x: (batch,) scaled log10 cycles -> predictions (batch,)"""
        act = np.reshape(np.asarray(x, dtype=np.float64), (-1, 1))
        caches, activations = [], []
        for name in self.layer_names()[:-1]:
            pre, cache = linear_forward(self.params, name, act)
            act = tanh_act(pre)
            caches.append(cache)
            activations.append(act)
        out, cache = linear_forward(self.params, "dnn.out", act)
        caches.append(cache)
        return out[:, 0], DnnCache(caches, activations)

    def backward_batch(self, cache: DnnCache, grad: np.ndarray) -> None:
        upstream = linear_backward(self.params, cache.linear[-1], np.reshape(grad, (-1, 1)))
        for lin, act in zip(reversed(cache.linear[:-1]), reversed(cache.activations)):
            upstream = linear_backward(self.params, lin, upstream * (1.0 - act ** 2))

    @staticmethod
    def expected_parameter_count(hidden_layers: int, hidden_units: int) -> int:
        first = hidden_units + hidden_units
        middle = (hidden_layers - 1) * (hidden_units * hidden_units + hidden_units)
        return first + middle + hidden_units + 1


def build_dnn(rng: np.random.Generator, hidden_layers: int = 4, hidden_units: int = 32) -> DnnBaseline:
    if hidden_layers < 1 or hidden_units < 1:
        raise ArgumentError(f"DNN sizes must be positive (layers={hidden_layers}, units={hidden_units})")
    params = ParamSet()
    width = 1
    for k in range(hidden_layers):
        add_linear(params, f"dnn.hidden{k}", width, hidden_units, rng)
        width = hidden_units
    add_linear(params, "dnn.out", width, 1, rng)
    return DnnBaseline(params, hidden_layers, hidden_units)


Model = Union[LstmRegressor, DnnBaseline]


# ---------------------------------------------------------------- checkpoints

class TensorEntry(BaseModel):
    name: str
    shape: List[int]
    offset: int
    frozen: bool


class CheckpointHeader(BaseModel):
    format_version: int
    model_kind: Literal["lstm_regressor", "dnn"]
    architecture: Dict[str, int]
    scaler: Optional[ScalerState] = None
    cycle_scaler: Optional[ScalerState] = None
    step_scale: Optional[float] = None
    metadata: TrainingMetadata
    tensors: List[TensorEntry]


def save_checkpoint(model: Model, path) -> None:
    path = Path(path)
    entries, chunks, offset = [], [], 0
    for name, param in model.params.items():
        data = np.ascontiguousarray(param.value, dtype="<f8").tobytes()
        entries.append(TensorEntry(name=name, shape=list(param.value.shape), offset=offset, frozen=param.frozen))
        chunks.append(data)
        offset += len(data)
    header = CheckpointHeader(
        format_version=FORMAT_VERSION,
        model_kind=model.kind,
        architecture=model.architecture,
        scaler=model.scaler,
        cycle_scaler=getattr(model, "cycle_scaler", None),
        step_scale=getattr(model, "step_scale", None),
        metadata=model.metadata,
        tensors=entries,
    )
    header_bytes = header.model_dump_json(indent=2).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(f"header-bytes: {len(header_bytes)}\n".encode("ascii"))
        f.write(header_bytes)
        for chunk in chunks:
            f.write(chunk)
    logger.debug(f"Saved {model.kind} checkpoint ({offset} payload bytes) to {path}")


def _read_header(data: bytes, path) -> tuple:
    if not data.startswith(CHECKPOINT_MAGIC):
        raise CorruptCheckpointError(f"{path}: not a checkpoint file")
    rest = data[len(CHECKPOINT_MAGIC):]
    line_end = rest.find(b"\n")
    prefix = b"header-bytes: "
    if line_end < 0 or not rest.startswith(prefix):
        raise CorruptCheckpointError(f"{path}: missing header length")
    try:
        length = int(rest[len(prefix):line_end])
    except ValueError:
        raise CorruptCheckpointError(f"{path}: bad header length") from None
    start = line_end + 1
    header_bytes = rest[start:start + length]
    if len(header_bytes) != length:
        raise CorruptCheckpointError(f"{path}: header truncated")
    try:
        raw = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptCheckpointError(f"{path}: unreadable header: {e}") from e
    version = raw.get("format_version") if isinstance(raw, dict) else None
    if not isinstance(version, int) or version < 1:
        raise CorruptCheckpointError(f"{path}: missing format_version")
    if version > FORMAT_VERSION:
        raise UnsupportedCheckpointVersionError(version, FORMAT_VERSION)
    try:
        header = CheckpointHeader.model_validate(raw)
    except ValidationError as e:
        raise CorruptCheckpointError(f"{path}: invalid header: {e}") from e
    return header, rest[start + length:]


def _skeleton(header: CheckpointHeader) -> Model:
    arch = header.architecture
    rng = np.random.default_rng(0)
    try:
        if header.model_kind == "lstm_regressor":
            model = build_lstm_regressor(
                rng, hidden_size=arch["hidden_size"], fc_units=arch["fc_units"],
                window_len=arch["window_len"], num_layers=arch["num_layers"],
                input_size=arch["input_size"],
            )
        else:
            model = build_dnn(rng, hidden_layers=arch["hidden_layers"], hidden_units=arch["hidden_units"])
    except (KeyError, ArgumentError) as e:
        raise CheckpointShapeError(f"invalid architecture {arch}: {e}") from e
    return model


def load_checkpoint(path) -> Model:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(path, "checkpoint")
    header, payload = _read_header(path.read_bytes(), path)

    expected = sum(int(np.prod(t.shape, dtype=np.int64)) * 8 for t in header.tensors)
    if len(payload) != expected:
        raise CorruptCheckpointError(f"{path}: payload has {len(payload)} bytes, expected {expected}")

    model = _skeleton(header)
    names = [t.name for t in header.tensors]
    if sorted(names) != sorted(model.params):
        raise CheckpointShapeError(f"{path}: tensor directory does not match a {header.model_kind} architecture")
    for entry in header.tensors:
        param = model.params[entry.name]
        if tuple(entry.shape) != param.value.shape:
            raise CheckpointShapeError(
                f"{path}: tensor '{entry.name}' has shape {tuple(entry.shape)}, architecture needs {param.value.shape}"
            )
        count = int(np.prod(entry.shape, dtype=np.int64))
        if entry.offset < 0 or entry.offset + count * 8 > len(payload):
            raise CorruptCheckpointError(f"{path}: tensor '{entry.name}' lies outside the payload")
        values = np.frombuffer(payload, dtype="<f8", count=count, offset=entry.offset)
        param.value[...] = values.reshape(entry.shape)
        param.frozen = entry.frozen

    model.scaler = header.scaler
    model.metadata = header.metadata
    if isinstance(model, DnnBaseline):
        model.cycle_scaler = header.cycle_scaler
    elif header.step_scale is not None:
        if not header.step_scale > 0.0:
            raise CorruptCheckpointError(f"{path}: step_scale must be positive, got {header.step_scale}")
        model.step_scale = header.step_scale
    return model
