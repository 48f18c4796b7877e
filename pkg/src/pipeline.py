"""
Training / forecasting pipeline

Windowing, full-batch training, autoregressive rollout, RMSE evaluation and
the per-model stages of the experiment (source LSTM on axial data, TR-LSTM
and baseline LSTM on torsional data, DNN baselines on both).
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel

from .errors import (
    ArgumentError,
    ModelDataMismatchError,
    NumericError,
    ScalerError,
    TrainingDivergedError,
)
from .models import (
    DnnBaseline,
    LstmRegressor,
    Model,
    TrainingMetadata,
    build_dnn,
    build_lstm_regressor,
    regressor_forward,
    transfer_surgery,
)
from .nncore import AdamState, adam_step, cosine_schedule, mse_loss
from .settings import TrainConfig, make_rng
from .sncurve_data import ScalerState, SnSeries, fit_scaler, scale, unscale

logger = logging.getLogger(__name__)

SOURCE_RUN = "source_lstm_axial"
TRANSFER_RUN = "tr_lstm_torsional"
BASELINE_RUN = "baseline_lstm_torsional"
DNN_RUNS = {"axial": "dnn_axial", "torsional": "dnn_torsional"}
RUN_NAMES = (SOURCE_RUN, TRANSFER_RUN, BASELINE_RUN, DNN_RUNS["axial"], DNN_RUNS["torsional"])
RUN_DATASETS = {
    SOURCE_RUN: "axial",
    TRANSFER_RUN: "torsional",
    BASELINE_RUN: "torsional",
    DNN_RUNS["axial"]: "axial",
    DNN_RUNS["torsional"]: "torsional",
}


@dataclass(frozen=True)
class WindowSet:
    """Stride-1 windows over a scaled series; inputs (count, window_len), targets (count,)"""

    inputs: np.ndarray
    targets: np.ndarray

    def __len__(self):
        return int(self.targets.size)


@dataclass(frozen=True)
class PointSet:
    """Pointwise (scaled log10 cycles, scaled stress) pairs for the DNN"""

    inputs: np.ndarray
    targets: np.ndarray

    def __len__(self):
        return int(self.targets.size)


@dataclass(frozen=True)
class ForecastResult:
    run: str
    cycles: np.ndarray
    predicted: np.ndarray
    truth: Optional[np.ndarray]
    rmse: Optional[float]
    loss_history: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def residuals(self) -> Optional[np.ndarray]:
        return None if self.truth is None else self.predicted - self.truth


class EvaluationSummary(BaseModel):
    run: str
    dataset: str
    model_kind: str
    train_points: int
    test_points: int
    train_rmse_mpa: Optional[float] = None
    train_rmse_scaled: Optional[float] = None
    test_rmse_mpa: Optional[float] = None
    test_rmse_scaled: Optional[float] = None
    final_loss: Optional[float] = None
    epochs_run: int = 0


# ------------------------------------------------------------------ windowing

def make_windows(train_stress: np.ndarray, window_len: int) -> WindowSet:
    """Window i covers [i, i + window_len), its target is index i + window_len"""
    series = np.asarray(train_stress, dtype=np.float64).reshape(-1)
    if window_len < 1:
        raise ArgumentError(f"window_len must be >= 1, got {window_len}")
    if series.size <= window_len:
        raise ArgumentError(f"series of length {series.size} is too short for window {window_len}")
    inputs = np.lib.stride_tricks.sliding_window_view(series, window_len)[:-1].copy()
    return WindowSet(inputs=inputs, targets=series[window_len:].copy())


def make_points(series: SnSeries, scaler: ScalerState, cycle_scaler: ScalerState) -> PointSet:
    return PointSet(
        inputs=scale(cycle_scaler, np.log10(series.train_cycles)),
        targets=scale(scaler, series.train_stress),
    )


def fit_cycle_scaler(series: SnSeries) -> ScalerState:
    log_n = np.log10(series.train_cycles)
    return ScalerState(stress_min=float(log_n.min()), stress_max=float(log_n.max()))


# ------------------------------------------------------------------- training

def train_model(model: Model, batch, epochs: int, optimizer: Optional[AdamState] = None,
                clip_norm: Optional[float] = 5.0, seed: Optional[int] = None,
                schedule: Optional[Callable[[int], float]] = None) -> Tuple[Model, np.ndarray]:
    """
    Full-batch training: one forward/backward pass over every example and one
    Adam step per epoch. schedule(epoch), when given, sets the Adam learning
    rate before each step. Returns the model (updated in place) and the
    per-epoch MSE recorded before each step.

    Non-finite loss, activations or gradients raise TrainingDivergedError
    naming the epoch.
    """
    if len(batch) == 0:
        raise ArgumentError("training set is empty")
    if epochs < 1:
        raise ArgumentError(f"epochs must be >= 1, got {epochs}")
    state = optimizer if optimizer is not None else AdamState()
    if not state.m:
        state.attach(model.params)

    history = np.zeros(epochs)
    model.params.zero_grad()
    for epoch in range(epochs):
        try:
            pred, cache = model.forward_batch(batch.inputs)
            loss, grad = mse_loss(pred, batch.targets)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, loss)
            model.backward_batch(cache, grad)
        except TrainingDivergedError:
            raise
        except NumericError as e:
            raise TrainingDivergedError(epoch, float("nan")) from e
        history[epoch] = loss
        if schedule is not None:
            state.learning_rate = schedule(epoch)
        if clip_norm is not None:
            model.params.clip_grad_norm(clip_norm)
        adam_step(model.params, state)
        if (epoch + 1) % 50 == 0:
            logger.debug(f"   epoch {epoch + 1}/{epochs}  loss={loss:.6e}")

    model.metadata = TrainingMetadata(seed=seed, epochs_run=epochs, final_loss=float(history[-1]))
    return model, history


def _adam(config: TrainConfig, learning_rate: Optional[float] = None) -> AdamState:
    opt = config.optimizer
    return AdamState(learning_rate=learning_rate or opt.learning_rate, beta1=opt.beta1,
                     beta2=opt.beta2, epsilon=opt.epsilon)


def _lstm_schedule(config: TrainConfig) -> Tuple[AdamState, Optional[Callable[[int], float]]]:
    lstm = config.lstm
    base = lstm.learning_rate or config.optimizer.learning_rate
    if lstm.lr_schedule == "constant":
        return _adam(config, base), None
    floor = min(lstm.min_learning_rate, base)
    return _adam(config, base), cosine_schedule(base, floor, lstm.epochs)


def fit_step_scale(scaled_train: np.ndarray) -> float:
    """Mean absolute one-step change of the scaled training region"""
    steps = np.abs(np.diff(np.asarray(scaled_train, dtype=np.float64).reshape(-1)))
    if steps.size == 0:
        raise ArgumentError("step scale needs at least two training points")
    value = float(np.mean(steps))
    if not value > 0.0:
        raise ScalerError("training region has no change between consecutive points")
    return value


def _check_split(series: SnSeries, window_len: int) -> None:
    if series.train_count <= window_len:
        raise ModelDataMismatchError(
            f"'{series.label}' has {series.train_count} training points, window needs more than {window_len}"
        )


def _fit_lstm(model: LstmRegressor, series: SnSeries, config: TrainConfig, run: str):
    _check_split(series, model.window_len)
    model.scaler = fit_scaler(series)
    scaled = scale(model.scaler, series.train_stress)
    model.step_scale = fit_step_scale(scaled) if config.lstm.residual_steps else None
    windows = make_windows(scaled, model.window_len)
    logger.info(f"🚀 Training {run}: {len(windows)} windows, {config.lstm.epochs} epochs")
    optimizer, schedule = _lstm_schedule(config)
    model, history = train_model(
        model, windows, config.lstm.epochs, optimizer, config.lstm.clip_norm, seed=config.seed,
        schedule=schedule,
    )
    logger.info(f"✅ {run} final loss {history[-1]:.3e}")
    return model, history


def _new_regressor(config: TrainConfig, run: str) -> LstmRegressor:
    lstm = config.lstm
    return build_lstm_regressor(
        make_rng(config.seed, run), hidden_size=lstm.lstm_hidden, fc_units=lstm.fc_units,
        window_len=lstm.window_len, num_layers=lstm.lstm_layers,
    )


def train_source(axial: SnSeries, config: TrainConfig):
    """Source LSTM on the axial training region"""
    return _fit_lstm(_new_regressor(config, SOURCE_RUN), axial, config, SOURCE_RUN)


def train_transfer(source: LstmRegressor, torsional: SnSeries, config: TrainConfig):
    """TR-LSTM: frozen source LSTM layers, new head trained on the torsional training region"""
    target = transfer_surgery(source, make_rng(config.seed, TRANSFER_RUN))
    return _fit_lstm(target, torsional, config, TRANSFER_RUN)


def train_baseline(torsional: SnSeries, config: TrainConfig):
    """Non-transferred LSTM trained from scratch on the torsional training region"""
    return _fit_lstm(_new_regressor(config, BASELINE_RUN), torsional, config, BASELINE_RUN)


def train_dnn(series: SnSeries, config: TrainConfig, run: Optional[str] = None):
    """DNN baseline on one dataset's training region"""
    run = run or DNN_RUNS[series.label]
    model = build_dnn(make_rng(config.seed, run), config.dnn.dnn_layers, config.dnn.dnn_units)
    model.scaler = fit_scaler(series)
    model.cycle_scaler = fit_cycle_scaler(series)
    points = make_points(series, model.scaler, model.cycle_scaler)
    logger.info(f"🚀 Training {run}: {len(points)} points, {config.dnn.epochs} epochs")
    model, history = train_model(model, points, config.dnn.epochs, _adam(config), None, seed=config.seed)
    logger.info(f"✅ {run} final loss {history[-1]:.3e}")
    return model, history


# ------------------------------------------------------------------- rollout

def autoregressive_forecast(model: LstmRegressor, train_tail, horizon: int,
                            on_window: Optional[Callable[[int, np.ndarray], None]] = None) -> np.ndarray:
    """
    Roll the regressor forward horizon steps. Step k (1-based) sees the last
    window_len values of tail ++ predictions[:k-1]. on_window(k, window) is
    called with each input window before it is used.
    """
    tail = np.asarray(train_tail, dtype=np.float64).reshape(-1)
    if tail.size != model.window_len:
        raise ArgumentError(f"tail length {tail.size} != model window_len {model.window_len}")
    if horizon < 0:
        raise ArgumentError(f"horizon must be >= 0, got {horizon}")
    buffer = np.concatenate([tail, np.zeros(horizon)])
    W = model.window_len
    for k in range(horizon):
        window = buffer[k:k + W].copy()
        if on_window is not None:
            on_window(k + 1, window)
        buffer[W + k] = regressor_forward(model, window)
    return buffer[W:].copy()


def rmse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if pred.size != truth.size:
        raise ArgumentError(f"rmse length mismatch ({pred.size} vs {truth.size})")
    if pred.size == 0:
        raise ArgumentError("rmse of empty vectors")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def _require_scaler(model: Model, run: str) -> ScalerState:
    if model.scaler is None:
        raise ModelDataMismatchError(f"{run}: model has no fitted scaler")
    return model.scaler


def forecast_series(model: Model, series: SnSeries, run: str, horizon: Optional[int] = None,
                    loss_history: Optional[np.ndarray] = None) -> ForecastResult:
    """Predict the test region (or its first horizon points) in MPa"""
    available = len(series) - series.train_count
    horizon = available if horizon is None else horizon
    if not 0 <= horizon <= available:
        raise ArgumentError(f"horizon {horizon} outside [0, {available}]")
    scaler = _require_scaler(model, run)
    start = series.train_count

    if isinstance(model, LstmRegressor):
        _check_split(series, model.window_len)
        scaled = scale(scaler, series.stress)
        tail = scaled[start - model.window_len:start]
        predicted = unscale(scaler, autoregressive_forecast(model, tail, horizon))
    else:
        predicted = dnn_predict(model, series.cycles[start:start + horizon])

    truth = series.stress[start:start + horizon]
    return ForecastResult(
        run=run,
        cycles=series.cycles[start:start + horizon].copy(),
        predicted=np.asarray(predicted, dtype=np.float64),
        truth=truth.copy(),
        rmse=rmse(predicted, truth) if horizon > 0 else None,
        loss_history=np.zeros(0) if loss_history is None else np.asarray(loss_history),
    )


def dnn_predict(model: DnnBaseline, cycles) -> np.ndarray:
    if model.cycle_scaler is None or model.scaler is None:
        raise ModelDataMismatchError("DNN model has no fitted scalers")
    cycles = np.asarray(cycles, dtype=np.float64).reshape(-1)
    if cycles.size == 0:
        return np.zeros(0)
    pred, _ = model.forward_batch(scale(model.cycle_scaler, np.log10(cycles)))
    return unscale(model.scaler, pred)


def evaluate_model(model: Model, series: SnSeries, run: str, horizon: Optional[int] = None):
    """
    Training-region RMSE (one-step-ahead for LSTMs, pointwise for the DNN) and
    test-region RMSE of the rollout, in MPa and in scaled units.
    """
    scaler = _require_scaler(model, run)
    if isinstance(model, LstmRegressor):
        _check_split(series, model.window_len)
        windows = make_windows(scale(scaler, series.train_stress), model.window_len)
        fitted, _ = model.forward_batch(windows.inputs)
        train_rmse = rmse(unscale(scaler, fitted), series.train_stress[model.window_len:])
    else:
        train_rmse = rmse(dnn_predict(model, series.train_cycles), series.train_stress)

    forecast = forecast_series(model, series, run, horizon)
    summary = EvaluationSummary(
        run=run,
        dataset=series.label,
        model_kind=model.kind,
        train_points=series.train_count,
        test_points=int(forecast.predicted.size),
        train_rmse_mpa=train_rmse,
        train_rmse_scaled=train_rmse / scaler.span,
        test_rmse_mpa=forecast.rmse,
        test_rmse_scaled=None if forecast.rmse is None else forecast.rmse / scaler.span,
        final_loss=model.metadata.final_loss,
        epochs_run=model.metadata.epochs_run,
    )
    return summary, forecast


# --------------------------------------------------------------------- report

class RunReport(BaseModel):
    run: str
    dataset: str
    failed: bool = False
    error: Optional[str] = None
    summary: Optional[EvaluationSummary] = None


class ExperimentReport(BaseModel):
    """Serialisable outcome of a full experiment"""

    seed: int
    runs: List[RunReport]
    tr_beats_baseline: Optional[bool] = None
    baseline_beats_dnn: Optional[bool] = None
    tr_within_5pct_of_range: Optional[bool] = None

    def run(self, name: str) -> RunReport:
        return next(r for r in self.runs if r.run == name)

    def test_rmse(self, name: str) -> Optional[float]:
        entry = self.run(name)
        return None if entry.failed or entry.summary is None else entry.summary.test_rmse_mpa

    @property
    def any_failed(self) -> bool:
        return any(r.failed for r in self.runs)


def assemble_report(seed: int, runs: Dict[str, RunReport], torsional: Optional[SnSeries] = None) -> ExperimentReport:
    """Order runs canonically and record the torsional RMSE comparisons"""
    report = ExperimentReport(seed=seed, runs=[runs[name] for name in RUN_NAMES if name in runs])
    names = [r.run for r in report.runs]
    tr = report.test_rmse(TRANSFER_RUN) if TRANSFER_RUN in names else None
    base = report.test_rmse(BASELINE_RUN) if BASELINE_RUN in names else None
    dnn = report.test_rmse(DNN_RUNS["torsional"]) if DNN_RUNS["torsional"] in names else None
    if tr is not None and base is not None:
        report.tr_beats_baseline = tr < base
    if base is not None and dnn is not None:
        report.baseline_beats_dnn = base < dnn
    if tr is not None and torsional is not None and torsional.train_count > 0:
        span = float(np.ptp(torsional.train_stress))
        report.tr_within_5pct_of_range = tr < 0.05 * span
    return report


@dataclass
class ExperimentOutcome:
    """In-memory results of run_experiment"""

    report: ExperimentReport
    forecasts: Dict[str, ForecastResult]
    models: Dict[str, Model]
    loss_histories: Dict[str, np.ndarray]


def run_experiment(config: TrainConfig, axial: SnSeries, torsional: SnSeries, store=None) -> ExperimentOutcome:
    """Full experiment; see ExperimentOrchestrator for the stage graph"""
    from .experiment_orchestrator import ExperimentOrchestrator

    return ExperimentOrchestrator(config, store=store).run(axial, torsional)
