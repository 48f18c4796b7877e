"""
Command-line interface

    python app.py <subcommand> [--config PATH] [--out DIR] [--seed N] [--verbose]

Exit codes: 0 success, 2 usage/input error, 3 runtime/numeric error.
"""
import argparse
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .artifacts import ArtifactStore
from .errors import InputError, MissingInputError, ModelDataMismatchError, SnForecastError
from .models import DnnBaseline, LstmRegressor
from .pipeline import (
    BASELINE_RUN,
    DNN_RUNS,
    RUN_DATASETS,
    RUN_NAMES,
    SOURCE_RUN,
    TRANSFER_RUN,
    RunReport,
    assemble_report,
    evaluate_model,
    fit_cycle_scaler,
    fit_step_scale,
    forecast_series,
    run_experiment,
    train_baseline,
    train_dnn,
    train_source,
    train_transfer,
)
from .plotting import render_figures
from .settings import DEFAULT_CONFIG_PATH, TrainConfig, default_out_dir, load_config, load_curve_params, stream_seed
from .sncurve_data import SnSeries, fit_scaler, scale, split_series, synthesize_series

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3


class CliConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    command: str
    config_path: Path
    out_dir: Path
    seed: Optional[int] = Field(None, ge=0, lt=2**64)
    verbose: bool = False
    run: Optional[str] = None
    horizon: Optional[int] = Field(None, ge=0)


# ------------------------------------------------------------------ helpers

def _dataset(store: ArtifactStore, config: TrainConfig, label: str) -> SnSeries:
    """Stored dataset re-split with the configured training count"""
    return split_series(store.read_dataset(label), config.train_count(label))


def _check_model(model, config: TrainConfig, run: str, series: SnSeries) -> None:
    """The checkpoint must have been fitted on this dataset's training region"""
    if isinstance(model, LstmRegressor) and model.window_len != config.lstm.window_len:
        raise ModelDataMismatchError(
            f"{run}: checkpoint window_len {model.window_len} != configured {config.lstm.window_len}"
        )
    if model.scaler is None:
        raise ModelDataMismatchError(f"{run}: checkpoint has no fitted scaler")
    expected = fit_scaler(series)
    if model.scaler != expected:
        raise ModelDataMismatchError(
            f"{run}: checkpoint scaler [{model.scaler.stress_min}, {model.scaler.stress_max}] does not match "
            f"the '{series.label}' training region [{expected.stress_min}, {expected.stress_max}] "
            f"({series.train_count} points)"
        )
    if isinstance(model, LstmRegressor) and model.step_scale is not None:
        step_scale = fit_step_scale(scale(expected, series.train_stress))
        if model.step_scale != step_scale:
            raise ModelDataMismatchError(
                f"{run}: checkpoint step_scale {model.step_scale} != {step_scale} on '{series.label}'"
            )
    if isinstance(model, DnnBaseline) and model.cycle_scaler != fit_cycle_scaler(series):
        raise ModelDataMismatchError(
            f"{run}: checkpoint cycle scaler does not match the '{series.label}' training region"
        )


def _save_training(store: ArtifactStore, run: str, model, history) -> None:
    store.write_checkpoint(run, model)
    store.write_losses(run, history)
    logger.info(f"💾 Saved {store.checkpoint_path(run)} and {store.loss_path(run)}")


def _selected_runs(store: ArtifactStore, cli: CliConfig) -> List[str]:
    if cli.run is not None:
        return [cli.run]
    runs = [run for run in RUN_NAMES if store.checkpoint_path(run).exists()]
    if not runs:
        raise MissingInputError(store.out_dir / "checkpoints", "trained checkpoints")
    return runs


# ---------------------------------------------------------------- commands

def cmd_generate(config: TrainConfig, store: ArtifactStore, cli: CliConfig) -> int:
    """Synthesize the axial and torsional datasets on the log-spaced grid"""
    curves = load_curve_params(config.experiment.curves, n_points=config.experiment.n_points)
    for label in ("axial", "torsional"):
        params = curves[label]
        series = synthesize_series(
            params, label, config.experiment.noise_std, stream_seed(config.seed, f"noise_{label}"),
        )
        train_count = config.train_count(label)
        if train_count > len(series):
            logger.warning(f"⚠️  {label}: train_count {train_count} exceeds {len(series)} points, clamped")
            train_count = len(series)
        store.write_dataset(split_series(series, train_count), params)
    return EXIT_OK


def cmd_train_source(config: TrainConfig, store: ArtifactStore, cli: CliConfig) -> int:
    model, history = train_source(_dataset(store, config, "axial"), config)
    _save_training(store, SOURCE_RUN, model, history)
    return EXIT_OK


def cmd_transfer(config: TrainConfig, store: ArtifactStore, cli: CliConfig) -> int:
    source = store.read_checkpoint(SOURCE_RUN)
    if not isinstance(source, LstmRegressor):
        raise ModelDataMismatchError(f"{store.checkpoint_path(SOURCE_RUN)} is not an LSTM regressor")
    _check_model(source, config, SOURCE_RUN, _dataset(store, config, "axial"))
    model, history = train_transfer(source, _dataset(store, config, "torsional"), config)
    _save_training(store, TRANSFER_RUN, model, history)
    return EXIT_OK


def cmd_train_baseline(config: TrainConfig, store: ArtifactStore, cli: CliConfig) -> int:
    model, history = train_baseline(_dataset(store, config, "torsional"), config)
    _save_training(store, BASELINE_RUN, model, history)
    return EXIT_OK


def cmd_train_dnn(config: TrainConfig, store: ArtifactStore, cli: CliConfig) -> int:
    for label in ("axial", "torsional"):
        model, history = train_dnn(_dataset(store, config, label), config)
        _save_training(store, DNN_RUNS[label], model, history)
    return EXIT_OK


def cmd_forecast(config: TrainConfig, store: ArtifactStore, cli: CliConfig) -> int:
    for run in _selected_runs(store, cli):
        model = store.read_checkpoint(run)
        series = _dataset(store, config, RUN_DATASETS[run])
        _check_model(model, config, run, series)
        forecast = forecast_series(model, series, run, cli.horizon)
        path = store.write_forecast(forecast)
        rmse = "n/a" if forecast.rmse is None else f"{forecast.rmse:.3f} MPa"
        logger.info(f"🔮 {run}: {forecast.predicted.size} predictions -> {path} (RMSE {rmse})")
    return EXIT_OK


def cmd_evaluate(config: TrainConfig, store: ArtifactStore, cli: CliConfig) -> int:
    runs = {}
    for run in _selected_runs(store, cli):
        model = store.read_checkpoint(run)
        series = _dataset(store, config, RUN_DATASETS[run])
        _check_model(model, config, run, series)
        summary, forecast = evaluate_model(model, series, run, cli.horizon)
        store.write_forecast(forecast)
        store.write_summary(summary)
        runs[run] = RunReport(run=run, dataset=series.label, summary=summary)
        test = "n/a" if summary.test_rmse_mpa is None else (
            f"{summary.test_rmse_mpa:.3f} MPa ({summary.test_rmse_scaled:.4f} scaled)"
        )
        logger.info(
            f"📊 {run}: train RMSE {summary.train_rmse_mpa:.3f} MPa "
            f"({summary.train_rmse_scaled:.4f} scaled), test RMSE {test}"
        )
    if cli.run is None and cli.horizon is None:
        store.write_report(assemble_report(config.seed, runs, _dataset(store, config, "torsional")))
    return EXIT_OK


def cmd_plot(config: TrainConfig, store: ArtifactStore, cli: CliConfig) -> int:
    render_figures(store)
    return EXIT_OK


def cmd_run_all(config: TrainConfig, store: ArtifactStore, cli: CliConfig) -> int:
    """generate, every training stage, evaluation, report and figures"""
    cmd_generate(config, store, cli)
    axial = store.read_dataset("axial")
    torsional = store.read_dataset("torsional")
    outcome = run_experiment(config, axial, torsional, store=store)
    cmd_plot(config, store, cli)
    if outcome.report.any_failed:
        logger.error("❌ One or more runs failed; see report.json")
        return EXIT_RUNTIME
    return EXIT_OK


COMMANDS: Dict[str, Callable[[TrainConfig, ArtifactStore, CliConfig], int]] = {
    "generate": cmd_generate,
    "train-source": cmd_train_source,
    "transfer": cmd_transfer,
    "train-baseline": cmd_train_baseline,
    "train-dnn": cmd_train_dnn,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "plot": cmd_plot,
    "run-all": cmd_run_all,
}

HELP = {
    "generate": "synthesize axial/torsional S-N datasets",
    "train-source": "train the source LSTM on axial data",
    "transfer": "transfer the source LSTM and train the TR-LSTM head on torsional data",
    "train-baseline": "train a non-transferred LSTM on torsional data",
    "train-dnn": "train DNN baselines on both datasets",
    "forecast": "roll trained models over the test region",
    "evaluate": "train/test RMSE summaries and experiment report",
    "plot": "render loss and S-N overlay SVG figures",
    "run-all": "run the complete experiment",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=str(DEFAULT_CONFIG_PATH), help="experiment configuration (YAML)")
    common.add_argument("--out", default=None, help="output directory (default: $SN_FORECAST_OUT or ./outputs)")
    common.add_argument("--seed", type=int, default=None, help="override experiment.seed")
    common.add_argument("--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="sn-forecast",
        description="Transfer-learning LSTM forecasting of high-cycle S-N fatigue curves",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=HELP[name])
        if name in ("forecast", "evaluate"):
            p.add_argument("--run", choices=RUN_NAMES, default=None, help="single run (default: all trained)")
            p.add_argument("--horizon", type=int, default=None, help="number of test points to forecast")
    return parser


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        force=True,
    )


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK

    configure_logging(args.verbose)
    try:
        cli = CliConfig(
            command=args.command,
            config_path=Path(args.config),
            out_dir=Path(args.out or default_out_dir()),
            seed=args.seed,
            verbose=args.verbose,
            run=getattr(args, "run", None),
            horizon=getattr(args, "horizon", None),
        )
        config = load_config(cli.config_path).with_seed(cli.seed)
        store = ArtifactStore(cli.out_dir)
        return COMMANDS[cli.command](config, store, cli)
    except ValidationError as e:
        logger.error(f"❌ Invalid arguments: {e}")
        return EXIT_INPUT
    except InputError as e:
        logger.error(f"❌ {e}")
        return EXIT_INPUT
    except SnForecastError as e:
        logger.error(f"❌ {e}")
        return EXIT_RUNTIME
