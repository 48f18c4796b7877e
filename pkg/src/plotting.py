"""
SVG figures rendered from the result CSVs only: training-loss curves and
S-N overlays (log10 N axis, train/test boundary, every model's forecast)
"""
import logging
from typing import Dict, List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .artifacts import ArtifactStore  # noqa: E402
from .errors import PlotInputError  # noqa: E402
from .pipeline import BASELINE_RUN, DNN_RUNS, SOURCE_RUN, TRANSFER_RUN  # noqa: E402

logger = logging.getLogger(__name__)

# fixed SVG element ids, no timestamp
matplotlib.rcParams["svg.hashsalt"] = "sn-forecast"
matplotlib.rcParams["svg.fonttype"] = "none"

LOSS_RUNS = {
    "axial": [SOURCE_RUN],
    "torsional": [TRANSFER_RUN, BASELINE_RUN],
}
OVERLAY_RUNS = {
    "axial": [SOURCE_RUN, DNN_RUNS["axial"]],
    "torsional": [TRANSFER_RUN, BASELINE_RUN, DNN_RUNS["torsional"]],
}
RUN_LABELS = {
    SOURCE_RUN: "Source LSTM",
    TRANSFER_RUN: "TR-LSTM",
    BASELINE_RUN: "LSTM (no transfer)",
    DNN_RUNS["axial"]: "DNN",
    DNN_RUNS["torsional"]: "DNN",
}


def _collect(store: ArtifactStore, runs: List[str], reader, kind: str, dataset: str) -> Dict[str, pd.DataFrame]:
    frames = {}
    for run in runs:
        path = store.loss_path(run) if kind == "loss" else store.forecast_path(run)
        if not path.exists():
            logger.warning(f"⚠️  {path} not found, {run} left out of the {dataset} {kind} figure")
            continue
        frames[run] = reader(run)
    if not frames:
        raise PlotInputError(f"no {kind} CSVs available for the {dataset} figure")
    return frames


def _save(fig, path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_loss_curves(losses: Dict[str, pd.DataFrame], title: str, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for run, frame in losses.items():
        ax.plot(frame["epoch"], frame["loss"], label=RUN_LABELS.get(run, run))
    ax.set_yscale("log")
    ax.set_xlabel("Epoch")
    ax.set_ylabel("Training loss (MSE, scaled units)")
    ax.set_title(title)
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, path)


def plot_sn_overlay(cycles: np.ndarray, stress: np.ndarray, train_count: int,
                    forecasts: Dict[str, pd.DataFrame], title: str, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    log_n = np.log10(cycles)
    ax.plot(log_n, stress, color="black", linewidth=1.5, label="Actual")
    if 0 < train_count < len(cycles):
        ax.axvline(log_n[train_count - 1], color="grey", linestyle="--", linewidth=1, label="Train/test boundary")
    for run, frame in forecasts.items():
        ax.plot(np.log10(frame["cycles"]), frame["stress_pred_mpa"], linestyle="-.", label=RUN_LABELS.get(run, run))
    ax.set_xlabel("log10(N) [cycles]")
    ax.set_ylabel("Stress amplitude [MPa]")
    ax.set_title(title)
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, path)


def render_figures(store: ArtifactStore) -> List:
    """Two loss figures and two S-N overlays; every input is validated before anything is drawn"""
    jobs = []
    for dataset in ("axial", "torsional"):
        series = store.read_dataset(dataset)
        losses = _collect(store, LOSS_RUNS[dataset], store.read_losses, "loss", dataset)
        forecasts = _collect(store, OVERLAY_RUNS[dataset], store.read_forecast, "forecast", dataset)
        jobs.append((dataset, series, losses, forecasts))

    written = []
    for dataset, series, losses, forecasts in jobs:
        loss_path = store.figure_path(f"loss_{dataset}")
        plot_loss_curves(losses, f"LSTM training loss ({dataset} data)", loss_path)
        sn_path = store.figure_path(f"sn_{dataset}")
        plot_sn_overlay(series.cycles, series.stress, series.train_count, forecasts,
                        f"{dataset.capitalize()} S-N curve", sn_path)
        written.extend([loss_path, sn_path])
        logger.info(f"🖼️  Rendered {loss_path.name}, {sn_path.name}")
    return written
