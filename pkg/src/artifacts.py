"""
Artifact store
Owns the output-directory layout: datasets, checkpoints, loss/forecast CSVs,
evaluation summaries, figures and the experiment report
"""
import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from .errors import MissingInputError, PlotInputError, SeriesParseError
from .models import Model, load_checkpoint, save_checkpoint
from .sncurve_data import CSV_FLOAT_FORMAT, SnCurveParams, SnSeries, read_series_csv, write_series_csv

logger = logging.getLogger(__name__)

LOSS_HEADER = ["epoch", "loss"]
FORECAST_HEADER = ["cycles", "stress_true_mpa", "stress_pred_mpa"]


class SplitMetadata(BaseModel):
    label: str
    n_points: int
    train_count: int
    params: Optional[SnCurveParams] = None


def _write_frame(frame: pd.DataFrame, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")


def _write_json(model: BaseModel, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(model.model_dump_json(indent=2))
        f.write("\n")


class ArtifactStore:
    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    # paths ---------------------------------------------------------------
    def dataset_path(self, label: str) -> Path:
        return self.out_dir / "data" / f"{label}.csv"

    def split_path(self, label: str) -> Path:
        return self.out_dir / "data" / f"{label}.split.json"

    def checkpoint_path(self, run: str) -> Path:
        return self.out_dir / "checkpoints" / f"{run}.ckpt"

    def loss_path(self, run: str) -> Path:
        return self.out_dir / "losses" / f"{run}.csv"

    def forecast_path(self, run: str) -> Path:
        return self.out_dir / "forecasts" / f"{run}.csv"

    def summary_path(self, run: str) -> Path:
        return self.out_dir / "summaries" / f"{run}.json"

    def figure_path(self, name: str) -> Path:
        return self.out_dir / "figures" / f"{name}.svg"

    @property
    def report_path(self) -> Path:
        return self.out_dir / "report.json"

    # datasets ------------------------------------------------------------
    def write_dataset(self, series: SnSeries, params: Optional[SnCurveParams] = None) -> Path:
        path = self.dataset_path(series.label)
        write_series_csv(series, path)
        meta = SplitMetadata(label=series.label, n_points=len(series), train_count=series.train_count, params=params)
        _write_json(meta, self.split_path(series.label))
        logger.info(f"💾 Wrote {len(series)} points to {path} (train_count={series.train_count})")
        return path

    def read_dataset(self, label: str) -> SnSeries:
        split_path = self.split_path(label)
        if not split_path.exists():
            raise MissingInputError(split_path, "split metadata")
        try:
            meta = SplitMetadata.model_validate_json(split_path.read_text(encoding="utf-8"))
        except ValidationError as e:
            raise SeriesParseError(f"{split_path}: invalid split metadata: {e}") from e
        return read_series_csv(self.dataset_path(label), label=label, train_count=meta.train_count)

    # models --------------------------------------------------------------
    def write_checkpoint(self, run: str, model: Model) -> Path:
        path = self.checkpoint_path(run)
        save_checkpoint(model, path)
        return path

    def read_checkpoint(self, run: str) -> Model:
        return load_checkpoint(self.checkpoint_path(run))

    # CSV results ---------------------------------------------------------
    def write_losses(self, run: str, history) -> Path:
        history = np.asarray(history, dtype=np.float64)
        frame = pd.DataFrame({"epoch": np.arange(1, history.size + 1), "loss": history})
        path = self.loss_path(run)
        _write_frame(frame, path)
        return path

    def read_losses(self, run: str) -> pd.DataFrame:
        return self._read_result(self.loss_path(run), LOSS_HEADER)

    def write_forecast(self, forecast) -> Path:
        frame = pd.DataFrame({
            "cycles": forecast.cycles,
            "stress_true_mpa": forecast.truth,
            "stress_pred_mpa": forecast.predicted,
        })
        path = self.forecast_path(forecast.run)
        _write_frame(frame, path)
        return path

    def read_forecast(self, run: str) -> pd.DataFrame:
        return self._read_result(self.forecast_path(run), FORECAST_HEADER)

    @staticmethod
    def _read_result(path: Path, header) -> pd.DataFrame:
        if not path.exists():
            raise PlotInputError(f"missing result CSV: {path}")
        try:
            frame = pd.read_csv(path)
        except pd.errors.EmptyDataError:
            raise PlotInputError(f"{path} is empty") from None
        if list(frame.columns) != header:
            raise PlotInputError(f"{path}: expected header {','.join(header)}")
        if frame.empty:
            raise PlotInputError(f"{path} has no data rows")
        return frame

    # summaries -----------------------------------------------------------
    def write_summary(self, summary) -> Path:
        path = self.summary_path(summary.run)
        _write_json(summary, path)
        return path

    def write_report(self, report) -> Path:
        _write_json(report, self.report_path)
        logger.info(f"📋 Report written to {self.report_path}")
        return self.report_path
