"""
S-N curve datasets

Stress amplitude follows sigma = 10^(a*log10(N) + b) + d. This module
evaluates and fits that curve, samples it on a log-spaced cycle grid,
partitions the samples into training/test regions, min-max scales stresses,
and reads/writes the `cycles,stress_mpa` CSV format.
"""
import re
import logging
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import optimize

from .errors import (
    ArgumentError,
    DomainError,
    EmptySeriesError,
    FitError,
    MissingInputError,
    ScalerError,
    SeriesParseError,
)

logger = logging.getLogger(__name__)

CSV_HEADER = ["cycles", "stress_mpa"]
CSV_FLOAT_FORMAT = "%.17g"

ArrayLike = Union[float, np.ndarray]


class SnCurveParams(BaseModel):
    """Coefficients of one S-N curve plus the cycle grid it is sampled on"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    a: float
    b: float
    d: float
    n_min: float = Field(5e3, gt=0)
    n_max: float = Field(3e6, gt=0)
    n_points: int = Field(1000, ge=2)
    label: str = "curve"

    @model_validator(mode="after")
    def _check_bounds(self):
        if self.n_max <= self.n_min:
            raise ValueError(f"n_max ({self.n_max}) must exceed n_min ({self.n_min})")
        if self.a >= 0:
            logger.warning(
                f"⚠️  Curve '{self.label}' has a={self.a} >= 0: stress does not decrease with cycles"
            )
        return self


@dataclass(frozen=True)
class SnSeries:
    """Ordered (cycles, stress) samples; the first train_count points form the training region"""

    cycles: np.ndarray
    stress: np.ndarray
    label: str = ""
    train_count: int = 0

    def __post_init__(self):
        cycles = np.array(self.cycles, dtype=np.float64).reshape(-1)
        stress = np.array(self.stress, dtype=np.float64).reshape(-1)
        if cycles.shape != stress.shape:
            raise ArgumentError(
                f"cycles and stress lengths differ ({cycles.size} vs {stress.size})"
            )
        if not np.all(np.isfinite(cycles)) or not np.all(np.isfinite(stress)):
            raise ArgumentError("series contains non-finite values")
        if cycles.size > 1 and not np.all(np.diff(cycles) > 0):
            raise ArgumentError("cycles must be strictly increasing")
        if not 0 <= self.train_count <= cycles.size:
            raise ArgumentError(
                f"train_count {self.train_count} outside [0, {cycles.size}]"
            )
        cycles.flags.writeable = False
        stress.flags.writeable = False
        object.__setattr__(self, "cycles", cycles)
        object.__setattr__(self, "stress", stress)

    def __len__(self):
        return int(self.cycles.size)

    @property
    def train_cycles(self) -> np.ndarray:
        return self.cycles[: self.train_count]

    @property
    def train_stress(self) -> np.ndarray:
        return self.stress[: self.train_count]

    @property
    def test_cycles(self) -> np.ndarray:
        return self.cycles[self.train_count:]

    @property
    def test_stress(self) -> np.ndarray:
        return self.stress[self.train_count:]


class ScalerState(BaseModel):
    """Min-max scaler; also reused by the DNN baseline for log10 cycles"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    stress_min: float
    stress_max: float

    @model_validator(mode="after")
    def _check_range(self):
        if not self.stress_max > self.stress_min:
            raise ValueError("stress_max must exceed stress_min")
        return self

    @property
    def span(self) -> float:
        return self.stress_max - self.stress_min


class CurveFit(NamedTuple):
    params: SnCurveParams
    residual_norm: float


# ---------------------------------------------------------------------- curve

def _curve(log_n, a, b, d):
    return np.power(10.0, a * log_n + b) + d


def evaluate_sn_curve(params: SnCurveParams, n: ArrayLike) -> ArrayLike:
    """Stress amplitude (MPa) at n cycles"""
    n_arr = np.asarray(n, dtype=np.float64)
    if np.any(~(n_arr > 0)):
        raise DomainError(f"cycle count must be positive, got {n}")
    stress = _curve(np.log10(n_arr), params.a, params.b, params.d)
    if not np.all(np.isfinite(stress)):
        raise DomainError(f"curve evaluation overflowed at n={n}")
    return float(stress) if stress.ndim == 0 else stress


def log_spaced_grid(n_min: float, n_max: float, count: int) -> np.ndarray:
    """count cycle values equally spaced in log10, both endpoints included"""
    if count < 2:
        raise ArgumentError(f"grid needs at least 2 points, got {count}")
    if not (0 < n_min < n_max):
        raise ArgumentError(f"grid bounds must satisfy 0 < n_min < n_max, got ({n_min}, {n_max})")
    grid = np.logspace(np.log10(n_min), np.log10(n_max), count)
    grid[0] = n_min
    grid[-1] = n_max
    return grid


def synthesize_series(
    params: SnCurveParams, label: str, noise_std: float = 0.0, seed=0
) -> SnSeries:
    """
    Sample the curve on its grid, optionally adding Gaussian noise; seed is
    anything numpy.random.default_rng accepts
    """
    if noise_std < 0:
        raise ArgumentError(f"noise_std must be non-negative, got {noise_std}")
    cycles = log_spaced_grid(params.n_min, params.n_max, params.n_points)
    stress = evaluate_sn_curve(params, cycles)
    if noise_std > 0:
        rng = np.random.default_rng(seed)
        stress = stress + rng.normal(0.0, noise_std, size=stress.shape)
    return SnSeries(cycles=cycles, stress=stress, label=label)


def fit_sn_curve(series: SnSeries, d_grid_size: int = 256) -> CurveFit:
    """
    Least-squares fit of (a, b, d).

    d is grid-searched over [0, min(stress)); for each candidate (a, b) come
    from a straight-line fit in log space. The best candidate seeds a
    Levenberg-Marquardt refinement over all three coefficients.
    """
    if len(series) < 3:
        raise ArgumentError(f"fitting needs at least 3 points, got {len(series)}")

    log_n = np.log10(series.cycles)
    stress = series.stress
    s_min = float(stress.min())
    if s_min <= 0:
        raise FitError("stress must be positive for the offset search", None)

    best = None
    for d in np.linspace(0.0, s_min, d_grid_size + 1)[:-1]:
        a, b = np.polyfit(log_n, np.log10(stress - d), 1)
        sse = float(np.sum((_curve(log_n, a, b, d) - stress) ** 2))
        if np.isfinite(sse) and (best is None or sse < best[0]):
            best = (sse, a, b, d)
    if best is None:
        raise FitError("no finite starting point for the offset search", None)
    p0 = best[1:]

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", optimize.OptimizeWarning)
            warnings.simplefilter("ignore", RuntimeWarning)
            popt, _ = optimize.curve_fit(
                _curve, log_n, stress, p0=p0, method="lm",
                ftol=1e-15, xtol=1e-15, gtol=1e-15, maxfev=20000,
            )
    except (RuntimeError, ValueError) as e:
        raise FitError(f"refinement did not converge: {e}", p0) from e

    if not np.all(np.isfinite(popt)):
        raise FitError("refinement produced non-finite coefficients", popt)
    residual_norm = float(np.linalg.norm(_curve(log_n, *popt) - stress))

    params = SnCurveParams(
        a=float(popt[0]), b=float(popt[1]), d=float(popt[2]),
        n_min=float(series.cycles[0]), n_max=float(series.cycles[-1]),
        n_points=len(series), label=series.label or "curve",
    )
    logger.debug(
        f"Fitted '{params.label}': a={params.a:.6g} b={params.b:.6g} d={params.d:.6g} "
        f"(residual norm {residual_norm:.3g})"
    )
    return CurveFit(params, residual_norm)


def fit_sn_params(series: SnSeries) -> SnCurveParams:
    return fit_sn_curve(series).params


def split_series(series: SnSeries, train_count: int) -> SnSeries:
    """Mark the first train_count points as the training region"""
    if not 0 <= train_count <= len(series):
        raise ArgumentError(f"train_count {train_count} outside [0, {len(series)}]")
    return replace(series, train_count=int(train_count))


# -------------------------------------------------------------------- scaling

def fit_scaler(series: SnSeries) -> ScalerState:
    """Min-max scaler fitted on the training region only"""
    train = series.train_stress
    if train.size == 0:
        raise ScalerError(f"series '{series.label}' has an empty training region")
    lo, hi = float(train.min()), float(train.max())
    if not hi > lo:
        raise ScalerError(f"series '{series.label}' training region is constant ({lo} MPa)")
    return ScalerState(stress_min=lo, stress_max=hi)


def scale(scaler: ScalerState, stress: ArrayLike) -> ArrayLike:
    """Values outside the training range map outside [0, 1]"""
    scaled = (np.asarray(stress, dtype=np.float64) - scaler.stress_min) / scaler.span
    return float(scaled) if scaled.ndim == 0 else scaled


def unscale(scaler: ScalerState, value: ArrayLike) -> ArrayLike:
    stress = np.asarray(value, dtype=np.float64) * scaler.span + scaler.stress_min
    return float(stress) if stress.ndim == 0 else stress


# ------------------------------------------------------------------------ CSV

_PANDAS_LINE = re.compile(r"line (\d+)")


def write_series_csv(series: SnSeries, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({"cycles": series.cycles, "stress_mpa": series.stress})
    frame.to_csv(
        path, index=False, float_format=CSV_FLOAT_FORMAT,
        lineterminator="\n", encoding="utf-8",
    )


def read_series_csv(path, label: str = None, train_count: int = 0) -> SnSeries:
    """Parse a `cycles,stress_mpa` file; errors name the offending line"""
    path = Path(path)
    if not path.exists():
        raise MissingInputError(path, "series CSV")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise SeriesParseError("file is empty, expected header 'cycles,stress_mpa'", 1) from e
    except pd.errors.ParserError as e:
        match = _PANDAS_LINE.search(str(e))
        raise SeriesParseError(f"malformed row: {e}", int(match.group(1)) if match else None) from e

    if [c.strip() for c in frame.columns] != CSV_HEADER:
        raise SeriesParseError(f"expected header {','.join(CSV_HEADER)}, got {','.join(frame.columns)}", 1)
    if frame.empty:
        raise EmptySeriesError(f"{path}: no data rows")

    cycles = np.empty(len(frame))
    stress = np.empty(len(frame))
    for i, (raw_n, raw_s) in enumerate(zip(frame["cycles"], frame["stress_mpa"])):
        line = i + 2
        try:
            cycles[i] = float(raw_n)
            stress[i] = float(raw_s)
        except ValueError:
            raise SeriesParseError(f"non-numeric value in row '{raw_n},{raw_s}'", line) from None
        if not (np.isfinite(cycles[i]) and np.isfinite(stress[i])):
            raise SeriesParseError("non-finite value", line)
        if cycles[i] <= 0:
            raise SeriesParseError(f"cycle count must be positive, got {raw_n}", line)
        if i > 0 and cycles[i] <= cycles[i - 1]:
            raise SeriesParseError("cycles are not strictly increasing", line)

    if train_count > len(frame):
        raise ArgumentError(f"train_count {train_count} exceeds series length {len(frame)}")
    return SnSeries(cycles=cycles, stress=stress, label=label or path.stem, train_count=train_count)
