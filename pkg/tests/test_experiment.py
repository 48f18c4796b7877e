"""Full-size experiment with the shipped configuration; run with `pytest -m slow`"""
import numpy as np
import pytest

from src.pipeline import BASELINE_RUN, DNN_RUNS, SOURCE_RUN, TRANSFER_RUN, run_experiment
from src.settings import load_config, load_curve_params
from src.sncurve_data import synthesize_series

from .conftest import CURVES_PATH, REPO_ROOT


@pytest.fixture(scope="module")
def outcome():
    config = load_config(REPO_ROOT / "configs" / "config.yaml")
    curves = load_curve_params(CURVES_PATH)
    axial = synthesize_series(curves["axial"], "axial")
    torsional = synthesize_series(curves["torsional"], "torsional")
    return run_experiment(config, axial, torsional)


@pytest.mark.slow
def test_transfer_beats_baseline_beats_dnn(outcome):
    report = outcome.report
    assert not report.any_failed
    assert report.test_rmse(TRANSFER_RUN) < report.test_rmse(BASELINE_RUN)
    assert report.test_rmse(BASELINE_RUN) < report.test_rmse(DNN_RUNS["torsional"])
    assert report.tr_beats_baseline and report.baseline_beats_dnn


@pytest.mark.slow
def test_transfer_error_is_small_relative_to_range(outcome):
    assert outcome.report.tr_within_5pct_of_range


@pytest.mark.slow
def test_source_loss_decreases(outcome):
    history = outcome.loss_histories[SOURCE_RUN]
    assert history.size == 500
    assert np.all(np.isfinite(history))
    assert history[-50:].min() < history[:50].min()
