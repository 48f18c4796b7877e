import numpy as np
import pytest

from src.errors import (
    ArgumentError,
    DomainError,
    EmptySeriesError,
    MissingInputError,
    ScalerError,
    SeriesParseError,
)
from src.sncurve_data import (
    SnCurveParams,
    SnSeries,
    evaluate_sn_curve,
    fit_scaler,
    fit_sn_curve,
    fit_sn_params,
    log_spaced_grid,
    read_series_csv,
    scale,
    split_series,
    synthesize_series,
    unscale,
    write_series_csv,
)


# ---------------------------------------------------------------- evaluation

def test_evaluate_known_values():
    assert evaluate_sn_curve(SnCurveParams(a=-0.1, b=3.0, d=100.0), 1e4) == pytest.approx(498.1072, abs=1e-4)
    assert evaluate_sn_curve(SnCurveParams(a=-0.5, b=5.0, d=50.0), 1e4) == pytest.approx(1050.0, rel=1e-12)


def test_flat_curve_is_constant():
    params = SnCurveParams(a=0.0, b=2.0, d=0.0)
    values = evaluate_sn_curve(params, np.array([1.0, 1e3, 1e7]))
    np.testing.assert_allclose(values, 100.0, rtol=1e-12)


@pytest.mark.parametrize("n", [0.0, -5.0])
def test_non_positive_cycles_rejected(n):
    with pytest.raises(DomainError):
        evaluate_sn_curve(SnCurveParams(a=-0.1, b=3.0, d=100.0), n)


def test_evaluate_is_strictly_decreasing_for_negative_slope():
    rng = np.random.default_rng(3)
    for _ in range(200):
        params = SnCurveParams(a=rng.uniform(-1.0, -0.01), b=rng.uniform(1.0, 5.0), d=rng.uniform(0.0, 200.0))
        n1 = 10 ** rng.uniform(3.0, 7.0)
        n2 = n1 * (1.0 + rng.uniform(0.01, 10.0))
        assert evaluate_sn_curve(params, n1) > evaluate_sn_curve(params, n2)


def test_positive_slope_logs_warning(caplog):
    SnCurveParams(a=0.1, b=2.0, d=0.0, label="odd")
    assert "odd" in caplog.text


def test_params_reject_inverted_bounds():
    with pytest.raises(ValueError):
        SnCurveParams(a=-0.1, b=3.0, d=0.0, n_min=1e6, n_max=1e3)


# ---------------------------------------------------------------------- grid

def test_grid_small():
    np.testing.assert_allclose(log_spaced_grid(10, 1000, 3), [10.0, 100.0, 1000.0], rtol=1e-12)


def test_grid_default_range():
    grid = log_spaced_grid(5e3, 3e6, 1000)
    assert grid.size == 1000
    assert grid[0] == 5e3
    assert grid[-1] == 3e6
    assert grid[599] == pytest.approx(2.316e5, rel=1e-3)


def test_grid_has_constant_ratio():
    grid = log_spaced_grid(5e3, 3e6, 1000)
    ratios = grid[1:] / grid[:-1]
    np.testing.assert_allclose(ratios, ratios[0], rtol=1e-12)
    assert np.all(np.diff(grid) > 0)


@pytest.mark.parametrize("n_min,n_max,count", [(10, 1000, 1), (1000, 10, 5), (0, 10, 5), (10, 10, 5)])
def test_grid_rejects_bad_arguments(n_min, n_max, count):
    with pytest.raises(ArgumentError):
        log_spaced_grid(n_min, n_max, count)


# ---------------------------------------------------------------- synthesis

def test_noiseless_synthesis_matches_curve():
    params = SnCurveParams(a=-0.2, b=4.0, d=80.0)
    series = synthesize_series(params, "axial")
    assert len(series) == 1000
    np.testing.assert_array_equal(series.stress, evaluate_sn_curve(params, series.cycles))


def test_noisy_synthesis_is_seeded():
    params = SnCurveParams(a=-0.2, b=4.0, d=80.0)
    a = synthesize_series(params, "axial", noise_std=2.0, seed=11)
    b = synthesize_series(params, "axial", noise_std=2.0, seed=11)
    c = synthesize_series(params, "axial", noise_std=2.0, seed=12)
    np.testing.assert_array_equal(a.stress, b.stress)
    assert not np.array_equal(a.stress, c.stress)


def test_negative_noise_rejected():
    with pytest.raises(ArgumentError):
        synthesize_series(SnCurveParams(a=-0.2, b=4.0, d=80.0), "axial", noise_std=-1.0)


# ----------------------------------------------------------------------- fit

def test_fit_recovers_noiseless_parameters():
    truth = SnCurveParams(a=-0.2, b=4.0, d=80.0)
    fit = fit_sn_curve(synthesize_series(truth, "axial"))
    assert fit.params.a == pytest.approx(truth.a, abs=1e-6)
    assert fit.params.b == pytest.approx(truth.b, abs=1e-6)
    assert fit.params.d == pytest.approx(truth.d, abs=1e-6)
    assert fit.residual_norm < 1e-6


def test_fit_recovers_noisy_parameters():
    truth = SnCurveParams(a=-0.2, b=4.0, d=80.0)
    params = fit_sn_params(synthesize_series(truth, "axial", noise_std=1.0, seed=7))
    assert params.a == pytest.approx(truth.a, rel=0.05)
    assert params.b == pytest.approx(truth.b, rel=0.05)
    assert params.d == pytest.approx(truth.d, rel=0.05)


def test_fit_constant_series_has_flat_slope():
    cycles = log_spaced_grid(1e3, 1e6, 50)
    params = fit_sn_params(SnSeries(cycles=cycles, stress=np.full(50, 300.0)))
    assert abs(params.a) < 1e-6
    np.testing.assert_allclose(evaluate_sn_curve(params, cycles), 300.0, rtol=1e-6)


def test_fit_needs_three_points():
    with pytest.raises(ArgumentError):
        fit_sn_curve(SnSeries(cycles=[1e3, 1e4], stress=[300.0, 200.0]))


# -------------------------------------------------------------------- split

def test_default_splits_land_near_expected_boundaries(curves):
    axial = split_series(synthesize_series(curves["axial"], "axial"), 600)
    torsional = split_series(synthesize_series(curves["torsional"], "torsional"), 300)
    assert axial.train_cycles[-1] == pytest.approx(2.31e5, rel=0.01)
    assert torsional.train_cycles[-1] == pytest.approx(3.4e4, rel=0.02)
    assert axial.train_stress.size + axial.test_stress.size == 1000
    assert torsional.test_cycles[0] > torsional.train_cycles[-1]


def test_split_edges():
    series = synthesize_series(SnCurveParams(a=-0.2, b=4.0, d=80.0, n_points=20), "x")
    assert split_series(series, 0).train_stress.size == 0
    assert split_series(series, 20).test_stress.size == 0
    with pytest.raises(ArgumentError):
        split_series(series, 21)


def test_series_is_read_only():
    series = SnSeries(cycles=[1.0, 2.0, 3.0], stress=[3.0, 2.0, 1.0])
    with pytest.raises(ValueError):
        series.stress[0] = 10.0


def test_series_rejects_unordered_cycles():
    with pytest.raises(ArgumentError):
        SnSeries(cycles=[1.0, 3.0, 2.0], stress=[3.0, 2.0, 1.0])


# ------------------------------------------------------------------ scaling

def test_scaler_uses_training_region_only():
    series = SnSeries(cycles=[1.0, 2.0, 3.0, 4.0], stress=[300.0, 200.0, 100.0, 10.0], train_count=3)
    scaler = fit_scaler(series)
    assert (scaler.stress_min, scaler.stress_max) == (100.0, 300.0)
    assert scale(scaler, 200.0) == pytest.approx(0.5)
    assert scale(scaler, 10.0) < 0.0


@pytest.mark.parametrize("value", [87.3, 412.9, 100.0, 300.0])
def test_scale_round_trip(value):
    series = SnSeries(cycles=[1.0, 2.0, 3.0], stress=[300.0, 200.0, 100.0], train_count=3)
    scaler = fit_scaler(series)
    assert unscale(scaler, scale(scaler, value)) == pytest.approx(value, rel=1e-12)


def test_scaler_rejects_constant_or_empty_region():
    constant = SnSeries(cycles=[1.0, 2.0, 3.0], stress=[5.0, 5.0, 1.0], train_count=2)
    with pytest.raises(ScalerError):
        fit_scaler(constant)
    with pytest.raises(ScalerError):
        fit_scaler(split_series(constant, 0))


# ---------------------------------------------------------------------- CSV

def test_csv_round_trip(tmp_path):
    series = synthesize_series(SnCurveParams(a=-0.248, b=3.561, d=120.0), "axial")
    path = tmp_path / "axial.csv"
    write_series_csv(series, path)
    loaded = read_series_csv(path, train_count=600)
    np.testing.assert_array_equal(loaded.cycles, series.cycles)
    np.testing.assert_array_equal(loaded.stress, series.stress)
    assert loaded.label == "axial"
    assert loaded.train_count == 600
    assert b"\r\n" not in path.read_bytes()


def test_csv_header_only_is_empty(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("cycles,stress_mpa\n")
    with pytest.raises(EmptySeriesError):
        read_series_csv(path)


def test_csv_bad_value_names_its_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("cycles,stress_mpa\n1000,300\n2000,250\n3000,abc\n")
    with pytest.raises(SeriesParseError) as info:
        read_series_csv(path)
    assert info.value.line == 4


def test_csv_unordered_cycles_rejected(tmp_path):
    path = tmp_path / "unordered.csv"
    path.write_text("cycles,stress_mpa\n1000,300\n900,250\n")
    with pytest.raises(SeriesParseError) as info:
        read_series_csv(path)
    assert info.value.line == 3


def test_csv_wrong_header(tmp_path):
    path = tmp_path / "header.csv"
    path.write_text("n,s\n1000,300\n")
    with pytest.raises(SeriesParseError):
        read_series_csv(path)


def test_csv_missing_file(tmp_path):
    with pytest.raises(MissingInputError):
        read_series_csv(tmp_path / "nope.csv")
