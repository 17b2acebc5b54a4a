import numpy as np
import pytest
import statsmodels.api as sm

from src.dataset import Selector, SelectionResult, TimeSeriesDataset
from src.downweight import apply_weights, parse_scheme
from src.exceptions import DimensionError, RankDeficiencyError, ValidationError
from src.postselection import (Estimator, ForecastRecord, Protocol, SelectorOptions, forecast_one_step,
                               grid_forecast, ls_estimate, oracle_select, relative_msfe, select)

from .conftest import make_data


@pytest.fixture
def exact(rng):
    X = rng.standard_normal((30, 4))
    y = 1.0 + 2.0 * X[:, 0] - X[:, 2]
    return TimeSeriesDataset.from_arrays(y, X)


def test_intercept_only_model_is_the_mean(rng):
    data = TimeSeriesDataset.from_arrays(rng.standard_normal(25), rng.standard_normal((25, 3)))
    coef = ls_estimate(data, oracle_select(data, ()))
    np.testing.assert_allclose(coef, [data.y.mean()])


def test_noiseless_model_is_recovered(exact):
    coef = ls_estimate(exact, oracle_select(exact, (0, 2)))
    np.testing.assert_allclose(coef, [1.0, 2.0, -1.0], atol=1e-10)


def test_weighted_estimate_is_weighted_least_squares(rng):
    data = make_data(T=60, N=5, seed=2)
    selection = oracle_select(data, (0, 1, 3))
    coef = ls_estimate(apply_weights(data, 0.95), selection)
    W = np.column_stack([data.Z, data.X[:, [0, 1, 3]]])
    w = 0.95 ** (2.0 * np.arange(59, -1, -1))
    np.testing.assert_allclose(coef, sm.WLS(data.y, W, weights=w).fit().params, rtol=1e-8)


def test_one_step_forecast():
    assert forecast_one_step([1.0, 2.0, -1.0], [1.0], [3.0, 4.0]) == pytest.approx(3.0)
    with pytest.raises(DimensionError):
        forecast_one_step([1.0, 2.0], [1.0], [3.0, 4.0])


def test_collinear_selection_names_the_column(rng):
    X = rng.standard_normal((20, 3))
    X[:, 2] = 2.0 * X[:, 0]
    data = TimeSeriesDataset.from_arrays(rng.standard_normal(20), X, covariate_names=["a", "b", "c"])
    with pytest.raises(RankDeficiencyError) as info:
        ls_estimate(data, oracle_select(data, (0, 2)))
    assert info.value.columns == (2,)
    assert "c" in str(info.value)


def test_too_many_selected_columns(rng):
    data = TimeSeriesDataset.from_arrays(rng.standard_normal(6), rng.standard_normal((6, 8)))
    with pytest.raises(RankDeficiencyError):
        ls_estimate(data, oracle_select(data, range(5)))


def test_grid_error_names_the_coefficient(rng):
    X = rng.standard_normal((20, 3))
    X[:, 1] = X[:, 0]
    data = TimeSeriesDataset.from_arrays(rng.standard_normal(20), X)
    with pytest.raises(RankDeficiencyError) as info:
        grid_forecast(data, Protocol.NO_WEIGHTING, Selector.ORACLE, parse_scheme("none"), [1.0], X[-1],
                      options=SelectorOptions(signals=(0, 1)))
    assert "lambda=1.0" in str(info.value)
    assert info.value.lam == 1.0


def test_oracle_rejects_unknown_columns(exact):
    with pytest.raises(ValidationError):
        oracle_select(exact, (7,))


def test_select_dispatches_by_name(signal_data):
    assert select("ocmt", signal_data).selector_tag == Selector.OCMT
    assert select(Selector.BOOSTING, signal_data).selector_tag == Selector.BOOSTING
    assert select("oracle", signal_data, SelectorOptions(signals=(0, 1))).k_hat == 2


def test_protocols_coincide_without_down_weighting(signal_data, rng):
    x_next = rng.standard_normal(signal_data.N)
    scheme = parse_scheme("1")
    values = [grid_forecast(signal_data, protocol, Selector.OCMT, scheme, [1.0], x_next).point_forecast
              for protocol in Protocol]
    assert values[0] == pytest.approx(values[1]) == pytest.approx(values[2])


def test_grid_forecast_averages_the_runs(signal_data, rng):
    x_next = rng.standard_normal(signal_data.N)
    options = SelectorOptions(signals=(0, 1))
    scheme = parse_scheme("0.9,0.95,1")
    record = grid_forecast(signal_data, Protocol.SELECT_UNWEIGHTED_ESTIMATE_WEIGHTED, Selector.ORACLE, scheme,
                           [1.0], x_next, options=options, realized=0.5)
    single = []
    for lam in scheme.grid:
        coef = ls_estimate(apply_weights(signal_data, lam), oracle_select(signal_data, (0, 1)))
        single.append(forecast_one_step(coef, [1.0], x_next[[0, 1]]))
    assert [run.lam for run in record.runs] == [0.9, 0.95, 1.0]
    assert record.point_forecast == pytest.approx(np.mean(single))
    assert record.lambda_used == "custom"
    np.testing.assert_allclose(record.estimation_coefficients, record.runs[-1].coefficients)
    assert record.error == pytest.approx(0.5 - record.point_forecast)


def test_select_and_estimate_weighted_reselects(signal_data, rng):
    x_next = rng.standard_normal(signal_data.N)
    record = grid_forecast(signal_data, Protocol.SELECT_AND_ESTIMATE_WEIGHTED, Selector.OCMT,
                           parse_scheme("heavy"), [1.0], x_next)
    assert len(record.runs) == 6
    assert all(run.selection.included[0] for run in record.runs)
    assert record.lambda_used == "heavy"


def test_no_weighting_ignores_the_grid(signal_data, rng):
    x_next = rng.standard_normal(signal_data.N)
    record = grid_forecast(signal_data, "none", "ocmt", parse_scheme("light"), [1.0], x_next)
    assert len(record.runs) == 1
    assert record.lambda_used == 1.0


def test_native_coefficients(signal_data, rng):
    x_next = rng.standard_normal(signal_data.N)
    options = SelectorOptions(seed=3)
    record = grid_forecast(signal_data, Protocol.NO_WEIGHTING, Selector.LASSO, parse_scheme("none"), [1.0],
                           x_next, estimator=Estimator.NATIVE, options=options)
    selection = record.selection
    expected = selection.conditioning_coefficients[0] + selection.coefficients.dot(x_next)
    assert record.point_forecast == pytest.approx(expected)


@pytest.mark.parametrize("selector,protocol", [
    (Selector.OCMT, Protocol.NO_WEIGHTING),
    (Selector.ORACLE, Protocol.NO_WEIGHTING),
    (Selector.LASSO, Protocol.SELECT_UNWEIGHTED_ESTIMATE_WEIGHTED),
])
def test_native_is_rejected(signal_data, selector, protocol):
    with pytest.raises(ValidationError):
        grid_forecast(signal_data, protocol, selector, parse_scheme("light"), [1.0], np.zeros(signal_data.N),
                      estimator=Estimator.NATIVE, options=SelectorOptions(seed=1, signals=(0,)))


def test_next_row_must_match_the_covariates(signal_data):
    with pytest.raises(DimensionError):
        grid_forecast(signal_data, "none", "ocmt", parse_scheme("none"), [1.0], np.zeros(3))


def test_forecast_record_must_be_finite():
    selection = SelectionResult(included=[False], selector_tag=Selector.OCMT)
    with pytest.raises(ValidationError):
        ForecastRecord(point_forecast=np.nan, selector_tag=selection.selector_tag, lambda_used=1.0,
                       estimation_coefficients=np.zeros(1))
    assert ForecastRecord(point_forecast=1.0, selector_tag=Selector.OCMT, lambda_used=1.0,
                          estimation_coefficients=np.zeros(1)).error is None


def test_relative_msfe():
    assert relative_msfe(30.0, 25.0) == pytest.approx(1.2)
    with pytest.raises(ValidationError):
        relative_msfe(1.0, 0.0)
