import numpy as np
import pytest

from src import boosting
from src.boosting import BoostConfig, BoostTrace, base_learner, boost_path, boost_select
from src.dataset import TimeSeriesDataset
from src.exceptions import ValidationError
from src.lassofamily import normalize_columns

from .conftest import make_data


@pytest.fixture
def normalized(rng):
    X, _ = normalize_columns(rng.standard_normal((60, 5)))
    return X


def test_base_learner_picks_the_proportional_column(normalized):
    s, delta = base_learner(3.0 * normalized[:, 2], normalized)
    assert s == 2
    assert delta == pytest.approx(3.0)


def test_base_learner_ties_go_to_the_lowest_index(normalized):
    X = normalized.copy()
    X[:, 4] = X[:, 1]
    s, _ = base_learner(X[:, 1], X)
    assert s == 1


def test_residual_sum_of_squares_never_increases(rng, normalized):
    y = normalized.dot([1.0, 0.5, 0.0, -0.7, 0.0]) + 0.3 * rng.standard_normal(60)
    trace = boost_path(y - y.mean(), normalized, BoostConfig(nu=0.5, m_max=50))
    assert np.all(np.diff(trace.rss) <= 1e-10)
    assert 1 <= trace.M <= 50
    assert trace.bic[trace.M - 1] == trace.bic.min()


def test_trace_matches_the_explicit_boosting_operator(rng):
    X, _ = normalize_columns(rng.standard_normal((15, 4)))
    y = X.dot([1.0, -1.0, 0.5, 0.0]) + 0.2 * rng.standard_normal(15)
    nu = 0.3
    trace = boost_path(y, X, BoostConfig(nu=nu, m_max=12))
    remainder = np.eye(15)
    for m, s in enumerate(trace.selected):
        x = X[:, s]
        remainder = (np.eye(15) - nu * np.outer(x, x) / x.dot(x)).dot(remainder)
        B = np.eye(15) - remainder
        assert trace.trace[m] == pytest.approx(np.trace(B), abs=1e-10)
        np.testing.assert_allclose(trace.fitted[m], B.dot(y), atol=1e-10)


def test_unit_step_on_orthonormal_columns(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((30, 3)))
    y = 2.0 * Q[:, 0] + 1.0 * Q[:, 1]
    trace = boost_path(y, Q, BoostConfig(nu=1.0, m_max=3))
    assert list(trace.selected[:2]) == [0, 1]
    np.testing.assert_allclose(trace.steps[:2], [2.0, 1.0], atol=1e-10)
    np.testing.assert_allclose(trace.coefficients(3, m=2), [2.0, 1.0, 0.0], atol=1e-10)


def test_selects_signals():
    result = boost_select(make_data(seed=4))
    assert result.included[0] and result.included[1]
    assert result.coefficients[0] > 0
    assert result.conditioning_coefficients.shape == (1,)
    assert result.diagnostics["M"] >= 2


def test_zero_target_stops_after_one_iteration(normalized):
    trace = boost_path(np.zeros(60), normalized, BoostConfig(m_max=20))
    assert trace.M == 1
    np.testing.assert_array_equal(trace.coefficients(5), np.zeros(5))
    assert np.all(np.diff(trace.trace) > 0)


def test_constant_target_selects_nothing(rng):
    data = TimeSeriesDataset.from_arrays(np.full(40, 2.0), rng.standard_normal((40, 6)))
    result = boost_select(data, BoostConfig(m_max=20))
    assert result.k_hat == 0
    np.testing.assert_allclose(result.conditioning_coefficients, [2.0])


@pytest.mark.parametrize("nu,m_max", [(0.0, 10), (1.5, 10), (0.5, 0)])
def test_config_validation(nu, m_max):
    with pytest.raises(ValidationError):
        BoostConfig(nu=nu, m_max=m_max)


def _cancelling_trace(T):
    return BoostTrace(selected=np.array([1, 2, 1]), steps=np.array([0.5, 0.3, -0.5]), fitted=np.zeros((3, T)),
                      rss=np.ones(3), trace=np.arange(1.0, 4.0), bic=np.zeros(3), M=3)


def test_chosen_columns_come_from_the_selection_history():
    trace = _cancelling_trace(10)
    np.testing.assert_array_equal(trace.coefficients(4), [0.0, 0.0, 0.3, 0.0])
    np.testing.assert_array_equal(trace.chosen(4), [False, True, True, False])
    np.testing.assert_array_equal(trace.chosen(4, m=1), [False, True, False, False])


def test_cancelled_steps_stay_selected(monkeypatch, rng):
    data = TimeSeriesDataset.from_arrays(rng.standard_normal(40), rng.standard_normal((40, 4)))
    monkeypatch.setattr(boosting, "boost_path", lambda y_f, X, cfg=None: _cancelling_trace(len(y_f)))
    result = boost_select(data)
    np.testing.assert_array_equal(result.included, [False, True, True, False])
    assert result.coefficients[1] == 0.0
    assert result.coefficients[2] != 0.0
    assert result.k_hat == 2
