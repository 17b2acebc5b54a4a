import numpy as np
import pytest

from src.dataset import TimeSeriesDataset


def make_data(T=120, N=10, signals=(0, 1), beta=2.0, noise=1.0, seed=0, intercept=True):
    """
    y = 1 + beta * sum of the signal columns + noise, with iid normal covariates
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((T, N))
    y = 1.0 + beta * X[:, list(signals)].sum(axis=1) + noise * rng.standard_normal(T)
    return TimeSeriesDataset.from_arrays(y, X, intercept=intercept)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def signal_data():
    return make_data()
