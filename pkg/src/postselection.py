"""
Post-selection estimation and one-step-ahead forecasting.

A forecast pipeline runs a selector, estimates the selected model by least
squares on (possibly down-weighted) observations and forecasts the next
observation from the conditioning values z_{T+1} and the selected covariates
x_{T+1}. Over a grid of down-weighting coefficients the individual forecasts
are averaged with equal weights.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy

from src.boosting import BoostConfig, boost_select
from src.dataset import RANK_TOLERANCE, Selector, SelectionResult
from src.downweight import WeightedDataset, apply_weights
from src.exceptions import DimensionError, OcmtError, RankDeficiencyError, ValidationError
from src.lassofamily import DEFAULT_FOLDS, adaptive_lasso_select, lasso_select
from src.ocmt import OcmtConfig, ocmt_select


class Protocol(enum.Enum):
    SELECT_UNWEIGHTED_ESTIMATE_WEIGHTED = "est-weighted"
    SELECT_AND_ESTIMATE_WEIGHTED = "both-weighted"
    NO_WEIGHTING = "none"


class Estimator(enum.Enum):
    LS = "ls"
    NATIVE = "native"


@dataclass(frozen=True)
class SelectorOptions(object):
    """
        Tuning of every selector; ``signals`` are the true signal columns used by the oracle.
    """
    ocmt: OcmtConfig = field(default_factory=OcmtConfig)
    folds: int = DEFAULT_FOLDS
    seed: Optional[int] = None
    boost: BoostConfig = field(default_factory=BoostConfig)
    signals: Tuple[int, ...] = ()


@dataclass(frozen=True)
class LambdaForecast(object):
    lam: float
    selection: SelectionResult
    coefficients: numpy.ndarray
    forecast: float


@dataclass(frozen=True)
class ForecastRecord(object):
    """
        Forecast of one pipeline. ``estimation_coefficients`` are ordered
        [Z columns, selected X columns]; for a grid they belong to the largest
        grid value. ``runs`` keeps the individual grid runs.
    """
    point_forecast: float
    selector_tag: Selector
    lambda_used: Union[float, str]
    estimation_coefficients: numpy.ndarray
    runs: Tuple[LambdaForecast, ...] = ()
    realized: Optional[float] = None

    def __post_init__(self):
        if not numpy.isfinite(self.point_forecast):
            raise ValidationError("Forecast is not finite")

    @property
    def error(self):
        if self.realized is None:
            return None
        return self.realized - self.point_forecast

    @property
    def selection(self):
        return self.runs[-1].selection


def oracle_select(data, signals):
    """
    selection that includes exactly the given signal columns
    """
    if isinstance(data, WeightedDataset):
        data = data.dataset
    included = numpy.zeros(data.N, dtype=bool)
    signals = list(signals)
    if any(i < 0 or i >= data.N for i in signals):
        raise ValidationError("Signal index outside 0..{}".format(data.N - 1))
    included[signals] = True
    return SelectionResult(included=included, selector_tag=Selector.ORACLE)


def select(selector, data, options=None):
    """
    runs one selector on a dataset or weighted dataset

    :param Selector selector: which selector
    :param data: TimeSeriesDataset or WeightedDataset
    :param SelectorOptions options: tuning parameters
    :return: SelectionResult
    """
    options = options or SelectorOptions()
    selector = Selector(selector)
    if selector == Selector.OCMT:
        return ocmt_select(data, options.ocmt)
    if selector == Selector.LASSO:
        return lasso_select(data, K=options.folds, seed=options.seed)
    if selector == Selector.ALASSO:
        return adaptive_lasso_select(data, K=options.folds, seed=options.seed)
    if selector == Selector.BOOSTING:
        return boost_select(data, options.boost)
    return oracle_select(data, options.signals)


def _collinear_columns(W):
    """
    indices of the columns of W that are linear combinations of the columns before them
    """
    dependent = []
    kept = []
    for j in range(W.shape[1]):
        trial = W[:, kept + [j]]
        s = numpy.linalg.svd(trial, compute_uv=False)
        if s[0] == 0 or s[-1] / s[0] < RANK_TOLERANCE:
            dependent.append(j)
        else:
            kept.append(j)
    return dependent


def ls_estimate(data, selection):
    """
    least squares coefficients of y on W = [Z, selected X columns]

    Applied to a WeightedDataset this is the weighted least squares estimator
    with weights lambda^(2(T - t)).

    :param data: TimeSeriesDataset or WeightedDataset
    :param SelectionResult selection: which covariates enter the model
    :return: numpy.ndarray - coefficients of Z followed by those of the selected covariates
    """
    if isinstance(data, WeightedDataset):
        data = data.dataset
    if selection.included.shape[0] != data.N:
        raise DimensionError("Selection covers {} covariates, data has {}".format(
            selection.included.shape[0], data.N))
    selected = selection.selected
    W = numpy.column_stack([data.Z, data.X[:, selected]])
    if W.shape[1] == 0:
        return numpy.zeros(0)
    if W.shape[1] >= data.T:
        raise RankDeficiencyError("Post-selection design has {} columns for {} observations".format(
            W.shape[1], data.T), columns=range(W.shape[1]))
    dependent = _collinear_columns(W)
    if dependent:
        names = list(data.conditioning_names) + [data.covariate_names[i] for i in selected]
        raise RankDeficiencyError("Post-selection design is rank-deficient, collinear column(s): {}".format(
            ", ".join(names[j] for j in dependent)), columns=dependent)
    return numpy.linalg.lstsq(W, data.y, rcond=None)[0]


def forecast_one_step(coefficients, z_next, x_next_selected):
    """
    inner product of the coefficients with [z_next, x_next_selected]
    """
    regressors = numpy.concatenate([numpy.ravel(numpy.asarray(z_next, dtype=numpy.float64)),
                                    numpy.ravel(numpy.asarray(x_next_selected, dtype=numpy.float64))])
    coefficients = numpy.ravel(numpy.asarray(coefficients, dtype=numpy.float64))
    if coefficients.shape != regressors.shape:
        raise DimensionError("{} coefficients for {} regressors".format(coefficients.size, regressors.size))
    return float(coefficients.dot(regressors))


def _native_coefficients(selection):
    if selection.coefficients is None or selection.conditioning_coefficients is None:
        raise ValidationError("Selector {} has no native coefficients".format(selection.selector_tag.value))
    return numpy.concatenate([selection.conditioning_coefficients, selection.coefficients[selection.selected]])


def grid_forecast(data, protocol, selector, scheme, z_next, x_next, estimator=Estimator.LS, options=None,
                  realized=None):
    """
    select, estimate and forecast for every down-weighting coefficient of a grid and average

    SELECT_UNWEIGHTED_ESTIMATE_WEIGHTED selects once on the unweighted data and
    estimates on every weighted copy; SELECT_AND_ESTIMATE_WEIGHTED selects and
    estimates on every weighted copy; NO_WEIGHTING ignores the grid. The
    NATIVE estimator forecasts with the coefficients of a penalized or boosted
    fit instead of re-estimating by least squares.

    :param TimeSeriesDataset data: rows 1..T
    :param Protocol protocol: where the down-weighting enters
    :param Selector selector: variable selection method
    :param WeightScheme scheme: down-weighting grid
    :param numpy.ndarray z_next: conditioning values of row T+1
    :param numpy.ndarray x_next: all covariates of row T+1
    :param Estimator estimator: LS or NATIVE
    :param SelectorOptions options: selector tuning
    :param float realized: observed y of row T+1, if known
    :return: ForecastRecord
    """
    protocol = Protocol(protocol)
    selector = Selector(selector)
    estimator = Estimator(estimator)
    x_next = numpy.ravel(numpy.asarray(x_next, dtype=numpy.float64))
    if x_next.shape[0] != data.N:
        raise DimensionError("x_next has {} entries, data has {} covariates".format(x_next.shape[0], data.N))

    if estimator == Estimator.NATIVE:
        if selector in (Selector.OCMT, Selector.ORACLE):
            raise ValidationError("Selector {} is always followed by least squares".format(selector.value))
        if protocol == Protocol.SELECT_UNWEIGHTED_ESTIMATE_WEIGHTED:
            raise ValidationError("Native coefficients come from the selection stage, use protocol "
                                  "'both-weighted' or 'none'")

    grid = scheme.grid
    if protocol == Protocol.NO_WEIGHTING:
        if grid != (1.0,):
            logging.info("Protocol 'none' ignores the down-weighting grid {}".format(grid))
        grid = (1.0,)

    shared = None
    if protocol == Protocol.SELECT_UNWEIGHTED_ESTIMATE_WEIGHTED:
        shared = select(selector, data, options)

    runs = []
    for lam in grid:
        try:
            weighted = apply_weights(data, lam)
            selection = shared if shared is not None else select(selector, weighted, options)
            if estimator == Estimator.NATIVE:
                coef = _native_coefficients(selection)
            else:
                coef = ls_estimate(weighted, selection)
            value = forecast_one_step(coef, z_next, x_next[selection.selected])
        except OcmtError as err:
            # keep the error type, name the grid value
            err.lam = lam
            err.args = ("lambda={}: {}".format(lam, err),) + err.args[1:]
            raise
        runs.append(LambdaForecast(lam=lam, selection=selection, coefficients=coef, forecast=value))

    point = float(numpy.mean([run.forecast for run in runs]))
    lambda_used = runs[0].lam if len(runs) == 1 else scheme.label.value
    return ForecastRecord(point_forecast=point, selector_tag=selector, lambda_used=lambda_used,
                          estimation_coefficients=runs[-1].coefficients, runs=tuple(runs),
                          realized=None if realized is None else float(realized))


def relative_msfe(value, reference):
    """
    MSFE of a method relative to a reference method (OCMT in the reported tables)
    """
    if not reference > 0:
        raise ValidationError("Reference MSFE must be positive, got {}".format(reference))
    return float(value) / float(reference)
