"""
Forecast and selection accuracy: MSFE, true and false positive rates, pooled
Diebold-Mariano and Pesaran-Timmermann statistics, mean directional forecast
accuracy and the irrepresentable condition of the Lasso.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy
import statsmodels.api as sm

from src.dataset import RANK_TOLERANCE, SelectionResult
from src.exceptions import DegenerateVarianceError, DimensionError, RankDeficiencyError, ValidationError


def msfe(squared_errors):
    """
    mean of the squared forecast errors (all series pooled)
    """
    values = numpy.concatenate([numpy.ravel(numpy.asarray(v, dtype=numpy.float64)) for v in
                                (squared_errors if isinstance(squared_errors, (list, tuple)) else [squared_errors])])
    if values.size == 0:
        raise ValidationError("Cannot compute the MSFE of an empty panel")
    return float(values.mean())


def tpr_fpr(selection, truth):
    """
    true and false positive rates of a selection

    :param selection: SelectionResult or boolean inclusion vector
    :param numpy.ndarray truth: True for the signals
    :return: tuple(float, float) - TPR and FPR
    """
    included = selection.included if isinstance(selection, SelectionResult) else numpy.asarray(selection, dtype=bool)
    truth = numpy.asarray(truth, dtype=bool)
    if included.shape != truth.shape:
        raise DimensionError("Selection has {} entries, truth has {}".format(included.size, truth.size))
    positives = truth.sum()
    negatives = truth.size - positives
    if positives == 0 or negatives == 0:
        raise ValidationError("Rates are undefined unless the truth has both signals and noise variables")
    return float((included & truth).sum()) / positives, float((included & ~truth).sum()) / negatives


@dataclass(frozen=True)
class LossPanel(object):
    """
        Loss differentials q_lt = e_ltA^2 - e_ltB^2, one array per series, and the forecast horizon.
    """
    series: Tuple[numpy.ndarray, ...]
    h: int = 1

    def __post_init__(self):
        series = tuple(numpy.array(numpy.ravel(q), dtype=numpy.float64) for q in self.series)
        if not series:
            raise ValidationError("Loss panel has no series")
        for l, q in enumerate(series):
            if q.size < 2:
                raise ValidationError("Series {} has {} forecasts, need at least 2".format(l, q.size))
            if not numpy.all(numpy.isfinite(q)):
                raise ValidationError("Series {} has non-finite loss differentials".format(l))
        if self.h < 1:
            raise ValidationError("Forecast horizon must be positive, got {}".format(self.h))
        object.__setattr__(self, "series", series)

    @classmethod
    def from_errors(cls, errors_a, errors_b, h=1):
        """
        builds the differentials from the forecast errors of methods A and B, series by series
        """
        if len(errors_a) != len(errors_b):
            raise DimensionError("Methods have {} and {} series".format(len(errors_a), len(errors_b)))
        series = []
        for l, (a, b) in enumerate(zip(errors_a, errors_b)):
            a = numpy.ravel(numpy.asarray(a, dtype=numpy.float64))
            b = numpy.ravel(numpy.asarray(b, dtype=numpy.float64))
            if a.shape != b.shape:
                raise DimensionError("Series {} has {} and {} forecasts".format(l, a.size, b.size))
            series.append(a ** 2 - b ** 2)
        return cls(series=tuple(series), h=h)

    @property
    def total(self):
        return int(sum(q.size for q in self.series))


def _series_variance(q, h):
    if h == 1:
        return float(numpy.mean((q - q.mean()) ** 2))
    # Bartlett weights, h - 1 lags
    fit = sm.OLS(q, numpy.ones((q.size, 1))).fit(cov_type="HAC", cov_kwds={"maxlags": h - 1,
                                                                          "use_correction": False})
    return float(fit.bse[0] ** 2 * q.size)


def panel_dm(panel):
    """
    pooled Diebold-Mariano statistic q_bar / sqrt(V(q_bar))

    :param LossPanel panel: loss differentials of A against B
    :return: float - negative values favour method A
    """
    total = panel.total
    q_bar = sum(q.sum() for q in panel.series) / total
    variance = sum(q.size * _series_variance(q, panel.h) for q in panel.series) / float(total) ** 2
    if not variance > 0:
        raise DegenerateVarianceError("Loss differentials have zero variance within every series")
    return float(q_bar / numpy.sqrt(variance))


@dataclass(frozen=True)
class DirectionPanel(object):
    """
        Realized values and forecasts, one array per series. Only their signs
        matter; a zero is never a correct direction.
    """
    realized: Tuple[numpy.ndarray, ...]
    forecast: Tuple[numpy.ndarray, ...]

    def __post_init__(self):
        realized = tuple(numpy.ravel(numpy.asarray(y, dtype=numpy.float64)) for y in self.realized)
        forecast = tuple(numpy.ravel(numpy.asarray(f, dtype=numpy.float64)) for f in self.forecast)
        if len(realized) != len(forecast):
            raise DimensionError("{} realized series for {} forecast series".format(len(realized), len(forecast)))
        for l, (y, f) in enumerate(zip(realized, forecast)):
            if y.shape != f.shape:
                raise DimensionError("Series {} has {} realizations and {} forecasts".format(l, y.size, f.size))
        object.__setattr__(self, "realized", realized)
        object.__setattr__(self, "forecast", forecast)

    def pooled(self):
        if not self.realized:
            return numpy.zeros(0), numpy.zeros(0)
        return numpy.concatenate(self.realized), numpy.concatenate(self.forecast)


def mdfa(panel):
    """
    percentage of forecasts with the correct (strictly positive product) sign
    """
    y, f = panel.pooled()
    if y.size == 0:
        raise ValidationError("Cannot compute the directional accuracy of an empty panel")
    return 100.0 * float(numpy.mean(numpy.sign(y * f) > 0))


def pt_test(panel, last_term=True):
    """
    pooled Pesaran-Timmermann statistic of directional skill

    :param DirectionPanel panel: realized values and forecasts
    :param bool last_term: keep the O(T^-2) term of the variance of P*
    :return: float - the statistic, standard normal under independence
    """
    y, f = panel.pooled()
    n = float(y.size)
    if n == 0:
        raise ValidationError("Cannot compute the PT statistic of an empty panel")
    p_hat = float(numpy.mean(numpy.sign(y * f) > 0))
    d_y = float(numpy.mean(y > 0))
    d_f = float(numpy.mean(f > 0))
    if d_y in (0.0, 1.0) or d_f in (0.0, 1.0):
        raise DegenerateVarianceError("Realized values and forecasts must both take both signs")
    p_star = d_y * d_f + (1.0 - d_y) * (1.0 - d_f)
    v_p = p_star * (1.0 - p_star) / n
    v_star = ((2.0 * d_y - 1.0) ** 2 * d_f * (1.0 - d_f) + (2.0 * d_f - 1.0) ** 2 * d_y * (1.0 - d_y)) / n
    if last_term:
        v_star += 4.0 * d_y * d_f * (1.0 - d_y) * (1.0 - d_f) / n ** 2
    if not v_p - v_star > 0:
        raise DegenerateVarianceError("Variance difference {} is not positive".format(v_p - v_star))
    return float((p_hat - p_star) / numpy.sqrt(v_p - v_star))


def irc_check(X, signal_idx, beta_signs):
    """
    irrepresentable condition ||R_21 R_11^-1 sign(beta)||_inf <= 1 on the sample correlation matrix

    :param numpy.ndarray X: T x N sample of covariates
    :param list(int) signal_idx: columns of the signals
    :param numpy.ndarray beta_signs: signs of the signal coefficients
    :return: tuple(bool, float) - whether the condition holds and its left hand side
    """
    X = numpy.asarray(X, dtype=numpy.float64)
    signal_idx = list(signal_idx)
    signs = numpy.sign(numpy.asarray(beta_signs, dtype=numpy.float64))
    if len(signal_idx) != signs.size:
        raise DimensionError("{} signals but {} signs".format(len(signal_idx), signs.size))
    if len(set(signal_idx)) != len(signal_idx) or any(i < 0 or i >= X.shape[1] for i in signal_idx):
        raise ValidationError("Signal indices must be distinct columns of X")
    corr = numpy.corrcoef(X, rowvar=False).reshape(X.shape[1], X.shape[1])
    others = [i for i in range(X.shape[1]) if i not in set(signal_idx)]
    if not others:
        return True, 0.0
    r11 = corr[numpy.ix_(signal_idx, signal_idx)]
    s = numpy.linalg.svd(r11, compute_uv=False)
    if not s[-1] > RANK_TOLERANCE * s[0]:
        raise RankDeficiencyError("Correlation block of the signals is singular", columns=signal_idx)
    r21 = corr[numpy.ix_(others, signal_idx)]
    lhs = float(numpy.max(numpy.abs(r21.dot(numpy.linalg.solve(r11, signs)))))
    return lhs <= 1.0, lhs
