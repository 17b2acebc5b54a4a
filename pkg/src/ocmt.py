"""
One covariate at a time multiple testing (single stage).

Each covariate is regressed on the target one at a time (after projecting out
the conditioning set); a covariate is selected when the absolute t-ratio of its
coefficient exceeds the critical value c_p(N, delta) = Phi^-1(1 - p / (2 N^delta)).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy
import statsmodels.api as sm
from scipy.stats import norm

from src.dataset import Selector, SelectionResult, partial_out
from src.downweight import WeightedDataset
from src.exceptions import DegenerateCovariateError, PerfectFitError, ValidationError


@dataclass(frozen=True)
class OcmtConfig(object):
    """
        :param float p: nominal size of the individual tests
        :param float delta: exponent of N in the critical value
        :param bool hac: use Newey-West standard errors instead of the plain ones
    """
    p: float = 0.05
    delta: float = 1.0
    hac: bool = False

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValidationError("Test size p={} outside (0, 1)".format(self.p))
        if self.delta <= 0:
            raise ValidationError("Critical value exponent delta={} must be positive".format(self.delta))

    def check(self, N):
        if N < 1:
            raise ValidationError("Need at least one covariate, got N={}".format(N))
        if self.p / (2.0 * N ** self.delta) >= 0.5:
            raise ValidationError("p / (2 N^delta) must stay below 0.5 (p={p}, N={N}, delta={d})".format(
                p=self.p, N=N, d=self.delta))


def newey_west_bandwidth(T):
    return int(math.floor(4.0 * (T / 100.0) ** (2.0 / 9.0)))


def t_ratio(y_f, x_f):
    """
    t-ratio of the slope of y_f on x_f without intercept, sigma^2 normalized by T

    :param numpy.ndarray y_f: filtered target
    :param numpy.ndarray x_f: filtered covariate
    :return: float - the t-ratio
    """
    y_f = numpy.asarray(y_f, dtype=numpy.float64)
    x_f = numpy.asarray(x_f, dtype=numpy.float64)
    sxx = x_f.dot(x_f)
    if not sxx > 0:
        raise DegenerateCovariateError("Covariate has zero sum of squares")
    sxy = x_f.dot(y_f)
    resid = y_f - (sxy / sxx) * x_f
    sigma2 = resid.dot(resid) / y_f.shape[0]
    if not sigma2 > 0:
        raise PerfectFitError("Covariate fits the target perfectly, sigma is zero")
    return sxy / (math.sqrt(sigma2) * math.sqrt(sxx))


def t_ratios(y_f, X_f):
    """
    vectorised t_ratio over the columns of X_f (all columns must be non-degenerate)
    """
    T = y_f.shape[0]
    sxx = numpy.einsum("ti,ti->i", X_f, X_f)
    if numpy.any(sxx <= 0):
        raise DegenerateCovariateError("Covariate {} has zero sum of squares".format(int(numpy.argmin(sxx))),
                                       index=int(numpy.argmin(sxx)))
    sxy = X_f.T.dot(y_f)
    resid = y_f[:, None] - X_f * (sxy / sxx)
    sigma2 = numpy.einsum("ti,ti->i", resid, resid) / T
    if numpy.any(sigma2 <= 0):
        raise PerfectFitError("Covariate {} fits the target perfectly".format(int(numpy.argmin(sigma2))))
    return sxy / (numpy.sqrt(sigma2) * numpy.sqrt(sxx))


def t_ratio_hac(y_f, x_f, bandwidth=None):
    """
    t-ratio with a Newey-West (Bartlett) standard error, default bandwidth floor(4 (T/100)^(2/9))
    """
    if bandwidth is None:
        bandwidth = newey_west_bandwidth(len(y_f))
    if not numpy.dot(x_f, x_f) > 0:
        raise DegenerateCovariateError("Covariate has zero sum of squares")
    fit = sm.OLS(numpy.asarray(y_f), numpy.asarray(x_f)[:, None]).fit(
        cov_type="HAC", cov_kwds={"maxlags": bandwidth, "use_correction": False})
    return float(fit.tvalues[0])


def critical_value(p, N, delta):
    """
    c_p(N, delta) = Phi^-1(1 - p / (2 N^delta))

    :param float p: nominal size
    :param int N: number of covariates in the active set
    :param float delta: exponent
    :return: float - the critical value
    """
    if N < 1:
        raise ValidationError("Need at least one covariate, got N={}".format(N))
    tail = p / (2.0 * float(N) ** delta)
    if not 0.0 < tail < 1.0:
        raise ValidationError("Normal quantile argument 1 - {} outside (0, 1)".format(tail))
    # upper tail function avoids the cancellation in 1 - tail for large N
    return float(norm.isf(tail))


def ocmt_select(data, cfg=None):
    """
    runs single stage OCMT on (possibly down-weighted) data

    Covariates flagged as degenerate get a zero t-ratio and are never selected.
    No coefficients are estimated here; see postselection.ls_estimate.

    :param data: TimeSeriesDataset or WeightedDataset
    :param OcmtConfig cfg: test size, exponent and standard error flavour
    :return: SelectionResult
    """
    cfg = cfg or OcmtConfig()
    if isinstance(data, WeightedDataset):
        data = data.dataset
    cfg.check(data.N)
    y_f, X_f, _ = partial_out(data)

    usable = numpy.flatnonzero(~numpy.asarray(data.degenerate, dtype=bool))
    if usable.size == 0:
        raise DegenerateCovariateError("No covariate with non-zero variance left after projection")
    if usable.size < data.N:
        logging.warning("OCMT skips {} degenerate covariate(s)".format(data.N - usable.size))

    t_stats = numpy.zeros(data.N)
    if cfg.hac:
        bandwidth = newey_west_bandwidth(data.T)
        for i in usable:
            t_stats[i] = t_ratio_hac(y_f, X_f[:, i], bandwidth)
    else:
        t_stats[usable] = t_ratios(y_f, X_f[:, usable])

    cv = critical_value(cfg.p, data.N, cfg.delta)
    included = numpy.abs(t_stats) > cv
    return SelectionResult(included=included, selector_tag=Selector.OCMT, t_stats=t_stats, critical_value=cv,
                           diagnostics={"p": cfg.p, "delta": cfg.delta, "hac": float(cfg.hac),
                                        "n_degenerate": float(data.N - usable.size)})
