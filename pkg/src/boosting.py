"""
Componentwise L2-boosting with a least squares base learner and BIC stopping.

The boosting operator B_m = I - (I - nu H_m) ... (I - nu H_1), H_j the
projection on normalized column j, is never formed as a T x T matrix. Every
B_m maps into the column space of X*, B_m = X* C_m, and only the N x N matrix
D_m = C_m X* is updated:

    D_m[s, :] = D_{m-1}[s, :] + nu (G[s, :] - G[s, :] D_{m-1}) / G[s, s],  G = X*' X*

so that tr(B_m) = tr(D_m) costs O(N^2) per iteration.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy

from src.dataset import ZERO_COEFFICIENT, Selector, SelectionResult, conditioning_coefficients, partial_out
from src.downweight import WeightedDataset
from src.exceptions import DegenerateCovariateError, ValidationError
from src.lassofamily import normalize_columns


@dataclass(frozen=True)
class BoostConfig(object):
    nu: float = 0.5
    m_max: int = 500

    def __post_init__(self):
        if not 0.0 < self.nu <= 1.0:
            raise ValidationError("Boosting step size nu={} outside (0, 1]".format(self.nu))
        if self.m_max < 1:
            raise ValidationError("Boosting needs at least one iteration, got m_max={}".format(self.m_max))


@dataclass(frozen=True)
class BoostTrace(object):
    """
        Per iteration m = 1..m_max (stored 0-based): chosen column, step
        coefficient nu * delta, fitted values, residual sum of squares,
        tr(B_m) and BIC(m). M is the 1-based stopping iteration.
    """
    selected: numpy.ndarray
    steps: numpy.ndarray
    fitted: numpy.ndarray
    rss: numpy.ndarray
    trace: numpy.ndarray
    bic: numpy.ndarray
    M: int

    def coefficients(self, n_columns, m=None):
        """
        accumulated coefficients (normalized scale) after m iterations, default M
        """
        m = self.M if m is None else m
        coef = numpy.zeros(n_columns)
        numpy.add.at(coef, self.selected[:m], self.steps[:m])
        return coef

    def chosen(self, n_columns, scale=None, m=None):
        """
        columns picked in the first m iterations (default M) by a non-zero step

        :param numpy.ndarray scale: column norms, steps are compared on the unnormalized scale
        :return: numpy.ndarray - boolean flags of length n_columns
        """
        m = self.M if m is None else m
        selected, steps = self.selected[:m], self.steps[:m]
        if scale is not None:
            steps = steps / scale[selected]
        flags = numpy.zeros(n_columns, dtype=bool)
        flags[selected[numpy.abs(steps) > ZERO_COEFFICIENT]] = True
        return flags


def base_learner(e, X):
    """
    least squares fit of e on the single best column

    :param numpy.ndarray e: current residual
    :param numpy.ndarray X: normalized covariates
    :return: tuple(int, float) - index of the column with the smallest residual sum of squares
             (lowest index on ties) and its coefficient e'x / x'x
    """
    sxx = numpy.einsum("ti,ti->i", X, X)
    sxe = X.T.dot(e)
    deltas = sxe / sxx
    rss = e.dot(e) - sxe * deltas
    s = int(numpy.argmin(rss))
    return s, float(deltas[s])


def boost_path(y_f, X, cfg=None):
    """
    runs m_max boosting iterations and records everything needed for the BIC stop

    :param numpy.ndarray y_f: filtered target
    :param numpy.ndarray X: normalized filtered covariates
    :param BoostConfig cfg: step size and iteration cap
    :return: BoostTrace
    """
    cfg = cfg or BoostConfig()
    T, n = X.shape
    gram = X.T.dot(X)
    D = numpy.zeros((n, n))
    fitted = numpy.zeros(T)
    trace_b = 0.0

    selected = numpy.zeros(cfg.m_max, dtype=numpy.int64)
    steps = numpy.zeros(cfg.m_max)
    fitted_path = numpy.zeros((cfg.m_max, T))
    rss = numpy.zeros(cfg.m_max)
    traces = numpy.zeros(cfg.m_max)
    log_t = numpy.log(T)
    tiny = numpy.finfo(numpy.float64).tiny

    for m in range(cfg.m_max):
        s, delta = base_learner(y_f - fitted, X)
        step = cfg.nu * delta
        fitted = fitted + step * X[:, s]

        row = cfg.nu * (gram[s] - gram[s].dot(D)) / gram[s, s]
        trace_b += row[s]
        D[s] += row

        resid = y_f - fitted
        selected[m] = s
        steps[m] = step
        fitted_path[m] = fitted
        rss[m] = resid.dot(resid)
        traces[m] = trace_b

    sigma2 = numpy.maximum(rss / T, tiny)
    bic = numpy.log(sigma2) + 1.0 + traces * log_t / T
    M = int(numpy.argmin(bic)) + 1
    return BoostTrace(selected=selected, steps=steps, fitted=fitted_path, rss=rss, trace=traces, bic=bic, M=M)


def boost_select(data, cfg=None):
    """
    L2-boosting selection on normalized filtered covariates

    Selected are the distinct columns chosen in the first M iterations, even
    when their steps cancel to a zero coefficient. Coefficients are unscaled
    to the filtered covariates; conditioning coefficients are the least squares
    coefficients of y - X g on Z.

    :param data: TimeSeriesDataset or WeightedDataset
    :param BoostConfig cfg: step size and iteration cap
    :return: SelectionResult
    """
    cfg = cfg or BoostConfig()
    if isinstance(data, WeightedDataset):
        data = data.dataset
    y_f, X_f, _ = partial_out(data)
    usable = numpy.flatnonzero(~numpy.asarray(data.degenerate, dtype=bool))
    if usable.size == 0:
        raise DegenerateCovariateError("No covariate with non-zero variance left after projection")
    X_star, norms = normalize_columns(X_f[:, usable])

    trace = boost_path(y_f, X_star, cfg)
    coef_star = trace.coefficients(usable.size)
    coef = numpy.zeros(data.N)
    coef[usable] = coef_star / norms
    included = numpy.zeros(data.N, dtype=bool)
    included[usable] = trace.chosen(usable.size, norms)
    coef = numpy.where(included & (numpy.abs(coef) > ZERO_COEFFICIENT), coef, 0.0)

    gamma_z = conditioning_coefficients(data, data.y - data.X.dot(coef))
    return SelectionResult(included=included, selector_tag=Selector.BOOSTING, coefficients=coef,
                           conditioning_coefficients=gamma_z,
                           diagnostics={"M": float(trace.M), "bic": float(trace.bic[trace.M - 1]),
                                        "trace": float(trace.trace[trace.M - 1]), "nu": cfg.nu,
                                        "m_max": float(cfg.m_max)})
