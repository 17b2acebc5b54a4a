"""
Lasso and adaptive Lasso selectors.

Both work on the filtered variables y~ = M_z y, X~ = M_z X. The Lasso
normalizes every filtered covariate to unit l2 norm and minimizes

    ||y~ - X~* g||^2 + phi ||g||_1

by cyclic coordinate descent over a 100 point log-spaced penalty path from
phi_max = max_i |x~*_i' y~| down to 0.001 phi_max, picking phi by K-fold
cross-validation. With this objective the coordinate update soft-thresholds
at phi / 2, so every coefficient is zero once phi >= 2 phi_max.

The adaptive Lasso restricts the active set to the Lasso support S, rescales
the columns by the Lasso coefficients and repeats the penalized fit with its
own path and cross-validation.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy

from src.dataset import (ZERO_COEFFICIENT, Selector, SelectionResult, conditioning_coefficients,
                         partial_out)
from src.downweight import WeightedDataset
from src.exceptions import ConvergenceError, DegenerateCovariateError, NumericalError, ValidationError

PATH_LENGTH = 100
PATH_RATIO = 0.001
DEFAULT_FOLDS = 10
TOLERANCE = 1e-7
MAX_SWEEPS = 100000


@dataclass(frozen=True)
class PenaltyPath(object):
    values: numpy.ndarray
    phi_max: float
    phi_min: float


@dataclass(frozen=True)
class CvPlan(object):
    """
        fold_assignment holds labels 1..K, one per observation
    """
    K: int
    fold_assignment: numpy.ndarray

    def folds(self):
        for label in range(1, self.K + 1):
            yield self.fold_assignment == label


def stream(seed, index):
    """
    independent generator number ``index`` derived from an integer seed (fresh entropy for None)
    """
    if seed is None:
        return numpy.random.default_rng()
    return numpy.random.default_rng(numpy.random.SeedSequence(int(seed), spawn_key=(index,)))


def normalize_columns(X):
    """
    divides every column by its l2 norm

    :param numpy.ndarray X: T x N matrix
    :return: tuple(numpy.ndarray, numpy.ndarray) - normalized matrix and the column norms
    """
    norms = numpy.linalg.norm(X, axis=0)
    zero = numpy.flatnonzero(norms == 0)
    if zero.size:
        raise DegenerateCovariateError("Column {} has zero norm".format(int(zero[0])), index=int(zero[0]))
    return X / norms, norms


def penalty_path(y, X, length=PATH_LENGTH, ratio=PATH_RATIO):
    """
    log-spaced penalties from max_i |x_i' y| down to ratio times that value
    """
    phi_max = float(numpy.max(numpy.abs(X.T.dot(y)))) if X.shape[1] else 0.0
    if not phi_max > 0:
        raise NumericalError("Target is orthogonal to every covariate, the penalty path is empty")
    values = numpy.geomspace(phi_max, ratio * phi_max, length)
    values[0], values[-1] = phi_max, ratio * phi_max
    return PenaltyPath(values=values, phi_max=phi_max, phi_min=ratio * phi_max)


def make_cv_plan(T, K, rng):
    """
    labels 1..K repeated cyclically over T observations, then randomly permuted
    """
    if K < 2 or K > T:
        raise ValidationError("Cannot split {T} observations into K={K} non-empty folds".format(T=T, K=K))
    labels = numpy.arange(T) % K + 1
    return CvPlan(K=K, fold_assignment=rng.permutation(labels))


def objective(y, X, coef, phi):
    resid = y - X.dot(coef)
    return resid.dot(resid) + phi * numpy.abs(coef).sum()


def _sweep(coef, active, gram, xty, gram_coef, half_phi):
    max_change = 0.0
    for j in active:
        gjj = gram[j, j]
        if gjj <= 0:
            continue
        old = coef[j]
        rho = xty[j] - gram_coef[j] + gjj * old
        if rho > half_phi:
            new = (rho - half_phi) / gjj
        elif rho < -half_phi:
            new = (rho + half_phi) / gjj
        else:
            new = 0.0
        if new != old:
            delta = new - old
            coef[j] = new
            gram_coef += gram[:, j] * delta
            if abs(delta) > max_change:
                max_change = abs(delta)
    return max_change


def lasso_fit(y, X, phi, init=None, tol=TOLERANCE, max_sweeps=MAX_SWEEPS, check_objective=False,
              objective_trace=None, gram=None):
    """
    minimizes ||y - X g||^2 + phi ||g||_1 by cyclic coordinate descent

    Full sweeps alternate with sweeps over the current non-zero coordinates
    until the largest coefficient change of a full sweep is below tol.

    :param numpy.ndarray y: filtered target
    :param numpy.ndarray X: (normalized) filtered covariates
    :param float phi: penalty, phi >= 0
    :param numpy.ndarray init: warm start
    :param bool check_objective: assert after every sweep that the objective did not increase
    :param list objective_trace: if given, the objective after every sweep is appended
    :return: numpy.ndarray - coefficients
    """
    if phi < 0:
        raise ValidationError("Penalty must be non-negative, got {}".format(phi))
    N = X.shape[1]
    gram = X.T.dot(X) if gram is None else gram
    xty = X.T.dot(y)
    coef = numpy.zeros(N) if init is None else numpy.array(init, dtype=numpy.float64, copy=True)
    gram_coef = gram.dot(coef)
    half_phi = 0.5 * phi
    every = list(range(N))
    track = check_objective or objective_trace is not None or logging.getLogger().isEnabledFor(logging.DEBUG)
    last = objective(y, X, coef, phi) if track else None

    sweeps = 0
    full = True
    while sweeps < max_sweeps:
        active = every if full else [j for j in every if coef[j] != 0.0]
        change = _sweep(coef, active, gram, xty, gram_coef, half_phi)
        sweeps += 1
        if track:
            current = objective(y, X, coef, phi)
            logging.debug("coordinate descent sweep {s}: objective {o:.12g}".format(s=sweeps, o=current))
            if objective_trace is not None:
                objective_trace.append(current)
            if check_objective:
                assert current <= last + 1e-10 * max(1.0, abs(last)), \
                    "objective increased from {} to {}".format(last, current)
            last = current
        if change < tol:
            if full:
                return coef
            # active set settled, confirm with a full sweep
            full = True
        else:
            full = False
    raise ConvergenceError("Coordinate descent did not converge in {} sweeps (phi={})".format(sweeps, phi),
                           last_iterate=coef, sweeps=sweeps)


def fit_path(y, X, path, tol=TOLERANCE, max_sweeps=MAX_SWEEPS):
    """
    coefficients for every penalty of the path, warm-started from the previous (larger) penalty

    :return: numpy.ndarray - len(path) x N matrix
    """
    values = path.values if isinstance(path, PenaltyPath) else numpy.asarray(path)
    gram = X.T.dot(X)
    coefs = numpy.zeros((len(values), X.shape[1]))
    coef = None
    for j, phi in enumerate(values):
        coef = lasso_fit(y, X, phi, init=coef, tol=tol, max_sweeps=max_sweeps, gram=gram)
        coefs[j] = coef
    return coefs


def kfold_cv(y, X, path, K=DEFAULT_FOLDS, seed=None, plan=None):
    """
    K-fold cross-validation of the penalty

    For each fold the path is fitted on the remaining observations and the held
    out observations are predicted; squared errors are summed over all T
    observations per penalty. Ties go to the larger penalty.

    :param numpy.ndarray y: filtered target
    :param numpy.ndarray X: normalized filtered covariates
    :param PenaltyPath path: the penalties
    :param int K: number of folds
    :param seed: integer seed or numpy Generator for the fold permutation
    :param CvPlan plan: explicit fold assignment (overrides K and seed)
    :return: tuple(float, numpy.ndarray) - chosen penalty and the cross-validated MSE per penalty
    """
    T = y.shape[0]
    if plan is None:
        rng = seed if isinstance(seed, numpy.random.Generator) else stream(seed, 0)
        plan = make_cv_plan(T, K, rng)
    sq_errors = numpy.zeros(len(path.values))
    for held_out in plan.folds():
        train = ~held_out
        coefs = fit_path(y[train], X[train], path)
        pred = X[held_out].dot(coefs.T)
        sq_errors += ((y[held_out][:, None] - pred) ** 2).sum(axis=0)
    cv_mse = sq_errors / T
    # path is decreasing, argmin returns the first (largest) penalty among ties
    best = int(numpy.argmin(cv_mse))
    return float(path.values[best]), cv_mse


def _filtered(data):
    if isinstance(data, WeightedDataset):
        data = data.dataset
    y_f, X_f, _ = partial_out(data)
    usable = numpy.flatnonzero(~numpy.asarray(data.degenerate, dtype=bool))
    return data, y_f, X_f, usable


def _finish(data, coef, selector, diagnostics):
    coef = numpy.where(numpy.abs(coef) > ZERO_COEFFICIENT, coef, 0.0)
    gamma_z = conditioning_coefficients(data, data.y - data.X.dot(coef))
    return SelectionResult(included=coef != 0, selector_tag=selector, coefficients=coef,
                           conditioning_coefficients=gamma_z, diagnostics=diagnostics)


def _empty(data, selector, diagnostics):
    return _finish(data, numpy.zeros(data.N), selector, diagnostics)


def _penalized(y_f, X_cols, K, rng):
    """
    path, cross-validation and refit on one design; returns (coefficients in design scale, diagnostics)
    """
    path = penalty_path(y_f, X_cols)
    plan = make_cv_plan(y_f.shape[0], K, rng)
    phi_opt, cv_mse = kfold_cv(y_f, X_cols, path, plan=plan)
    index = int(numpy.flatnonzero(path.values == phi_opt)[0])
    coefs = fit_path(y_f, X_cols, path.values[:index + 1])
    return coefs[-1], {"phi_opt": phi_opt, "phi_max": path.phi_max, "phi_index": float(index),
                       "cv_mse": float(cv_mse[index])}


def lasso_select(data, K=DEFAULT_FOLDS, seed=None):
    """
    Lasso selection with K-fold cross-validated penalty

    Coefficients are returned on the scale of the filtered covariates; the
    conditioning coefficients are the least squares coefficients of
    y - X g on Z.

    :param data: TimeSeriesDataset or WeightedDataset
    :param int K: number of folds
    :param int seed: seed of the fold permutation
    :return: SelectionResult
    """
    data, y_f, X_f, usable = _filtered(data)
    if usable.size == 0:
        raise DegenerateCovariateError("No covariate with non-zero variance left after projection")
    X_star, norms = normalize_columns(X_f[:, usable])
    if not numpy.max(numpy.abs(X_star.T.dot(y_f))) > 0:
        return _empty(data, Selector.LASSO, {"phi_opt": 0.0, "phi_max": 0.0})

    coef_star, diagnostics = _penalized(y_f, X_star, K, stream(seed, 0))
    coef = numpy.zeros(data.N)
    coef[usable] = coef_star / norms
    return _finish(data, coef, Selector.LASSO, diagnostics)


def adaptive_lasso_select(data, K=DEFAULT_FOLDS, seed=None, lasso_result=None):
    """
    adaptive Lasso on the support of a first stage Lasso

    :param data: TimeSeriesDataset or WeightedDataset
    :param int K: number of folds
    :param int seed: seed of both fold permutations
    :param SelectionResult lasso_result: first stage result on the same data (computed when omitted)
    :return: SelectionResult
    """
    if lasso_result is None:
        lasso_result = lasso_select(data, K=K, seed=seed)
    data, y_f, X_f, _ = _filtered(data)
    support = lasso_result.selected
    if support.size == 0:
        logging.info("Lasso support is empty, adaptive Lasso selects nothing")
        return _empty(data, Selector.ALASSO, {"empty_lasso_support": 1.0})

    gamma_s = lasso_result.coefficients[support]
    X_scaled = X_f[:, support] * gamma_s
    if not numpy.max(numpy.abs(X_scaled.T.dot(y_f))) > 0:
        return _empty(data, Selector.ALASSO, {"empty_lasso_support": 0.0})

    delta_star, diagnostics = _penalized(y_f, X_scaled, K, stream(seed, 1))
    diagnostics = {("psi" + k[3:] if k.startswith("phi") else k): v for k, v in diagnostics.items()}
    diagnostics["empty_lasso_support"] = 0.0
    coef = numpy.zeros(data.N)
    coef[support] = gamma_s * delta_star
    return _finish(data, coef, Selector.ALASSO, diagnostics)
