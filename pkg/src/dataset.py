"""
Datasets, selection results and weighting schemes shared by every selector.

A TimeSeriesDataset holds the target y (length T), the active set X (T x N)
and the conditioning set Z (T x m). All selectors first project y and X on Z
(see partial_out) and then work with the filtered variables.
"""
from __future__ import annotations

import enum
import logging
import types
from dataclasses import dataclass, field
from typing import Mapping, Optional, Tuple

import numpy
import pandas

from src.exceptions import DimensionError, RankDeficiencyError, ValidationError

#smallest / largest singular value below this ratio means rank-deficient
RANK_TOLERANCE = 1e-10
#projected column norm relative to its raw norm below this means zero variance
DEGENERATE_TOLERANCE = 1e-10
#coefficients smaller than this (after unscaling) count as zero
ZERO_COEFFICIENT = 1e-10

UNIT_COLUMN = "(intercept)"


class Selector(enum.Enum):
    OCMT = "ocmt"
    LASSO = "lasso"
    ALASSO = "alasso"
    BOOSTING = "boosting"
    ORACLE = "oracle"


class WeightLabel(enum.Enum):
    NONE = "none"
    LIGHT = "light"
    HEAVY = "heavy"
    CUSTOM = "custom"


def _frozen(values, dtype=numpy.float64):
    arr = numpy.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _check_full_rank(Z, names=None):
    """
    raises RankDeficiencyError naming the first column of Z that is (numerically)
    a linear combination of the columns before it
    """
    m = Z.shape[1]
    if m == 0:
        return
    s = numpy.linalg.svd(Z, compute_uv=False)
    if s[0] > 0 and s[-1] / s[0] >= RANK_TOLERANCE:
        return
    for j in range(m):
        sj = numpy.linalg.svd(Z[:, :j + 1], compute_uv=False)
        if sj[0] == 0 or sj[-1] / sj[0] < RANK_TOLERANCE:
            name = names[j] if names is not None and j < len(names) else str(j)
            raise RankDeficiencyError(
                "Conditioning matrix is rank-deficient: column {j} ({name}) depends on the previous columns".format(
                    j=j, name=name), columns=[j])


def _orthonormal_basis(Z):
    if Z.shape[1] == 0:
        return numpy.zeros((Z.shape[0], 0))
    u, _, _ = numpy.linalg.svd(Z, full_matrices=False)
    return u


def project_out(values, basis):
    """
    applies M_z = I - Q Q' to a vector or matrix, Q an orthonormal basis of span(Z)

    :param numpy.ndarray values: vector of length T or matrix with T rows
    :param numpy.ndarray basis: T x m orthonormal basis
    :return: numpy.ndarray - the projected values
    """
    if basis.shape[1] == 0:
        return numpy.array(values, dtype=numpy.float64, copy=True)
    return values - basis.dot(basis.T.dot(values))


@dataclass(frozen=True)
class TimeSeriesDataset(object):
    """
        Target, active set and conditioning set of one regression problem.

        Arrays are copied and made read-only on construction. Columns of X that
        have (numerically) zero norm after projection on Z are flagged in
        ``degenerate``; they are kept in X and skipped by the selectors.
    """
    y: numpy.ndarray
    X: numpy.ndarray
    Z: numpy.ndarray
    timestamps: Optional[numpy.ndarray] = None
    target_name: str = "y"
    covariate_names: Tuple[str, ...] = ()
    conditioning_names: Tuple[str, ...] = ()
    degenerate: Tuple[bool, ...] = field(init=False, default=())

    def __post_init__(self):
        y = _frozen(self.y)
        X = _frozen(self.X)
        Z = _frozen(self.Z)
        if y.ndim != 1:
            raise ValidationError("Target must be a vector, got shape {}".format(y.shape))
        T = y.shape[0]
        if X.ndim == 1:
            X = _frozen(X.reshape(T, -1) if X.size else numpy.zeros((T, 0)))
        if Z.ndim == 1:
            Z = _frozen(Z.reshape(T, -1) if Z.size else numpy.zeros((T, 0)))
        if X.shape[0] != T or Z.shape[0] != T:
            raise DimensionError("Row counts differ: y has {T}, X has {tx}, Z has {tz}".format(
                T=T, tx=X.shape[0], tz=Z.shape[0]))
        m = Z.shape[1]
        if T < m + 2:
            raise DimensionError("Need T >= m + 2 observations, got T={T} with m={m}".format(T=T, m=m))
        for name, arr in (("y", y), ("X", X), ("Z", Z)):
            if not numpy.all(numpy.isfinite(arr)):
                raise ValidationError("Non-finite entries in {}".format(name))

        timestamps = self.timestamps
        if timestamps is not None:
            timestamps = _frozen(timestamps, dtype=numpy.int64)
            if timestamps.shape != (T,):
                raise DimensionError("Timestamps must have length {}".format(T))

        N = X.shape[1]
        cov_names = tuple(self.covariate_names) or tuple("x{}".format(i + 1) for i in range(N))
        cond_names = tuple(self.conditioning_names) or tuple("z{}".format(j + 1) for j in range(m))
        if len(cov_names) != N or len(cond_names) != m:
            raise DimensionError("Column names do not match the matrix dimensions")

        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "covariate_names", cov_names)
        object.__setattr__(self, "conditioning_names", cond_names)
        object.__setattr__(self, "degenerate", self._flag_degenerate())

    def _flag_degenerate(self):
        if self.N == 0:
            return ()
        # least squares projection also works for rank-deficient Z, partial_out complains later
        if self.m:
            coef = numpy.linalg.lstsq(self.Z, self.X, rcond=None)[0]
            resid = self.X - self.Z.dot(coef)
        else:
            resid = self.X
        raw = numpy.linalg.norm(self.X, axis=0)
        proj = numpy.linalg.norm(resid, axis=0)
        flags = tuple(bool(r == 0 or p <= DEGENERATE_TOLERANCE * r) for r, p in zip(raw, proj))
        for name, flag in zip(self.covariate_names, flags):
            if flag:
                logging.warning("Covariate {} has zero variance after projection on the conditioning set".format(name))
        return flags

    @property
    def T(self):
        return self.y.shape[0]

    @property
    def N(self):
        return self.X.shape[1]

    @property
    def m(self):
        return self.Z.shape[1]

    @property
    def has_intercept(self):
        return bool(self.m) and self.conditioning_names[0] == UNIT_COLUMN

    @classmethod
    def from_arrays(cls, y, X, Z=None, intercept=True, timestamps=None, target_name="y",
                    covariate_names=(), conditioning_names=()):
        """
        builds a dataset, prefixing Z with a unit column iff intercept is set
        """
        y = numpy.asarray(y, dtype=numpy.float64)
        T = y.shape[0]
        Z = numpy.zeros((T, 0)) if Z is None else numpy.asarray(Z, dtype=numpy.float64).reshape(T, -1)
        cond_names = tuple(conditioning_names) or tuple("z{}".format(j + 1) for j in range(Z.shape[1]))
        if intercept:
            Z = numpy.column_stack([numpy.ones(T), Z])
            cond_names = (UNIT_COLUMN,) + cond_names
        return cls(y=y, X=numpy.asarray(X, dtype=numpy.float64).reshape(T, -1), Z=Z, timestamps=timestamps,
                   target_name=target_name, covariate_names=tuple(covariate_names),
                   conditioning_names=cond_names)

    def replace_arrays(self, y, X, Z):
        """
        same column names and timestamps, new numbers (used for weighted copies)
        """
        return TimeSeriesDataset(y=y, X=X, Z=Z, timestamps=self.timestamps, target_name=self.target_name,
                                 covariate_names=self.covariate_names, conditioning_names=self.conditioning_names)

    def select_columns(self, columns):
        columns = list(columns)
        return TimeSeriesDataset(y=self.y, X=self.X[:, columns], Z=self.Z, timestamps=self.timestamps,
                                 target_name=self.target_name,
                                 covariate_names=tuple(self.covariate_names[i] for i in columns),
                                 conditioning_names=self.conditioning_names)

    def head(self, rows):
        """
        the first ``rows`` observations (expanding window estimation samples)
        """
        return TimeSeriesDataset(y=self.y[:rows], X=self.X[:rows], Z=self.Z[:rows],
                                 timestamps=None if self.timestamps is None else self.timestamps[:rows],
                                 target_name=self.target_name, covariate_names=self.covariate_names,
                                 conditioning_names=self.conditioning_names)

    def to_frame(self):
        data = {}
        if self.timestamps is not None:
            data["timestamp"] = self.timestamps
        data[self.target_name] = self.y
        for j, name in enumerate(self.conditioning_names):
            if name != UNIT_COLUMN:
                data[name] = self.Z[:, j]
        for i, name in enumerate(self.covariate_names):
            data[name] = self.X[:, i]
        return pandas.DataFrame(data)


@dataclass(frozen=True)
class SelectionResult(object):
    """
        Inclusion flags of one selector run plus its diagnostics.

        ``coefficients`` are selector-native (penalized or boosted) and zero for
        excluded covariates; OCMT leaves them unset. ``conditioning_coefficients``
        are the matching coefficients of the Z columns when the selector
        provides them.
    """
    included: numpy.ndarray
    selector_tag: Selector
    t_stats: Optional[numpy.ndarray] = None
    critical_value: Optional[float] = None
    coefficients: Optional[numpy.ndarray] = None
    conditioning_coefficients: Optional[numpy.ndarray] = None
    diagnostics: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        included = _frozen(self.included, dtype=bool)
        object.__setattr__(self, "included", included)
        if self.t_stats is not None:
            object.__setattr__(self, "t_stats", _frozen(self.t_stats))
        if self.coefficients is not None:
            coefficients = _frozen(self.coefficients)
            if coefficients.shape != included.shape:
                raise DimensionError("Coefficient vector and inclusion flags differ in length")
            if numpy.any(coefficients[~included] != 0):
                raise ValidationError("Excluded covariates must have zero coefficients")
            object.__setattr__(self, "coefficients", coefficients)
        if self.conditioning_coefficients is not None:
            object.__setattr__(self, "conditioning_coefficients", _frozen(self.conditioning_coefficients))
        diagnostics = dict(self.diagnostics)
        diagnostics["k_hat"] = float(included.sum())
        object.__setattr__(self, "diagnostics", types.MappingProxyType(diagnostics))

    @property
    def k_hat(self):
        return int(self.included.sum())

    @property
    def selected(self):
        return numpy.flatnonzero(self.included)


@dataclass(frozen=True)
class WeightScheme(object):
    grid: Tuple[float, ...]
    label: WeightLabel = WeightLabel.CUSTOM

    def __post_init__(self):
        grid = tuple(sorted(float(v) for v in self.grid))
        if not grid:
            raise ValidationError("Down-weighting grid is empty")
        for v in grid:
            if not 0.0 < v <= 1.0:
                raise ValidationError("Down-weighting coefficient {} outside (0, 1]".format(v))
        if (self.label == WeightLabel.NONE) != (grid == (1.0,)):
            raise ValidationError("Label NONE is reserved for the grid {1}")
        object.__setattr__(self, "grid", grid)


def partial_out(data):
    """
    projects the target and the active set on the orthogonal complement of Z

    :param TimeSeriesDataset data: the dataset
    :return: tuple(numpy.ndarray, numpy.ndarray, numpy.ndarray) - filtered y, filtered X and
             an orthonormal basis of the column space of Z
    """
    _check_full_rank(data.Z, data.conditioning_names)
    basis = _orthonormal_basis(data.Z)
    return project_out(data.y, basis), project_out(data.X, basis), basis


def conditioning_coefficients(data, residual):
    """
    least squares coefficients of a residual on Z (empty when m = 0)
    """
    if data.m == 0:
        return numpy.zeros(0)
    return numpy.linalg.lstsq(data.Z, residual, rcond=None)[0]


def _parse_cells(frame, column):
    values = numpy.empty(len(frame), dtype=numpy.float64)
    for row, cell in enumerate(frame[column]):
        try:
            values[row] = float(cell)
        except (TypeError, ValueError):
            raise ValidationError("Non-numeric cell {cell!r} in row {row}, column {col}".format(
                cell=cell, row=row + 2, col=column))
        if not numpy.isfinite(values[row]):
            raise ValidationError("Missing or non-finite cell in row {row}, column {col}".format(
                row=row + 2, col=column))
    return values


def load_csv(path, target_col, conditioning_cols=(), intercept=True, timestamp_col=None):
    """
    reads a comma separated file with a header row into a TimeSeriesDataset

    Every column that is neither the target, a conditioning column nor the
    timestamp column becomes a covariate, in file order. Row numbers in error
    messages count the header as row 1.

    :param str path: path to the CSV file
    :param str target_col: name of the target column
    :param list(str) conditioning_cols: names of the conditioning columns
    :param bool intercept: prefix the conditioning set with a unit column
    :param str timestamp_col: optional integer timestamp column
    :return: TimeSeriesDataset - the dataset
    """
    try:
        frame = pandas.read_csv(path, sep=",", dtype=str, keep_default_na=False, encoding="utf-8")
    except (OSError, pandas.errors.ParserError, pandas.errors.EmptyDataError) as err:
        raise ValidationError("Cannot read {}: {}".format(path, err))
    conditioning_cols = list(conditioning_cols)
    for col in [target_col] + conditioning_cols + ([timestamp_col] if timestamp_col else []):
        if col not in frame.columns:
            raise ValidationError("Column {} not found in {}".format(col, path))

    reserved = set([target_col] + conditioning_cols + ([timestamp_col] if timestamp_col else []))
    covariates = [c for c in frame.columns if c not in reserved]

    y = _parse_cells(frame, target_col)
    X = numpy.column_stack([_parse_cells(frame, c) for c in covariates]) if covariates else numpy.zeros((len(y), 0))
    Z = numpy.column_stack([_parse_cells(frame, c) for c in conditioning_cols]) if conditioning_cols else None
    timestamps = None
    if timestamp_col:
        timestamps = _parse_cells(frame, timestamp_col).astype(numpy.int64)

    m = len(conditioning_cols) + int(bool(intercept))
    if len(y) <= m + 1:
        raise DimensionError("{path} has {T} rows, need at least {n} for {m} conditioning columns".format(
            path=path, T=len(y), n=m + 2, m=m))
    return TimeSeriesDataset.from_arrays(y, X, Z, intercept=intercept, timestamps=timestamps,
                                         target_name=target_col, covariate_names=covariates,
                                         conditioning_names=conditioning_cols)


def save_csv(data, path):
    """
    writes a dataset in the format read by load_csv (the unit column is implied by the intercept flag)
    """
    data.to_frame().to_csv(path, sep=",", index=False, float_format="%.17g", encoding="utf-8")
