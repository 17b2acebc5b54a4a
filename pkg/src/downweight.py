"""
Exponential down-weighting of observations.

Observation t of T is scaled by lambda^(T - t), so the most recent observation
keeps its value. Weighting is applied to the raw data; projection on the
conditioning set happens afterwards, on the weighted numbers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy

from src.data.grids import grids
from src.dataset import TimeSeriesDataset, WeightLabel, WeightScheme
from src.exceptions import ValidationError


@dataclass(frozen=True)
class WeightedDataset(object):
    base: TimeSeriesDataset
    lam: float
    wy: numpy.ndarray
    wX: numpy.ndarray
    wZ: numpy.ndarray

    @property
    def dataset(self):
        """
        the weighted numbers packed as a TimeSeriesDataset, so any selector can run on them
        """
        if self.lam == 1.0:
            return self.base
        return self.base.replace_arrays(self.wy, self.wX, self.wZ)


def weights(T, lam):
    """
    returns (lambda^(T-1), ..., lambda, 1)
    """
    if not 0.0 < lam <= 1.0:
        raise ValidationError("Down-weighting coefficient {} outside (0, 1]".format(lam))
    return numpy.power(float(lam), numpy.arange(T - 1, -1, -1, dtype=numpy.float64))


def apply_weights(data, lam):
    """
    scales every observation of y, X and Z by lambda^(T - t)

    :param TimeSeriesDataset data: the unweighted data
    :param float lam: down-weighting coefficient in (0, 1]
    :return: WeightedDataset - the weighted observations
    """
    w = weights(data.T, lam)
    wy = data.y * w
    wX = data.X * w[:, None]
    wZ = data.Z * w[:, None]
    for arr in (wy, wX, wZ):
        arr.setflags(write=False)
    return WeightedDataset(base=data, lam=float(lam), wy=wy, wX=wX, wZ=wZ)


def standard_grid(label):
    """
    the light, heavy or trivial grid of down-weighting coefficients

    :param label: WeightLabel or its string value
    :return: WeightScheme
    """
    label = WeightLabel(label) if not isinstance(label, WeightLabel) else label
    if label == WeightLabel.CUSTOM:
        raise ValidationError("A custom grid has no standard values")
    return WeightScheme(grid=grids[label.value], label=label)


def parse_scheme(text):
    """
    reads 'light', 'heavy', 'none' or a comma separated list such as '0.9,0.95,1.0'
    """
    text = str(text).strip().lower()
    if text in grids:
        return standard_grid(text)
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip() != "")
    except ValueError:
        raise ValidationError("Cannot read down-weighting grid {!r}".format(text))
    label = WeightLabel.NONE if values == (1.0,) else WeightLabel.CUSTOM
    return WeightScheme(grid=values, label=label)
