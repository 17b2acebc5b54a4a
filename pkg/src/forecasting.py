#!/usr/bin/env python
"""
Commandline tool for one-step-ahead forecasting after variable selection

usage: forecasting [-h] -d DATA -t TARGET [-z CONDITIONING]
                   [--intercept | --no-intercept] [-ts TIMESTAMP]
                   [-m {ocmt,lasso,alasso,boosting,oracle}] [-p P] [-de DELTA]
                   [--hac] [-k FOLDS] [-s SEED] [-nu NU] [-mm MMAX]
                   [-e {ls,native}] [-pr {est-weighted,both-weighted,none}]
                   [-ds] [-w WEIGHTS] [-lg LAMBDA_GRID] [-sg SIGNALS]
                   [-n NEXT | -x EXPANDING] [-sr SERIES] -o OUTPUT [-v]

Forecasts the target one step ahead with the model picked by a selection
method, estimated by least squares on (down-weighted) observations and
averaged over a grid of down-weighting coefficients. Without --next or
--expanding the last row of the data is held out and forecast.

optional arguments:
  -h, --help            show this help message and exit
  -d DATA, --data DATA  CSV file with a header row
  -t TARGET, --target TARGET
                        Name of the target column
  -z CONDITIONING, --conditioning CONDITIONING
                        Comma separated conditioning (always included) columns
  --intercept, --no-intercept
                        Add a unit column to the conditioning set (default on)
  -ts TIMESTAMP, --timestamp TIMESTAMP
                        Integer timestamp column (not a covariate)
  -m {ocmt,lasso,alasso,boosting,oracle}, --method {ocmt,lasso,alasso,boosting,oracle}
                        Selection method (default ocmt)
  -p P, --p P           OCMT test size (default 0.05)
  -de DELTA, --delta DELTA
                        OCMT critical value exponent (default 1)
  --hac                 OCMT with Newey-West standard errors
  -k FOLDS, --folds FOLDS
                        Cross-validation folds of the Lasso (default 10)
  -s SEED, --seed SEED  Seed of the fold assignment (required for lasso and
                        alasso)
  -nu NU, --nu NU       Boosting step size (default 0.5)
  -mm MMAX, --mmax MMAX
                        Boosting iteration cap (default 500)
  -e {ls,native}, --estimator {ls,native}
                        Least squares after selection or the coefficients of
                        the selector itself (default ls)
  -pr {est-weighted,both-weighted,none}, --protocol {est-weighted,both-weighted,none}
                        Where down-weighting enters (default est-weighted)
  -ds, --downweight-selection
                        Down-weight in selection as well, same as --protocol
                        both-weighted
  -w WEIGHTS, --weights WEIGHTS
                        light, heavy, none or a comma separated grid (default
                        light)
  -lg LAMBDA_GRID, --lambda-grid LAMBDA_GRID
                        Comma separated down-weighting coefficients, overrides
                        --weights
  -sg SIGNALS, --signals SIGNALS
                        Comma separated covariates of the oracle model
  -n NEXT, --next NEXT  CSV file with the single row to forecast
  -x EXPANDING, --expanding EXPANDING
                        Expanding window: forecast every row after the first
                        EXPANDING rows
  -sr SERIES, --series SERIES
                        Series label in the output (default the target name)
  -o OUTPUT, --output OUTPUT
                        Output CSV (series, period, forecast, realized, ...)
  -v, --verbose         Debug logging

"""
import argparse
import logging
import sys

import numpy
import pandas

from src.dataset import Selector, UNIT_COLUMN
from src.exceptions import TOOL_ERRORS, ValidationError, exit_status
from src.manifest import write_manifest
from src.postselection import Estimator, Protocol, grid_forecast
from src.variableselection import (add_data_arguments, add_selector_arguments, add_weight_arguments, manifest_path,
                                   read_data, resolve_scheme, selector_options, split_columns)

COLUMNS = ["series", "period", "forecast", "realized", "method", "estimator", "protocol", "weights", "k_hat"]


def add_arguments(parser):
    add_data_arguments(parser)
    add_selector_arguments(parser, ["ocmt", "lasso", "alasso", "boosting", "oracle"])
    parser.add_argument("-e", "--estimator",
                        default="ls",
                        choices=["ls", "native"],
                        help="Least squares after selection or the coefficients of the selector itself (default ls)",
                        )
    parser.add_argument("-pr", "--protocol",
                        default="est-weighted",
                        choices=[p.value for p in Protocol],
                        help="Where down-weighting enters (default est-weighted)",
                        )
    parser.add_argument("-ds", "--downweight-selection",
                        dest="protocol",
                        action="store_const",
                        const=Protocol.SELECT_AND_ESTIMATE_WEIGHTED.value,
                        help="Down-weight in selection as well, same as --protocol both-weighted",
                        )
    add_weight_arguments(parser, "light")
    parser.add_argument("-sg", "--signals",
                        default="",
                        type=str,
                        help="Comma separated covariates of the oracle model",
                        )
    target = parser.add_mutually_exclusive_group()
    target.add_argument("-n", "--next",
                        default=None,
                        type=str,
                        help="CSV file with the single row to forecast",
                        )
    target.add_argument("-x", "--expanding",
                        default=None,
                        type=int,
                        help="Expanding window: forecast every row after the first EXPANDING rows",
                        )
    parser.add_argument("-sr", "--series",
                        default=None,
                        type=str,
                        help="Series label in the output (default the target name)",
                        )
    parser.add_argument("-o", "--output",
                        required=True,
                        type=str,
                        help="Output CSV (series, period, forecast, realized, ...)",
                        )


def read_next(path, data):
    """
    conditioning values and covariates of the row to forecast, plus the target if the file has it

    :return: tuple(numpy.ndarray, numpy.ndarray, float) - z, x and the realized value (or None)
    """
    try:
        frame = pandas.read_csv(path, sep=",", encoding="utf-8")
    except (OSError, pandas.errors.ParserError, pandas.errors.EmptyDataError) as err:
        raise ValidationError("Cannot read {}: {}".format(path, err))
    if len(frame) != 1:
        raise ValidationError("{} must hold exactly one row, found {}".format(path, len(frame)))
    row = frame.iloc[0]
    needed = [c for c in data.conditioning_names if c != UNIT_COLUMN] + list(data.covariate_names)
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise ValidationError("Column(s) {} not found in {}".format(", ".join(missing), path))
    try:
        z = numpy.array([1.0 if c == UNIT_COLUMN else float(row[c]) for c in data.conditioning_names])
        x = numpy.array([float(row[c]) for c in data.covariate_names])
        realized = float(row[data.target_name]) if data.target_name in frame.columns else None
    except (TypeError, ValueError) as err:
        raise ValidationError("Non-numeric cell in {}: {}".format(path, err))
    return z, x, realized


def origins(args, data):
    """
    (estimation rows, forecast row index or None) per forecast
    """
    if args.next:
        return [(data.T, None)]
    if args.expanding is None:
        return [(data.T - 1, data.T - 1)]
    if not data.m + 2 <= args.expanding < data.T:
        raise ValidationError("Expanding window start {} outside [{}, {})".format(args.expanding, data.m + 2,
                                                                                  data.T))
    return [(t, t) for t in range(args.expanding, data.T)]


def run(args):
    data = read_data(args)
    signals = split_columns(args.signals)
    unknown = [s for s in signals if s not in data.covariate_names]
    if unknown or (args.method == "oracle" and not signals):
        raise ValidationError("--signals must name covariates of the data (required for oracle), got {!r}".format(
            args.signals))
    options = selector_options(args, [data.covariate_names.index(s) for s in signals])
    scheme = resolve_scheme(args)
    series = args.series or data.target_name

    rows = []
    for n_rows, index in origins(args, data):
        sample = data.head(n_rows)
        if index is None:
            z_next, x_next, realized = read_next(args.next, data)
            period = None
        else:
            z_next, x_next, realized = data.Z[index], data.X[index], float(data.y[index])
            period = int(data.timestamps[index]) if data.timestamps is not None else index + 1
        record = grid_forecast(sample, Protocol(args.protocol), Selector(args.method), scheme, z_next, x_next,
                               estimator=Estimator(args.estimator), options=options, realized=realized)
        logging.info("period {}: forecast {:.6f}".format(period, record.point_forecast))
        rows.append({"series": series, "period": period, "forecast": record.point_forecast,
                     "realized": realized, "method": args.method, "estimator": args.estimator,
                     "protocol": args.protocol, "weights": scheme.label.value,
                     "k_hat": float(numpy.mean([step.selection.k_hat for step in record.runs]))})

    pandas.DataFrame(rows, columns=COLUMNS).to_csv(args.output, index=False, float_format="%.10g")
    write_manifest(manifest_path(args.output), "forecast", vars(args), grid=list(scheme.grid))
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Forecasts the target one step ahead with the model picked by a selection method.",
    )
    add_arguments(parser)
    parser.add_argument("-v", "--verbose",
                        action="store_true",
                        help="Debug logging",
                        )
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return run(args)
    except TOOL_ERRORS as err:
        sys.stderr.write("{}\n".format(err))
        return exit_status(err)


if __name__ == "__main__":
    sys.exit(main())
