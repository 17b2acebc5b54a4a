#!/usr/bin/env python
"""
Commandline tool for variable selection

usage: variableselection [-h] -d DATA -t TARGET [-z CONDITIONING]
                         [--intercept | --no-intercept] [-ts TIMESTAMP]
                         [-m {ocmt,lasso,alasso,boosting}] [-p P] [-de DELTA]
                         [--hac] [-k FOLDS] [-s SEED] [-nu NU] [-mm MMAX]
                         [-w WEIGHTS] [-lg LAMBDA_GRID] [-ds] [-o OUTPUT] [-v]

Selects covariates for a target variable with OCMT, Lasso, adaptive Lasso or
L2-boosting. The output holds one block of rows per down-weighting coefficient.

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
  -m {ocmt,lasso,alasso,boosting}, --method {ocmt,lasso,alasso,boosting}
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
  -w WEIGHTS, --weights WEIGHTS
                        light, heavy, none or a comma separated grid (default
                        none)
  -lg LAMBDA_GRID, --lambda-grid LAMBDA_GRID
                        Comma separated down-weighting coefficients, overrides
                        --weights
  -ds, --downweight-selection
                        Select on down-weighted data, once per coefficient of
                        the grid (otherwise the grid only enters estimation)
  -o OUTPUT, --output OUTPUT
                        Writes every covariate with its statistics to CSV
  -v, --verbose         Debug logging

"""
import argparse
import logging
import os
import sys

import numpy
import pandas

from src.boosting import BoostConfig
from src.dataset import Selector, load_csv
from src.downweight import apply_weights, parse_scheme
from src.exceptions import TOOL_ERRORS, ValidationError, exit_status
from src.lassofamily import DEFAULT_FOLDS
from src.manifest import write_manifest
from src.ocmt import OcmtConfig
from src.postselection import SelectorOptions, select


def split_columns(text):
    if not text:
        return []
    return [c.strip() for c in text.split(",") if c.strip()]


def add_data_arguments(parser):
    parser.add_argument("-d", "--data",
                        required=True,
                        type=str,
                        help="CSV file with a header row",
                        )
    parser.add_argument("-t", "--target",
                        required=True,
                        type=str,
                        help="Name of the target column",
                        )
    parser.add_argument("-z", "--conditioning",
                        default="",
                        type=str,
                        help="Comma separated conditioning (always included) columns",
                        )
    parser.add_argument("--intercept",
                        default=True,
                        action=argparse.BooleanOptionalAction,
                        help="Add a unit column to the conditioning set (default on)",
                        )
    parser.add_argument("-ts", "--timestamp",
                        default=None,
                        type=str,
                        help="Integer timestamp column (not a covariate)",
                        )


def add_selector_arguments(parser, methods):
    parser.add_argument("-m", "--method",
                        default="ocmt",
                        choices=methods,
                        help="Selection method (default ocmt)",
                        )
    parser.add_argument("-p", "--p",
                        default=0.05,
                        type=float,
                        help="OCMT test size (default 0.05)",
                        )
    parser.add_argument("-de", "--delta",
                        default=1.0,
                        type=float,
                        help="OCMT critical value exponent (default 1)",
                        )
    parser.add_argument("--hac",
                        action="store_true",
                        help="OCMT with Newey-West standard errors",
                        )
    parser.add_argument("-k", "--folds",
                        default=DEFAULT_FOLDS,
                        type=int,
                        help="Cross-validation folds of the Lasso (default 10)",
                        )
    parser.add_argument("-s", "--seed",
                        default=None,
                        type=int,
                        help="Seed of the fold assignment (required for lasso and alasso)",
                        )
    parser.add_argument("-nu", "--nu",
                        default=0.5,
                        type=float,
                        help="Boosting step size (default 0.5)",
                        )
    parser.add_argument("-mm", "--mmax",
                        default=500,
                        type=int,
                        help="Boosting iteration cap (default 500)",
                        )


def add_weight_arguments(parser, default):
    parser.add_argument("-w", "--weights",
                        default=default,
                        type=str,
                        help="light, heavy, none or a comma separated grid (default {})".format(default),
                        )
    parser.add_argument("-lg", "--lambda-grid",
                        default=None,
                        type=str,
                        help="Comma separated down-weighting coefficients, overrides --weights",
                        )


def resolve_scheme(args):
    return parse_scheme(args.lambda_grid if args.lambda_grid else args.weights)


def add_arguments(parser):
    add_data_arguments(parser)
    add_selector_arguments(parser, ["ocmt", "lasso", "alasso", "boosting"])
    add_weight_arguments(parser, "none")
    parser.add_argument("-ds", "--downweight-selection",
                        action="store_true",
                        help="Select on down-weighted data, once per coefficient of the grid "
                             "(otherwise the grid only enters estimation)",
                        )
    parser.add_argument("-o", "--output",
                        default=None,
                        type=str,
                        help="Writes every covariate with its statistics to CSV",
                        )


def read_data(args):
    return load_csv(args.data, args.target, split_columns(args.conditioning), intercept=args.intercept,
                    timestamp_col=args.timestamp)


def selector_options(args, signals=()):
    if args.method in ("lasso", "alasso") and args.seed is None:
        raise ValidationError("Method {} needs a seed (--seed)".format(args.method))
    return SelectorOptions(ocmt=OcmtConfig(p=args.p, delta=args.delta, hac=args.hac), folds=args.folds,
                           seed=args.seed, boost=BoostConfig(nu=args.nu, m_max=args.mmax), signals=tuple(signals))


def manifest_path(output):
    return os.path.splitext(output)[0] + ".manifest.json"


def selection_frame(data, lam, result):
    nan = numpy.full(data.N, numpy.nan)
    return pandas.DataFrame({"lambda": lam,
                             "covariate": data.covariate_names,
                             "selected": result.included,
                             "t_stat": result.t_stats if result.t_stats is not None else nan,
                             "coefficient": result.coefficients if result.coefficients is not None else nan})


def run(args):
    data = read_data(args)
    options = selector_options(args)
    scheme = resolve_scheme(args)
    if args.downweight_selection:
        grid = scheme.grid
    else:
        grid = (1.0,)
        if scheme.grid != (1.0,):
            logging.info("Selection on unweighted data, the grid {} only enters estimation".format(scheme.grid))

    frames = []
    diagnostics = {}
    for lam in grid:
        sample = apply_weights(data, lam) if lam != 1.0 else data
        result = select(Selector(args.method), sample, options)
        frame = selection_frame(data, lam, result)
        frames.append(frame)
        diagnostics["{:g}".format(lam)] = dict(result.diagnostics)

        if len(grid) > 1:
            sys.stdout.write("#lambda\t{:g}\n".format(lam))
        if result.critical_value is not None:
            sys.stdout.write("#critical value\t{:.6f}\n".format(result.critical_value))
        sys.stdout.write("#selected\t{} of {}\n".format(result.k_hat, data.N))
        for _, row in frame[frame["selected"]].iterrows():
            stat = row["t_stat"] if result.t_stats is not None else row["coefficient"]
            sys.stdout.write("{}\t{:.6f}\n".format(row["covariate"], stat))

    if args.output:
        pandas.concat(frames, ignore_index=True).to_csv(args.output, index=False, float_format="%.10g")
        write_manifest(manifest_path(args.output), "select", vars(args), grid=list(grid),
                       diagnostics=diagnostics)
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Selects covariates for a target variable with OCMT, Lasso, adaptive Lasso or L2-boosting.",
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
