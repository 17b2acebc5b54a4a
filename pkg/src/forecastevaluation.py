#!/usr/bin/env python
"""
Commandline tool for forecast evaluation

usage: forecastevaluation [-h] -me {msfe,dm,pt,mdfa,irc} [-a A] [-b B]
                          [-r REALIZED] [-hz HORIZON] [--drop-last-term]
                          [-d DATA] [-t TARGET] [-sg SIGNALS] [-sn SIGNS]
                          -o OUTPUT [-v]

Scores forecast files written by forecasting: mean squared forecast error,
pooled Diebold-Mariano test of A against B, pooled Pesaran-Timmermann test,
mean directional forecast accuracy, or checks the irrepresentable condition
on a covariate sample. DM p-values are two-sided, PT p-values one-sided
(upper tail).

optional arguments:
  -h, --help            show this help message and exit
  -me {msfe,dm,pt,mdfa,irc}, --metric {msfe,dm,pt,mdfa,irc}
                        Statistic to compute
  -a A, --a A           Forecast CSV of method A (series, period, forecast)
  -b B, --b B           Forecast CSV of method B (dm only)
  -r REALIZED, --realized REALIZED
                        CSV with series, period, realized (default the
                        realized column of A)
  -hz HORIZON, --horizon HORIZON
                        Forecast horizon; h > 1 uses Newey-West variances with
                        h - 1 lags (default 1)
  --drop-last-term      PT without the O(T^-2) variance term
  -d DATA, --data DATA  Covariate sample for irc (CSV with a header row)
  -t TARGET, --target TARGET
                        Target column of DATA, excluded from the covariates
  -sg SIGNALS, --signals SIGNALS
                        Comma separated signal covariates (irc)
  -sn SIGNS, --signs SIGNS
                        Comma separated signs of the signal coefficients,
                        e.g. +,- (irc)
  -o OUTPUT, --output OUTPUT
                        Single row CSV with the result
  -v, --verbose         Debug logging

"""
import argparse
import logging
import sys

import pandas
from scipy.stats import norm

from src.dataset import load_csv
from src.evaluation import DirectionPanel, LossPanel, irc_check, mdfa, msfe, panel_dm, pt_test
from src.exceptions import TOOL_ERRORS, ValidationError, exit_status
from src.manifest import write_manifest
from src.variableselection import manifest_path, split_columns

KEYS = ["series", "period"]


def add_arguments(parser):
    parser.add_argument("-me", "--metric",
                        required=True,
                        choices=["msfe", "dm", "pt", "mdfa", "irc"],
                        help="Statistic to compute",
                        )
    parser.add_argument("-a", "--a",
                        default=None,
                        type=str,
                        help="Forecast CSV of method A (series, period, forecast)",
                        )
    parser.add_argument("-b", "--b",
                        default=None,
                        type=str,
                        help="Forecast CSV of method B (dm only)",
                        )
    parser.add_argument("-r", "--realized",
                        default=None,
                        type=str,
                        help="CSV with series, period, realized (default the realized column of A)",
                        )
    parser.add_argument("-hz", "--horizon",
                        default=1,
                        type=int,
                        help="Forecast horizon; h > 1 uses Newey-West variances with h - 1 lags (default 1)",
                        )
    parser.add_argument("--drop-last-term",
                        action="store_true",
                        help="PT without the O(T^-2) variance term",
                        )
    parser.add_argument("-d", "--data",
                        default=None,
                        type=str,
                        help="Covariate sample for irc (CSV with a header row)",
                        )
    parser.add_argument("-t", "--target",
                        default=None,
                        type=str,
                        help="Target column of DATA, excluded from the covariates",
                        )
    parser.add_argument("-sg", "--signals",
                        default="",
                        type=str,
                        help="Comma separated signal covariates (irc)",
                        )
    parser.add_argument("-sn", "--signs",
                        default="",
                        type=str,
                        help="Comma separated signs of the signal coefficients, e.g. +,- (irc)",
                        )
    parser.add_argument("-o", "--output",
                        required=True,
                        type=str,
                        help="Single row CSV with the result",
                        )


def read_forecasts(path, column="forecast"):
    try:
        frame = pandas.read_csv(path, sep=",", encoding="utf-8")
    except (OSError, pandas.errors.ParserError, pandas.errors.EmptyDataError) as err:
        raise ValidationError("Cannot read {}: {}".format(path, err))
    missing = [c for c in KEYS + [column] if c not in frame.columns]
    if missing:
        raise ValidationError("Column(s) {} not found in {}".format(", ".join(missing), path))
    return frame


def merged(args, paths):
    """
    one frame with series, period, realized and a forecast column per method, in file order
    """
    if not args.a:
        raise ValidationError("Metric {} needs --a".format(args.metric))
    frames = []
    for i, path in enumerate(paths):
        frame = read_forecasts(path)
        keep = KEYS + ["forecast"] + (["realized"] if i == 0 and "realized" in frame.columns else [])
        frames.append(frame[keep].rename(columns={"forecast": "forecast_{}".format(i)}))
    frame = frames[0]
    if args.realized:
        frame = frame.drop(columns=["realized"], errors="ignore").merge(
            read_forecasts(args.realized, "realized")[KEYS + ["realized"]], on=KEYS, how="inner")
    elif "realized" not in frame.columns:
        raise ValidationError("{} has no realized column, pass --realized".format(paths[0]))
    for other in frames[1:]:
        frame = frame.merge(other, on=KEYS, how="inner")
    frame = frame.dropna(subset=["realized"])
    if frame.empty:
        raise ValidationError("No forecast has a matching realized value")
    return frame


def by_series(frame, column):
    return tuple(group[column].to_numpy(dtype=float) for _, group in frame.groupby("series", sort=False))


def evaluate(args):
    if args.metric == "irc":
        if not args.data or not args.target:
            raise ValidationError("Metric irc needs --data and --target")
        data = load_csv(args.data, args.target, intercept=False)
        signals = split_columns(args.signals)
        unknown = [s for s in signals if s not in data.covariate_names]
        if not signals or unknown:
            raise ValidationError("--signals must name covariates of {}, got {!r}".format(args.data, args.signals))
        signs = [-1.0 if s.strip().startswith("-") else 1.0 for s in split_columns(args.signs)] or [1.0] * len(signals)
        satisfied, lhs = irc_check(data.X, [data.covariate_names.index(s) for s in signals], signs)
        return {"metric": "irc", "value": lhs, "satisfied": satisfied}

    if args.metric == "dm":
        if not args.b:
            raise ValidationError("Metric dm needs --b")
        frame = merged(args, [args.a, args.b])
        errors_a = by_series(frame.assign(e=frame["realized"] - frame["forecast_0"]), "e")
        errors_b = by_series(frame.assign(e=frame["realized"] - frame["forecast_1"]), "e")
        value = panel_dm(LossPanel.from_errors(errors_a, errors_b, h=args.horizon))
        return {"metric": "dm", "value": value, "p_value": 2.0 * norm.sf(abs(value)), "forecasts": len(frame)}

    frame = merged(args, [args.a])
    if args.metric == "msfe":
        value = msfe(((frame["realized"] - frame["forecast_0"]) ** 2).to_numpy())
    else:
        panel = DirectionPanel(realized=by_series(frame, "realized"), forecast=by_series(frame, "forecast_0"))
        if args.metric == "mdfa":
            return {"metric": "mdfa", "value": mdfa(panel), "forecasts": len(frame)}
        value = pt_test(panel, last_term=not args.drop_last_term)
        # one-sided, only directional skill better than chance counts
        return {"metric": "pt", "value": value, "p_value": norm.sf(value), "forecasts": len(frame)}
    return {"metric": args.metric, "value": value, "forecasts": len(frame)}


def run(args):
    result = evaluate(args)
    pandas.DataFrame([result]).to_csv(args.output, index=False, float_format="%.10g")
    sys.stdout.write("{}\t{:.6f}\n".format(result["metric"], result["value"]))
    write_manifest(manifest_path(args.output), "evaluate", vars(args))
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Scores forecast files written by forecasting.",
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
