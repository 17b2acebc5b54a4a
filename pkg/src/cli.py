#!/usr/bin/env python
"""
Commandline entry point bundling the selection, forecasting, simulation and evaluation tools

usage: ocmt [-h] [-v] {simulate,select,forecast,evaluate} ...

positional arguments:
  {simulate,select,forecast,evaluate}
    simulate            Monte Carlo experiment from an experiment file
    select              Variable selection on a CSV file
    forecast            One-step-ahead forecasts after variable selection
    evaluate            MSFE, DM, PT, MDFA or irrepresentable condition

optional arguments:
  -h, --help            show this help message and exit
  -v, --verbose         Debug logging

Exit status 0 on success, 1 on invalid input, 2 on numerical failure.
"""
import argparse
import logging
import sys

from src import forecastevaluation, forecasting, simulation, variableselection
from src.exceptions import TOOL_ERRORS, exit_status

TOOLS = {
    "simulate": (simulation, "Monte Carlo experiment from an experiment file"),
    "select": (variableselection, "Variable selection on a CSV file"),
    "forecast": (forecasting, "One-step-ahead forecasts after variable selection"),
    "evaluate": (forecastevaluation, "MSFE, DM, PT, MDFA or irrepresentable condition"),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ocmt",
        description="Variable selection and forecasting with OCMT, Lasso, adaptive Lasso and L2-boosting.",
        epilog="Exit status 0 on success, 1 on invalid input, 2 on numerical failure.",
    )
    parser.add_argument("-v", "--verbose",
                        action="store_true",
                        help="Debug logging",
                        )
    commands = parser.add_subparsers(dest="command", required=True)
    for name, (tool, text) in TOOLS.items():
        sub = commands.add_parser(name, help=text, description=text)
        tool.add_arguments(sub)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s")
    tool = TOOLS[args.command][0]
    try:
        return tool.run(args)
    except TOOL_ERRORS as err:
        sys.stderr.write("{}: {}\n".format(args.command, err))
        return exit_status(err)


if __name__ == "__main__":
    sys.exit(main())
