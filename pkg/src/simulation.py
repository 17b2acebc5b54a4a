#!/usr/bin/env python
"""
Commandline tool for Monte Carlo experiments

usage: simulation [-h] -c CONFIG -o OUT [-p THREADS] [-R R] [-s SEED]
                  [-f {long,paper-style}] [-v]

Runs the experiments described by an experiment file and writes
summary.csv (averages over the dynamic and fit variants of every cell),
experiments.csv, replications.csv and manifest.json to OUT, plus the panel
table table.txt in the paper-style format.

optional arguments:
  -h, --help            show this help message and exit
  -c CONFIG, --config CONFIG
                        Experiment file with 'key = value' lines
  -o OUT, --out OUT     Output directory (created if missing)
  -p THREADS, --threads THREADS
                        Specifies number of worker processes. If not specified
                        all available logical cpus are used. OCMT_THREADS
                        overrides it.
  -R R, --R R           Overrides the replication count of the file
  -s SEED, --seed SEED  Overrides the master seed of the file
  -f {long,paper-style}, --table-format {long,paper-style}
                        long writes the CSV tables only, paper-style adds the
                        panel table table.txt (default from the file, else
                        paper-style)
  -v, --verbose         Debug logging

"""
import argparse
import dataclasses
import logging
import multiprocessing as mp
import os
import sys

from src.exceptions import TOOL_ERRORS, ValidationError, exit_status
from src.manifest import write_manifest
from src.montecarlo import TableFormat, load_config, run_experiment, write_outputs

THREADS_VARIABLE = "OCMT_THREADS"


def add_arguments(parser):
    parser.add_argument("-c", "--config",
                        required=True,
                        type=str,
                        help="Experiment file with 'key = value' lines",
                        )
    parser.add_argument("-o", "--out",
                        required=True,
                        type=str,
                        help="Output directory (created if missing)",
                        )
    parser.add_argument("-p", "--threads",
                        default=None,
                        type=int,
                        help="Specifies number of worker processes. If not specified all available logical cpus "
                             "are used. OCMT_THREADS overrides it.",
                        )
    parser.add_argument("-R", "--R",
                        dest="replications",
                        default=None,
                        type=int,
                        help="Overrides the replication count of the file",
                        )
    parser.add_argument("-s", "--seed",
                        default=None,
                        type=int,
                        help="Overrides the master seed of the file",
                        )
    parser.add_argument("-f", "--table-format",
                        default=None,
                        choices=[f.value for f in TableFormat],
                        help="long writes the CSV tables only, paper-style adds the panel table table.txt "
                             "(default from the file, else paper-style)",
                        )


def resolve_threads(flag, configured=None):
    """
    OCMT_THREADS, then --threads, then the experiment file, then the cpu count
    """
    env = os.environ.get(THREADS_VARIABLE, "").strip()
    if env:
        try:
            threads = int(env)
        except ValueError:
            raise ValidationError("{} must be an integer, got {!r}".format(THREADS_VARIABLE, env))
    elif flag is not None:
        threads = flag
    elif configured is not None:
        threads = configured
    else:
        threads = mp.cpu_count()
    if threads < 1:
        raise ValidationError("Need at least one worker, got {}".format(threads))
    return threads


def describe(cfg):
    return "N={} T={} {} {} fit{}".format(cfg.N, cfg.T, "dynamic" if cfg.dynamic else "static", cfg.fit.value,
                                          ", instability" if cfg.instability else "")


def run(args):
    plan = load_config(args.config)
    overrides = {}
    if args.replications is not None:
        overrides["R"] = args.replications
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.table_format is not None:
        overrides["table_format"] = TableFormat(args.table_format)
    if overrides:
        plan = dataclasses.replace(plan, **overrides)
    threads = resolve_threads(args.threads, plan.threads)
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as err:
        raise ValidationError("Cannot create output directory {}: {}".format(args.out, err))

    pipelines = plan.pipelines()
    summaries = []
    for cfg in plan.cells():
        logging.info("experiment {}: {} replications, {} pipelines".format(describe(cfg), cfg.R, len(pipelines)))
        summaries.append(run_experiment(cfg, pipelines, plan.settings, threads=threads,
                                        calibration_reps=plan.calibration_reps, msfe_scale=plan.msfe_scale))
        if summaries[-1].failures:
            logging.warning("experiment {}: {} failed pipeline runs".format(describe(cfg), summaries[-1].failures))

    write_outputs(summaries, args.out, plan.table_format)
    parameters = plan.as_dict()
    parameters["threads"] = threads
    write_manifest(os.path.join(args.out, "manifest.json"), "simulate", parameters,
                   config=os.path.abspath(args.config),
                   seeds="replication r of every experiment uses SeedSequence({}, spawn_key=(r,))".format(plan.seed),
                   calibration=[{"N": s.cfg.N, "T": s.cfg.T, "dynamic": s.cfg.dynamic, "fit": s.cfg.fit.value,
                                 "instability": s.cfg.instability, "tau_u": s.tau_u, "tau_eta": list(s.tau_eta)}
                                for s in summaries])
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Runs the Monte Carlo experiment described by an experiment file.",
    )
    add_arguments(parser)
    parser.add_argument("-v", "--verbose",
                        action="store_true",
                        help="Debug logging",
                        )
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        return run(args)
    except TOOL_ERRORS as err:
        sys.stderr.write("{}\n".format(err))
        return exit_status(err)


if __name__ == "__main__":
    sys.exit(main())
