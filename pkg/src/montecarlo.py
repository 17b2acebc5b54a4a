"""
Monte Carlo campaigns: replications of the simulation design, every requested
forecast pipeline per replication, and the aggregated summary tables.

Replication r (0-based) draws everything from
default_rng(SeedSequence(seed, spawn_key=(r,))), so its numbers depend
neither on R nor on the number of worker processes.
"""
from __future__ import annotations

import configparser
import enum
import itertools
import logging
import math
import multiprocessing as mp
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy
import pandas

from src.boosting import BoostConfig
from src.data import designs
from src.dataset import Selector, WeightLabel, WeightScheme
from src.downweight import parse_scheme, standard_grid
from src.dgp import DgpConfig, FitTarget, calibrate, replication_rng, simulate_replication
from src.evaluation import tpr_fpr
from src.exceptions import OcmtError, ValidationError
from src.lassofamily import DEFAULT_FOLDS
from src.ocmt import OcmtConfig
from src.postselection import Estimator, Protocol, SelectorOptions, grid_forecast

SUMMARY_COLUMNS = ["method", "protocol", "weights", "N", "T", "khat", "tpr", "fpr", "msfe"]


@dataclass(frozen=True)
class Pipeline(object):
    selector: Selector
    protocol: Protocol = Protocol.NO_WEIGHTING
    scheme: WeightScheme = field(default_factory=lambda: standard_grid(WeightLabel.NONE))
    estimator: Estimator = Estimator.LS

    @property
    def method(self):
        if self.estimator == Estimator.NATIVE:
            return "{}-native".format(self.selector.value)
        return self.selector.value

    @property
    def weights(self):
        if self.scheme.label == WeightLabel.CUSTOM:
            return ",".join("{:g}".format(v) for v in self.scheme.grid)
        return self.scheme.label.value


def build_pipelines(methods, protocols, weights):
    """
    every method under every protocol and grid; 'none' runs once without a grid

    Methods are selector names, optionally suffixed with ':native' for
    selector-native coefficients. Native pipelines skip the protocol that
    selects on unweighted data and estimates on weighted data.

    :param list(str) methods: e.g. ['ocmt', 'lasso:native']
    :param list(str) protocols: e.g. ['est-weighted', 'none']
    :param list(str) weights: e.g. ['light', 'heavy']
    :return: list(Pipeline)
    """
    pipelines = []
    schemes = [parse_scheme(w) for w in weights]
    for method in methods:
        name, _, suffix = method.strip().lower().partition(":")
        try:
            selector = Selector(name)
            estimator = Estimator(suffix) if suffix else Estimator.LS
        except ValueError:
            raise ValidationError("Unknown method {!r}".format(method))
        if estimator == Estimator.NATIVE and selector in (Selector.OCMT, Selector.ORACLE):
            raise ValidationError("Method {} has no native coefficients".format(name))
        for text in protocols:
            try:
                protocol = Protocol(text.strip().lower())
            except ValueError:
                raise ValidationError("Unknown protocol {!r}".format(text))
            if protocol == Protocol.NO_WEIGHTING:
                pipelines.append(Pipeline(selector, protocol, standard_grid(WeightLabel.NONE), estimator))
                continue
            if estimator == Estimator.NATIVE and protocol == Protocol.SELECT_UNWEIGHTED_ESTIMATE_WEIGHTED:
                continue
            for scheme in schemes:
                if scheme.label != WeightLabel.NONE:
                    pipelines.append(Pipeline(selector, protocol, scheme, estimator))
    return pipelines


@dataclass(frozen=True)
class SelectorSettings(object):
    p: float = 0.05
    delta: float = 1.0
    hac: bool = False
    folds: int = DEFAULT_FOLDS
    nu: float = 0.5
    mmax: int = 500

    def options(self, seed, signals):
        return SelectorOptions(ocmt=OcmtConfig(p=self.p, delta=self.delta, hac=self.hac), folds=self.folds,
                               seed=seed, boost=BoostConfig(nu=self.nu, m_max=self.mmax), signals=tuple(signals))


def _score(rep, pipeline, options):
    record = grid_forecast(rep.data, pipeline.protocol, pipeline.selector, pipeline.scheme, rep.z_next,
                           rep.x_next, estimator=pipeline.estimator, options=options, realized=rep.y_next)
    truth = numpy.zeros(rep.data.N, dtype=bool)
    truth[list(rep.signals)] = True
    rates = [tpr_fpr(run.selection, truth) for run in record.runs]
    return {"k_hat": float(numpy.mean([run.selection.k_hat for run in record.runs])),
            "tpr": float(numpy.mean([r[0] for r in rates])),
            "fpr": float(numpy.mean([r[1] for r in rates])),
            "forecast": record.point_forecast,
            "sq_error": record.error ** 2}


def replicate(job):
    """
    one replication: simulate, run every pipeline, score

    :param tuple job: (DgpConfig, tau_u, tau_eta, pipelines, SelectorSettings, r)
    :return: tuple(int, list(dict)) - the replication index and one record per pipeline
    """
    cfg, tau_u, tau_eta, pipelines, settings, r = job
    rng = replication_rng(cfg.seed, r)
    selector_seed = int(rng.integers(2 ** 31))
    records = []
    try:
        rep = simulate_replication(cfg, tau_u, tau_eta, rng)
    except OcmtError as err:
        logging.warning("Replication {} failed to simulate: {}".format(r, err))
        return r, [_failed(r, p, err) for p in pipelines]

    options = settings.options(selector_seed, rep.signals)
    for pipeline in pipelines:
        try:
            scores = _score(rep, pipeline, options)
        except OcmtError as err:
            logging.warning("Replication {r}, {m}/{p}/{w} failed: {e}".format(
                r=r, m=pipeline.method, p=pipeline.protocol.value, w=pipeline.weights, e=err))
            records.append(_failed(r, pipeline, err))
            continue
        records.append(dict(_labels(r, pipeline), failed=False, message="", **scores))
    return r, records


def _labels(r, pipeline):
    return {"replication": r, "method": pipeline.method, "protocol": pipeline.protocol.value,
            "weights": pipeline.weights}


def _failed(r, pipeline, err):
    return dict(_labels(r, pipeline), failed=True, message=str(err), k_hat=numpy.nan, tpr=numpy.nan,
                fpr=numpy.nan, forecast=numpy.nan, sq_error=numpy.nan)


@dataclass(frozen=True, eq=False)
class ExperimentSummary(object):
    """
        Means over the successful replications of every pipeline, plus the
        per-replication records they were computed from.
    """
    cfg: DgpConfig
    table: pandas.DataFrame
    records: pandas.DataFrame
    tau_u: float
    tau_eta: Tuple[float, ...]

    @property
    def replications(self):
        return self.cfg.R

    @property
    def failures(self):
        return int(self.records["failed"].sum())


def aggregate(cfg, pipelines, records, msfe_scale=1.0):
    rows = []
    for pipeline in pipelines:
        mine = records[(records["method"] == pipeline.method) & (records["protocol"] == pipeline.protocol.value)
                       & (records["weights"] == pipeline.weights)]
        ok = mine[~mine["failed"].astype(bool)]
        if ok.empty:
            logging.warning("Every replication of {}/{}/{} failed".format(
                pipeline.method, pipeline.protocol.value, pipeline.weights))
        rows.append({"method": pipeline.method, "protocol": pipeline.protocol.value, "weights": pipeline.weights,
                     "N": cfg.N, "T": cfg.T,
                     "khat": ok["k_hat"].mean() if not ok.empty else numpy.nan,
                     "tpr": ok["tpr"].mean() if not ok.empty else numpy.nan,
                     "fpr": ok["fpr"].mean() if not ok.empty else numpy.nan,
                     "msfe": msfe_scale * ok["sq_error"].mean() if not ok.empty else numpy.nan,
                     "replications": int(len(ok)), "failures": int(len(mine) - len(ok))})
    return pandas.DataFrame(rows, columns=SUMMARY_COLUMNS + ["replications", "failures"])


def run_experiment(cfg, pipelines, settings=None, threads=1, calibration_reps=designs.calibration["reps"],
                   msfe_scale=1.0, tau=None):
    """
    runs R replications of one design

    :param DgpConfig cfg: design, replication count and master seed
    :param list(Pipeline) pipelines: forecast pipelines to score
    :param SelectorSettings settings: selector tuning
    :param int threads: worker processes (1 runs in process)
    :param int calibration_reps: draws per tau_u calibration batch
    :param float msfe_scale: factor applied to the reported MSFE
    :param tuple tau: precomputed (tau_eta, tau_u), skips the calibration
    :return: ExperimentSummary
    """
    settings = settings or SelectorSettings()
    if not pipelines:
        raise ValidationError("No forecast pipeline requested")
    if tau is None:
        tau_eta, tau_u = calibrate(cfg, calibration_reps)
    else:
        tau_eta, tau_u = tau
    logging.info("N={N} T={T}: tau_u={u:.4f}, tau_eta={e}".format(N=cfg.N, T=cfg.T, u=tau_u,
                                                                  e=numpy.round(tau_eta, 4).tolist()))

    jobs = [(cfg, tau_u, tau_eta, pipelines, settings, r) for r in range(cfg.R)]
    results = [None] * cfg.R
    step = max(1, int(math.ceil(cfg.R / 10.0)))
    if threads > 1 and cfg.R > 1:
        pool = mp.Pool(threads)
        try:
            for done, (r, records) in enumerate(pool.imap_unordered(replicate, jobs), 1):
                results[r] = records
                if done % step == 0:
                    logging.info("{}/{} replications".format(done, cfg.R))
        finally:
            pool.close()
            pool.join()
    else:
        for done, job in enumerate(jobs, 1):
            r, records = replicate(job)
            results[r] = records
            if done % step == 0:
                logging.info("{}/{} replications".format(done, cfg.R))

    records = pandas.DataFrame(list(itertools.chain.from_iterable(results)))
    table = aggregate(cfg, pipelines, records, msfe_scale)
    return ExperimentSummary(cfg=cfg, table=table, records=records, tau_u=float(tau_u),
                             tau_eta=tuple(float(v) for v in numpy.ravel(tau_eta)))


KEYS = {"N", "T", "R", "dynamic", "instability", "fit", "methods", "protocols", "weights", "seed", "p", "delta",
        "folds", "nu", "mmax", "threads", "calibration_reps", "msfe_scale", "hac", "table_format"}

STATISTICS = ["msfe", "khat", "tpr", "fpr"]
PANELS = {False: "A: no instability", True: "B: instability"}


class TableFormat(enum.Enum):
    LONG = "long"
    PAPER_STYLE = "paper-style"


def _list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


@dataclass(frozen=True)
class ExperimentPlan(object):
    """
        Contents of an experiment file. N and T may list several values, and
        so may dynamic, instability and fit: every (instability, N, T) cell of
        the summary averages the experiments over the listed dynamic and fit
        values, e.g. 'dynamic = no, yes' with 'fit = low, high' for four.
    """
    N: Tuple[int, ...] = (20,)
    T: Tuple[int, ...] = (100,)
    R: int = 2000
    dynamic: Tuple[bool, ...] = (False,)
    instability: Tuple[bool, ...] = (False,)
    fit: Tuple[FitTarget, ...] = (FitTarget.LOW,)
    methods: Tuple[str, ...] = ("ocmt", "lasso", "alasso", "boosting", "oracle")
    protocols: Tuple[str, ...] = ("none",)
    weights: Tuple[str, ...] = ("light",)
    seed: int = 1
    settings: SelectorSettings = field(default_factory=SelectorSettings)
    threads: Optional[int] = None
    calibration_reps: int = designs.calibration["reps"]
    msfe_scale: float = 1.0
    table_format: TableFormat = TableFormat.PAPER_STYLE

    def __post_init__(self):
        object.__setattr__(self, "fit", tuple(FitTarget(f) for f in self.fit))
        object.__setattr__(self, "table_format", TableFormat(self.table_format))
        for name in ("N", "T", "dynamic", "instability", "fit"):
            if not getattr(self, name):
                raise ValidationError("Experiment key {} lists no value".format(name))

    def cells(self):
        for instability, N, T in itertools.product(self.instability, self.N, self.T):
            for dynamic, fit in itertools.product(self.dynamic, self.fit):
                yield DgpConfig(N=N, T=T, dynamic=dynamic, instability=instability, fit=fit, R=self.R,
                                seed=self.seed)

    def pipelines(self):
        return build_pipelines(self.methods, self.protocols, self.weights)

    def as_dict(self):
        return {"N": list(self.N), "T": list(self.T), "R": self.R, "dynamic": list(self.dynamic),
                "instability": list(self.instability), "fit": [f.value for f in self.fit],
                "methods": list(self.methods), "protocols": list(self.protocols), "weights": list(self.weights),
                "seed": self.seed, "p": self.settings.p, "delta": self.settings.delta, "hac": self.settings.hac,
                "folds": self.settings.folds, "nu": self.settings.nu, "mmax": self.settings.mmax,
                "threads": self.threads, "calibration_reps": self.calibration_reps, "msfe_scale": self.msfe_scale,
                "table_format": self.table_format.value}


def load_config(path):
    """
    reads a flat 'key = value' experiment file ('#' starts a comment)

    :param str path: path to the file
    :return: ExperimentPlan
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as handle:
            parser.read_string("[experiment]\n" + handle.read(), source=path)
    except (OSError, configparser.Error) as err:
        raise ValidationError("Cannot read experiment file {}: {}".format(path, err))
    return plan_from_mapping(parser["experiment"])


def plan_from_mapping(section):
    unknown = set(section.keys()) - KEYS
    if unknown:
        raise ValidationError("Unknown experiment key(s): {}".format(", ".join(sorted(unknown))))
    kwargs = {}
    settings = {}
    try:
        for key, value in section.items():
            if key in ("N", "T"):
                kwargs[key] = tuple(int(v) for v in _list(value))
            elif key in ("R", "seed", "calibration_reps"):
                kwargs[key] = int(value)
            elif key == "threads":
                kwargs[key] = int(value) if value.strip().lower() not in ("", "auto") else None
            elif key in ("dynamic", "instability"):
                kwargs[key] = tuple(_boolean(key, v) for v in _list(value))
            elif key == "fit":
                kwargs[key] = tuple(FitTarget(v.lower()) for v in _list(value))
            elif key in ("methods", "protocols", "weights"):
                kwargs[key] = tuple(_list(value)) if key != "weights" else tuple(_weights(value))
            elif key == "msfe_scale":
                kwargs[key] = float(value)
            elif key == "table_format":
                kwargs[key] = TableFormat(value.strip().lower())
            elif key in ("p", "delta", "nu"):
                settings[key] = float(value)
            elif key in ("folds", "mmax"):
                settings[key] = int(value)
            elif key == "hac":
                settings[key] = _boolean(key, value)
    except ValueError as err:
        if isinstance(err, ValidationError):
            raise
        raise ValidationError("Bad experiment value: {}".format(err))
    plan = ExperimentPlan(settings=SelectorSettings(**settings), **kwargs)
    # fail early on bad method, protocol or grid names
    plan.pipelines()
    return plan


def _boolean(key, value):
    text = value.strip().lower()
    if text in ("1", "yes", "true", "on"):
        return True
    if text in ("0", "no", "false", "off"):
        return False
    raise ValidationError("Key {} expects a boolean, got {!r}".format(key, value))


def _weights(value):
    """
    grid names separated by commas, or one explicit grid in brackets: '[0.9, 0.95, 1]'
    """
    text = value.strip()
    if text.startswith("["):
        return [text.strip("[]")]
    return _list(text)


def _with_design(frame, cfg):
    frame = frame.copy()
    frame.insert(0, "fit", cfg.fit.value)
    frame.insert(0, "dynamic", cfg.dynamic)
    frame.insert(0, "instability", cfg.instability)
    return frame


def experiments_frame(summaries):
    """
    one summary row per experiment and pipeline, labelled with the design
    """
    return pandas.concat([_with_design(s.table, s.cfg) for s in summaries], ignore_index=True)


def average_experiments(summaries):
    """
    means over the experiments of every (instability, N, T) cell

    :param list(ExperimentSummary) summaries: one per experiment
    :return: pandas.DataFrame - the summary columns, the panel flag, the number of
             experiments averaged and the replication and failure counts summed over them
    """
    frame = experiments_frame(summaries)
    keys = ["instability", "N", "T", "method", "protocol", "weights"]
    table = frame.groupby(keys, sort=False).agg(
        khat=("khat", "mean"), tpr=("tpr", "mean"), fpr=("fpr", "mean"), msfe=("msfe", "mean"),
        experiments=("dynamic", "size"), replications=("replications", "sum"),
        failures=("failures", "sum")).reset_index()
    return table[SUMMARY_COLUMNS + ["instability", "experiments", "replications", "failures"]]


def records_frame(summaries):
    frames = []
    for s in summaries:
        frame = s.records.copy()
        frame.insert(0, "T", s.cfg.T)
        frame.insert(0, "N", s.cfg.N)
        frames.append(_with_design(frame, s.cfg))
    return pandas.concat(frames, ignore_index=True)


def panel_table(summaries):
    """
    the experiment averages laid out as a publication table: panel A without
    and panel B with parameter instability, methods in rows, MSFE, k_hat, TPR
    and FPR of every (N, T) cell in columns
    """
    frame = average_experiments(summaries)
    frame = frame.assign(panel=frame["instability"].map(PANELS),
                         label=frame["method"] + " / " + frame["protocol"] + " / " + frame["weights"])
    wide = frame.pivot_table(index=["panel", "label"], columns=["N", "T"], values=STATISTICS, sort=False)
    cells = list(dict.fromkeys(zip(frame["N"], frame["T"])))
    columns = pandas.MultiIndex.from_tuples([(s, N, T) for N, T in cells for s in STATISTICS])
    wide = wide.reindex(columns=columns).reorder_levels([1, 2, 0], axis=1)
    wide.columns.names = ["N", "T", "statistic"]
    wide = wide.sort_index(level=0, sort_remaining=False)
    wide.index.names = ["panel", "method"]
    return wide


def write_outputs(summaries, out_dir, table_format=TableFormat.PAPER_STYLE):
    """
    summary.csv (experiment averages), experiments.csv and replications.csv in
    out_dir, plus table.txt for the paper-style format
    """
    average_experiments(summaries).to_csv("{}/summary.csv".format(out_dir), index=False, float_format="%.6f")
    experiments_frame(summaries).to_csv("{}/experiments.csv".format(out_dir), index=False, float_format="%.6f")
    records_frame(summaries).to_csv("{}/replications.csv".format(out_dir), index=False, float_format="%.10g")
    if TableFormat(table_format) == TableFormat.PAPER_STYLE:
        with open("{}/table.txt".format(out_dir), "w", encoding="utf-8") as handle:
            handle.write(panel_table(summaries).to_string(float_format=lambda v: "{:.2f}".format(v)))
            handle.write("\n")
