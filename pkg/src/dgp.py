"""
Monte Carlo data generating process.

    y_t = d_t + rho_{y,t} y_{t-1} + sum_{j<=4} beta_jt x_jt + tau_u u_t

Covariates are x_t = R_t^{1/2} eps_t with r_{ij,t} = r_t^|i-j| and eps_it
AR(1) processes with GARCH(1,1) innovations. The first four covariates are
the signals. Under parameter instability beta_jt = b_jt + tau_eta eta_jt with
piecewise constant b_jt and d_t = sum_j beta_jt mu_jt; otherwise beta_jt = 1
and d_t = 4. Every replication draws T + 1 rows, row T + 1 is the forecast
target.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy

from src.data import designs
from src.dataset import TimeSeriesDataset
from src.exceptions import CalibrationError, NumericalError, ValidationError

#spawn key prefix of the calibration streams, replications use (r,)
CALIBRATION_KEY = 2 ** 32


class FitTarget(enum.Enum):
    LOW = "low"
    HIGH = "high"

    @property
    def r2(self):
        return designs.fit_targets[self.value]


@dataclass(frozen=True)
class DgpConfig(object):
    N: int = 20
    T: int = 100
    k: int = designs.signals
    dynamic: bool = False
    instability: bool = False
    fit: FitTarget = FitTarget.LOW
    R: int = 2000
    seed: int = 1

    def __post_init__(self):
        object.__setattr__(self, "fit", FitTarget(self.fit))
        if self.k != designs.signals:
            raise ValidationError("The design has exactly {} signals, got k={}".format(designs.signals, self.k))
        if self.N < self.k:
            raise ValidationError("Need N >= {} covariates, got N={}".format(self.k, self.N))
        if self.T < 20:
            raise ValidationError("Need T >= 20 observations, got T={}".format(self.T))
        if self.R < 1:
            raise ValidationError("Need at least one replication, got R={}".format(self.R))

    @property
    def signals(self):
        return tuple(range(self.k))

    def with_instability(self):
        return DgpConfig(N=self.N, T=self.T, k=self.k, dynamic=self.dynamic, instability=True, fit=self.fit,
                         R=self.R, seed=self.seed)


@dataclass(frozen=True)
class GarchParams(object):
    """
        AR(1) coefficient and GARCH(1,1) parameters of one or several series
        (arrays broadcast over the series).
    """
    rho: numpy.ndarray
    alpha1: numpy.ndarray
    alpha2: numpy.ndarray

    def __post_init__(self):
        for name in ("rho", "alpha1", "alpha2"):
            object.__setattr__(self, name, numpy.atleast_1d(numpy.asarray(getattr(self, name), dtype=numpy.float64)))
        if numpy.any(self.alpha1 + self.alpha2 >= 1.0) or numpy.any(self.alpha1 < 0) or numpy.any(self.alpha2 < 0):
            raise ValidationError("GARCH parameters must be non-negative with alpha1 + alpha2 < 1")
        if numpy.any(numpy.abs(self.rho) >= 1.0):
            raise ValidationError("AR coefficient must lie in (-1, 1)")

    @classmethod
    def draw_covariates(cls, rng, N):
        draws = designs.covariate_draws
        return cls(rho=rng.uniform(*draws["rho"], size=N), alpha1=rng.uniform(*draws["alpha1"], size=N),
                   alpha2=rng.uniform(*draws["alpha2"], size=N))

    @classmethod
    def eta(cls):
        return cls(rho=designs.rho_eta, alpha1=designs.garch_eta[0], alpha2=designs.garch_eta[1])


def nearest_integer(x):
    return int(math.floor(x + 0.5))


def regime_path(T, fractions, values, rows=None):
    """
    piecewise constant path over t = 1..rows (default T + 1) with breaks at [f T]

    :param int T: sample length that defines the breakpoints
    :param tuple(float) fractions: breakpoint fractions of T
    :param tuple(float) values: one value per regime
    :return: numpy.ndarray - the path
    """
    rows = T + 1 if rows is None else rows
    t = numpy.arange(1, rows + 1)
    breaks = numpy.array([nearest_integer(f * T) for f in fractions])
    regime = numpy.searchsorted(breaks, t, side="left")
    return numpy.asarray(values, dtype=numpy.float64)[regime]


@dataclass(frozen=True)
class BreakSchedule(object):
    """
        Deterministic paths over t = 1..T+1: slope means b (T+1 x 4), covariate
        means mu (T+1 x 4), the AR coefficient of y and the correlation
        parameter r_t.
    """
    b_path: numpy.ndarray
    mu_path: numpy.ndarray
    rho_y_path: numpy.ndarray
    r_path: numpy.ndarray

    @classmethod
    def build(cls, cfg):
        T = cfg.T
        sched = designs.schedules
        r_path = regime_path(T, *sched["r"])
        if cfg.instability:
            b12 = regime_path(T, *sched["b12"])
            b34 = regime_path(T, *sched["b34"])
            mu12 = regime_path(T, *sched["mu12"])
            mu34 = regime_path(T, *sched["mu34"])
            b_path = numpy.column_stack([b12, b12, b34, b34])
            mu_path = numpy.column_stack([mu12, mu12, mu34, mu34])
            rho_y = regime_path(T, *sched["rho_y"]) if cfg.dynamic else numpy.zeros(T + 1)
        else:
            b_path = numpy.full((T + 1, cfg.k), designs.stable["beta"])
            mu_path = numpy.full((T + 1, cfg.k), designs.stable["mu"])
            rho_y = numpy.full(T + 1, designs.stable["rho_y_dynamic"] if cfg.dynamic else 0.0)
        return cls(b_path=b_path, mu_path=mu_path, rho_y_path=rho_y, r_path=r_path)


def garch_innovations(rng, steps, alpha1, alpha2, series=1):
    """
    GARCH(1,1) innovations e_1..e_steps with sigma_0^2 = 1 and e_0 ~ N(0, 1)

    :return: numpy.ndarray - steps x series matrix
    """
    alpha1 = numpy.broadcast_to(numpy.asarray(alpha1, dtype=numpy.float64), (series,))
    alpha2 = numpy.broadcast_to(numpy.asarray(alpha2, dtype=numpy.float64), (series,))
    omega = 1.0 - alpha1 - alpha2
    sigma2 = numpy.ones(series)
    e_prev = rng.standard_normal(series)
    shocks = rng.standard_normal((steps, series))
    out = numpy.empty((steps, series))
    for t in range(steps):
        sigma2 = omega + alpha1 * e_prev ** 2 + alpha2 * sigma2
        e_prev = numpy.sqrt(sigma2) * shocks[t]
        out[t] = e_prev
    return out


def ar_garch(rng, steps, params, series=1):
    """
    AR(1) series eps_t = rho eps_{t-1} + (1 - rho^2)^{1/2} e_t with GARCH(1,1) e_t and eps_0 ~ N(0, 1)

    :param numpy.random.Generator rng: random stream
    :param int steps: number of periods
    :param GarchParams params: parameters, scalar or one per series
    :param int series: number of series
    :return: numpy.ndarray - steps x series matrix
    """
    rho = numpy.broadcast_to(params.rho, (series,))
    level = rng.standard_normal(series)
    e = garch_innovations(rng, steps, params.alpha1, params.alpha2, series)
    scale = numpy.sqrt(1.0 - rho ** 2)
    out = numpy.empty((steps, series))
    for t in range(steps):
        level = rho * level + scale * e[t]
        out[t] = level
    return out


def correlation_root(r, N):
    """
    symmetric square root of the N x N matrix with entries r^|i-j|
    """
    lags = numpy.abs(numpy.subtract.outer(numpy.arange(N), numpy.arange(N)))
    R = numpy.power(float(r), lags)
    w, v = numpy.linalg.eigh(R)
    if not w[0] > 0:
        raise NumericalError("Correlation matrix with r={} is not positive definite".format(r))
    return (v * numpy.sqrt(w)).dot(v.T)


def gen_covariates(cfg, schedule, params, rng):
    """
    x_t = R_t^{1/2} eps_t for t = 1..T+1

    :param DgpConfig cfg: design
    :param BreakSchedule schedule: provides r_t
    :param GarchParams params: per-covariate AR and GARCH parameters
    :param numpy.random.Generator rng: random stream
    :return: numpy.ndarray - (T+1) x N covariates
    """
    eps = ar_garch(rng, cfg.T + 1, params, cfg.N)
    x = numpy.empty_like(eps)
    for r in numpy.unique(schedule.r_path):
        rows = schedule.r_path == r
        if r == 0:
            x[rows] = eps[rows]
        else:
            x[rows] = eps[rows].dot(correlation_root(r, cfg.N))
    return x


def calibrate_tau_eta(cfg, rng, paths=designs.calibration["eta_paths"]):
    """
    scales of the stochastic slope components so that the deterministic part
    explains the share 0.95 of T^-1 sum_t E[beta_jt^2]

    With E[eta] = 0, E[beta^2] = b^2 + tau^2 E[eta^2] and the share equation is
    solved in closed form from the simulated second moments of eta.

    :param DgpConfig cfg: design (T is used)
    :param numpy.random.Generator rng: random stream
    :param int paths: number of simulated eta paths
    :return: numpy.ndarray - one scale per signal
    """
    eta = ar_garch(rng, cfg.T, GarchParams.eta(), paths)
    m2 = numpy.mean(eta ** 2, axis=1)
    total = m2.sum()
    if not numpy.isfinite(total) or total <= 0:
        raise CalibrationError("Simulated second moment of eta is {}".format(total))
    b = BreakSchedule.build(cfg.with_instability()).b_path[:cfg.T]
    share = designs.deterministic_share
    tau2 = (b ** 2).sum(axis=0) * (1.0 / share - 1.0) / total
    return numpy.sqrt(tau2)


def gen_coefficients(cfg, schedule, tau_eta, rng):
    """
    slopes beta_jt for t = 1..T+1 (all ones without instability)

    :return: numpy.ndarray - (T+1) x 4 slopes
    """
    if not cfg.instability:
        return numpy.ones((cfg.T + 1, cfg.k))
    eta = ar_garch(rng, cfg.T + 1, GarchParams.eta(), cfg.k)
    return schedule.b_path + eta * numpy.asarray(tau_eta)


@dataclass(frozen=True)
class Draw(object):
    """
        Components of one replication that do not depend on tau_u.
    """
    x: numpy.ndarray
    beta: numpy.ndarray
    u: numpy.ndarray
    d: numpy.ndarray
    rho_y: numpy.ndarray


def draw_components(cfg, tau_eta, rng, schedule=None):
    schedule = schedule or BreakSchedule.build(cfg)
    params = GarchParams.draw_covariates(rng, cfg.N)
    x = gen_covariates(cfg, schedule, params, rng)
    beta = gen_coefficients(cfg, schedule, tau_eta, rng)
    u = garch_innovations(rng, cfg.T + 1, designs.garch_u[0], designs.garch_u[1])[:, 0]
    d = (beta * schedule.mu_path).sum(axis=1)
    return Draw(x=x, beta=beta, u=u, d=d, rho_y=schedule.rho_y_path)


def target_path(draw, tau_u, k=designs.signals):
    """
    y_0..y_{T+1}, y_0 = d_1 / (1 - rho_{y,1})

    :return: numpy.ndarray - T + 2 values, index 0 is the initial condition
    """
    signal = draw.d + (draw.beta * draw.x[:, :k]).sum(axis=1) + tau_u * draw.u
    y = numpy.empty(signal.shape[0] + 1)
    y[0] = draw.d[0] / (1.0 - draw.rho_y[0])
    for t in range(signal.shape[0]):
        y[t + 1] = signal[t] + draw.rho_y[t] * y[t]
    return y


@dataclass(frozen=True)
class Replication(object):
    """
        Estimation sample (rows 1..T) and the forecast row T+1.
    """
    data: TimeSeriesDataset
    z_next: numpy.ndarray
    x_next: numpy.ndarray
    y_next: float
    signals: Tuple[int, ...]


def assemble(cfg, draw, tau_u):
    y = target_path(draw, tau_u, cfg.k)
    T = cfg.T
    names = tuple("x{}".format(i + 1) for i in range(cfg.N))
    if cfg.dynamic:
        Z = y[:T, None]
        z_next = numpy.array([1.0, y[T]])
        cond = ("y_lag",)
    else:
        Z = None
        z_next = numpy.array([1.0])
        cond = ()
    data = TimeSeriesDataset.from_arrays(y[1:T + 1], draw.x[:T], Z, intercept=True, covariate_names=names,
                                         conditioning_names=cond)
    return Replication(data=data, z_next=z_next, x_next=draw.x[T].copy(), y_next=float(y[T + 1]),
                       signals=cfg.signals)


def simulate_replication(cfg, tau_u, tau_eta, rng):
    """
    one replication of the design

    :param DgpConfig cfg: design
    :param float tau_u: noise scale
    :param numpy.ndarray tau_eta: scales of the stochastic slope components
    :param numpy.random.Generator rng: random stream of this replication
    :return: Replication
    """
    return assemble(cfg, draw_components(cfg, tau_eta, rng), tau_u)


def replication_rng(seed, r):
    return numpy.random.default_rng(numpy.random.SeedSequence(int(seed), spawn_key=(int(r),)))


def calibration_rng(seed, index):
    return numpy.random.default_rng(numpy.random.SeedSequence(int(seed), spawn_key=(CALIBRATION_KEY, int(index))))


def _fit_r2(y, X):
    coef = numpy.linalg.lstsq(X, y, rcond=None)[0]
    resid = y - X.dot(coef)
    centred = y - y.mean()
    return 1.0 - resid.dot(resid) / centred.dot(centred)


def batch_r2(cfg, draws, tau_u):
    """
    mean in-sample R^2 of y on (1, signals, lagged y if dynamic) over a batch of draws
    """
    T = cfg.T
    values = []
    for draw in draws:
        y = target_path(draw, tau_u, cfg.k)
        columns = [numpy.ones(T), draw.x[:T, :cfg.k]]
        if cfg.dynamic:
            columns.append(y[:T, None])
        values.append(_fit_r2(y[1:T + 1], numpy.column_stack(columns)))
    return float(numpy.mean(values))


def calibrate_tau_u(cfg, tau_eta, rng, reps=designs.calibration["reps"], tol=designs.calibration["tolerance"],
                    max_iter=designs.calibration["max_iter"]):
    """
    noise scale that gives the target R^2 under parameter instability

    The batch of draws is fixed (common random numbers), so R^2 is a
    deterministic decreasing function of tau_u and is solved by bisection.
    The same tau_u serves the matching stable parameter experiments.

    :param DgpConfig cfg: design
    :param numpy.ndarray tau_eta: scales of the stochastic slope components
    :param numpy.random.Generator rng: calibration stream
    :param int reps: draws in the calibration batch
    :param float tol: tolerance on R^2
    :param int max_iter: bisection steps
    :return: float - tau_u
    """
    cfg = cfg.with_instability()
    schedule = BreakSchedule.build(cfg)
    draws = [draw_components(cfg, tau_eta, rng, schedule) for _ in range(reps)]
    target = cfg.fit.r2

    lo, hi = 0.0, 1.0
    r2_lo = batch_r2(cfg, draws, lo)
    if r2_lo < target:
        raise CalibrationError("R^2 without noise is {:.4f}, below the target {}".format(r2_lo, target),
                               bracket=(lo, hi))
    expansions = 0
    while batch_r2(cfg, draws, hi) > target:
        lo, hi = hi, 2.0 * hi
        expansions += 1
        logging.warning("tau_u bracket expanded to [{}, {}]".format(lo, hi))
        if expansions >= max_iter:
            raise CalibrationError("No tau_u bracket found up to {}".format(hi), bracket=(lo, hi))

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        gap = batch_r2(cfg, draws, mid) - target
        if abs(gap) <= tol:
            logging.info("tau_u = {:.6f} (R^2 off by {:.2e})".format(mid, gap))
            return mid
        if gap > 0:
            lo = mid
        else:
            hi = mid
    raise CalibrationError("tau_u bisection did not reach tolerance {} in {} steps".format(tol, max_iter),
                           bracket=(lo, hi))


def calibrate(cfg, calibration_reps=designs.calibration["reps"]):
    """
    tau_eta and tau_u of a design from its dedicated calibration streams

    :return: tuple(numpy.ndarray, float) - slope scales and noise scale
    """
    tau_eta = calibrate_tau_eta(cfg, calibration_rng(cfg.seed, 0))
    tau_u = calibrate_tau_u(cfg, tau_eta, calibration_rng(cfg.seed, 1), reps=calibration_reps)
    return tau_eta, tau_u
