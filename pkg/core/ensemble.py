"""
Monte-Carlo ensembles, temperature time series and the rate-versus-temperature
fit that yields the steady-state temperature
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from .dynamics import DynamicsConfig, sample_thermal_state, simulate_batch
from .model import K_B
from .validation import (InsufficientSamplesError, InvalidParameterError, NoCoolingError,
                         ParameterValidator)

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.SeedSequence]

DEFAULT_CHUNK_SIZE = 50
FIT_METHODS = ("wls", "ols")


def _seed_sequence(seed: Seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _children(seed: Seed, n: int, start: int = 0) -> List[np.random.SeedSequence]:
    """Children start..start+n-1 of seed, as spawn() would give a fresh parent

    The parent's spawn counter is left alone, so a caller's SeedSequence gives
    the same streams on every call.
    """
    parent = _seed_sequence(seed)
    return [np.random.SeedSequence(parent.entropy, spawn_key=parent.spawn_key + (i,),
                                   pool_size=parent.pool_size)
            for i in range(start, start + n)]


@dataclass(frozen=True)
class EnsembleConfig:
    n_traj: int
    initial_temperature: float
    dynamics: DynamicsConfig
    master_seed: Seed = 0
    sample_stride: int = 1
    chunk_size: int = DEFAULT_CHUNK_SIZE

    def __post_init__(self):
        ParameterValidator.require_count("ensemble.n_traj", self.n_traj, 2)
        ParameterValidator.require_positive("ensemble.initial_temperature", self.initial_temperature)
        ParameterValidator.require_count("ensemble.sample_stride", self.sample_stride, 1)
        ParameterValidator.require_count("ensemble.chunk_size", self.chunk_size, 1)


@dataclass(frozen=True)
class EnsembleSummary:
    """Ensemble means per sample time; k_B T = 2 <E_kin> trapped or free"""

    times: np.ndarray
    mean_kinetic_energy: np.ndarray
    mean_potential_energy: np.ndarray
    temperature: np.ndarray
    temperature_error: np.ndarray
    n_traj: int
    filtered: bool = False

    @property
    def mean_total_energy(self) -> np.ndarray:
        return self.mean_kinetic_energy + self.mean_potential_energy


@dataclass(frozen=True)
class RateEstimate:
    """Initial dT/dt with the fitted temperature at t = 0"""

    initial_temperature: float
    rate: float
    error: float
    fitted_temperature: float
    n_samples: int


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    steady_state: float
    slope_error: float
    intercept_error: float
    steady_state_error: float
    steady_state_bootstrap_error: float
    r_squared: float
    method: str
    n_points: int


@dataclass(frozen=True)
class CoolrateResult:
    estimates: List[RateEstimate]
    fit: FitResult = field(repr=False)


def _run_chunk(dynamics: DynamicsConfig, temperature: float,
               seeds: Sequence[np.random.SeedSequence], stride: int):
    rngs = [np.random.default_rng(s) for s in seeds]
    states = [sample_thermal_state(temperature, dynamics, rng) for rng in rngs]
    record = simulate_batch([s.position for s in states], [s.momentum for s in states],
                            dynamics, rngs, stride=stride)
    kinetic = record.kinetic_energy
    return (record.time, kinetic.sum(axis=1), (kinetic ** 2).sum(axis=1),
            record.potential_energy.sum(axis=1))


def run_ensemble(cfg: EnsembleConfig, workers: int = 1) -> EnsembleSummary:
    """Thermal initial states at T0, one SeedSequence child per trajectory

    Trajectories are cut into fixed chunks whose partial sums are combined in
    chunk order, so the result is bit-identical for any worker count.
    """
    ParameterValidator.require_count("workers", workers, 1)
    seeds = _children(cfg.master_seed, cfg.n_traj)
    chunks = [seeds[i:i + cfg.chunk_size] for i in range(0, cfg.n_traj, cfg.chunk_size)]
    cfg.dynamics.check_regime()
    logger.info(f"Running {cfg.n_traj} trajectories at T0 = {cfg.initial_temperature:.4g} K "
                f"in {len(chunks)} chunks on {workers} worker(s)")

    results = Parallel(n_jobs=workers)(
        delayed(_run_chunk)(cfg.dynamics, cfg.initial_temperature, chunk, cfg.sample_stride)
        for chunk in chunks
    )
    times = results[0][0]
    n = cfg.n_traj
    kinetic = np.sum(np.stack([r[1] for r in results]), axis=0) / n
    kinetic_sq = np.sum(np.stack([r[2] for r in results]), axis=0) / n
    potential = np.sum(np.stack([r[3] for r in results]), axis=0) / n
    variance = np.maximum(kinetic_sq - kinetic ** 2, 0.0) * n / (n - 1)
    kinetic_error = np.sqrt(variance / n)

    logger.info(f"Ensemble at T0 = {cfg.initial_temperature:.4g} K finished")
    return EnsembleSummary(times=times, mean_kinetic_energy=kinetic,
                           mean_potential_energy=potential,
                           temperature=2.0 * kinetic / K_B,
                           temperature_error=2.0 * kinetic_error / K_B, n_traj=n)


def _period_average(values: np.ndarray, samples_per_period: float) -> np.ndarray:
    """Exact mean of the piecewise-linear interpolant over [t_i, t_i + period]"""
    whole = int(math.floor(samples_per_period + 1e-9))
    frac = max(samples_per_period - whole, 0.0)
    if frac < 1e-9:
        frac = 0.0
    cumulative = np.concatenate(([0.0], np.cumsum(0.5 * (values[1:] + values[:-1]))))
    last = values.shape[0] - 1 - whole - (1 if frac > 0.0 else 0)
    start = np.arange(last + 1)
    end = start + whole
    integral = cumulative[end] - cumulative[start]
    if frac > 0.0:
        lo = values[end]
        hi = values[end + 1]
        integral = integral + frac * lo + 0.5 * frac ** 2 * (hi - lo)
    return integral / samples_per_period


def filter_trap_oscillations(summary: EnsembleSummary, trap_frequency: float) -> EnsembleSummary:
    """Moving average over exactly one trap period, labelled at the window centre"""
    ParameterValidator.require_positive("trap_frequency", trap_frequency)
    if summary.times.shape[0] < 2:
        raise InvalidParameterError("cannot filter fewer than two samples")
    spacing = float(summary.times[1] - summary.times[0])
    period = 1.0 / trap_frequency
    samples_per_period = period / spacing
    if samples_per_period < 4.0:
        raise InvalidParameterError(
            f"sample spacing {spacing:.4g} s does not resolve the trap period {period:.4g} s"
        )
    if summary.times[-1] - summary.times[0] < period * (1.0 + 1e-9):
        raise InvalidParameterError("series is shorter than one trap period")

    def smooth(series: np.ndarray) -> np.ndarray:
        return _period_average(series, samples_per_period)

    kinetic = smooth(summary.mean_kinetic_energy)
    times = summary.times[:kinetic.shape[0]] + 0.5 * period
    return replace(summary, times=times, mean_kinetic_energy=kinetic,
                   mean_potential_energy=smooth(summary.mean_potential_energy),
                   temperature=smooth(summary.temperature),
                   temperature_error=smooth(summary.temperature_error), filtered=True)


def initial_rate(summary: EnsembleSummary, window_fraction: float = 0.1,
                 min_samples: int = 20, initial_temperature: Optional[float] = None) -> RateEstimate:
    """OLS slope of T(t) over the first `window_fraction` of the series"""
    ParameterValidator.require_positive("window_fraction", window_fraction)
    ParameterValidator.require_below("window_fraction", window_fraction, 1.0, inclusive=True)
    times = summary.times
    cutoff = times[0] + window_fraction * (times[-1] - times[0]) * (1.0 + 1e-12)
    selected = times <= cutoff
    count = int(np.count_nonzero(selected))
    if count < max(min_samples, 3):
        raise InsufficientSamplesError(
            f"rate window holds {count} samples, need at least {max(min_samples, 3)}"
        )
    fit = stats.linregress(times[selected], summary.temperature[selected])
    nominal = initial_temperature if initial_temperature is not None else float(fit.intercept)
    return RateEstimate(initial_temperature=nominal, rate=float(fit.slope),
                        error=float(fit.stderr), fitted_temperature=float(fit.intercept),
                        n_samples=count)


def _line_fit(x: np.ndarray, y: np.ndarray, err: np.ndarray, method: str):
    """(slope, intercept, covariance, r_squared)"""
    if method == "ols":
        fit = stats.linregress(x, y)
        slope_var = fit.stderr ** 2
        cov = np.array([[slope_var, -np.mean(x) * slope_var],
                        [-np.mean(x) * slope_var, fit.intercept_stderr ** 2]])
        return float(fit.slope), float(fit.intercept), cov, float(fit.rvalue ** 2)
    weights = 1.0 / err
    coefficients, cov = np.polyfit(x, y, 1, w=weights, cov="unscaled")
    slope, intercept = float(coefficients[0]), float(coefficients[1])
    w2 = weights ** 2
    residual = y - (slope * x + intercept)
    mean = np.sum(w2 * y) / np.sum(w2)
    total = float(np.sum(w2 * (y - mean) ** 2))
    r_squared = 1.0 - float(np.sum(w2 * residual ** 2)) / total if total > 0 else 1.0
    return slope, intercept, cov, r_squared


def fit_steady_state(points, method: str = "wls", n_bootstrap: int = 1000,
                     seed: Seed = 0) -> FitResult:
    """Straight line through (T0, dT/dt, err) points; T* = -intercept/slope

    Reports the first-order propagated error of T* and a bootstrap error from
    resampling the points.
    """
    if method not in FIT_METHODS:
        raise InvalidParameterError(f"fit method must be one of {FIT_METHODS}, got {method!r}")
    data = np.asarray(points, dtype=float)
    if data.ndim != 2 or data.shape[1] != 3:
        raise InvalidParameterError("points must be rows of (T0, rate, error)")
    if data.shape[0] < 3:
        raise InvalidParameterError(f"at least 3 initial temperatures are required, got {data.shape[0]}")
    x, y, err = data[:, 0], data[:, 1], data[:, 2]
    if method == "wls" and not np.all(err > 0):
        raise InvalidParameterError("weighted fit needs positive errors for every point")

    slope, intercept, cov, r_squared = _line_fit(x, y, err, method)
    if not slope < 0:
        raise NoCoolingError(slope)
    steady = -intercept / slope
    var_steady = (cov[1, 1] / slope ** 2 + intercept ** 2 * cov[0, 0] / slope ** 4
                  - 2.0 * intercept * cov[0, 1] / slope ** 3)

    rng = np.random.default_rng(_seed_sequence(seed))
    samples = []
    for _ in range(n_bootstrap):
        idx = rng.integers(0, x.shape[0], x.shape[0])
        if np.unique(x[idx]).shape[0] < 2:
            continue
        b_slope, b_intercept, _, _ = _line_fit(x[idx], y[idx], err[idx], method)
        if b_slope < 0:
            samples.append(-b_intercept / b_slope)
    bootstrap_error = float(np.std(samples, ddof=1)) if len(samples) > 1 else math.nan

    logger.info(f"Steady state T* = {steady:.4g} K (slope {slope:.4g} 1/s, {method})")
    return FitResult(slope=slope, intercept=intercept, steady_state=steady,
                     slope_error=math.sqrt(max(cov[0, 0], 0.0)),
                     intercept_error=math.sqrt(max(cov[1, 1], 0.0)),
                     steady_state_error=math.sqrt(max(var_steady, 0.0)),
                     steady_state_bootstrap_error=bootstrap_error,
                     r_squared=r_squared, method=method, n_points=int(x.shape[0]))


def run_temperature_series(dynamics: DynamicsConfig, temperatures: Sequence[float], n_traj: int,
                           master_seed: Seed = 0, sample_stride: int = 1, workers: int = 1,
                           chunk_size: int = DEFAULT_CHUNK_SIZE, filtered: bool = True):
    """One ensemble per initial temperature; returns [(T0, summary), ...]"""
    children = _children(master_seed, len(temperatures))
    series = []
    for temperature, child in zip(temperatures, children):
        cfg = EnsembleConfig(n_traj=n_traj, initial_temperature=temperature, dynamics=dynamics,
                             master_seed=child, sample_stride=sample_stride, chunk_size=chunk_size)
        summary = run_ensemble(cfg, workers=workers)
        if filtered and dynamics.trap.enabled:
            summary = filter_trap_oscillations(summary, dynamics.trap.frequency)
        series.append((temperature, summary))
    return series


def coolrate_scan(dynamics: DynamicsConfig, temperatures: Sequence[float], n_traj: int,
                  master_seed: Seed = 0, sample_stride: int = 1, workers: int = 1,
                  chunk_size: int = DEFAULT_CHUNK_SIZE, window_fraction: float = 0.1,
                  min_samples: int = 20, fit_method: str = "wls",
                  n_bootstrap: int = 1000) -> CoolrateResult:
    """Initial heating/cooling rate per T0 and the steady state where the rate vanishes

    The fit uses each ensemble's fitted temperature at t = 0 as abscissa, which
    removes the scatter of the thermal initial sampling.
    """
    if len(temperatures) < 3:
        raise InvalidParameterError(
            f"at least 3 initial temperatures are required, got {len(temperatures)}"
        )
    series = run_temperature_series(dynamics, temperatures, n_traj, master_seed=master_seed,
                                    sample_stride=sample_stride, workers=workers,
                                    chunk_size=chunk_size)
    estimates = [initial_rate(summary, window_fraction=window_fraction, min_samples=min_samples,
                              initial_temperature=temperature)
                 for temperature, summary in series]
    points = [(e.fitted_temperature, e.rate, e.error) for e in estimates]
    fit = fit_steady_state(points, method=fit_method, n_bootstrap=n_bootstrap,
                           seed=_children(master_seed, 1, start=len(temperatures))[0])
    return CoolrateResult(estimates=estimates, fit=fit)
