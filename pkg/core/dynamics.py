"""
Delayed-feedback Langevin integrator for trapped particles

The harmonic trap is propagated exactly as a phase-space rotation. Friction,
the optional standing-wave dipole force and momentum diffusion are integrated
with stochastic Heun in the frame co-moving with the trap flow, so with zero
friction and diffusion the orbit is exact. In delayed mode the friction acts on
the velocity one round trip tau ago, read from a HistoryBuffer.

Trajectories are integrated in batches: every array carries one column per
trajectory and each trajectory draws noise from its own Generator.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import analytic
from .model import AtomSpecies, BeamConfig, K_B, TrapConfig, nearest_node
from .validation import HistoryUnderrunError, InvalidParameterError, ParameterValidator

logger = logging.getLogger(__name__)

FRICTION_MODES = ("instantaneous", "delayed")
COEFFICIENT_MODES = ("local", "trap_center")

# Normal draws fetched per Generator call
NOISE_BLOCK = 4096

# Relative slack on the step-size constraints
_DT_SLACK = 1e-9


@dataclass(frozen=True)
class AtomState:
    """Phase-space point of one particle; position is measured from the mirror"""

    position: float
    momentum: float
    time: float = 0.0

    def __post_init__(self):
        ParameterValidator.require_finite("position", self.position)
        ParameterValidator.require_finite("momentum", self.momentum)
        ParameterValidator.require_finite("time", self.time)


class HistoryBuffer:
    """Fixed-capacity ring buffer of past (time, position, velocity) samples

    Samples are spaced by exactly dt and hold one column per trajectory.
    Lookups at t_latest - lag interpolate linearly between bracketing samples.
    """

    def __init__(self, capacity: int, dt: float, n: int = 1):
        ParameterValidator.require_count("capacity", capacity, 2)
        ParameterValidator.require_positive("dt", dt)
        ParameterValidator.require_count("n", n, 1)
        self.dt = dt
        self.n = n
        self._times = np.zeros(capacity)
        self._positions = np.zeros((capacity, n))
        self._velocities = np.zeros((capacity, n))
        self._latest = -1
        self._size = 0

    @classmethod
    def for_delay(cls, delay: float, dt: float, n: int = 1) -> "HistoryBuffer":
        """Smallest buffer able to serve lookups one delay into the past"""
        return cls(required_capacity(delay, dt), dt, n)

    @property
    def capacity(self) -> int:
        return self._times.shape[0]

    @property
    def size(self) -> int:
        return self._size

    @property
    def latest_time(self) -> float:
        if self._size == 0:
            raise HistoryUnderrunError("history is empty")
        return float(self._times[self._latest])

    @property
    def span(self) -> float:
        return max(self._size - 1, 0) * self.dt

    def push(self, time: float, position, velocity) -> None:
        self._latest = (self._latest + 1) % self.capacity
        self._times[self._latest] = time
        self._positions[self._latest] = position
        self._velocities[self._latest] = velocity
        self._size = min(self._size + 1, self.capacity)

    def delayed_velocity(self, lag: float) -> np.ndarray:
        """Velocity at t_latest - lag for every trajectory"""
        if self._size == 0:
            raise HistoryUnderrunError("history is empty")
        q = lag / self.dt
        if q < -1e-9:
            raise HistoryUnderrunError(f"lookup {lag:.6g} s lies in the future of the history")
        q = max(q, 0.0)
        whole = int(math.floor(q))
        frac = q - whole
        if frac < 1e-12:
            frac = 0.0
        needed = whole + (1 if frac > 0.0 else 0)
        if needed > self._size - 1:
            raise HistoryUnderrunError(
                f"lookup {lag:.6g} s back exceeds the stored span {self.span:.6g} s"
            )
        newer = self._velocities[(self._latest - whole) % self.capacity]
        if frac == 0.0:
            return newer.copy()
        older = self._velocities[(self._latest - whole - 1) % self.capacity]
        return (1.0 - frac) * newer + frac * older

    def velocity_at(self, time: float) -> np.ndarray:
        return self.delayed_velocity(self.latest_time - time)

    def samples(self):
        """Chronological (times, positions, velocities) of the stored samples"""
        order = (self._latest - np.arange(self._size)[::-1]) % self.capacity
        return self._times[order].copy(), self._positions[order].copy(), self._velocities[order].copy()


def required_capacity(delay: float, dt: float) -> int:
    """ceil(tau/dt) + 2 samples"""
    ParameterValidator.require_positive("dt", dt)
    ParameterValidator.require_non_negative("delay", delay)
    return int(math.ceil(delay / dt - 1e-9)) + 2


@dataclass(frozen=True)
class DynamicsConfig:
    """Integrator settings for one trapped particle

    `coefficients` selects whether friction and diffusion follow the particle
    (local) or are frozen at the trap centre (the tightly-confined limit).
    The overrides replace the position-dependent values by constants in kg/s
    and kg^2 m^2/s^3. With noise_substeps > 1 each kick sums that many finer
    Wiener increments, so a run at dt shares its noise path with a run at
    dt / noise_substeps drawn from the same Generator.
    """

    species: AtomSpecies
    beam: BeamConfig
    trap: TrapConfig
    dt: float
    duration: float
    friction_mode: str = "delayed"
    dipole_force: bool = False
    coefficients: str = "local"
    friction_override: Optional[float] = None
    diffusion_override: Optional[float] = None
    noise_substeps: int = 1

    def __post_init__(self):
        ParameterValidator.require_positive("dynamics.dt", self.dt)
        ParameterValidator.require_positive("dynamics.duration", self.duration)
        if self.friction_mode not in FRICTION_MODES:
            raise InvalidParameterError(
                f"dynamics.friction_mode must be one of {FRICTION_MODES}, got {self.friction_mode!r}"
            )
        if self.coefficients not in COEFFICIENT_MODES:
            raise InvalidParameterError(
                f"dynamics.coefficients must be one of {COEFFICIENT_MODES}, got {self.coefficients!r}"
            )
        if self.friction_override is not None:
            ParameterValidator.require_finite("dynamics.friction_override", self.friction_override)
        if self.diffusion_override is not None:
            ParameterValidator.require_non_negative("dynamics.diffusion_override",
                                                    self.diffusion_override)
        ParameterValidator.require_count("dynamics.noise_substeps", self.noise_substeps, 1)
        self.trap.validate(self.species)
        if self.duration < 10.0 * self.dt * (1.0 - _DT_SLACK):
            raise InvalidParameterError(
                f"dynamics.duration {self.duration:.6g} s must cover at least 10 steps of {self.dt:.6g} s"
            )
        if self.dt > self.delay / 10.0 * (1.0 + _DT_SLACK):
            raise InvalidParameterError(
                f"dynamics.dt {self.dt:.6g} s exceeds tau/10 = {self.delay / 10.0:.6g} s"
            )
        # a disabled trap has nu_trap = 0 and sets no bound
        if self.trap.enabled and self.dt > 1.0 / (50.0 * self.trap.frequency) * (1.0 + _DT_SLACK):
            raise InvalidParameterError(
                f"dynamics.dt {self.dt:.6g} s exceeds 1/(50 nu_trap) = "
                f"{1.0 / (50.0 * self.trap.frequency):.6g} s"
            )

    @property
    def delay(self) -> float:
        return self.beam.delay

    @property
    def mass(self) -> float:
        return self.species.mass

    @property
    def omega(self) -> float:
        return self.trap.angular_frequency

    @property
    def center_offset(self) -> float:
        """Trap centre relative to the node nearest the mirror distance"""
        return self.trap.resolved_offset(self.species)

    @property
    def trap_center(self) -> float:
        return nearest_node(self.beam.mirror_distance, self.species) + self.center_offset

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def with_changes(self, **changes) -> "DynamicsConfig":
        return replace(self, **changes)

    def check_regime(self) -> None:
        """Log the regime assumptions the closed-form coefficients rely on"""
        if not self.beam.is_far_detuned(self.species):
            logger.warning(f"|detuning| = {abs(self.beam.detuning):.4g} rad/s is below 10 Gamma")
        if not self.beam.is_weakly_saturated():
            logger.warning(f"saturation {self.beam.saturation:.4g} is not small")
        if self.friction_mode == "delayed" and self.trap.enabled \
                and self.trap.frequency * self.delay > 0.25:
            logger.warning(
                f"nu_trap * tau = {self.trap.frequency * self.delay:.3g}: delayed friction no longer cools"
            )


class ForceModel:
    """Friction, diffusion and dipole force as functions of the displacement from the trap centre

    Coefficients come from the analytic module, evaluated at the node-relative
    phase with the macroscopic round-trip delay.
    """

    def __init__(self, cfg: DynamicsConfig):
        self.cfg = cfg
        self.offset = cfg.center_offset
        self._frozen = cfg.coefficients == "trap_center"
        self._gamma0 = float(analytic.friction_std(self.offset, cfg.species, cfg.beam,
                                                   delay=cfg.delay))
        self._d0 = float(analytic.diffusion(self.offset, cfg.species, cfg.beam))

    def friction(self, xi: np.ndarray) -> np.ndarray:
        if self.cfg.friction_override is not None:
            return np.full(xi.shape, self.cfg.friction_override)
        if self._frozen:
            return np.full(xi.shape, self._gamma0)
        return analytic.friction_std(self.offset + xi, self.cfg.species, self.cfg.beam,
                                     delay=self.cfg.delay)

    def diffusion(self, xi: np.ndarray) -> np.ndarray:
        if self.cfg.diffusion_override is not None:
            return np.full(xi.shape, self.cfg.diffusion_override)
        if self._frozen:
            return np.full(xi.shape, self._d0)
        return analytic.diffusion(self.offset + xi, self.cfg.species, self.cfg.beam)

    def dipole(self, xi: np.ndarray) -> np.ndarray:
        if not self.cfg.dipole_force:
            return np.zeros(xi.shape)
        return analytic.dipole_force(self.offset + xi, self.cfg.species, self.cfg.beam)


def _rotate(xi: np.ndarray, p: np.ndarray, cfg: DynamicsConfig):
    m, omega, dt = cfg.mass, cfg.omega, cfg.dt
    if omega == 0.0:
        return xi + p * dt / m, p
    c, s = math.cos(omega * dt), math.sin(omega * dt)
    return xi * c + p * s / (m * omega), p * c - xi * (m * omega * s)


def _advance(xi, p, history, cfg: DynamicsConfig, model: ForceModel, noise):
    """One Heun step in the frame co-moving with the harmonic flow"""
    m, dt = cfg.mass, cfg.dt
    delayed = cfg.friction_mode == "delayed"
    kick = np.sqrt(2.0 * model.diffusion(xi) * dt) * noise

    v_ret = history.delayed_velocity(cfg.delay) if delayed else p / m
    drift = -model.friction(xi) * v_ret + model.dipole(xi)

    xi_pred, p_pred = _rotate(xi, p + drift * dt + kick, cfg)
    v_ret_pred = history.delayed_velocity(cfg.delay - dt) if delayed else p_pred / m
    drift_pred = -model.friction(xi_pred) * v_ret_pred + model.dipole(xi_pred)

    xi_next, p_half = _rotate(xi, p + 0.5 * drift * dt + kick, cfg)
    return xi_next, p_half + 0.5 * drift_pred * dt


def _free_orbit(xi0, p0, t, cfg: DynamicsConfig):
    """Frictionless, noiseless motion from (xi0, p0) at t = 0, evaluated at times t"""
    m, omega = cfg.mass, cfg.omega
    t = np.asarray(t, dtype=float)[:, None]
    if omega == 0.0:
        return xi0 + p0 / m * t, np.broadcast_to(p0 / m, (t.shape[0], np.size(xi0))).copy()
    xi = xi0 * np.cos(omega * t) + p0 / (m * omega) * np.sin(omega * t)
    v = p0 / m * np.cos(omega * t) - xi0 * omega * np.sin(omega * t)
    return xi, v


def _warmup_arrays(xi0: np.ndarray, p0: np.ndarray, t0: float, cfg: DynamicsConfig) -> HistoryBuffer:
    n = xi0.shape[0]
    history = HistoryBuffer.for_delay(cfg.delay, cfg.dt, n)
    back = -cfg.dt * np.arange(history.capacity - 1, -1, -1)
    xi, v = _free_orbit(xi0, p0, back, cfg)
    for i, lag in enumerate(back):
        history.push(t0 + lag, cfg.trap_center + xi[i], v[i])
    return history


def warmup(initial: AtomState, cfg: DynamicsConfig) -> HistoryBuffer:
    """History over [t0 - tau, t0] from backward free harmonic motion at the initial energy"""
    xi0 = np.array([initial.position - cfg.trap_center])
    p0 = np.array([initial.momentum])
    return _warmup_arrays(xi0, p0, initial.time, cfg)


def step(state: AtomState, history: HistoryBuffer, cfg: DynamicsConfig, noise: float) -> AtomState:
    """Advance one particle by dt and append the new sample to its history"""
    if history.size == 0:
        raise HistoryUnderrunError("history must be warmed up before stepping")
    model = ForceModel(cfg)
    xi = np.array([state.position - cfg.trap_center])
    p = np.array([state.momentum])
    xi_next, p_next = _advance(xi, p, history, cfg, model, np.array([noise]))
    time = state.time + cfg.dt
    position = cfg.trap_center + float(xi_next[0])
    history.push(time, position, p_next / cfg.mass)
    return AtomState(position=position, momentum=float(p_next[0]), time=time)


@dataclass(frozen=True)
class TrajectoryRecord:
    """Sampled time series; per-trajectory arrays have one column per trajectory"""

    time: np.ndarray
    position: np.ndarray
    momentum: np.ndarray
    kinetic_energy: np.ndarray
    potential_energy: np.ndarray

    @property
    def total_energy(self) -> np.ndarray:
        return self.kinetic_energy + self.potential_energy

    @property
    def n_traj(self) -> int:
        return 1 if self.momentum.ndim == 1 else self.momentum.shape[1]

    def column(self, j: int) -> "TrajectoryRecord":
        return TrajectoryRecord(time=self.time, position=self.position[:, j],
                                momentum=self.momentum[:, j],
                                kinetic_energy=self.kinetic_energy[:, j],
                                potential_energy=self.potential_energy[:, j])


class _NoiseStream:
    """Unit normal draws, one independent column per Generator

    With substeps > 1 each draw is the normalised sum of that many consecutive
    normals from the same Generator.
    """

    def __init__(self, rngs: Sequence[np.random.Generator], substeps: int = 1):
        self._rngs = list(rngs)
        self._substeps = substeps
        self._block = np.empty((NOISE_BLOCK, len(self._rngs)))
        self._cursor = NOISE_BLOCK

    def next(self) -> np.ndarray:
        if self._cursor == NOISE_BLOCK:
            for j, rng in enumerate(self._rngs):
                draws = rng.standard_normal(NOISE_BLOCK * self._substeps)
                self._block[:, j] = draws.reshape(NOISE_BLOCK, self._substeps).sum(axis=1)
            if self._substeps > 1:
                self._block /= math.sqrt(self._substeps)
            self._cursor = 0
        row = self._block[self._cursor]
        self._cursor += 1
        return row


def simulate_batch(positions, momenta, cfg: DynamicsConfig,
                   rngs: Sequence[np.random.Generator], stride: int = 1,
                   t0: float = 0.0) -> TrajectoryRecord:
    """Integrate len(rngs) independent trajectories over cfg.duration

    Trajectory j draws its noise from rngs[j] only, so a trajectory's path does
    not depend on which other trajectories share the batch.
    """
    ParameterValidator.require_count("stride", stride, 1)
    xi = np.asarray(positions, dtype=float) - cfg.trap_center
    p = np.array(momenta, dtype=float)
    if xi.ndim != 1 or xi.shape != p.shape or len(rngs) != xi.shape[0]:
        raise InvalidParameterError("positions, momenta and rngs must have one entry per trajectory")

    n_steps = cfg.n_steps
    n_samples = n_steps // stride + 1
    model = ForceModel(cfg)
    history = _warmup_arrays(xi, p, t0, cfg) if cfg.friction_mode == "delayed" else None
    noise = _NoiseStream(rngs, cfg.noise_substeps)
    logger.debug(f"Integrating {xi.shape[0]} trajectories for {n_steps} steps of {cfg.dt:.4g} s")

    sampled_xi = np.empty((n_samples, xi.shape[0]))
    sampled_p = np.empty((n_samples, xi.shape[0]))
    sampled_xi[0], sampled_p[0] = xi, p
    row = 1
    for n in range(1, n_steps + 1):
        xi, p = _advance(xi, p, history, cfg, model, noise.next())
        if history is not None:
            history.push(t0 + n * cfg.dt, cfg.trap_center + xi, p / cfg.mass)
        if n % stride == 0:
            sampled_xi[row], sampled_p[row] = xi, p
            row += 1

    m = cfg.mass
    return TrajectoryRecord(
        time=t0 + cfg.dt * stride * np.arange(n_samples),
        position=cfg.trap_center + sampled_xi,
        momentum=sampled_p,
        kinetic_energy=sampled_p ** 2 / (2.0 * m),
        potential_energy=0.5 * m * cfg.omega ** 2 * sampled_xi ** 2,
    )


def simulate_trajectory(initial: AtomState, cfg: DynamicsConfig, seed,
                        stride: int = 1) -> TrajectoryRecord:
    """Single trajectory; identical seeds give bit-identical records"""
    rng = np.random.default_rng(seed)
    record = simulate_batch([initial.position], [initial.momentum], cfg, [rng],
                            stride=stride, t0=initial.time)
    return record.column(0)


def sample_thermal_state(temperature: float, cfg: DynamicsConfig,
                         rng: np.random.Generator) -> AtomState:
    """Momentum, then position, drawn from the equilibrium distribution at `temperature`"""
    ParameterValidator.require_positive("temperature", temperature)
    m = cfg.mass
    momentum = rng.normal(0.0, math.sqrt(m * K_B * temperature))
    displacement = 0.0
    if cfg.trap.enabled:
        displacement = rng.normal(0.0, math.sqrt(K_B * temperature / (m * cfg.omega ** 2)))
    return AtomState(position=cfg.trap_center + displacement, momentum=momentum)


def energy_decay_rate(record: TrajectoryRecord, use_total: bool = True) -> float:
    """-d ln<E>/dt from a least-squares line through the log of the ensemble-mean energy"""
    energy = record.total_energy if use_total else record.kinetic_energy
    mean = energy if energy.ndim == 1 else energy.mean(axis=1)
    slope = np.polyfit(record.time, np.log(mean), 1)[0]
    return float(-slope)


def delayed_damping_factor(cfg: DynamicsConfig) -> float:
    """Energy damping with friction on v(t - tau) relative to v(t) on a harmonic orbit"""
    if cfg.friction_mode != "delayed" or not cfg.trap.enabled:
        return 1.0
    return math.cos(cfg.omega * cfg.delay)
