"""
Mode-resolved semiclassical backend

A two-level atom in front of a perfect mirror couples to a discretised set of
half-space modes sin(x w_j / c). The excited state is adiabatically eliminated
so the dipole follows the local field instantly; the mirror round trip, and
with it the friction, emerges from interference between the modes.

Everything runs in the frame rotating at the pump frequency w0. Mode functions
are evaluated relative to a reference field node, which flips the sign of all
of them together and leaves every force unchanged.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .analytic import friction_std, max_friction_position, raw_parameters
from .dynamics import AtomState
from .model import AtomSpecies, BeamConfig, C_LIGHT, HBAR, nearest_node
from .validation import (InvalidParameterError, ParameterValidator,
                         TransientNotConvergedError)

logger = logging.getLogger(__name__)

# Fastest detuned rotation per step must stay below this phase
MAX_STEP_PHASE = 0.1

# Minimum bandwidth in units of 1/tau
MIN_BANDWIDTH_TAU = 20.0


@dataclass
class ModeSet:
    """Uniform mode grid centred on the pump, with complex amplitudes in mode units

    The pump sits on the central mode; with hold_pump its amplitude stays at
    A / sqrt(spacing), a constant coherent drive.
    """

    species: AtomSpecies
    detunings: np.ndarray
    spacing: float
    amplitudes: np.ndarray
    coupling: float
    pump_amplitude: float
    detuning: float
    gamma: float
    reference_node: float
    hold_pump: bool = True

    def __post_init__(self):
        n = self.detunings.shape[0]
        if n % 2 == 0:
            raise InvalidParameterError(f"modes.n_modes must be odd so the pump is on the grid, got {n}")
        if self.amplitudes.shape != self.detunings.shape:
            raise InvalidParameterError("one amplitude per mode is required")
        ParameterValidator.require_positive("modes.spacing", self.spacing)
        ParameterValidator.require_non_negative("modes.coupling", self.coupling)
        ParameterValidator.require_nonzero("modes.detuning", self.detuning)
        ParameterValidator.require_non_negative("modes.gamma", self.gamma)

    @classmethod
    def create(cls, species: AtomSpecies, n_modes: int, bandwidth: float, coupling: float,
               pump_flux: float, detuning: float, reference_x: float,
               gamma: Optional[float] = None, hold_pump: bool = True) -> "ModeSet":
        """Empty modes except the pump, which carries flux |A|^2 = pump_flux"""
        ParameterValidator.require_count("modes.n_modes", n_modes, 1)
        ParameterValidator.require_positive("modes.bandwidth", bandwidth)
        ParameterValidator.require_non_negative("pump_flux", pump_flux)
        spacing = bandwidth / n_modes
        detunings = spacing * (np.arange(n_modes) - n_modes // 2)
        amplitudes = np.zeros(n_modes, dtype=complex)
        pump_amplitude = math.sqrt(pump_flux)
        amplitudes[n_modes // 2] = pump_amplitude / math.sqrt(spacing)
        return cls(species=species, detunings=detunings, spacing=spacing,
                   amplitudes=amplitudes, coupling=coupling, pump_amplitude=pump_amplitude,
                   detuning=detuning, gamma=species.gamma if gamma is None else gamma,
                   reference_node=nearest_node(reference_x, species), hold_pump=hold_pump)

    @property
    def n_modes(self) -> int:
        return self.detunings.shape[0]

    @property
    def pump_index(self) -> int:
        return self.n_modes // 2

    @property
    def bandwidth(self) -> float:
        return self.n_modes * self.spacing

    @property
    def revival_time(self) -> float:
        return 2.0 * math.pi / self.spacing

    @property
    def max_step(self) -> float:
        top = float(np.max(np.abs(self.detunings)))
        return math.inf if top == 0.0 else MAX_STEP_PHASE / top

    def copy(self) -> "ModeSet":
        return replace(self, amplitudes=self.amplitudes.copy())

    def photon_number(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def mode_functions(self, x: float):
        """(sin(x w_j/c), (w_j/c) cos(x w_j/c)) up to a common sign"""
        k = self.species.wavenumber
        phase = k * (x - self.reference_node) + self.detunings * (x / C_LIGHT)
        return np.sin(phase), (k + self.detunings / C_LIGHT) * np.cos(phase)

    def check_horizon(self, delay: float, duration: float) -> None:
        """Bandwidth must resolve the delay and the revival must lie beyond the run"""
        if self.n_modes > 1 and self.bandwidth * delay < MIN_BANDWIDTH_TAU:
            raise InvalidParameterError(
                f"modes bandwidth {self.bandwidth:.4g} rad/s resolves less than "
                f"{MIN_BANDWIDTH_TAU:g}/tau"
            )
        if self.n_modes > 1 and self.revival_time <= duration:
            raise InvalidParameterError(
                f"revival horizon {self.revival_time:.4g} s does not exceed the run length {duration:.4g} s"
            )


class _ModeStepper:
    """RK4 for the coupling with the free rotation taken exactly (interaction picture)"""

    def __init__(self, modes: ModeSet, dt: float):
        ParameterValidator.require_positive("dt", dt)
        if dt > modes.max_step * (1.0 + 1e-12):
            raise InvalidParameterError(
                f"dt {dt:.4g} s exceeds {MAX_STEP_PHASE:g}/max|w_j - w0| = {modes.max_step:.4g} s"
            )
        self.modes = modes
        self.dt = dt
        self.root = math.sqrt(modes.spacing)
        self.response = modes.coupling / (modes.detuning + 1j * modes.gamma)
        self.half = np.exp(-0.5j * modes.detunings * dt)
        self.full = self.half ** 2
        self.mask = np.ones(modes.n_modes)
        if modes.hold_pump:
            self.mask[modes.pump_index] = 0.0

    def dipole(self, a: np.ndarray, u: np.ndarray) -> complex:
        return self.response * np.dot(u, a) * self.root

    def rate(self, a: np.ndarray, u: np.ndarray) -> np.ndarray:
        sigma = self.dipole(a, u)
        return -1j * self.modes.coupling * self.root * sigma * u * self.mask

    def step(self, a: np.ndarray, u0, u_mid, u1) -> np.ndarray:
        h = self.dt
        k1 = self.rate(a, u0)
        k2 = self.rate(self.half * (a + 0.5 * h * k1), u_mid) / self.half
        k3 = self.rate(self.half * (a + 0.5 * h * k2), u_mid) / self.half
        k4 = self.rate(self.full * (a + h * k3), u1) / self.full
        return self.full * (a + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))

    def force(self, a: np.ndarray, u: np.ndarray, w: np.ndarray) -> float:
        sigma = self.dipole(a, u)
        gradient = np.dot(w, a) * self.root
        return -2.0 * HBAR * self.modes.coupling * float((np.conj(sigma) * gradient).real)


def _run_path(modes: ModeSet, path: Callable[[np.ndarray], np.ndarray], dt: float,
              n_steps: int) -> np.ndarray:
    """Evolve in place along x = path(t); returns the force at t = 0, dt, ..., n_steps dt"""
    stepper = _ModeStepper(modes, dt)
    xs = path(0.5 * dt * np.arange(2 * n_steps + 1))
    forces = np.empty(n_steps + 1)
    a = modes.amplitudes
    u, w = modes.mode_functions(float(xs[0]))
    forces[0] = stepper.force(a, u, w)
    for n in range(n_steps):
        u_mid, _ = modes.mode_functions(float(xs[2 * n + 1]))
        u1, w1 = modes.mode_functions(float(xs[2 * n + 2]))
        a = stepper.step(a, u, u_mid, u1)
        forces[n + 1] = stepper.force(a, u1, w1)
        u = u1
    modes.amplitudes = a
    return forces


def evolve_modes(modes: ModeSet, state: AtomState, dt: float):
    """Advance the field by dt while the atom moves at p/m; returns (new ModeSet, force at t + dt)"""
    evolved = modes.copy()
    velocity = state.momentum / modes.species.mass
    forces = _run_path(evolved, lambda t: state.position + velocity * t, dt, 1)
    return evolved, float(forces[-1])


def field_energy(modes: ModeSet, x: float) -> float:
    """hbar [sum delta_j |a_j|^2 + (g^2/detuning) |S|^2]; conserved for a static atom when gamma = 0"""
    u, _ = modes.mode_functions(x)
    s = np.dot(u, modes.amplitudes) * math.sqrt(modes.spacing)
    free = float(np.sum(modes.detunings * np.abs(modes.amplitudes) ** 2))
    return HBAR * (free + modes.coupling ** 2 / modes.detuning * abs(s) ** 2)


def emission_projection(rng: np.random.Generator, size=None):
    """Axial direction cosine u with density (3/8)(1 + u^2) on [-1, 1]; E[u^2] = 2/5

    Inverts the CDF (u^3 + 3u + 4)/8 = r in closed form.
    """
    r = rng.random(size)
    shift = 4.0 * r - 2.0
    root = np.sqrt(shift ** 2 + 1.0)
    u = np.cbrt(shift + root) + np.cbrt(shift - root)
    return float(u) if size is None else u


def spontaneous_recoil(state: AtomState, local_saturation: float, dt: float,
                       rng: np.random.Generator, species: AtomSpecies) -> float:
    """Momentum kick from at most one scattering event within dt

    A standing wave is an equal mix of counter-propagating running waves, so the
    absorbed photon pushes by +hbar k or -hbar k with equal odds.
    """
    ParameterValidator.require_non_negative("local_saturation", local_saturation)
    probability = 2.0 * species.gamma * local_saturation * dt
    if probability >= MAX_STEP_PHASE:
        raise InvalidParameterError(
            f"scattering probability per step {probability:.3g} is not small; reduce dt"
        )
    if probability == 0.0 or rng.random() >= probability:
        return 0.0
    recoil = HBAR * species.wavenumber
    absorbed = recoil if rng.random() < 0.5 else -recoil
    return absorbed + recoil * emission_projection(rng)


@dataclass(frozen=True)
class ModeConfig:
    """Numerical settings of the mode backend, in units of the round-trip delay"""

    species: AtomSpecies
    beam: BeamConfig
    n_modes: int = 101
    bandwidth_tau: float = 40.0
    duration_tau: float = 12.0
    settle_tau: float = 4.0
    step_fraction: float = 0.1
    v_probe: float = 0.02
    include_decay: bool = True
    hold_pump: bool = True
    convergence_tolerance: float = 0.1
    displacement: Optional[float] = None
    delay: float = field(init=False)

    def __post_init__(self):
        ParameterValidator.require_count("modes.n_modes", self.n_modes, 1)
        if self.n_modes % 2 == 0:
            raise InvalidParameterError(f"modes.n_modes must be odd, got {self.n_modes}")
        ParameterValidator.require_positive("modes.bandwidth_tau", self.bandwidth_tau)
        ParameterValidator.require_positive("modes.duration_tau", self.duration_tau)
        ParameterValidator.require_non_negative("modes.settle_tau", self.settle_tau)
        ParameterValidator.require_positive("modes.step_fraction", self.step_fraction)
        ParameterValidator.require_below("modes.step_fraction", self.step_fraction,
                                         MAX_STEP_PHASE, inclusive=True)
        ParameterValidator.require_nonzero("modes.v_probe", self.v_probe)
        if 2.0 * self.settle_tau >= self.duration_tau:
            raise InvalidParameterError("modes.settle_tau must leave an averaging window")
        object.__setattr__(self, "delay", self.beam.delay)
        if self.n_modes > 1:
            if self.bandwidth_tau < MIN_BANDWIDTH_TAU:
                raise InvalidParameterError(
                    f"modes.bandwidth_tau {self.bandwidth_tau:g} must be at least {MIN_BANDWIDTH_TAU:g}"
                )
            if self.revival_time <= (self.duration_tau + 1.0) * self.delay:
                raise InvalidParameterError(
                    f"revival horizon {self.revival_time:.4g} s must exceed the run plus one delay "
                    f"({(self.duration_tau + 1.0) * self.delay:.4g} s); raise modes.n_modes"
                )

    @property
    def bandwidth(self) -> float:
        return self.bandwidth_tau / self.delay

    @property
    def spacing(self) -> float:
        return self.bandwidth / self.n_modes

    @property
    def revival_time(self) -> float:
        return 2.0 * math.pi / self.spacing

    @property
    def dt(self) -> float:
        """step_fraction / max|w_j - w0|; a single mode uses the bandwidth as its scale"""
        if self.n_modes == 1:
            return self.step_fraction / (0.5 * self.bandwidth)
        return self.step_fraction / ((self.n_modes // 2) * self.spacing)

    def with_changes(self, **changes) -> "ModeConfig":
        return replace(self, **changes)

    def build(self, reference_x: float) -> ModeSet:
        g, pump_flux = raw_parameters(self.species, self.beam)
        return ModeSet.create(self.species, self.n_modes, self.bandwidth, g, pump_flux,
                              self.beam.detuning, reference_x,
                              gamma=self.species.gamma if self.include_decay else 0.0,
                              hold_pump=self.hold_pump)


def drag_force(x: float, velocity: float, cfg: ModeConfig):
    """Force time series for an atom passing x at constant velocity halfway through the run"""
    dt = cfg.dt
    n_steps = 2 * int(math.ceil(cfg.duration_tau * cfg.delay / dt / 2.0))
    midpoint = 0.5 * n_steps * dt
    modes = cfg.build(x)
    forces = _run_path(modes, lambda t: x + velocity * (t - midpoint), dt, n_steps)
    return dt * np.arange(n_steps + 1), forces


def extract_friction(x: float, v_probe: Optional[float], cfg: ModeConfig) -> float:
    """gamma_eff = -(<F(v)> - <F(-v)>) / (2v) from two symmetric drags through x

    The passes at +v and -v cover the same positions over the averaging
    window, so the position-dependent static forces cancel exactly.
    """
    v = cfg.v_probe if v_probe is None else v_probe
    ParameterValidator.require_nonzero("v_probe", v)
    k_v_tau = cfg.species.wavenumber * abs(v) * cfg.delay
    if k_v_tau >= 0.1:
        raise InvalidParameterError(f"k v_probe tau = {k_v_tau:.3g} is not small")

    times, forward = drag_force(x, v, cfg)
    _, backward = drag_force(x, -v, cfg)
    n = times.shape[0] - 1
    skip = int(math.ceil(cfg.settle_tau * cfg.delay / cfg.dt))
    window = slice(skip, n - skip + 1)
    odd = forward[window] - backward[::-1][window]
    gamma_eff = -float(np.mean(odd)) / (2.0 * v)

    half = odd.shape[0] // 2
    early, late = float(np.mean(odd[:half])), float(np.mean(odd[half:]))
    reference = 2.0 * abs(v) * abs(float(friction_std(max_friction_position(x, cfg.species),
                                                      cfg.species, cfg.beam, delay=cfg.delay)))
    g, _ = raw_parameters(cfg.species, cfg.beam)
    if g > 0 and abs(early - late) > cfg.convergence_tolerance * max(abs(np.mean(odd)), reference):
        raise TransientNotConvergedError(
            f"friction force still drifting at x = {x!r} m: window halves give "
            f"{early:.4g} N and {late:.4g} N"
        )
    logger.debug(f"gamma_eff = {gamma_eff:.6g} kg/s at x = {x!r} m with v_probe = {v:g} m/s")
    return gamma_eff


@dataclass(frozen=True)
class DelayResponse:
    """Force after a sudden displacement at t = 0 and the detected echo time"""

    times: np.ndarray
    force: np.ndarray
    feature_time: float
    level_before: float
    level_after: float
    resolution: float


def delay_response(x: float, cfg: ModeConfig, displacement: Optional[float] = None,
                   observe_tau: float = 2.0) -> DelayResponse:
    """Hold the atom at x for two delays, jump it by `displacement`, and time the field echo

    Before the echo the returning image still comes from the old position; the
    step between the two force plateaus is located by its half-way crossing.
    """
    tau = cfg.delay
    shift = cfg.displacement if displacement is None else displacement
    if shift is None:
        shift = cfg.species.wavelength / 16.0
    dt = cfg.dt
    settle_steps = int(math.ceil(2.0 * tau / dt))
    observe_steps = int(math.ceil(observe_tau * tau / dt))
    if cfg.n_modes > 1 and cfg.revival_time <= (settle_steps + observe_steps) * dt:
        raise InvalidParameterError("revival horizon shorter than the displacement run")
    jump = settle_steps * dt

    modes = cfg.build(x)
    forces = _run_path(modes, lambda t: np.where(t < jump - 0.25 * dt, x, x + shift),
                       dt, settle_steps + observe_steps)
    times = dt * np.arange(forces.shape[0]) - jump
    after = forces[settle_steps:]
    t_after = times[settle_steps:]

    def plateau(lo: float, hi: float) -> float:
        sel = (t_after >= lo * tau) & (t_after <= hi * tau)
        return float(np.mean(after[sel]))

    before_level = plateau(0.25, 0.75)
    after_level = plateau(1.25, 1.75)
    feature = math.nan
    if before_level != after_level:
        mid = 0.5 * (before_level + after_level)
        sign = np.sign(before_level - mid)
        search = (t_after >= 0.5 * tau) & (t_after <= 1.5 * tau)
        idx = np.nonzero(search)[0]
        residual = after[idx] - mid
        flipped = np.nonzero(np.sign(residual) != sign)[0]
        if flipped.size and flipped[0] > 0:
            i1 = idx[flipped[0]]
            i0 = i1 - 1
            r0, r1 = after[i0] - mid, after[i1] - mid
            feature = float(t_after[i0] + (t_after[i1] - t_after[i0]) * r0 / (r0 - r1))
    return DelayResponse(times=times, force=forces, feature_time=feature,
                         level_before=before_level, level_after=after_level,
                         resolution=2.0 * math.pi / cfg.bandwidth)
