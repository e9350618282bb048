"""
Closed-form friction, momentum diffusion, stationary temperature and the
spatial profiles of the mirror-mediated cooling force

Positions passed to these functions are absolute distances from the mirror
unless stated otherwise. The round-trip delay defaults to tau = 2x/c at the
given position; profiles pass the delay of the macroscopic mirror distance
explicitly so sub-wavelength offsets only enter through the phase.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy import optimize

from .model import (AtomSpecies, BeamConfig, C_LIGHT, HBAR, K_B, nearest_node,
                    saturation_from_raw)
from .validation import (InvalidParameterError, NoStationaryStateError,
                         ParameterValidator)

ArrayLike = Union[float, np.ndarray]

# Reduction of the effective friction for trapped particles quoted for the turning-point effect
TURNING_POINT_FACTOR = 0.64

# Grid points used to bracket the self-consistent trapped temperature
_BRACKET_POINTS = 400

# Spatial weight of circularly polarised spontaneous emission along the axis
EMISSION_WEIGHT = 2.0 / 5.0


@dataclass(frozen=True)
class FrictionProfile:
    """gamma/m and pump intensity on a grid of node-relative positions"""
    positions: np.ndarray
    gamma_over_m: np.ndarray
    pump_intensity: np.ndarray
    node: float
    mirror_distance: float


@dataclass(frozen=True)
class TemperatureProfile:
    """Stationary temperature versus node-relative trap offset; +inf where gamma <= 0"""
    offsets: np.ndarray
    temperature: np.ndarray
    mirror_distance: float
    trapped_correction: bool = False


def _scalar_or_array(value: np.ndarray, template) -> ArrayLike:
    if np.ndim(template) == 0:
        return float(value)
    return value


def _delay(x: ArrayLike, delay: Optional[float]) -> ArrayLike:
    if delay is not None:
        return delay
    return 2.0 * np.asarray(x, dtype=float) / C_LIGHT


def friction_raw(x: ArrayLike, coupling: float, pump_flux: float, detuning: float,
                 species: AtomSpecies, delay: Optional[float] = None) -> ArrayLike:
    """gamma = pi hbar k^2 tau |A|^2 g^4 / detuning^2 sin(4kx), in kg/s"""
    if detuning == 0:
        raise InvalidParameterError("detuning must be non-zero")
    k = species.wavenumber
    tau = _delay(x, delay)
    xs = np.asarray(x, dtype=float)
    gamma = (math.pi * HBAR * k ** 2 * tau * pump_flux * coupling ** 4 / detuning ** 2
             * np.sin(4.0 * k * xs))
    return _scalar_or_array(gamma, x)


def friction_std(x: ArrayLike, species: AtomSpecies, beam: BeamConfig,
                 delay: Optional[float] = None) -> ArrayLike:
    """gamma = 2 hbar k^2 Gamma tau s (sigma_a / pi w^2) sin(4kx), in kg/s"""
    k = species.wavenumber
    tau = _delay(x, delay)
    xs = np.asarray(x, dtype=float)
    gamma = (2.0 * HBAR * k ** 2 * species.gamma * tau * beam.saturation
             * beam.area_ratio(species) * np.sin(4.0 * k * xs))
    return _scalar_or_array(gamma, x)


def diffusion(x: ArrayLike, species: AtomSpecies, beam: BeamConfig) -> ArrayLike:
    """D = hbar^2 k^2 Gamma s [cos^2(kx) + 2/5 sin^2(kx)], in kg^2 m^2 / s^3"""
    k = species.wavenumber
    xs = np.asarray(x, dtype=float)
    bracket = np.cos(k * xs) ** 2 + EMISSION_WEIGHT * np.sin(k * xs) ** 2
    value = HBAR ** 2 * k ** 2 * species.gamma * beam.saturation * bracket
    return _scalar_or_array(value, x)


def stationary_temperature(x: float, species: AtomSpecies, beam: BeamConfig,
                           delay: Optional[float] = None) -> float:
    """k_B T = D / gamma; raises NoStationaryStateError where gamma <= 0"""
    gamma = friction_std(x, species, beam, delay=delay)
    if not gamma > 0:
        raise NoStationaryStateError(
            f"friction {gamma:.6g} kg/s at x = {x!r} m is not positive: no stationary state"
        )
    return diffusion(x, species, beam) / (gamma * K_B)


def position_variance(temperature: float, species: AtomSpecies, trap_frequency: float) -> float:
    """<xi^2> = k_B T / (m omega^2) of a thermal particle in the harmonic trap"""
    ParameterValidator.require_positive("temperature", temperature)
    ParameterValidator.require_positive("trap_frequency", trap_frequency)
    omega = 2.0 * math.pi * trap_frequency
    return K_B * temperature / (species.mass * omega ** 2)


def thermal_friction(x: float, temperature: float, species: AtomSpecies, beam: BeamConfig,
                     trap_frequency: float, delay: Optional[float] = None) -> float:
    """Friction averaged over the Gaussian position spread around x

    <sin(4k(x + xi))> = sin(4kx) exp(-8 k^2 <xi^2>).
    """
    k = species.wavenumber
    spread = position_variance(temperature, species, trap_frequency)
    return friction_std(x, species, beam, delay=delay) * math.exp(-8.0 * k ** 2 * spread)


def thermal_diffusion(x: float, temperature: float, species: AtomSpecies, beam: BeamConfig,
                      trap_frequency: float) -> float:
    """Diffusion averaged over the Gaussian position spread around x"""
    k = species.wavenumber
    spread = position_variance(temperature, species, trap_frequency)
    mean = 0.5 * (1.0 + EMISSION_WEIGHT)
    ripple = 0.5 * (1.0 - EMISSION_WEIGHT) * math.cos(2.0 * k * x) * math.exp(-2.0 * k ** 2 * spread)
    return HBAR ** 2 * k ** 2 * species.gamma * beam.saturation * (mean + ripple)


def trapped_damping_factor(temperature: float, species: AtomSpecies, trap_frequency: float,
                           delay: float = 0.0) -> float:
    """Energy damping of a thermal trapped ensemble relative to friction frozen at the trap centre

    The position spread washes out the friction by exp(-8 k^2 <xi^2>). Friction
    acting on v(t - delay) of a harmonic orbit contributes a further cos(omega delay).
    """
    ParameterValidator.require_non_negative("delay", delay)
    k = species.wavenumber
    spread = position_variance(temperature, species, trap_frequency)
    return math.exp(-8.0 * k ** 2 * spread) * math.cos(2.0 * math.pi * trap_frequency * delay)


def trapped_stationary_temperature(x: float, species: AtomSpecies, beam: BeamConfig,
                                   trap_frequency: float, delay: Optional[float] = None,
                                   delayed: bool = True) -> float:
    """Self-consistent temperature of a trapped particle sampling gamma(x) and D(x)

    Solves k_B T <gamma>_T c = <D>_T for the coldest root, with c = cos(omega tau)
    when the friction acts on the delayed velocity. The spread grows with T and
    washes the friction out, so a weak trap can have no root at all.
    """
    tau = beam.delay if delay is None else delay
    if not friction_std(x, species, beam, delay=tau) > 0:
        raise NoStationaryStateError(f"friction at x = {x!r} m is not positive: no stationary state")
    k = species.wavenumber
    omega = 2.0 * math.pi * trap_frequency
    retardation = math.cos(omega * tau) if delayed else 1.0

    def balance(temperature: float) -> float:
        gamma = thermal_friction(x, temperature, species, beam, trap_frequency, delay=tau)
        return (K_B * temperature * gamma * retardation
                - thermal_diffusion(x, temperature, species, beam, trap_frequency))

    # the friction work k_B T exp(-T/T_f) peaks at T_f; scan past it for the first crossing
    washout = species.mass * omega ** 2 / (8.0 * k ** 2 * K_B)
    floor = 1e-3 * min(washout, stationary_temperature(x, species, beam, delay=tau))
    grid = np.geomspace(floor, 3.0 * washout, _BRACKET_POINTS)
    values = np.array([balance(t) for t in grid])
    crossing = np.nonzero(values > 0)[0]
    if crossing.size == 0 or crossing[0] == 0:
        raise NoStationaryStateError(
            f"no stationary state at x = {x!r} m in a {trap_frequency:.6g} Hz trap: "
            f"the position spread washes out the friction before it balances diffusion"
        )
    i = int(crossing[0])
    return float(optimize.brentq(balance, grid[i - 1], grid[i], xtol=1e-15, rtol=1e-12))


def turning_point_factor(x: float, species: AtomSpecies, beam: BeamConfig,
                         trap_frequency: float, delay: Optional[float] = None) -> float:
    """Trap-centre stationary temperature over the self-consistent trapped one

    This is the effective friction reduction a delayed, tightly but not
    infinitely confined particle sees compared with the closed-form limit.
    """
    tau = beam.delay if delay is None else delay
    centre = stationary_temperature(x, species, beam, delay=tau)
    return centre / trapped_stationary_temperature(x, species, beam, trap_frequency,
                                                   delay=tau, delayed=True)


def _temperature_grid(offsets: np.ndarray, species: AtomSpecies, beam: BeamConfig,
                      delay: float) -> np.ndarray:
    gamma = friction_std(offsets, species, beam, delay=delay)
    d = diffusion(offsets, species, beam)
    temperature = np.full(offsets.shape, np.inf)
    cooling = gamma > 0
    temperature[cooling] = d[cooling] / (gamma[cooling] * K_B)
    return temperature


def approximate_temperature(species: AtomSpecies, beam: BeamConfig,
                            delay: Optional[float] = None) -> float:
    """Max-friction estimate hbar pi w^2 / (4 sigma_a tau k_B)"""
    tau = beam.delay if delay is None else delay
    return HBAR * math.pi * beam.waist ** 2 / (4.0 * species.cross_section * tau * K_B)


def cooling_rate(x: float, species: AtomSpecies, beam: BeamConfig, trapped: bool = False,
                 delay: Optional[float] = None) -> float:
    """gamma/m; a trapped particle shares its energy with the potential and cools at half"""
    rate = friction_std(x, species, beam, delay=delay) / species.mass
    return rate / 2.0 if trapped else rate


def cooling_time(x: float, species: AtomSpecies, beam: BeamConfig,
                 delay: Optional[float] = None) -> float:
    """m/gamma"""
    gamma = friction_std(x, species, beam, delay=delay)
    if not gamma > 0:
        raise NoStationaryStateError(f"friction at x = {x!r} m is not positive")
    return species.mass / gamma


def max_friction_position(near_x: float, species: AtomSpecies) -> float:
    """Position nearest near_x with sin(4kx) = 1"""
    quarter = species.wavelength / 4.0
    first = species.wavelength / 16.0
    n = round((near_x - first) / quarter)
    return first + n * quarter


def friction_profile(x_center: float, span: float, n: int, species: AtomSpecies,
                     beam: BeamConfig) -> FrictionProfile:
    """Sample gamma/m and sin^2(kx) on a uniform grid of full width `span` around x_center"""
    ParameterValidator.require_count("n", n, 2)
    ParameterValidator.require_positive("span", span)
    ParameterValidator.require_positive("x_center", x_center)
    node = nearest_node(x_center, species)
    center = x_center - node
    positions = center + np.linspace(-span / 2.0, span / 2.0, n)
    delay = 2.0 * x_center / C_LIGHT
    gamma = friction_std(positions, species, beam, delay=delay)
    intensity = np.sin(species.wavenumber * positions) ** 2
    return FrictionProfile(positions=positions, gamma_over_m=gamma / species.mass,
                           pump_intensity=intensity, node=node, mirror_distance=x_center)


def temperature_profile(x: float, offsets, species: AtomSpecies, beam: BeamConfig,
                        trapped_correction: bool = False) -> TemperatureProfile:
    """Stationary temperature at node-relative offsets for mirror distance x"""
    ParameterValidator.require_positive("x", x)
    offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
    for offset in offsets:
        ParameterValidator.validate_offset(float(offset), species.wavelength,
                                           name="offset", inclusive=True)
    temperature = _temperature_grid(offsets, species, beam, delay=2.0 * x / C_LIGHT)
    if trapped_correction:
        temperature = temperature / TURNING_POINT_FACTOR
    return TemperatureProfile(offsets=offsets, temperature=temperature, mirror_distance=x,
                              trapped_correction=trapped_correction)


def minimum_temperature(x: float, species: AtomSpecies, beam: BeamConfig,
                        n: int = 20001) -> Tuple[float, float]:
    """Brute-force minimum of the stationary temperature over offsets in (-lambda/4, lambda/4)"""
    ParameterValidator.require_count("n", n, 3)
    quarter = species.wavelength / 4.0
    offsets = np.linspace(-quarter, quarter, n)
    temperature = _temperature_grid(offsets, species, beam, delay=2.0 * x / C_LIGHT)
    i = int(np.argmin(temperature))
    return float(offsets[i]), float(temperature[i])


def offsets_for_temperature(target: float, x: float, species: AtomSpecies, beam: BeamConfig,
                            trapped_correction: bool = False, n: int = 200001) -> np.ndarray:
    """Node-relative offsets where the stationary temperature crosses `target`"""
    ParameterValidator.require_positive("target", target)
    quarter = species.wavelength / 4.0
    offsets = np.linspace(-quarter, quarter, n)
    temperature = _temperature_grid(offsets, species, beam, delay=2.0 * x / C_LIGHT)
    if trapped_correction:
        temperature = temperature / TURNING_POINT_FACTOR
    residual = temperature - target
    finite = np.isfinite(residual[:-1]) & np.isfinite(residual[1:])
    crossing = finite & (np.sign(residual[:-1]) != np.sign(residual[1:]))
    idx = np.nonzero(crossing)[0]
    r0, r1 = residual[idx], residual[idx + 1]
    return offsets[idx] + (offsets[idx + 1] - offsets[idx]) * r0 / (r0 - r1)


def two_level_saturation(x: ArrayLike, species: AtomSpecies, beam: BeamConfig) -> ArrayLike:
    """Local saturation parameter 2 s sin^2(kx) of the standing wave

    beam.saturation is the excited-state population g^2 |A|^2 / detuning^2 at an
    antinode; the usual two-level saturation parameter is twice the local population.
    """
    xs = np.asarray(x, dtype=float)
    value = 2.0 * beam.saturation * np.sin(species.wavenumber * xs) ** 2
    return _scalar_or_array(value, x)


def dipole_potential(x: ArrayLike, species: AtomSpecies, beam: BeamConfig) -> ArrayLike:
    """U = (hbar detuning / 2) ln(1 + s_2(x)) with s_2 the two-level saturation parameter"""
    value = 0.5 * HBAR * beam.detuning * np.log1p(two_level_saturation(x, species, beam))
    return _scalar_or_array(value, x)


def dipole_force(x: ArrayLike, species: AtomSpecies, beam: BeamConfig) -> ArrayLike:
    """-dU/dx of the standing-wave dipole potential"""
    k = species.wavenumber
    xs = np.asarray(x, dtype=float)
    s_2 = two_level_saturation(xs, species, beam)
    # d s_2 / dx = 2 s k sin(2kx)
    value = -HBAR * beam.detuning * beam.saturation * k * np.sin(2.0 * k * xs) / (1.0 + s_2)
    return _scalar_or_array(value, x)


def raw_parameters(species: AtomSpecies, beam: BeamConfig) -> Tuple[float, float]:
    """(g, |A|^2) consistent with the beam's waist and saturation"""
    g = beam.coupling if beam.coupling is not None else beam.coupling_for(species)
    pump_flux = beam.pump_flux if beam.pump_flux is not None else beam.pump_flux_for(species)
    # round trip guard for hand-built beams
    if not math.isclose(saturation_from_raw(g, pump_flux, beam.detuning), beam.saturation,
                        rel_tol=1e-9) and beam.saturation > 0:
        raise InvalidParameterError("raw parameters are inconsistent with beam.saturation")
    return g, pump_flux
