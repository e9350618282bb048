"""
Physical parameter records, unit conventions and derived quantities

SI units throughout; temperatures in kelvin. Gamma is HALF the excited-state
population decay rate (spontaneous decay happens at 2*Gamma).
"""

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from scipy import constants

from .validation import InvalidParameterError, ParameterValidator

HBAR = constants.hbar
K_B = constants.k
C_LIGHT = constants.c

# Far-detuned regime threshold, |detuning| >= 10 Gamma
FAR_DETUNING_RATIO = 10.0


@dataclass(frozen=True)
class AtomSpecies:
    """Particle constants; wavenumber and cross-section are derived on construction"""

    mass: float
    wavelength: float
    gamma: float
    name: str = "custom"
    wavenumber: float = field(init=False)
    cross_section: float = field(init=False)

    def __post_init__(self):
        ParameterValidator.require_positive("species.mass", self.mass)
        ParameterValidator.require_positive("species.wavelength", self.wavelength)
        ParameterValidator.require_positive("species.gamma", self.gamma)
        object.__setattr__(self, "wavenumber", 2.0 * math.pi / self.wavelength)
        object.__setattr__(self, "cross_section", 3.0 * self.wavelength ** 2 / (2.0 * math.pi))


@dataclass(frozen=True)
class BeamConfig:
    """Pump and geometry parameters

    The optional raw pair (coupling g, pump_flux |A|^2) is the form used by the
    raw friction formula; when present the saturation is g^2 |A|^2 / detuning^2.
    """

    waist: float
    saturation: float
    detuning: float
    mirror_distance: float
    coupling: Optional[float] = None
    pump_flux: Optional[float] = None
    delay: float = field(init=False)

    def __post_init__(self):
        ParameterValidator.require_positive("beam.waist", self.waist)
        ParameterValidator.require_non_negative("beam.saturation", self.saturation)
        ParameterValidator.require_nonzero("beam.detuning", self.detuning)
        ParameterValidator.require_positive("beam.mirror_distance", self.mirror_distance)
        if (self.coupling is None) != (self.pump_flux is None):
            raise InvalidParameterError("beam.coupling and beam.pump_flux must be given together")
        if self.coupling is not None:
            ParameterValidator.require_non_negative("beam.coupling", self.coupling)
            ParameterValidator.require_non_negative("beam.pump_flux", self.pump_flux)
            expected = saturation_from_raw(self.coupling, self.pump_flux, self.detuning)
            if not math.isclose(expected, self.saturation, rel_tol=1e-12, abs_tol=0.0) and \
                    not (expected == 0.0 and self.saturation == 0.0):
                raise InvalidParameterError(
                    f"beam.saturation {self.saturation:.12g} disagrees with g^2|A|^2/detuning^2 "
                    f"= {expected:.12g}"
                )
        object.__setattr__(self, "delay", 2.0 * self.mirror_distance / C_LIGHT)

    @classmethod
    def from_raw(cls, coupling: float, pump_flux: float, detuning: float,
                 waist: float, mirror_distance: float) -> "BeamConfig":
        """Build from the raw (g, |A|^2, detuning) triple"""
        saturation = saturation_from_raw(coupling, pump_flux, detuning)
        return cls(waist=waist, saturation=saturation, detuning=detuning,
                   mirror_distance=mirror_distance, coupling=coupling, pump_flux=pump_flux)

    @classmethod
    def from_delay(cls, delay: float, waist: float, saturation: float,
                   detuning: float) -> "BeamConfig":
        """Build from the round-trip delay tau instead of the mirror distance"""
        ParameterValidator.require_positive("beam.delay", delay)
        return cls(waist=waist, saturation=saturation, detuning=detuning,
                   mirror_distance=delay * C_LIGHT / 2.0)

    def area_ratio(self, species: AtomSpecies) -> float:
        """sigma_a / (pi w^2)"""
        return species.cross_section / (math.pi * self.waist ** 2)

    def coupling_for(self, species: AtomSpecies) -> float:
        return coupling_from_waist(species, self.waist)

    def pump_flux_for(self, species: AtomSpecies) -> float:
        """|A|^2 that yields the configured saturation with the waist-derived coupling"""
        g = self.coupling if self.coupling is not None else self.coupling_for(species)
        return self.saturation * self.detuning ** 2 / g ** 2

    def is_far_detuned(self, species: AtomSpecies) -> bool:
        return abs(self.detuning) >= FAR_DETUNING_RATIO * species.gamma

    def is_weakly_saturated(self) -> bool:
        return self.saturation < 1.0

    def with_saturation(self, saturation: float) -> "BeamConfig":
        return replace(self, saturation=saturation, coupling=None, pump_flux=None)

    def with_detuning(self, detuning: float) -> "BeamConfig":
        return replace(self, detuning=detuning, coupling=None, pump_flux=None)

    def with_mirror_distance(self, mirror_distance: float) -> "BeamConfig":
        return replace(self, mirror_distance=mirror_distance)


@dataclass(frozen=True)
class TrapConfig:
    """External harmonic trap

    center_offset is measured from the field node nearest the mirror distance;
    None selects the maximum-friction point on the antinode side (-3 lambda/16),
    where the diffusion is lowest.
    """

    frequency: float = 1.5e6
    center_offset: Optional[float] = None
    enabled: bool = True

    def __post_init__(self):
        if self.enabled:
            ParameterValidator.require_positive("trap.frequency", self.frequency)

    def validate(self, species: AtomSpecies) -> None:
        if self.center_offset is not None:
            ParameterValidator.validate_offset(self.center_offset, species.wavelength,
                                               name="trap.center_offset")

    def resolved_offset(self, species: AtomSpecies) -> float:
        if self.center_offset is None:
            return -3.0 * species.wavelength / 16.0
        return self.center_offset

    @property
    def angular_frequency(self) -> float:
        return 2.0 * math.pi * self.frequency if self.enabled else 0.0


def rubidium_preset() -> AtomSpecies:
    """Rubidium D2 line: m = 1.443e-25 kg, lambda = 780 nm, Gamma = 1.9e7 rad/s"""
    return AtomSpecies(mass=1.443e-25, wavelength=780e-9, gamma=1.9e7, name="rubidium")


SPECIES_PRESETS = {
    "rubidium": rubidium_preset,
}


def saturation_from_raw(coupling: float, pump_flux: float, detuning: float) -> float:
    """s = g^2 |A|^2 / detuning^2"""
    if detuning == 0:
        raise InvalidParameterError("detuning must be non-zero to define the saturation")
    return coupling ** 2 * pump_flux / detuning ** 2


def coupling_from_waist(species: AtomSpecies, waist: float) -> float:
    """Solve 2 pi g^2 = 4 Gamma sigma_a / (pi w^2) for g"""
    ParameterValidator.require_positive("waist", waist)
    return math.sqrt(4.0 * species.gamma * species.cross_section
                     / (math.pi * waist ** 2) / (2.0 * math.pi))


def doppler_temperature(species: AtomSpecies) -> float:
    """hbar Gamma / k_B"""
    return HBAR * species.gamma / K_B


def nearest_node(x: float, species: AtomSpecies) -> float:
    """Position of the standing-wave node (sin(kx) = 0) closest to x"""
    half = species.wavelength / 2.0
    return round(x / half) * half
