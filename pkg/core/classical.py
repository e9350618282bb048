"""
Classical retarded binding of a polarizable particle to its own reflection

The particle sits a distance x in front of a plane mirror, illuminated by the
standing wave E0 sin(kx). Its image field returns after tau = 2x/c through the
propagator zeta = -i r exp(2ikx) (r = 1 for an ideal mirror).
"""

import cmath
import math
from dataclasses import dataclass

from .model import C_LIGHT
from .validation import ParameterValidator

# Both small parameters (|alpha zeta| and k tau |v|) must stay below this
GUARD_THRESHOLD = 0.1

# Central-difference step in units of the wavelength
FD_STEP_FRACTION = 1e-4


@dataclass(frozen=True)
class ClassicalParticle:
    """Point particle with real, propagator-normalised polarizability"""

    alpha: float
    velocity: float
    position: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", ParameterValidator.require_real("alpha", self.alpha))
        ParameterValidator.require_finite("velocity", self.velocity)
        ParameterValidator.require_positive("position", self.position)


@dataclass(frozen=True)
class MirrorChannel:
    """Standing-wave illumination and the particle-mirror-particle round trip"""

    wavelength: float
    field_amplitude: float = 1.0
    reflectivity: complex = 1.0 + 0.0j

    def __post_init__(self):
        ParameterValidator.require_positive("wavelength", self.wavelength)
        ParameterValidator.require_finite("field_amplitude", self.field_amplitude)

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    def propagator(self, x: float) -> complex:
        return -1j * self.reflectivity * cmath.exp(2j * self.wavenumber * x)

    def delay(self, x: float) -> float:
        return 2.0 * x / C_LIGHT

    def incident(self, x: float) -> float:
        return self.field_amplitude * math.sin(self.wavenumber * x)

    def incident_gradient(self, x: float) -> float:
        k = self.wavenumber
        return self.field_amplitude * k * math.cos(k * x)


@dataclass(frozen=True)
class ForceTerms:
    """The three bracketed terms of the retarded force, each with its prefactor"""

    dipole: float
    binding: float
    cooling: float
    binding_velocity_part: float

    @property
    def total(self) -> float:
        return self.dipole + self.binding + self.cooling


def check_validity(particle: ClassicalParticle, channel: MirrorChannel) -> None:
    """Raise OutOfValidityError unless |alpha zeta| and k tau |v| are small"""
    x = particle.position
    alpha_zeta = abs(particle.alpha * channel.propagator(x))
    k_v_tau = channel.wavenumber * channel.delay(x) * abs(particle.velocity)
    ParameterValidator.validate_guard(alpha_zeta, k_v_tau, GUARD_THRESHOLD)


def _self_consistent(channel: MirrorChannel, alpha: float, x: float) -> complex:
    return channel.incident(x) / (1.0 - alpha * channel.propagator(x))


def self_consistent_gradient(particle: ClassicalParticle, channel: MirrorChannel,
                             method: str = "analytic") -> complex:
    """d/dx of E0(x) / (1 - alpha zeta(x)), acting on both E0 and zeta"""
    alpha, x = particle.alpha, particle.position
    if method == "numeric":
        h = channel.wavelength * FD_STEP_FRACTION
        return (_self_consistent(channel, alpha, x + h)
                - _self_consistent(channel, alpha, x - h)) / (2.0 * h)
    if method != "analytic":
        raise ValueError(f"unknown differentiation method: {method}")
    zeta = channel.propagator(x)
    denom = 1.0 - alpha * zeta
    dzeta = 2j * channel.wavenumber * zeta
    return (channel.incident_gradient(x) / denom
            + channel.incident(x) * alpha * dzeta / denom ** 2)


def retarded_field(particle: ClassicalParticle, channel: MirrorChannel,
                   method: str = "analytic") -> complex:
    """Field at the moving particle to lowest order in velocity and delay"""
    check_validity(particle, channel)
    x = particle.position
    alpha_zeta = particle.alpha * channel.propagator(x)
    static = _self_consistent(channel, particle.alpha, x)
    if particle.velocity == 0:
        return static
    gradient = self_consistent_gradient(particle, channel, method)
    lag = alpha_zeta * channel.delay(x) / (1.0 - alpha_zeta)
    return static - lag * particle.velocity * gradient


def field_at(r: float, particle: ClassicalParticle, channel: MirrorChannel) -> complex:
    """Total field at point r: incident wave plus the image wave returning from the mirror

    The image part is fixed by the particle's own field and travels as exp(ikr),
    so the induced dipole itself is not differentiated.
    """
    x = particle.position
    image = retarded_field(particle, channel) - channel.incident(x)
    return channel.incident(r) + image * cmath.exp(1j * channel.wavenumber * (r - x))


def field_gradient(particle: ClassicalParticle, channel: MirrorChannel,
                   method: str = "analytic") -> complex:
    """d/dr of field_at at r = x"""
    x = particle.position
    if method == "numeric":
        h = channel.wavelength * FD_STEP_FRACTION
        return (field_at(x + h, particle, channel) - field_at(x - h, particle, channel)) / (2.0 * h)
    if method != "analytic":
        raise ValueError(f"unknown differentiation method: {method}")
    image = retarded_field(particle, channel) - channel.incident(x)
    return channel.incident_gradient(x) + 1j * channel.wavenumber * image


def force_from_field(particle: ClassicalParticle, channel: MirrorChannel,
                     method: str = "analytic") -> float:
    """F = 1/2 Re(alpha E grad E*) evaluated from the field itself"""
    e = retarded_field(particle, channel)
    grad = field_gradient(particle, channel, method)
    return 0.5 * particle.alpha * (e * grad.conjugate()).real


def classical_force(particle: ClassicalParticle, channel: MirrorChannel) -> ForceTerms:
    """Dipole, Doppler-shifted binding and cooling terms of the retarded force"""
    check_validity(particle, channel)
    alpha, v, x = particle.alpha, particle.velocity, particle.position
    k = channel.wavenumber
    tau = channel.delay(x)
    prefactor = 0.25 * alpha * channel.field_amplitude ** 2 * k
    shape = math.sin(k * x) ** 2 * (4.0 * math.cos(k * x) ** 2 - 1.0)
    dipole = prefactor * math.sin(2.0 * k * x)
    binding = prefactor * 2.0 * alpha * (1.0 - v / C_LIGHT) * shape
    cooling = -prefactor * 2.0 * alpha * k * tau * v * math.sin(4.0 * k * x)
    return ForceTerms(dipole=dipole, binding=binding, cooling=cooling,
                      binding_velocity_part=-prefactor * 2.0 * alpha * (v / C_LIGHT) * shape)
