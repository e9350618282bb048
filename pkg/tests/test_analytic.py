"""
Tests for the closed-form friction, diffusion and temperature formulas
"""

import math

import numpy as np
import pytest
from core.analytic import (TURNING_POINT_FACTOR, approximate_temperature, cooling_rate,
                           cooling_time, diffusion, dipole_force, dipole_potential,
                           friction_profile, friction_raw, friction_std, max_friction_position,
                           minimum_temperature, offsets_for_temperature, position_variance,
                           raw_parameters, stationary_temperature, temperature_profile,
                           thermal_diffusion, thermal_friction, trapped_damping_factor,
                           trapped_stationary_temperature, turning_point_factor,
                           two_level_saturation)
from core.model import HBAR, K_B, BeamConfig, coupling_from_waist, nearest_node
from core.validation import InvalidParameterError, NoStationaryStateError


class TestFriction:
    """Test the friction coefficient"""

    def test_raw_and_standard_forms_agree(self, rubidium):
        """Test the (g, |A|^2) form equals the (s, w) form for random parameters"""
        rng = np.random.default_rng(7)
        for _ in range(100):
            waist = rng.uniform(0.5e-6, 5e-6)
            saturation = rng.uniform(0.01, 0.5)
            detuning = -rng.uniform(10.0, 100.0) * rubidium.gamma
            x = rng.uniform(0.1, 10.0)
            g = coupling_from_waist(rubidium, waist)
            pump_flux = saturation * detuning ** 2 / g ** 2
            beam = BeamConfig(waist=waist, saturation=saturation, detuning=detuning,
                              mirror_distance=x)
            raw = friction_raw(x, g, pump_flux, detuning, rubidium)
            std = friction_std(x, rubidium, beam)
            assert raw == pytest.approx(std, rel=1e-10, abs=0.0)

    def test_peak_rate_at_three_meters(self, rubidium, profile_beam):
        """Test gamma/m of about 360 1/s and a cooling time of about 2.8 ms"""
        x = max_friction_position(3.0, rubidium)
        rate = friction_std(x, rubidium, profile_beam) / rubidium.mass
        assert rate == pytest.approx(360.66, rel=1e-3)
        assert cooling_time(x, rubidium, profile_beam) == pytest.approx(2.7727e-3, rel=1e-3)

    def test_heating_region(self, rubidium, profile_beam):
        """Test the friction is negative where sin(4kx) = -1"""
        node = nearest_node(3.0, rubidium)
        assert friction_std(node - rubidium.wavelength / 16.0, rubidium, profile_beam) < 0
        assert friction_std(node + rubidium.wavelength / 16.0, rubidium, profile_beam) > 0

    def test_friction_scales_with_distance(self, rubidium, profile_beam):
        """Test doubling the mirror distance at equal phase doubles the friction"""
        x1 = max_friction_position(3.0, rubidium)
        x2 = max_friction_position(6.0, rubidium)
        ratio = friction_std(x2, rubidium, profile_beam) / friction_std(x1, rubidium, profile_beam)
        assert ratio == pytest.approx(x2 / x1, rel=1e-9)
        assert ratio == pytest.approx(2.0, rel=1e-6)

    def test_zero_detuning_rejected(self, rubidium):
        """Test the raw form refuses zero detuning"""
        with pytest.raises(InvalidParameterError):
            friction_raw(1.0, 1.0, 1.0, 0.0, rubidium)

    def test_trapped_rate_is_halved(self, rubidium, profile_beam):
        """Test energy sharing with the trap halves the cooling rate"""
        x = max_friction_position(3.0, rubidium)
        free = cooling_rate(x, rubidium, profile_beam)
        assert cooling_rate(x, rubidium, profile_beam, trapped=True) == pytest.approx(free / 2.0)

    def test_array_input(self, rubidium, profile_beam):
        """Test array positions give array results"""
        xs = np.linspace(0.0, rubidium.wavelength, 7)
        assert friction_std(xs, rubidium, profile_beam, delay=profile_beam.delay).shape == (7,)
        assert isinstance(friction_std(0.1, rubidium, profile_beam), float)


class TestMaxFrictionPosition:
    """Test the maximum-friction lookup"""

    def test_origin(self, rubidium):
        """Test the first maximum lies at lambda/16"""
        assert max_friction_position(0.0, rubidium) == pytest.approx(rubidium.wavelength / 16.0)

    def test_near_three_meters(self, rubidium, profile_beam):
        """Test the maximum is within lambda/8 and beats a grid search"""
        x = max_friction_position(3.0, rubidium)
        assert abs(x - 3.0) <= rubidium.wavelength / 8.0
        grid = x + np.linspace(-rubidium.wavelength / 4.0, rubidium.wavelength / 4.0, 1000)
        peak = friction_std(x, rubidium, profile_beam, delay=profile_beam.delay)
        samples = friction_std(grid, rubidium, profile_beam, delay=profile_beam.delay)
        assert peak >= samples.max() * (1.0 - 1e-9)


class TestDiffusion:
    """Test the momentum diffusion coefficient"""

    def test_value_at_node(self, rubidium, profile_beam):
        """Test D = hbar^2 k^2 Gamma s where kx = 0"""
        assert diffusion(0.0, rubidium, profile_beam) == pytest.approx(1.371e-48, rel=1e-3)

    def test_value_at_antinode(self, rubidium, profile_beam):
        """Test the emission weight 2/5 where kx = pi/2"""
        ratio = diffusion(rubidium.wavelength / 4.0, rubidium, profile_beam) / diffusion(0.0, rubidium, profile_beam)
        assert ratio == pytest.approx(0.4, rel=1e-12)

    def test_bounds(self, rubidium, profile_beam):
        """Test 2/5 D_max <= D <= D_max everywhere"""
        top = diffusion(0.0, rubidium, profile_beam)
        values = diffusion(np.linspace(0.0, rubidium.wavelength, 501), rubidium, profile_beam)
        assert np.all(values <= top * (1.0 + 1e-12))
        assert np.all(values >= 0.4 * top * (1.0 - 1e-12))


class TestStationaryTemperature:
    """Test k_B T = D / gamma"""

    def test_independent_of_saturation_and_detuning(self, rubidium, profile_beam):
        """Test s and detuning cancel in the ratio"""
        x = max_friction_position(3.0, rubidium) + 5e-9
        reference = stationary_temperature(x, rubidium, profile_beam)
        for beam in [profile_beam.with_saturation(0.05), profile_beam.with_saturation(0.2),
                     profile_beam.with_detuning(2.0 * profile_beam.detuning)]:
            assert stationary_temperature(x, rubidium, beam) == pytest.approx(reference, rel=1e-12)

    def test_no_stationary_state_in_heating_region(self, rubidium, profile_beam):
        """Test non-positive friction raises"""
        node = nearest_node(3.0, rubidium)
        with pytest.raises(NoStationaryStateError):
            stationary_temperature(node - rubidium.wavelength / 16.0, rubidium, profile_beam)

    def test_minimum_at_three_meters(self, rubidium, profile_beam):
        """Test the minimum over offsets is of order 1 mK"""
        offset, value = minimum_temperature(3.0, rubidium, profile_beam)
        assert 0.3e-3 <= value <= 3e-3
        # lowest on the antinode side, where the emission weight suppresses D
        assert value == pytest.approx(0.9108e-3, rel=1e-2)
        assert -rubidium.wavelength / 4.0 < offset < -rubidium.wavelength / 8.0

    def test_approximate_form(self, rubidium, trapped_beam):
        """Test hbar pi w^2 / (4 sigma_a tau k_B) for the 1.4 um, 26.5 ns geometry"""
        assert approximate_temperature(rubidium, trapped_beam) == pytest.approx(3.8185e-4, rel=1e-3)

    def test_trap_center_temperature(self, rubidium, trapped_beam):
        """Test the temperature at the node-side maximum-friction point lambda/16"""
        offset = rubidium.wavelength / 16.0
        value = stationary_temperature(offset, rubidium, trapped_beam, delay=trapped_beam.delay)
        assert value == pytest.approx(0.6967e-3, rel=2e-3)

    def test_default_trap_center_is_colder(self, rubidium, trapped_beam):
        """Test the antinode-side maximum-friction point has the same friction and less diffusion"""
        node_side = rubidium.wavelength / 16.0
        antinode_side = -3.0 * rubidium.wavelength / 16.0
        tau = trapped_beam.delay
        assert friction_std(antinode_side, rubidium, trapped_beam, delay=tau) == pytest.approx(
            friction_std(node_side, rubidium, trapped_beam, delay=tau), rel=1e-12)
        value = stationary_temperature(antinode_side, rubidium, trapped_beam, delay=tau)
        assert value == pytest.approx(0.3726e-3, rel=2e-3)


class TestProfiles:
    """Test the friction and temperature profiles"""

    def test_friction_profile_sign_changes(self, rubidium, profile_beam):
        """Test sign regions of width lambda/8"""
        profile = friction_profile(3.0, rubidium.wavelength / 2.0, 401, rubidium, profile_beam)
        signs = np.sign(profile.gamma_over_m)
        signs = signs[signs != 0]
        assert np.count_nonzero(signs[1:] != signs[:-1]) == 4
        assert np.max(np.abs(profile.gamma_over_m)) == pytest.approx(360.66, rel=1e-2)

    def test_friction_vanishes_at_intensity_extrema(self, rubidium, profile_beam):
        """Test gamma = 0 at nodes and antinodes of the pump"""
        peak = friction_std(rubidium.wavelength / 16.0, rubidium, profile_beam, delay=profile_beam.delay)
        for x in [0.0, rubidium.wavelength / 4.0, rubidium.wavelength / 2.0]:
            value = friction_std(x, rubidium, profile_beam, delay=profile_beam.delay)
            assert abs(value) < 1e-9 * peak

    def test_profile_grid(self, rubidium, profile_beam):
        """Test positions are node-relative and intensity is sin^2(kx)"""
        profile = friction_profile(3.0, rubidium.wavelength, 11, rubidium, profile_beam)
        assert profile.positions.shape == (11,)
        assert profile.node == pytest.approx(nearest_node(3.0, rubidium))
        expected = np.sin(rubidium.wavenumber * profile.positions) ** 2
        assert np.allclose(profile.pump_intensity, expected)
        with pytest.raises(InvalidParameterError):
            friction_profile(3.0, rubidium.wavelength, 1, rubidium, profile_beam)

    def test_temperature_scales_inversely_with_distance(self, rubidium, profile_beam):
        """Test T(1 m) = 3 T(3 m) and T(10 m) = 0.3 T(3 m) at equal offsets"""
        offsets = np.linspace(1e-9, rubidium.wavelength / 8.0 - 1e-9, 25)
        t1 = temperature_profile(1.0, offsets, rubidium, profile_beam).temperature
        t3 = temperature_profile(3.0, offsets, rubidium, profile_beam).temperature
        t10 = temperature_profile(10.0, offsets, rubidium, profile_beam).temperature
        assert np.allclose(t1 / t3, 3.0, rtol=1e-10, atol=0.0)
        assert np.allclose(t10 / t3, 0.3, rtol=1e-10, atol=0.0)

    def test_heating_offsets_are_infinite(self, rubidium, profile_beam):
        """Test offsets without a stationary state are marked"""
        profile = temperature_profile(3.0, [-rubidium.wavelength / 16.0, rubidium.wavelength / 16.0],
                                      rubidium, profile_beam)
        assert math.isinf(profile.temperature[0])
        assert math.isfinite(profile.temperature[1])

    def test_trapped_correction(self, rubidium, profile_beam):
        """Test the turning-point factor reduces the friction, so the temperature rises"""
        offsets = [rubidium.wavelength / 16.0]
        plain = temperature_profile(3.0, offsets, rubidium, profile_beam).temperature[0]
        corrected = temperature_profile(3.0, offsets, rubidium, profile_beam,
                                        trapped_correction=True).temperature[0]
        assert corrected == pytest.approx(plain / TURNING_POINT_FACTOR)

    def test_offsets_outside_quarter_wavelength(self, rubidium, profile_beam):
        """Test offsets beyond lambda/4 are rejected"""
        with pytest.raises(InvalidParameterError):
            temperature_profile(3.0, [0.3 * rubidium.wavelength], rubidium, profile_beam)

    def test_quoted_trapped_temperatures(self, rubidium, trapped_beam):
        """Test 0.58 mK and 0.30 mK at the antinode-side maximum-friction point"""
        slow_beam = BeamConfig.from_delay(53e-9, waist=trapped_beam.waist,
                                          saturation=trapped_beam.saturation,
                                          detuning=trapped_beam.detuning)
        offset = -3.0 * rubidium.wavelength / 16.0
        fast = temperature_profile(trapped_beam.mirror_distance, [offset], rubidium, trapped_beam,
                                   trapped_correction=True).temperature[0]
        slow = temperature_profile(slow_beam.mirror_distance, [offset], rubidium, slow_beam,
                                   trapped_correction=True).temperature[0]
        assert fast == pytest.approx(0.58e-3, rel=1e-2)
        assert slow == pytest.approx(0.30e-3, rel=4e-2)
        assert fast / slow == pytest.approx(2.0, rel=1e-9)

    def test_offsets_for_temperature(self, rubidium, trapped_beam):
        """Test the crossings of a target temperature lie on the profile"""
        offsets = offsets_for_temperature(0.58e-3, trapped_beam.mirror_distance, rubidium,
                                          trapped_beam, trapped_correction=True)
        assert offsets.size == 2
        assert np.all(offsets < -rubidium.wavelength / 8.0)
        values = temperature_profile(trapped_beam.mirror_distance, offsets, rubidium, trapped_beam,
                                     trapped_correction=True).temperature
        assert np.allclose(values, 0.58e-3, rtol=1e-4)


class TestDipolePotential:
    """Test the standing-wave dipole potential"""

    def test_force_is_minus_gradient(self, rubidium, profile_beam):
        """Test F = -dU/dx by central differences"""
        h = rubidium.wavelength * 1e-6
        for x in np.linspace(0.02, 0.48, 8) * rubidium.wavelength:
            numeric = -(dipole_potential(x + h, rubidium, profile_beam)
                        - dipole_potential(x - h, rubidium, profile_beam)) / (2.0 * h)
            assert dipole_force(x, rubidium, profile_beam) == pytest.approx(numeric, rel=1e-5, abs=1e-30)

    def test_red_detuning_attracts_to_antinode(self, rubidium, profile_beam):
        """Test the potential is lowest where the intensity peaks for detuning < 0"""
        antinode = rubidium.wavelength / 4.0
        assert dipole_potential(antinode, rubidium, profile_beam) < dipole_potential(0.0, rubidium, profile_beam)

    def test_potential_formula(self, rubidium, profile_beam):
        """Test U = (hbar detuning / 2) ln(1 + s_2) with s_2 = 2 s sin^2(kx)"""
        k = rubidium.wavenumber
        xs = np.linspace(0.0, 0.5, 11) * rubidium.wavelength
        s_2 = two_level_saturation(xs, rubidium, profile_beam)
        assert np.allclose(s_2, 2.0 * 0.1 * np.sin(k * xs) ** 2, rtol=1e-14, atol=0.0)
        expected = 0.5 * HBAR * profile_beam.detuning * np.log(1.0 + s_2)
        assert np.allclose(dipole_potential(xs, rubidium, profile_beam), expected, rtol=1e-12, atol=0.0)
        antinode = rubidium.wavelength / 4.0
        assert dipole_potential(antinode, rubidium, profile_beam) == pytest.approx(
            0.5 * HBAR * profile_beam.detuning * math.log(1.2), rel=1e-12)

    def test_weak_pump_light_shift(self, rubidium, profile_beam):
        """Test U -> hbar detuning s sin^2(kx), the light shift of the excited population s sin^2(kx)"""
        weak = profile_beam.with_saturation(1e-7)
        x = 0.3 * rubidium.wavelength
        shift = HBAR * weak.detuning * 1e-7 * math.sin(rubidium.wavenumber * x) ** 2
        assert dipole_potential(x, rubidium, weak) == pytest.approx(shift, rel=1e-6)

    def test_raw_parameters(self, rubidium, trapped_beam):
        """Test the derived (g, |A|^2) reproduce the saturation"""
        g, pump_flux = raw_parameters(rubidium, trapped_beam)
        assert g ** 2 * pump_flux / trapped_beam.detuning ** 2 == pytest.approx(0.073, rel=1e-12)


class TestTrappedTemperature:
    """Test the position-averaged coefficients of a thermal particle in the trap"""

    @staticmethod
    def _gaussian_average(func, x, spread, n=4001):
        """<func(x + xi)> for xi ~ N(0, spread) by quadrature"""
        sigma = math.sqrt(spread)
        xi = np.linspace(-8.0 * sigma, 8.0 * sigma, n)
        weights = np.exp(-0.5 * (xi / sigma) ** 2)
        return float(np.sum(func(x + xi) * weights) / np.sum(weights))

    def test_averages_match_quadrature(self, rubidium, trapped_beam):
        """Test the closed-form thermal averages of gamma and D"""
        offset = -3.0 * rubidium.wavelength / 16.0
        tau = trapped_beam.delay
        spread = position_variance(0.6e-3, rubidium, 1.5e6)
        gamma = self._gaussian_average(
            lambda x: friction_std(x, rubidium, trapped_beam, delay=tau), offset, spread)
        d = self._gaussian_average(lambda x: diffusion(x, rubidium, trapped_beam), offset, spread)
        assert thermal_friction(offset, 0.6e-3, rubidium, trapped_beam, 1.5e6,
                                delay=tau) == pytest.approx(gamma, rel=1e-8)
        assert thermal_diffusion(offset, 0.6e-3, rubidium, trapped_beam, 1.5e6) == pytest.approx(d, rel=1e-8)

    def test_damping_factor(self, rubidium):
        """Test the washout and retardation factors at 0.6 mK in the 1.5 MHz trap"""
        k = rubidium.wavenumber
        spread = position_variance(0.6e-3, rubidium, 1.5e6)
        instantaneous = trapped_damping_factor(0.6e-3, rubidium, 1.5e6)
        delayed = trapped_damping_factor(0.6e-3, rubidium, 1.5e6, delay=26.5e-9)
        assert instantaneous == pytest.approx(math.exp(-8.0 * k ** 2 * spread), rel=1e-12)
        assert delayed / instantaneous == pytest.approx(math.cos(2.0 * math.pi * 1.5e6 * 26.5e-9), rel=1e-12)
        assert 0.5 <= delayed <= 0.8

    def test_balance_at_26ns(self, rubidium, trapped_beam):
        """Test the self-consistent temperature balances friction and diffusion"""
        offset = -3.0 * rubidium.wavelength / 16.0
        tau = trapped_beam.delay
        value = trapped_stationary_temperature(offset, rubidium, trapped_beam, 1.5e6)
        assert 0.45e-3 <= value <= 0.65e-3
        work = (K_B * value * thermal_friction(offset, value, rubidium, trapped_beam, 1.5e6, delay=tau)
                * math.cos(2.0 * math.pi * 1.5e6 * tau))
        assert work == pytest.approx(thermal_diffusion(offset, value, rubidium, trapped_beam, 1.5e6),
                                     rel=1e-9)

    def test_turning_point_factor(self, rubidium, trapped_beam):
        """Test the position-resolved delayed model reduces the friction by about 0.64"""
        offset = -3.0 * rubidium.wavelength / 16.0
        factor = turning_point_factor(offset, rubidium, trapped_beam, 1.5e6)
        assert 0.5 <= factor <= 0.8
        assert 1.2 <= 1.0 / factor <= 2.0

    def test_retardation_warms_slightly(self, rubidium, trapped_beam):
        """Test v(t - tau) friction gives a warmer but nearby steady state"""
        offset = -3.0 * rubidium.wavelength / 16.0
        delayed = trapped_stationary_temperature(offset, rubidium, trapped_beam, 1.5e6)
        instantaneous = trapped_stationary_temperature(offset, rubidium, trapped_beam, 1.5e6,
                                                       delayed=False)
        assert 1.0 < delayed / instantaneous < 1.1

    def test_stiff_trap_recovers_closed_form(self, rubidium, trapped_beam):
        """Test a vanishing position spread gives D / (gamma k_B) at the centre"""
        offset = -3.0 * rubidium.wavelength / 16.0
        tau = trapped_beam.delay
        stiff = trapped_stationary_temperature(offset, rubidium, trapped_beam, 1e9, delayed=False)
        assert stiff == pytest.approx(stationary_temperature(offset, rubidium, trapped_beam, delay=tau),
                                      rel=1e-4)

    def test_weak_trap_has_no_stationary_state(self, rubidium, trapped_beam):
        """Test the 750 kHz trap with a 53 ns round trip heats at every temperature"""
        slow_beam = BeamConfig.from_delay(53e-9, waist=trapped_beam.waist,
                                          saturation=trapped_beam.saturation,
                                          detuning=trapped_beam.detuning)
        for offset in np.linspace(-0.24, -0.135, 8) * rubidium.wavelength:
            with pytest.raises(NoStationaryStateError):
                trapped_stationary_temperature(float(offset), rubidium, slow_beam, 7.5e5)

    def test_heating_region(self, rubidium, trapped_beam):
        """Test negative friction at the centre has no stationary state"""
        with pytest.raises(NoStationaryStateError):
            trapped_stationary_temperature(-rubidium.wavelength / 16.0, rubidium, trapped_beam, 1.5e6)
