"""Tests for the closed-form model layer."""

import math

import numpy as np
import pytest
from scipy.constants import Boltzmann, atomic_mass, elementary_charge, epsilon_0, hbar, pi

from levelec.core import (
    ChargeLimitWarning,
    CircuitConfig,
    CircuitTopology,
    ElectrodeNoiseModel,
    GasEnvironment,
    InvalidParameterError,
    ParticleSpec,
    TrapConfig,
    UnstableTrapError,
    adiabatic_damping_rate,
    charge_limits,
    derive_mass,
    derive_params,
    effective_resistance,
    electrode_heating_rate,
    electrode_noise_psd,
    gas_damping_rate,
    mirror_shift_fraction,
    resistive_damping_rate,
    stability_params,
)

from oracles import mathieu_is_stable, mathieu_monodromy


def silica(radius=1e-6, charge=1e5):
    return ParticleSpec(radius=radius, density=2200.0, charge=charge)


FIG2_TRAP = TrapConfig(u0=3000.0, udc=0.0, drive_freq=2 * pi * 1e5,
                       r0=500e-6, d=1e-3, eta=0.8, r_prime=1e-3)


class TestDeriveMass:
    def test_micron_silica_matches_reported_mass(self):
        # ~5.5e12 amu for a 1 um silica sphere
        m = derive_mass(1e-6, 2200.0)
        assert m == pytest.approx(9.2153e-15, rel=1e-4)
        assert m / atomic_mass == pytest.approx(5.5e12, rel=0.02)

    def test_volume_formula_independent_arithmetic(self):
        r, rho = 100e-9, 2200.0
        volume = 4.0 / 3.0 * math.pi * r * r * r
        assert derive_mass(r, rho) == pytest.approx(volume * rho, rel=1e-14)
        assert derive_mass(r, rho) == pytest.approx(9.2153e-18, rel=1e-4)

    def test_zero_volume_limit(self):
        assert derive_mass(1e-30, 2200.0) == pytest.approx(0.0, abs=1e-80)

    @pytest.mark.parametrize("radius,density", [(0.0, 2200.0), (-1e-6, 2200.0),
                                                (1e-6, 0.0), (1e-6, -3.0)])
    def test_nonpositive_inputs_rejected(self, radius, density):
        with pytest.raises(InvalidParameterError):
            derive_mass(radius, density)


class TestStabilityParams:
    def test_reference_point(self):
        a_z, q_z, omega_z = stability_params(FIG2_TRAP, silica())
        assert a_z == 0.0
        assert abs(q_z) == pytest.approx(0.0846, abs=0.001)
        assert q_z < 0.0  # positive charge, positive drive amplitude
        assert omega_z / (2 * pi) == pytest.approx(3.0e3, rel=0.02)

    def test_dc_free_drive_has_zero_a(self):
        a_z, _, _ = stability_params(FIG2_TRAP, silica(charge=3e4))
        assert a_z == 0.0

    def test_uncharged_particle_is_untrapped(self):
        with pytest.raises(UnstableTrapError):
            stability_params(FIG2_TRAP, silica(charge=0.0))

    def test_boundary_rejection_matches_floquet_oracle(self):
        # |q_z| just below the boundary is accepted and the oracle agrees
        # that the motion is bounded; just above both flip.
        a_z, q_z, _ = stability_params(FIG2_TRAP, silica(charge=1.07e6))
        assert abs(q_z) < 0.908
        assert mathieu_is_stable(a_z, q_z)
        with pytest.raises(UnstableTrapError):
            stability_params(FIG2_TRAP, silica(charge=1.08e6))
        assert not mathieu_is_stable(0.0, 0.914)

    def test_floquet_oracle_brackets_published_boundary(self):
        assert mathieu_is_stable(0.0, 0.9075)
        assert not mathieu_is_stable(0.0, 0.9085)
        # marginal trace at the boundary value used by the implementation
        trace = np.trace(mathieu_monodromy(0.0, 0.908))
        assert abs(trace) == pytest.approx(2.0, abs=2e-3)


class TestCircuit:
    def test_series_resolution_consistency(self):
        omega_z = 2 * pi * 3e3
        circuit = CircuitConfig(topology=CircuitTopology.SERIES, resistance=100e6,
                                quality_factor=100.0).resolve(omega_z)
        assert circuit.damping_rate == pytest.approx(circuit.resistance / circuit.inductance, rel=1e-12)
        assert circuit.quality_factor == pytest.approx(omega_z / circuit.damping_rate, rel=1e-12)
        assert circuit.omega_lc == pytest.approx(
            1.0 / math.sqrt(circuit.inductance * circuit.capacitance), rel=1e-12)

    def test_parallel_resolution_consistency(self):
        omega_z = 2 * pi * 3e3
        circuit = CircuitConfig(topology=CircuitTopology.PARALLEL, resistance=100e6,
                                quality_factor=100.0).resolve(omega_z)
        assert circuit.damping_rate == pytest.approx(
            1.0 / (circuit.resistance * circuit.capacitance), rel=1e-12)
        assert circuit.quality_factor == pytest.approx(omega_z / circuit.damping_rate, rel=1e-12)

    def test_inductance_input_round_trips_quality_factor(self):
        omega_z = 2 * pi * 3e3
        via_q = CircuitConfig(quality_factor=100.0).resolve(omega_z)
        via_l = CircuitConfig(quality_factor=None, inductance=via_q.inductance).resolve(omega_z)
        assert via_l.quality_factor == pytest.approx(100.0, rel=1e-12)
        assert via_l.capacitance == pytest.approx(via_q.capacitance, rel=1e-12)

    def test_exactly_one_of_qf_and_l(self):
        with pytest.raises(InvalidParameterError):
            CircuitConfig(quality_factor=100.0, inductance=1.0)
        with pytest.raises(InvalidParameterError):
            CircuitConfig(quality_factor=None, inductance=None)

    def test_effective_resistance_series(self):
        assert effective_resistance(CircuitConfig(resistance=100e6, quality_factor=100.0),
                                    2 * pi * 3e3) == pytest.approx(1e12, rel=1e-12)

    def test_effective_resistance_unity_quality_factor(self):
        circ = CircuitConfig(resistance=42.0, quality_factor=1.0)
        assert effective_resistance(circ, 2 * pi * 3e3) == pytest.approx(42.0, rel=1e-12)

    def test_effective_resistance_parallel_given_inductance(self):
        omega_z = 2 * pi * 3e3
        circ = CircuitConfig(topology=CircuitTopology.PARALLEL, resistance=1e9,
                             quality_factor=None, inductance=1.0).resolve(omega_z)
        # direct formula evaluation: omega_z * L * Q_f
        assert effective_resistance(circ) == pytest.approx(
            omega_z * 1.0 * circ.quality_factor, rel=1e-12)
        assert effective_resistance(circ) == pytest.approx(1.885e6 * circ.quality_factor / 100.0, rel=1e-3)


class TestDampingRates:
    def test_resistive_rate_reference_value(self):
        particle = silica()
        _, _, omega_z = stability_params(FIG2_TRAP, particle)
        circuit = CircuitConfig(resistance=100e6, quality_factor=100.0).resolve(omega_z)
        gamma = resistive_damping_rate(particle, FIG2_TRAP, circuit)
        assert gamma == pytest.approx(1.8e4, rel=0.05)

    def test_uncharged_particle_uncoupled(self):
        particle = silica(charge=0.0)
        circuit = CircuitConfig().resolve(2 * pi * 3e3)
        assert resistive_damping_rate(particle, FIG2_TRAP, circuit) == 0.0
        assert adiabatic_damping_rate(particle, FIG2_TRAP, circuit) == 0.0

    def test_charge_scaling_power_two(self):
        circuit = CircuitConfig().resolve(2 * pi * 3e3)
        g1 = resistive_damping_rate(silica(charge=1e5), FIG2_TRAP, circuit)
        g4 = resistive_damping_rate(silica(charge=4e5), FIG2_TRAP, circuit)
        assert g4 == pytest.approx(16.0 * g1, rel=1e-12)

    def test_series_rate_equals_eliminated_circuit_form_for_unit_eta(self):
        # (q/d)^2 R_eff / M  ==  q^2 / (M C Gamma d^2) to 1e-12 relative
        particle = silica()
        trap = TrapConfig(u0=3000.0, eta=1.0)
        _, _, omega_z = stability_params(trap, particle)
        circuit = CircuitConfig(resistance=100e6, quality_factor=100.0).resolve(omega_z)
        lhs = resistive_damping_rate(particle, trap, circuit)
        q_c = particle.charge_coulomb
        rhs = q_c**2 / (particle.mass * circuit.capacitance
                        * circuit.damping_rate * trap.d**2)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_adiabatic_rate_symbolic_form(self):
        # series with Gamma = R/L reduces to R q^2 / (M d^2)
        particle = silica()
        circuit = CircuitConfig(resistance=100e6, quality_factor=100.0).resolve(2 * pi * 3e3)
        expected = circuit.resistance * particle.charge_coulomb**2 / (particle.mass * FIG2_TRAP.d**2)
        assert adiabatic_damping_rate(particle, FIG2_TRAP, circuit) == pytest.approx(expected, rel=1e-12)

    def test_parallel_adiabatic_rate_vanishes(self):
        circuit = CircuitConfig(topology=CircuitTopology.PARALLEL).resolve(2 * pi * 3e3)
        assert adiabatic_damping_rate(silica(), FIG2_TRAP, circuit) == 0.0

    def test_series_adiabatic_equals_parallel_resonant_rate(self):
        # identical R, L, C; eta = 1 on both sides
        particle = silica()
        trap = TrapConfig(u0=3000.0, eta=1.0)
        omega_z = 2 * pi * 3e3
        series = CircuitConfig(topology=CircuitTopology.SERIES, resistance=100e6,
                               quality_factor=None, inductance=500.0).resolve(omega_z)
        parallel = CircuitConfig(topology=CircuitTopology.PARALLEL, resistance=100e6,
                                 quality_factor=None, inductance=500.0).resolve(omega_z)
        assert parallel.inductance == series.inductance
        assert parallel.capacitance == series.capacitance
        assert adiabatic_damping_rate(particle, trap, series) == pytest.approx(
            resistive_damping_rate(particle, trap, parallel), rel=1e-12)

    def test_rates_scale_as_charge_squared_over_mass(self):
        omega_z = 2 * pi * 3e3
        trap = FIG2_TRAP
        base_res = None
        base_ad = None
        for q_mult, m_mult in [(1.0, 1.0), (2.0, 1.0), (5.0, 4.0), (10.0, 0.5)]:
            particle = ParticleSpec(radius=1e-6 * m_mult ** (1 / 3), density=2200.0,
                                    charge=1e5 * q_mult)
            circuit = CircuitConfig().resolve(omega_z)
            scale = q_mult**2 / m_mult
            g_res = resistive_damping_rate(particle, trap, circuit)
            g_ad = adiabatic_damping_rate(particle, trap, circuit)
            if base_res is None:
                base_res, base_ad = g_res, g_ad
            else:
                assert g_res == pytest.approx(base_res * scale, rel=1e-9)
                assert g_ad == pytest.approx(base_ad * scale, rel=1e-9)


class TestGasDamping:
    def test_100_mbar_order_of_magnitude(self):
        gamma = gas_damping_rate(silica(), GasEnvironment(pressure=100e2))
        assert 1e4 / 3 < gamma < 3e4  # anchor ~1e4 Hz, within a factor 3

    def test_uhv_order_of_magnitude(self):
        gamma = gas_damping_rate(silica(), GasEnvironment(pressure=1e-8 * 100.0))
        assert 1e-6 / 3 < gamma < 3e-6  # anchor ~1e-6 Hz

    def test_vacuum_limit(self):
        assert gas_damping_rate(silica(), GasEnvironment(pressure=0.0)) == 0.0

    def test_closed_form_pieces(self):
        gas = GasEnvironment(pressure=1e2, temperature=300.0)
        n_expected = 1e2 / (Boltzmann * 300.0)
        v_expected = math.sqrt(8 * Boltzmann * 300.0 / (math.pi * 28.0 * atomic_mass))
        assert gas.number_density == pytest.approx(n_expected, rel=1e-12)
        assert gas.mean_thermal_speed == pytest.approx(v_expected, rel=1e-12)


class TestElectrodeNoise:
    def test_reference_value(self):
        # g_E w^-1 r'^-3 T^2 at w = 2 pi 3 kHz, r' = 1 mm, T = 300 K
        model = ElectrodeNoiseModel()
        expected = 1e-12 * (2 * pi * 3e3) ** -1 * (1e-3) ** -3 * 300.0**2
        s_e = electrode_noise_psd(2 * pi * 3e3, FIG2_TRAP, model, 300.0)
        assert s_e == pytest.approx(expected, rel=1e-12)
        assert s_e == pytest.approx(4.8e-3, rel=0.01)

    def test_zero_temperature(self):
        assert electrode_noise_psd(2 * pi * 3e3, FIG2_TRAP, ElectrodeNoiseModel(), 0.0) == 0.0

    def test_distance_power_law(self):
        model = ElectrodeNoiseModel()
        near = electrode_noise_psd(1e4, TrapConfig(u0=3000.0, r_prime=0.5e-3), model, 300.0)
        far = electrode_noise_psd(1e4, TrapConfig(u0=3000.0, r_prime=1e-3), model, 300.0)
        assert near == pytest.approx(8.0 * far, rel=1e-12)

    def test_distance_exponent_sign_configurable(self):
        flipped = ElectrodeNoiseModel(distance_exponent_sign=+1)
        near = electrode_noise_psd(1e4, TrapConfig(u0=3000.0, r_prime=0.5e-3), flipped, 300.0)
        far = electrode_noise_psd(1e4, TrapConfig(u0=3000.0, r_prime=1e-3), flipped, 300.0)
        assert near == pytest.approx(far / 8.0, rel=1e-12)

    def test_heating_rate_charge_scaling(self):
        s_e = 4.8e-3
        g1 = electrode_heating_rate(silica(charge=1e5), s_e, 2 * pi * 3e3)
        g2 = electrode_heating_rate(silica(charge=2e5), s_e, 2 * pi * 3e3)
        assert g2 == pytest.approx(4.0 * g1, rel=1e-12)
        assert electrode_heating_rate(silica(charge=0.0), s_e, 2 * pi * 3e3) == 0.0

    def test_heating_rate_closed_form(self):
        particle = silica(charge=1e6)
        s_e = electrode_noise_psd(2 * pi * 3e3, FIG2_TRAP, ElectrodeNoiseModel(), 300.0)
        rate = electrode_heating_rate(particle, s_e, 2 * pi * 3e3)
        q_c = 1e6 * elementary_charge
        expected = q_c**2 * s_e / (4 * particle.mass * hbar * 2 * pi * 3e3)
        assert rate == pytest.approx(expected, rel=1e-12)
        assert rate > 0.0 and math.isfinite(rate)


class TestChargeLimits:
    def test_micron_sphere_positive_capacity(self):
        limits = charge_limits(silica())
        assert limits.q_pos_max == pytest.approx(2.1e7, rel=0.05)

    def test_nanometre_sphere(self):
        limits = charge_limits(ParticleSpec(radius=1e-9, density=2200.0, charge=1.0))
        assert limits.q_pos_max == pytest.approx(22.0, rel=1e-6)
        assert limits.q_neg_max == pytest.approx(-1.7, rel=1e-6)

    def test_conductor_p_factor(self):
        assert charge_limits(silica()).p_factor == 3.0
        # dielectric: 3 eps_r / (eps_r + 2)
        assert charge_limits(silica(), relative_permittivity=4.0).p_factor == pytest.approx(2.0)

    def test_pauthenier_field_charging(self):
        particle = silica()
        field = 3e6  # V/m
        limits = charge_limits(particle, relative_permittivity=None, field=field)
        expected = 4 * math.pi * epsilon_0 * 1e-12 * 3.0 * field / elementary_charge
        assert limits.q_pauthenier == pytest.approx(expected, rel=1e-12)

    def test_capacity_monotone_in_radius_squared(self):
        radii = np.geomspace(1e-9, 5e-6, 12)
        pos = [charge_limits(ParticleSpec(r, 2200.0, 0.0)).q_pos_max for r in radii]
        neg = [charge_limits(ParticleSpec(r, 2200.0, 0.0)).q_neg_max for r in radii]
        assert np.all(np.diff(pos) > 0)
        assert np.all(np.diff(neg) < 0)

    def test_overcharged_particle_warns_not_raises(self):
        with pytest.warns(ChargeLimitWarning):
            ParticleSpec(radius=1e-6, density=2200.0, charge=3e7)
        with pytest.warns(ChargeLimitWarning):
            ParticleSpec(radius=1e-6, density=2200.0, charge=-1e6)


class TestMirrorShift:
    def test_physical_capacitance_gives_small_shift(self):
        # with an electrode-scale capacitance (~10 pF) the fractional shift
        # at the reference working point is of order 1e-6
        particle = silica()
        _, _, omega_z = stability_params(FIG2_TRAP, particle)
        inductance = 1.0 / (omega_z**2 * 10e-12)
        circuit = CircuitConfig(quality_factor=None, inductance=inductance,
                                resistance=100e6).resolve(omega_z)
        assert circuit.capacitance == pytest.approx(10e-12, rel=1e-9)
        shift = mirror_shift_fraction(particle, circuit, FIG2_TRAP, omega_z)
        q_c = particle.charge_coulomb
        expected = q_c**2 / (particle.mass * 10e-12 * FIG2_TRAP.d**2 * omega_z**2)
        assert shift == pytest.approx(expected, rel=1e-9)
        assert 1e-6 < shift < 1e-5

    def test_zero_charge(self):
        circuit = CircuitConfig().resolve(2 * pi * 3e3)
        assert mirror_shift_fraction(silica(charge=0.0), circuit, FIG2_TRAP, 2 * pi * 3e3) == 0.0

    def test_gap_scaling(self):
        circuit = CircuitConfig().resolve(2 * pi * 3e3)
        near = mirror_shift_fraction(silica(), circuit, FIG2_TRAP, 2 * pi * 3e3)
        wide = mirror_shift_fraction(silica(), circuit,
                                     TrapConfig(u0=3000.0, d=2e-3), 2 * pi * 3e3)
        assert near == pytest.approx(4.0 * wide, rel=1e-12)


class TestDeriveParams:
    def test_full_working_point(self):
        derived = derive_params(silica(), FIG2_TRAP, CircuitConfig(),
                                gas=GasEnvironment())
        assert derived.gamma_res == pytest.approx(1.8e4, rel=0.05)
        assert derived.r_eff == pytest.approx(1e12, rel=1e-9)
        assert derived.gamma_gas < 1e-5
        assert derived.gamma_fb == 0.0
        assert derived.circuit.omega_lc == derived.omega_z

    def test_feedback_rate(self):
        derived = derive_params(silica(), FIG2_TRAP, CircuitConfig(), feedback_gain=0.95)
        assert derived.gamma_fb == pytest.approx(0.05 * derived.gamma_res, rel=1e-12)

    def test_secular_frequency_formula_vs_floquet_oracle_within_2pct(self):
        # core invariant: for a_z = 0 and |q_z| <= 0.3 the closed-form secular
        # frequency is within 2% of the exact Floquet characteristic exponent
        from oracles import mathieu_secular_frequency
        for charge in [3e4, 1e5, 3e5, 1.06e6]:
            particle = silica(charge=charge)
            a_z, q_z, omega_z = stability_params(FIG2_TRAP, particle)
            if abs(q_z) > 0.3:
                continue
            exact = mathieu_secular_frequency(a_z, q_z, FIG2_TRAP.drive_freq)
            assert omega_z == pytest.approx(exact, rel=0.02)
