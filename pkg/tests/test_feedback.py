"""Tests for the feedback gain/noise/temperature laws."""

import math

import numpy as np
import pytest

from levelec.feedback import (
    DivergentTemperatureError,
    FeedbackConfig,
    NoCoolingBenefitError,
    OptimalGain,
    equilibrium_temperature,
    feedback_damping_rate,
    feedback_resistance,
    feedback_voltage,
    optimal_gain,
    total_noise_voltage,
)
from levelec.core import InvalidParameterError

from oracles import golden_section_minimize


class TestGainLaws:
    def test_zero_gain_passthrough(self):
        assert feedback_voltage(0.3, 0.0) == 0.3
        assert feedback_resistance(1e12, 0.0) == 1e12
        assert feedback_damping_rate(1.8e4, 0.0) == 1.8e4

    def test_unit_gain_tunes_out_thermal_noise(self):
        assert feedback_voltage(0.3, 1.0) == 0.0
        assert feedback_resistance(1e12, 1.0) == 0.0
        assert feedback_damping_rate(1.8e4, 1.0) == 0.0

    def test_half_gain_linear_law(self):
        assert feedback_voltage(0.3, 0.5) == pytest.approx(0.15)
        assert feedback_damping_rate(2.0e4, 0.5) == pytest.approx(1.0e4)


class TestTotalNoiseVoltage:
    def test_limits(self):
        assert total_noise_voltage(1.29e-4, 1e-10, 0.0) == pytest.approx(1.29e-4)
        assert total_noise_voltage(1.29e-4, 1e-10, 1.0) == pytest.approx(1e-10)

    def test_quadrature_reference_value(self):
        # direct formula evaluation at G = 0.95
        v = total_noise_voltage(1.29e-4, 1e-10, 0.95)
        expected = math.sqrt((0.05 * 1.29e-4) ** 2 + (0.95 * 1e-10) ** 2)
        assert v == pytest.approx(expected, rel=1e-12)
        assert v == pytest.approx(6.45e-6, rel=0.001)


class TestEquilibriumTemperature:
    def test_zero_gain_returns_bath(self):
        assert equilibrium_temperature(300.0, 1e-3, 0.0) == 300.0

    def test_reference_value(self):
        # (1 - G) T_R + G^2 T_n / (1 - G) at G = 0.95, T_R = 300 K, T_n = 1 mK
        t = equilibrium_temperature(300.0, 1e-3, 0.95)
        assert t == pytest.approx(15.0 + 0.95**2 * 1e-3 / 0.05, rel=1e-12)
        assert t == pytest.approx(15.02, abs=0.01)

    def test_divergence_at_unit_gain(self):
        with pytest.raises(DivergentTemperatureError):
            equilibrium_temperature(300.0, 1e-3, 1.0)

    def test_convex_with_unique_minimum(self):
        grid = np.linspace(1e-4, 0.999, 4001)
        t = np.array([equilibrium_temperature(300.0, 0.03, g) for g in grid])
        second = np.diff(t, 2)
        assert np.all(second > 0)  # convex on (0, 1)
        assert 0 < np.argmin(t) < len(grid) - 1


class TestOptimalGain:
    def test_quarter_ratio_algebraic_point(self):
        result = optimal_gain(300.0, 75.0)
        assert result.gain_approx == pytest.approx(0.5, rel=1e-12)
        assert result.temperature_min_approx == pytest.approx(300.0, rel=1e-12)

    def test_cryo_reference_values(self):
        result = optimal_gain(5e-3, 20e-6)
        assert result.gain_approx == pytest.approx(0.937, abs=0.001)
        assert result.temperature_min_approx == pytest.approx(632e-6, rel=0.01)

    def test_exact_minimizer_matches_golden_section_oracle(self):
        t_r, t_n = 300.0, 0.5
        result = optimal_gain(t_r, t_n)
        oracle = golden_section_minimize(
            lambda g: equilibrium_temperature(t_r, t_n, g), 0.0, 1.0 - 1e-9)
        assert result.gain_exact == pytest.approx(oracle, abs=1e-7)
        assert result.temperature_min_exact == pytest.approx(
            equilibrium_temperature(t_r, t_n, oracle), rel=1e-9)

    def test_exact_near_approx_for_small_ratio(self):
        for ratio in [1e-2, 1e-3, 1e-4]:
            result = optimal_gain(300.0, 300.0 * ratio)
            assert result.gain_exact == pytest.approx(result.gain_approx, rel=0.05)

    def test_argmin_depends_only_on_ratio(self):
        a = optimal_gain(300.0, 3.0)
        b = optimal_gain(3.0, 0.03)
        assert a.gain_exact == pytest.approx(b.gain_exact, abs=1e-8)

    def test_no_cooling_benefit(self):
        with pytest.raises(NoCoolingBenefitError):
            optimal_gain(300.0, 300.0)
        with pytest.raises(NoCoolingBenefitError):
            optimal_gain(300.0, 400.0)
        with pytest.raises(NoCoolingBenefitError):
            optimal_gain(300.0, 0.0)


class TestFeedbackConfig:
    def test_cooling_range_enforced(self):
        FeedbackConfig(gain=0.99)
        with pytest.raises(InvalidParameterError):
            FeedbackConfig(gain=1.0)
        with pytest.raises(InvalidParameterError):
            FeedbackConfig(gain=-0.1)

    def test_amplification_behind_flag(self):
        cfg = FeedbackConfig(gain=1.5, allow_amplification=True)
        assert cfg.gain == 1.5
