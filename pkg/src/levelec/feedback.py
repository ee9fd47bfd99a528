"""Active feedback on the endcap voltage: gain laws, noise combination,
equilibrium temperature and optimal gain.

An amplifier with gain G feeds the pickup voltage back onto one endcap, so
the particle sees U_fb = (1 - G) U.  The effective resistance, and with it
the damping rate, shrink by the same factor, while the amplifier injects its
own voltage noise in quadrature.  The feedback phase is taken as ideal (pure
velocity feedback); no loop delay is modeled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import minimize_scalar

from levelec.core import InvalidParameterError, _require_positive


class DivergentTemperatureError(ValueError):
    """Equilibrium temperature is undefined at or beyond unit gain."""


class NoCoolingBenefitError(ValueError):
    """Amplifier noise is too hot for feedback to cool below the bath."""


@dataclass(frozen=True)
class FeedbackConfig:
    """Feedback amplifier settings.

    Gains at or above one amplify the motion instead of cooling it; they are
    allowed only behind ``allow_amplification`` and are not covered by the
    equilibrium formulas.
    """

    gain: float = 0.0
    noise_voltage: float = 1e-10   # V
    amp_resistance: float = 50.0   # ohm
    bandwidth: float = 1.0         # Hz
    enabled: bool = False
    allow_amplification: bool = False

    def __post_init__(self):
        if self.gain < 0.0:
            raise InvalidParameterError(f"gain must be >= 0, got {self.gain!r}")
        if self.gain >= 1.0 and not self.allow_amplification:
            raise InvalidParameterError(
                f"gain {self.gain!r} >= 1 amplifies the motion; set "
                "allow_amplification to permit it")
        if self.noise_voltage < 0.0:
            raise InvalidParameterError("noise_voltage must be >= 0")
        _require_positive(amp_resistance=self.amp_resistance,
                          bandwidth=self.bandwidth)


def feedback_voltage(pickup_voltage: float, gain: float) -> float:
    """Voltage seen by the particle, U_fb = (1 - G) U."""
    return (1.0 - gain) * pickup_voltage


def feedback_resistance(r_eff: float, gain: float) -> float:
    """Effective resistance under feedback, R_fb = (1 - G) R_eff."""
    return (1.0 - gain) * r_eff


def feedback_damping_rate(gamma: float, gain: float) -> float:
    """Damping rate under feedback, gamma_fb = (1 - G) gamma."""
    return (1.0 - gain) * gamma


def total_noise_voltage(v_r: float, v_fb: float, gain: float) -> float:
    """Quadrature sum of the gain-suppressed thermal noise and the
    gain-scaled amplifier noise, sqrt((1-G)^2 V_R^2 + G^2 V_fb^2)."""
    return math.hypot((1.0 - gain) * v_r, gain * v_fb)


def equilibrium_temperature(t_circuit: float, t_noise: float, gain: float) -> float:
    """Particle equilibrium temperature under feedback,

        T_cm = (1 - G) T_R + G^2 T_n / (1 - G).

    Raises
    ------
    DivergentTemperatureError
        For G >= 1, where the balance has no finite solution.
    """
    if gain >= 1.0:
        raise DivergentTemperatureError(
            f"equilibrium temperature diverges for gain {gain!r} >= 1")
    return (1.0 - gain) * t_circuit + gain**2 * t_noise / (1.0 - gain)


@dataclass(frozen=True)
class OptimalGain:
    """Approximate and numerically exact minimizers of the equilibrium
    temperature."""

    gain_approx: float          # 1 - sqrt(T_n / T_R)
    temperature_min_approx: float   # 2 sqrt(T_n T_R)
    gain_exact: float           # numerical argmin of the equilibrium formula
    temperature_min_exact: float


def optimal_gain(t_circuit: float, t_noise: float) -> OptimalGain:
    """Gain minimizing the equilibrium temperature.

    The closed-form estimates are G_opt ~ 1 - sqrt(T_n / T_R) with minimum
    T_min ~ 2 sqrt(T_n T_R); the exact minimizer of the equilibrium formula
    is found numerically alongside them.

    Raises
    ------
    NoCoolingBenefitError
        If T_n >= T_R (feedback cannot cool below the circuit bath) or
        T_n <= 0.
    """
    _require_positive(t_circuit=t_circuit)
    if not 0.0 < t_noise < t_circuit:
        raise NoCoolingBenefitError(
            f"need 0 < T_n < T_R for a cooling optimum, got T_n = {t_noise!r}, "
            f"T_R = {t_circuit!r}")
    gain_approx = 1.0 - math.sqrt(t_noise / t_circuit)
    t_min_approx = 2.0 * math.sqrt(t_noise * t_circuit)
    result = minimize_scalar(
        lambda g: equilibrium_temperature(t_circuit, t_noise, g),
        bounds=(0.0, 1.0 - 1e-12), method="bounded",
        options={"xatol": 1e-12},
    )
    return OptimalGain(gain_approx=gain_approx,
                       temperature_min_approx=t_min_approx,
                       gain_exact=float(result.x),
                       temperature_min_exact=float(result.fun))
