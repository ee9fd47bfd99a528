"""Stochastic force generation for the individual noise channels.

Each damping channel (gas, circuit resistance, feedback amplifier) carries a
delta-correlated force with autocorrelation 2 k_B T gamma M delta(tau), the
fluctuation side of its dissipation.  White noise is discretized as
independent Gaussians scaled by 1/sqrt(dt) so the delta-correlated contract
holds at the integrator resolution.

Every channel owns a counter-based RNG stream keyed by (seed, channel id), so
channels stay uncorrelated and bit-reproducible independent of evaluation
order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import Boltzmann as K_B

from levelec.core import (
    ElectrodeNoiseModel,
    GasEnvironment,
    InvalidParameterError,
    ParticleSpec,
    ResolvedCircuit,
    effective_resistance,
    _require_nonnegative,
    _require_positive,
)

# Fixed stream ids; the order here is part of the reproducibility contract.
CHANNEL_IDS = {
    "init": 0,
    "gas": 1,
    "resistive": 2,
    "feedback": 3,
    "electrode": 4,
    "circuit": 5,
}


def channel_rng(seed: int, channel: str) -> np.random.Generator:
    """Counter-based generator for one noise channel of one trajectory."""
    if channel not in CHANNEL_IDS:
        raise InvalidParameterError(f"unknown noise channel {channel!r}")
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64(CHANNEL_IDS[channel])], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class NoiseChannelStats:
    """One thermal channel: damping rate, bath temperature and the particle
    mass it acts on."""

    damping_rate: float   # 1/s
    temperature: float    # K
    mass: float           # kg

    def __post_init__(self):
        _require_nonnegative(damping_rate=self.damping_rate,
                             temperature=self.temperature)
        _require_positive(mass=self.mass)

    def force_std(self, dt: float) -> float:
        """Per-step force standard deviation sqrt(2 k_B T gamma M / dt)."""
        _require_positive(dt=dt)
        return math.sqrt(2.0 * K_B * self.temperature * self.damping_rate
                         * self.mass / dt)


def thermal_force_sample(channel: NoiseChannelStats, dt: float,
                         rng: np.random.Generator, size=None):
    """Zero-mean Gaussian force sample(s) with variance 2 k_B T gamma M / dt.

    The discrete autocorrelation then reproduces
    <F(t + tau) F(t)> = 2 k_B T gamma M delta(tau).
    """
    std = channel.force_std(dt)
    if size is None:
        return std * rng.standard_normal()
    return std * rng.standard_normal(size)


def electrode_force_sample(particle: ParticleSpec, s_e_at_omega_z: float,
                           dt: float, rng: np.random.Generator, size=None):
    """Zero-mean Gaussian force with variance q^2 S_E(omega_z) / dt."""
    _require_positive(dt=dt)
    _require_nonnegative(s_e_at_omega_z=s_e_at_omega_z)
    std = abs(particle.charge_coulomb) * math.sqrt(s_e_at_omega_z / dt)
    if size is None:
        return std * rng.standard_normal()
    return std * rng.standard_normal(size)


def johnson_noise_voltage(temperature: float, resistance: float,
                          bandwidth: float) -> float:
    """Thermal voltage-noise width sqrt(4 k_B T R dnu)."""
    _require_positive(bandwidth=bandwidth)
    _require_nonnegative(temperature=temperature)
    _require_positive(resistance=resistance)
    return math.sqrt(4.0 * K_B * temperature * resistance * bandwidth)


def circuit_voltage_noise(circuit: ResolvedCircuit, bandwidth: float) -> float:
    """Johnson noise of the readout at its effective resistance,
    sqrt(4 k_B T_R R_eff dnu)."""
    return johnson_noise_voltage(circuit.temperature,
                                 effective_resistance(circuit), bandwidth)


def feedback_noise_temperature(noise_voltage: float, amp_resistance: float,
                               bandwidth: float) -> float:
    """Noise temperature of the feedback amplifier,
    T_n = V_fb^2 / (4 k_B R_amp B)."""
    _require_positive(amp_resistance=amp_resistance, bandwidth=bandwidth)
    return noise_voltage**2 / (4.0 * K_B * amp_resistance * bandwidth)


def feedback_noise_voltage(noise_temperature: float, amp_resistance: float,
                           bandwidth: float) -> float:
    """Inverse of :func:`feedback_noise_temperature`."""
    _require_positive(amp_resistance=amp_resistance, bandwidth=bandwidth)
    _require_nonnegative(noise_temperature=noise_temperature)
    return math.sqrt(4.0 * K_B * noise_temperature * amp_resistance * bandwidth)


@dataclass(frozen=True)
class NoiseEnvironment:
    """All noise parameters of one run.

    ``feedback_noise_voltage`` is a plain voltage; it maps onto an amplifier
    noise temperature through ``amp_resistance`` and ``amp_bandwidth``
    (defaults 50 ohm and 1 Hz, both configurable).
    """

    gas: GasEnvironment = field(default_factory=GasEnvironment)
    circuit_temperature: float = 300.0
    feedback_noise_voltage: float = 1e-10   # V
    amp_resistance: float = 50.0            # ohm
    amp_bandwidth: float = 1.0              # Hz
    electrode: ElectrodeNoiseModel = field(default_factory=ElectrodeNoiseModel)
    electrode_temperature: float | None = None  # None: follow the circuit
    rng_seed: int = 42

    def __post_init__(self):
        _require_nonnegative(circuit_temperature=self.circuit_temperature,
                             feedback_noise_voltage=self.feedback_noise_voltage)
        _require_positive(amp_resistance=self.amp_resistance,
                          amp_bandwidth=self.amp_bandwidth)
        if self.electrode_temperature is not None:
            _require_nonnegative(electrode_temperature=self.electrode_temperature)

    @property
    def feedback_noise_temperature(self) -> float:
        return feedback_noise_temperature(self.feedback_noise_voltage,
                                          self.amp_resistance, self.amp_bandwidth)

    def electrode_temp(self) -> float:
        if self.electrode_temperature is None:
            return self.circuit_temperature
        return self.electrode_temperature
