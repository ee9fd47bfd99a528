"""Detection and sensitivity calculators.

Closed forms for the smallest velocity, displacement and force resolvable
above the Johnson noise of the readout, and the charge-to-mass threshold for
detecting a particle at all.  All of them assume resonant detection with the
particle thermalized to the circuit.

Two published reference numbers in this area (the zero-point fluctuation of
a 500 nm sphere and the 5 mK displacement resolution) disagree with direct
evaluation of the corresponding formulas by one to two orders of magnitude;
the formulas are implemented as stated and the calculators return what the
formulas give.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.constants import Boltzmann as K_B, hbar as HBAR

from levelec.core import InvalidParameterError, ParticleSpec, _require_positive


class BelowDetectionLimitError(ValueError):
    """The damping rate is too small to resolve the signal in the requested
    bandwidth (gamma < 4 dnu)."""


@dataclass(frozen=True)
class SensingQuery:
    """Inputs for the sensitivity calculators.

    ``gamma`` is the damping rate of the motion (resistive damping for a
    tuned readout); ``r_eff`` is only needed for the detectability margin
    and mass-limit calculators.
    """

    particle: ParticleSpec
    bandwidth: float                 # Hz
    omega_z: float = 2 * math.pi * 1e6
    gamma: float = 1e3               # 1/s
    circuit_temperature: float = 300.0
    r_eff: float | None = None
    eta: float = 0.8
    d: float = 1e-3

    def __post_init__(self):
        _require_positive(bandwidth=self.bandwidth, omega_z=self.omega_z,
                          d=self.d)
        if self.gamma < 0.0:
            raise InvalidParameterError("gamma must be >= 0")
        if not 0.0 < self.eta <= 1.0:
            raise InvalidParameterError("eta must be in (0, 1]")


def min_velocity(query: SensingQuery) -> float:
    """Minimum detectable velocity on resonance,
    sqrt(4 k_B T_R dnu / (M gamma))."""
    _require_positive(gamma=query.gamma)
    return math.sqrt(4.0 * K_B * query.circuit_temperature * query.bandwidth
                     / (query.particle.mass * query.gamma))


def min_displacement(query: SensingQuery) -> float:
    """Minimum detectable displacement, min_velocity / omega_z."""
    return min_velocity(query) / query.omega_z


@dataclass(frozen=True)
class DetectionVerdict:
    detectable: bool
    margin: float            # I_max R_eff / V_R at thermal equilibrium
    gamma: float
    gamma_threshold: float   # 4 dnu


def detection_requirement(query: SensingQuery) -> DetectionVerdict:
    """Whether the thermal signal clears the Johnson noise.

    At thermal equilibrium with the circuit the signal-to-noise ratio
    I_max R_eff / V_R reduces to sqrt(gamma / (4 dnu)), so detection requires
    gamma > 4 dnu: the measurement time must be on the order of the
    ring-down time.  An uncharged particle gives no signal at all.
    """
    threshold = 4.0 * query.bandwidth
    if query.particle.charge == 0.0 or query.gamma == 0.0:
        return DetectionVerdict(detectable=False, margin=0.0,
                                gamma=query.gamma, gamma_threshold=threshold)
    margin = math.sqrt(query.gamma / threshold)
    return DetectionVerdict(detectable=query.gamma > threshold, margin=margin,
                            gamma=query.gamma, gamma_threshold=threshold)


def min_force(query: SensingQuery, gamma: float | None = None) -> float:
    """Force sensitivity at the detection limit, F_min = gamma sqrt(k_B T_R M).

    ``gamma`` defaults to the query's damping rate and must satisfy
    gamma >= 4 dnu (the detectability requirement); the smallest resolvable
    force at given bandwidth uses gamma = 4 dnu exactly.
    """
    gamma = query.gamma if gamma is None else gamma
    if gamma < 4.0 * query.bandwidth:
        raise BelowDetectionLimitError(
            f"gamma = {gamma:.3g} 1/s is below the detection limit "
            f"4 dnu = {4.0 * query.bandwidth:.3g} 1/s")
    return gamma * math.sqrt(K_B * query.circuit_temperature * query.particle.mass)


def min_force_optimal(query: SensingQuery) -> float:
    """Force sensitivity with the damping set to the detection limit
    gamma = 4 dnu, the smallest force resolvable in the given bandwidth."""
    return min_force(query, gamma=4.0 * query.bandwidth)


@dataclass(frozen=True)
class MassDetectionLimit:
    charge_to_sqrt_mass: float   # C / sqrt(kg), detection threshold
    max_mass: float              # kg, for the given charge
    max_mass_amu: float


def detectable_charge_to_mass(r_eff: float, bandwidth: float,
                              eta: float = 0.8, d: float = 1e-3,
                              charge: float = 1.0) -> MassDetectionLimit:
    """Detectability threshold q / sqrt(M) > sqrt(2 dnu / R_eff) d / eta and
    the largest detectable mass for a given charge (in units of e)."""
    _require_positive(r_eff=r_eff, bandwidth=bandwidth, d=d)
    from scipy.constants import atomic_mass, elementary_charge

    threshold = math.sqrt(2.0 * bandwidth / r_eff) * d / eta
    q_c = charge * elementary_charge
    max_mass = (q_c * eta / d) ** 2 * r_eff / (2.0 * bandwidth)
    return MassDetectionLimit(charge_to_sqrt_mass=threshold, max_mass=max_mass,
                              max_mass_amu=max_mass / atomic_mass)


def zero_point_and_occupancy(particle: ParticleSpec, omega_z: float,
                             temperature: float) -> tuple[float, float]:
    """Ground-state position spread sqrt(hbar / (2 M omega_z)) and the
    classical-limit phonon occupancy k_B T / (hbar omega_z)."""
    _require_positive(omega_z=omega_z)
    if temperature < 0.0:
        raise InvalidParameterError("temperature must be >= 0")
    z_zpf = math.sqrt(HBAR / (2.0 * particle.mass * omega_z))
    occupancy = K_B * temperature / (HBAR * omega_z)
    return z_zpf, occupancy
