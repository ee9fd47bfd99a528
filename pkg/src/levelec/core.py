"""Domain types and closed-form derived quantities.

Everything here is a pure function of the input parameters: sphere mass,
RF-trap stability parameters and secular frequency, circuit damping rates,
effective resistance, gas damping, electrode field-noise levels and charge
limits.  All quantities are strict SI internally; particle charge is accepted
in units of the elementary charge at the interface and converted once.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

from scipy.constants import (
    Boltzmann as K_B,
    atomic_mass as AMU,
    elementary_charge as E_CHARGE,
    epsilon_0 as EPS_0,
    hbar as HBAR,
    pi as PI,
)

# Lowest-region stability boundary of the drive-parameter axis (a_z = 0),
# validated against a Floquet-multiplier oracle in the test suite.
MATHIEU_QZ_MAX = 0.908

# Fractional frequency shift above which the neglected image-charge force is
# no longer safely negligible.
MIRROR_SHIFT_WARN_LEVEL = 1e-3


class InvalidParameterError(ValueError):
    """A physical parameter is outside its admissible range."""


class UnstableTrapError(RuntimeError):
    """The trap drive does not confine the particle."""


class ChargeLimitWarning(UserWarning):
    """The requested charge exceeds the holding capacity of the sphere."""


def _require_positive(**values: float) -> None:
    for name, value in values.items():
        if not value > 0.0:
            raise InvalidParameterError(f"{name} must be > 0, got {value!r}")


def _require_nonnegative(**values: float) -> None:
    for name, value in values.items():
        if value < 0.0:
            raise InvalidParameterError(f"{name} must be >= 0, got {value!r}")


def derive_mass(radius: float, density: float) -> float:
    """Mass of a homogeneous sphere, (4/3)*pi*radius^3*density.

    Parameters
    ----------
    radius : float
        Sphere radius [m], > 0.
    density : float
        Mass density [kg/m^3], > 0.
    """
    _require_positive(radius=radius, density=density)
    return (4.0 / 3.0) * PI * radius**3 * density


@dataclass(frozen=True)
class ParticleSpec:
    """Levitated sphere: geometry, density and signed charge.

    ``charge`` is given in units of the elementary charge.  Charges beyond
    the holding capacity of the sphere trigger :class:`ChargeLimitWarning`
    (a warning, not an error, since the capacity formulas are approximate).
    """

    radius: float            # m
    density: float           # kg/m^3
    charge: float            # units of e, signed

    def __post_init__(self):
        _require_positive(radius=self.radius, density=self.density)
        limits = charge_limits(self, validate=False)
        if self.charge > limits.q_pos_max or self.charge < limits.q_neg_max:
            warnings.warn(
                f"charge {self.charge:.3g} e exceeds the holding capacity "
                f"[{limits.q_neg_max:.3g}, {limits.q_pos_max:.3g}] e for "
                f"radius {self.radius:.3g} m",
                ChargeLimitWarning,
                stacklevel=2,
            )

    @cached_property
    def mass(self) -> float:
        """Sphere mass [kg]."""
        return derive_mass(self.radius, self.density)

    @property
    def mass_amu(self) -> float:
        """Sphere mass in atomic mass units."""
        return self.mass / AMU

    @property
    def charge_coulomb(self) -> float:
        """Signed charge [C]."""
        return self.charge * E_CHARGE


@dataclass(frozen=True)
class TrapConfig:
    """Quadrupole trap drive and geometry.

    Attributes
    ----------
    u0 : AC drive amplitude [V].
    udc : DC endcap voltage [V].
    drive_freq : angular drive frequency [rad/s].
    r0 : half separation of the RF electrodes [m].
    d : endcap separation [m].
    eta : geometric pick-up factor, 0 < eta <= 1.  A single factor is used
        for both the stability parameters and the induced-current pick-up.
    r_prime : trap-centre-to-endcap distance [m], enters the electrode
        surface-noise power law.
    """

    u0: float
    udc: float = 0.0
    drive_freq: float = 2 * PI * 1e5
    r0: float = 500e-6
    d: float = 1e-3
    eta: float = 0.8
    r_prime: float = 1e-3

    def __post_init__(self):
        _require_positive(drive_freq=self.drive_freq, r0=self.r0, d=self.d,
                          r_prime=self.r_prime)
        if not 0.0 < self.eta <= 1.0:
            raise InvalidParameterError(f"eta must be in (0, 1], got {self.eta!r}")


class CircuitTopology(Enum):
    SERIES = "series"
    PARALLEL = "parallel"


@dataclass(frozen=True)
class CircuitConfig:
    """RLC readout circuit before tuning to the mechanical resonance.

    Exactly one of ``quality_factor`` and ``inductance`` is given; the other
    is derived when the circuit is resolved on resonance (the circuit
    resonance is placed at the particle's secular frequency).
    """

    topology: CircuitTopology = CircuitTopology.SERIES
    resistance: float = 100e6        # ohm
    quality_factor: float | None = 100.0
    inductance: float | None = None  # henry
    temperature: float = 300.0       # K

    def __post_init__(self):
        _require_positive(resistance=self.resistance)
        _require_nonnegative(temperature=self.temperature)
        given = (self.quality_factor is not None) + (self.inductance is not None)
        if given != 1:
            raise InvalidParameterError(
                "exactly one of quality_factor and inductance must be given")
        if self.quality_factor is not None:
            _require_positive(quality_factor=self.quality_factor)
        if self.inductance is not None:
            _require_positive(inductance=self.inductance)

    def resolve(self, omega_z: float) -> "ResolvedCircuit":
        """Tune the circuit on resonance (omega_LC = omega_z) and derive
        the missing element values."""
        _require_positive(omega_z=omega_z)
        r = self.resistance
        if self.quality_factor is not None:
            q_f = self.quality_factor
            gamma = omega_z / q_f
            if self.topology is CircuitTopology.SERIES:
                inductance = r / gamma                   # Gamma = R/L
                capacitance = 1.0 / (omega_z**2 * inductance)
            else:
                capacitance = 1.0 / (gamma * r)          # Gamma = 1/(RC)
                inductance = 1.0 / (omega_z**2 * capacitance)
        else:
            inductance = self.inductance
            capacitance = 1.0 / (omega_z**2 * inductance)
            if self.topology is CircuitTopology.SERIES:
                gamma = r / inductance
            else:
                gamma = 1.0 / (r * capacitance)
            q_f = omega_z / gamma
        return ResolvedCircuit(
            topology=self.topology, resistance=r, inductance=inductance,
            capacitance=capacitance, damping_rate=gamma, quality_factor=q_f,
            omega_lc=omega_z, temperature=self.temperature,
        )


@dataclass(frozen=True)
class ResolvedCircuit:
    """RLC circuit with all element values fixed, resonant at ``omega_lc``."""

    topology: CircuitTopology
    resistance: float       # ohm
    inductance: float       # henry
    capacitance: float      # farad
    damping_rate: float     # Gamma [1/s]
    quality_factor: float
    omega_lc: float         # rad/s
    temperature: float      # K


def effective_resistance(circuit, omega_z: float | None = None) -> float:
    """Resistance seen by the induced current on resonance.

    Series: R_eff = Q_f^2 * R.  Parallel: R_eff = omega_z * L * Q_f.
    Accepts either a :class:`CircuitConfig` (``omega_z`` required) or an
    already-resolved circuit.
    """
    if isinstance(circuit, CircuitConfig):
        if omega_z is None:
            raise InvalidParameterError("omega_z required for an unresolved circuit")
        circuit = circuit.resolve(omega_z)
    if circuit.topology is CircuitTopology.SERIES:
        return circuit.quality_factor**2 * circuit.resistance
    return circuit.omega_lc * circuit.inductance * circuit.quality_factor


def stability_params(trap: TrapConfig, particle: ParticleSpec) -> tuple[float, float, float]:
    """Trap stability parameters and secular frequency, (a_z, q_z, omega_z).

        a_z = 4 U_dc eta q / (M omega_D^2 r0^2)
        q_z = -2 U_0 eta q / (M omega_D^2 r0^2)

    The secular frequency follows the lowest-order pseudopotential formula
    omega_z = (omega_D / 2) sqrt(a_z + q_z^2 / 2), which reduces to
    omega_D |q_z| / (2 sqrt(2)) for a_z = 0.

    Raises
    ------
    UnstableTrapError
        If there is no confining drive (q_z = 0 with a_z <= 0), if
        |q_z| >= 0.908 (lowest stability region, a_z = 0 boundary), or if
        a_z + q_z^2/2 <= 0.
    """
    mass = particle.mass
    q_c = particle.charge_coulomb
    scale = mass * trap.drive_freq**2 * trap.r0**2
    a_z = 4.0 * trap.udc * trap.eta * q_c / scale
    q_z = -2.0 * trap.u0 * trap.eta * q_c / scale
    if q_z == 0.0 and a_z <= 0.0:
        raise UnstableTrapError("no trapping force: q_z = 0 (uncharged particle "
                                "or no AC drive)")
    if abs(q_z) >= MATHIEU_QZ_MAX:
        raise UnstableTrapError(
            f"|q_z| = {abs(q_z):.4f} >= {MATHIEU_QZ_MAX} lies outside the "
            "lowest stability region")
    beta_sq = a_z + 0.5 * q_z**2
    if beta_sq <= 0.0:
        raise UnstableTrapError(f"a_z + q_z^2/2 = {beta_sq:.3g} <= 0: unstable")
    omega_z = 0.5 * trap.drive_freq * math.sqrt(beta_sq)
    return a_z, q_z, omega_z


def resistive_damping_rate(particle: ParticleSpec, trap: TrapConfig,
                           circuit: ResolvedCircuit) -> float:
    """On-resonance particle friction rate, (q eta / d)^2 R_eff / M.

    For eta = 1 this equals q^2 / (M C Gamma d^2) evaluated from the same
    circuit (series), the form obtained by eliminating the circuit in the
    frequency domain.
    """
    coupling = particle.charge_coulomb * trap.eta / trap.d
    return coupling**2 * effective_resistance(circuit) / particle.mass


def adiabatic_damping_rate(particle: ParticleSpec, trap: TrapConfig,
                           circuit: ResolvedCircuit) -> float:
    """Quasi-static (drive far below circuit resonance) friction rate.

    Series: Gamma L q^2 / (M d^2).  Parallel: 0, the capacitor is
    effectively shorted in the quasi-static limit.
    """
    if circuit.topology is CircuitTopology.PARALLEL:
        return 0.0
    q_c = particle.charge_coulomb
    return circuit.damping_rate * circuit.inductance * q_c**2 / (particle.mass * trap.d**2)


@dataclass(frozen=True)
class GasEnvironment:
    """Residual gas: pressure [Pa], temperature [K] and molecule mass [kg]."""

    pressure: float = 1e-8          # Pa (1e-10 mbar)
    temperature: float = 300.0      # K
    molecule_mass: float = 28.0 * AMU  # N2

    def __post_init__(self):
        _require_nonnegative(pressure=self.pressure, temperature=self.temperature)
        _require_positive(molecule_mass=self.molecule_mass)

    @property
    def number_density(self) -> float:
        """Ideal-gas number density [1/m^3]."""
        if self.pressure == 0.0 or self.temperature == 0.0:
            return 0.0
        return self.pressure / (K_B * self.temperature)

    @property
    def mean_thermal_speed(self) -> float:
        """Kinetic-theory mean speed sqrt(8 k_B T / (pi m)) [m/s]."""
        return math.sqrt(8.0 * K_B * self.temperature / (PI * self.molecule_mass))


def gas_damping_rate(particle: ParticleSpec, gas: GasEnvironment) -> float:
    """Momentum damping rate from gas collisions on a sphere,

        gamma_gas = (4 pi / 3) m n_gas r_S^2 v_th / M

    with n_gas from the ideal-gas law and v_th the mean thermal speed.
    """
    return ((4.0 * PI / 3.0) * gas.molecule_mass * gas.number_density
            * particle.radius**2 * gas.mean_thermal_speed / particle.mass)


@dataclass(frozen=True)
class ElectrodeNoiseModel:
    """Colored electrode field-noise power law S_E = g_E w^-alpha r'^(s*beta) T^chi.

    The published power law is ambiguous about the sign of the distance
    exponent; heating data grows as the electrode distance shrinks, so the
    default is the inverse power (``distance_exponent_sign = -1``).  The sign
    is configurable.
    """

    g_e: float = 1e-12
    alpha: float = 1.0
    beta: float = 3.0
    chi: float = 2.0
    distance_exponent_sign: int = -1

    def __post_init__(self):
        if self.distance_exponent_sign not in (-1, +1):
            raise InvalidParameterError("distance_exponent_sign must be +1 or -1")


def electrode_noise_psd(omega: float, trap: TrapConfig,
                        electrode: ElectrodeNoiseModel,
                        temperature: float) -> float:
    """Electric-field noise spectral density at ``omega`` [V^2 m^-2 / Hz]."""
    _require_positive(omega=omega)
    _require_nonnegative(temperature=temperature)
    return (electrode.g_e * omega**(-electrode.alpha)
            * trap.r_prime**(electrode.distance_exponent_sign * electrode.beta)
            * temperature**electrode.chi)


def electrode_heating_rate(particle: ParticleSpec, s_e: float, omega_z: float) -> float:
    """Motional heating rate q^2 S_E(omega_z) / (4 M hbar omega_z) [quanta/s]."""
    _require_positive(omega_z=omega_z)
    _require_nonnegative(s_e=s_e)
    return particle.charge_coulomb**2 * s_e / (4.0 * particle.mass * HBAR * omega_z)


@dataclass(frozen=True)
class ChargeLimits:
    """Holding-capacity estimates for a sphere, in units of e."""

    q_neg_max: float
    q_pos_max: float
    q_pauthenier: float   # max charge acquired in a uniform field E, units of e
    p_factor: float       # 3 for a conductor, 3 eps_r/(eps_r + 2) for a dielectric


def charge_limits(particle: ParticleSpec, relative_permittivity: float | None = None,
                  field: float = 0.0, *, validate: bool = True) -> ChargeLimits:
    """Maximal negative/positive charge and the field-charging limit.

        q_neg / e = -1 - 0.7 (r_S / nm)^2
        q_pos / e = +1 + 21  (r_S / nm)^2
        q_max     = 4 pi eps0 r_S^2 p E   (charging in a uniform field E)

    ``relative_permittivity = None`` treats the sphere as a conductor
    (p = 3); otherwise p = 3 eps_r / (eps_r + 2).
    """
    if validate:
        _require_positive(radius=particle.radius)
    r_nm = particle.radius / 1e-9
    q_neg = -1.0 - 0.7 * r_nm**2
    q_pos = 1.0 + 21.0 * r_nm**2
    if relative_permittivity is None:
        p = 3.0
    else:
        _require_positive(relative_permittivity=relative_permittivity)
        p = 3.0 * relative_permittivity / (relative_permittivity + 2.0)
    q_pauth = 4.0 * PI * EPS_0 * particle.radius**2 * p * field / E_CHARGE
    return ChargeLimits(q_neg_max=q_neg, q_pos_max=q_pos,
                        q_pauthenier=q_pauth, p_factor=p)


def mirror_shift_fraction(particle: ParticleSpec, circuit: ResolvedCircuit,
                          trap: TrapConfig, omega_z: float) -> float:
    """Fractional frequency shift q^2 / (M C d^2 omega_z^2) from the
    neglected image-charge force.  Values above ~1e-3 warrant a warning."""
    _require_positive(omega_z=omega_z)
    q_c = particle.charge_coulomb
    return q_c**2 / (particle.mass * circuit.capacitance * trap.d**2 * omega_z**2)


@dataclass(frozen=True)
class DerivedParams:
    """All derived quantities for one particle/trap/circuit working point."""

    a_z: float
    q_z: float
    omega_z: float         # rad/s
    gamma_res: float       # 1/s
    gamma_ad: float        # 1/s
    gamma_gas: float       # 1/s
    gamma_fb: float        # 1/s ((1 - G) gamma_res when feedback is active, else 0)
    r_eff: float           # ohm
    mirror_shift: float    # dimensionless
    circuit: ResolvedCircuit = field(repr=False)

    def __post_init__(self):
        for name in ("gamma_res", "gamma_ad", "gamma_gas", "gamma_fb"):
            _require_nonnegative(**{name: getattr(self, name)})


def derive_params(particle: ParticleSpec, trap: TrapConfig, circuit: CircuitConfig,
                  gas: GasEnvironment | None = None,
                  feedback_gain: float | None = None) -> DerivedParams:
    """Resolve the full working point: stability, tuned circuit, all rates."""
    a_z, q_z, omega_z = stability_params(trap, particle)
    resolved = circuit.resolve(omega_z)
    gamma_res = resistive_damping_rate(particle, trap, resolved)
    gamma_fb = 0.0
    if feedback_gain is not None:
        gamma_fb = (1.0 - feedback_gain) * gamma_res
    return DerivedParams(
        a_z=a_z, q_z=q_z, omega_z=omega_z,
        gamma_res=gamma_res,
        gamma_ad=adiabatic_damping_rate(particle, trap, resolved),
        gamma_gas=gas_damping_rate(particle, gas) if gas is not None else 0.0,
        gamma_fb=gamma_fb,
        r_eff=effective_resistance(resolved),
        mirror_shift=mirror_shift_fraction(particle, resolved, trap, omega_z),
        circuit=resolved,
    )
