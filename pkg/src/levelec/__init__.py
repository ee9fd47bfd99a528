"""Levitated electromechanics: charged particles in an RF trap read out and
cooled through a resonant RLC circuit."""

from levelec.core import (
    ChargeLimits,
    ChargeLimitWarning,
    CircuitConfig,
    CircuitTopology,
    DerivedParams,
    ElectrodeNoiseModel,
    GasEnvironment,
    InvalidParameterError,
    ParticleSpec,
    ResolvedCircuit,
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

__version__ = "0.1.0"
