"""Stochastic equations of motion and trajectory integration.

Two models are provided.  The coupled model steps the full particle-circuit
phase space (z, p, Q, Phi): capacitor charge and inductor flux evolve
alongside the particle, with circuit friction and Johnson noise acting on the
circuit coordinate.  The reduced model eliminates the circuit and steps only
(z, p) under the RF drive, the damping rates supplied by the closed-form
layer, and delta-correlated forces for every enabled noise channel.

Integration is stochastic Heun for the drift with Euler-Maruyama noise
increments (the noise is additive, so the hybrid scheme is consistent and the
oscillatory drive benefits from the second-order deterministic part).
Ensembles integrate as one vectorized pass; each trajectory draws from its
own counter-based streams, so results are bit-identical whether a seed runs
alone or inside an ensemble.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
from scipy.constants import Boltzmann as K_B

from levelec.core import (
    CircuitConfig,
    CircuitTopology,
    DerivedParams,
    InvalidParameterError,
    ParticleSpec,
    ResolvedCircuit,
    TrapConfig,
    derive_params,
    effective_resistance,
    electrode_noise_psd,
    _require_positive,
)
from levelec.feedback import FeedbackConfig
from levelec.noise import NoiseEnvironment, channel_rng

_CHUNK = 16384

REDUCED_CHANNELS = frozenset({"gas", "resistive", "feedback", "electrode"})
COUPLED_CHANNELS = frozenset({"gas", "electrode", "circuit"})
DEFAULT_CHANNELS = frozenset({"gas", "resistive", "feedback", "electrode", "circuit"})

# Default step resolves the drive period well and keeps the stability guard
# satisfied at every reference parameter set.
STEPS_PER_DRIVE_PERIOD = 200
STABILITY_GUARD = 0.05


class Model(Enum):
    COUPLED = "coupled"
    REDUCED = "reduced"


class SimPlanError(InvalidParameterError):
    """The integration plan violates a precondition."""


class NumericalInstabilityError(RuntimeError):
    """The state left the finite domain during integration."""


@dataclass(frozen=True)
class SimState:
    """Instantaneous phase-space point.  Circuit coordinates are meaningful
    for the coupled model only."""

    t: float
    z: float
    p: float
    charge: float = 0.0   # capacitor charge Q [C]
    flux: float = 0.0     # inductor flux Phi [V s]


@dataclass(frozen=True)
class SimPlan:
    """What to integrate and how.

    ``dt = None`` picks (drive period) / 200.  ``noise_channels`` is
    intersected with the channels meaningful for the chosen model
    (reduced: gas, resistive, feedback, electrode; coupled: gas, electrode,
    circuit).  ``potential`` selects the RF drive ("mathieu") or the secular
    harmonic approximation ("harmonic") for the deterministic trap force.
    Initial conditions are thermal at ``initial_temperature`` unless explicit
    ``initial_z`` / ``initial_v`` values are given.
    """

    model: Model = Model.REDUCED
    dt: float | None = None
    duration: float = 0.5
    output_decimation: int = 20
    noise_channels: frozenset[str] = DEFAULT_CHANNELS
    potential: str = "mathieu"
    initial_temperature: float = 1000.0
    initial_z: float | None = None
    initial_v: float | None = None

    def __post_init__(self):
        if self.dt is not None:
            _require_positive(dt=self.dt)
        _require_positive(duration=self.duration)
        if self.output_decimation < 1:
            raise SimPlanError("output_decimation must be >= 1")
        if self.potential not in ("mathieu", "harmonic"):
            raise SimPlanError(f"unknown potential {self.potential!r}")
        unknown = set(self.noise_channels) - (REDUCED_CHANNELS | COUPLED_CHANNELS)
        if unknown:
            raise SimPlanError(f"unknown noise channels {sorted(unknown)}")
        if self.initial_temperature < 0.0:
            raise SimPlanError("initial_temperature must be >= 0")


@dataclass(frozen=True)
class System:
    """One particle/trap/circuit working point plus its noise environment."""

    particle: ParticleSpec
    trap: TrapConfig
    circuit: CircuitConfig
    noise: NoiseEnvironment
    feedback: FeedbackConfig | None
    derived: DerivedParams

    @classmethod
    def build(cls, particle: ParticleSpec, trap: TrapConfig,
              circuit: CircuitConfig, noise: NoiseEnvironment | None = None,
              feedback: FeedbackConfig | None = None) -> "System":
        if noise is None:
            noise = NoiseEnvironment(circuit_temperature=circuit.temperature)
        gain = feedback.gain if (feedback is not None and feedback.enabled) else None
        derived = derive_params(particle, trap, circuit, gas=noise.gas,
                                feedback_gain=gain)
        return cls(particle=particle, trap=trap, circuit=circuit, noise=noise,
                   feedback=feedback, derived=derived)

    @property
    def resolved_circuit(self) -> ResolvedCircuit:
        return self.derived.circuit

    def feedback_gain(self) -> float:
        if self.feedback is not None and self.feedback.enabled:
            return self.feedback.gain
        return 0.0

    def feedback_noise_temperature(self) -> float:
        if self.feedback is not None and self.feedback.enabled:
            return (self.feedback.noise_voltage**2
                    / (4.0 * K_B * self.feedback.amp_resistance * self.feedback.bandwidth))
        return 0.0


@dataclass
class Trajectory:
    """Decimated time series of one stochastic integration.

    Carries the RNG seed, the raw step, and a flat config snapshot, which is
    sufficient metadata for bit-exact replay.
    """

    times: np.ndarray
    z: np.ndarray
    v: np.ndarray
    circuit_charge: np.ndarray | None
    circuit_flux: np.ndarray | None
    seed: int
    dt: float
    decimation: int
    mass: float
    omega_z: float
    omega_drive: float
    gamma_total: float
    config: dict = field(default_factory=dict)

    @property
    def sample_rate(self) -> float:
        """Output sample rate [Hz] after decimation."""
        return 1.0 / (self.dt * self.decimation)

    @property
    def is_coupled(self) -> bool:
        return self.circuit_charge is not None

    def __len__(self):
        return len(self.times)


def trap_spring_coefficients(particle: ParticleSpec, derived: DerivedParams,
                             omega_drive: float, potential: str) -> tuple[float, float]:
    """Spring force F = (k0 + k1 cos(w_D t)) z of the configured potential.

    For the RF drive, F = (M w_D^2 / 4)(a_z - 2 q_z cos(w_D t)) z; the
    harmonic variant uses the constant secular spring -M w_z^2 z.
    """
    mass = particle.mass
    if potential == "harmonic":
        return -mass * derived.omega_z**2, 0.0
    k0 = 0.25 * mass * omega_drive**2 * derived.a_z
    k1 = -0.5 * mass * omega_drive**2 * derived.q_z
    return k0, k1


def _particle_damping(system: System, channels: frozenset[str], model: Model) -> float:
    """Momentum damping coefficient from the enabled dissipation channels."""
    gamma = 0.0
    if "gas" in channels:
        gamma += system.derived.gamma_gas
    if model is Model.REDUCED and "resistive" in channels:
        gamma += (1.0 - system.feedback_gain()) * system.derived.gamma_res
    return gamma


def reduced_rhs(t: float, state, system: System, potential: str = "mathieu"):
    """Drift of the circuit-eliminated model, state = (z, p).

    dz/dt = p / M
    dp/dt = (k0 + k1 cos(w_D t)) z - gamma p

    with gamma the sum of the gas rate and the (gain-reduced) resistive rate.
    Noise enters separately through the integrator.
    """
    z, p = state[..., 0], state[..., 1]
    k0, k1 = trap_spring_coefficients(system.particle, system.derived,
                                      system.trap.drive_freq, potential)
    gamma = (system.derived.gamma_gas
             + (1.0 - system.feedback_gain()) * system.derived.gamma_res)
    out = np.empty_like(np.asarray(state, dtype=float))
    out[..., 0] = p / system.particle.mass
    out[..., 1] = (k0 + k1 * math.cos(system.trap.drive_freq * t)) * z - gamma * p
    return out


def coupled_rhs(t: float, state, system: System, potential: str = "mathieu"):
    """Drift of the full particle-circuit model, state = (z, p, Q, Phi).

    dz/dt   = p / M
    dp/dt   = (k0 + k1 cos(w_D t)) z - (q / (C d)) Q - gamma_gas p
    dQ/dt   = Phi / L                  (- Gamma Q for the parallel topology)
    dPhi/dt = -Q/C - (q / (C d)) z     (- Gamma Phi for the series topology)

    For an uncharged particle the cross terms vanish exactly and particle and
    circuit decouple.  Circuit Johnson noise enters via the integrator.
    """
    circuit = system.resolved_circuit
    z, p = state[..., 0], state[..., 1]
    charge, flux = state[..., 2], state[..., 3]
    k0, k1 = trap_spring_coefficients(system.particle, system.derived,
                                      system.trap.drive_freq, potential)
    coupling = system.particle.charge_coulomb / (circuit.capacitance * system.trap.d)
    out = np.empty_like(np.asarray(state, dtype=float))
    out[..., 0] = p / system.particle.mass
    out[..., 1] = ((k0 + k1 * math.cos(system.trap.drive_freq * t)) * z
                   - coupling * charge - system.derived.gamma_gas * p)
    out[..., 2] = flux / circuit.inductance
    out[..., 3] = -charge / circuit.capacitance - coupling * z
    if circuit.topology is CircuitTopology.SERIES:
        out[..., 3] -= circuit.damping_rate * flux
    else:
        out[..., 2] -= circuit.damping_rate * charge
    return out


def coupled_hamiltonian(z, p, charge, flux, system: System):
    """Energy of the coupled system with the harmonic secular potential,
    Phi^2/2L + Q^2/2C + p^2/2M + M w_z^2 z^2 / 2 + (q / C d) Q z."""
    circuit = system.resolved_circuit
    mass = system.particle.mass
    coupling = system.particle.charge_coulomb / (circuit.capacitance * system.trap.d)
    return (flux**2 / (2.0 * circuit.inductance)
            + charge**2 / (2.0 * circuit.capacitance)
            + p**2 / (2.0 * mass)
            + 0.5 * mass * system.derived.omega_z**2 * z**2
            + coupling * charge * z)


def induced_current(velocity, particle: ParticleSpec, trap: TrapConfig):
    """Image current induced in the endcaps, I = -(q eta / d) zdot.

    Valid in the adiabatic readout regime where the circuit follows the
    particle motion.
    """
    return -particle.charge_coulomb * trap.eta / trap.d * np.asarray(velocity)


def pickup_voltage(velocity, particle: ParticleSpec, trap: TrapConfig,
                   r_eff: float):
    """Readout voltage across the effective resistance, U = I R_eff."""
    return induced_current(velocity, particle, trap) * r_eff


def frequency_response(omega: float, particle: ParticleSpec, trap: TrapConfig,
                       circuit: ResolvedCircuit) -> tuple[float, float]:
    """Dispersive and dissipative parts of the eliminated-circuit coupling.

    Fourier elimination of the series circuit dresses the particle with

        shift(w)   = A (w^2 - wz^2) / D(w)      [rad^2/s^2, adds to wz^2]
        damping(w) = A Gamma / D(w)             [1/s]

    where A = q^2 wz^2 / (M C d^2) and D = (w^2 - wz^2)^2 + w^2 Gamma^2.
    On resonance the shift vanishes and the damping equals
    q^2 / (M C Gamma d^2); in the quasi-static limit (w -> 0) the damping
    reduces to the adiabatic rate Gamma L q^2 / (M d^2).
    """
    if circuit.topology is not CircuitTopology.SERIES:
        raise InvalidParameterError("frequency response is defined for the "
                                    "series topology")
    _require_positive(omega=omega)
    omega_z = circuit.omega_lc
    q_c = particle.charge_coulomb
    amp = q_c**2 * omega_z**2 / (particle.mass * circuit.capacitance * trap.d**2)
    denom = (omega**2 - omega_z**2) ** 2 + (omega * circuit.damping_rate) ** 2
    shift = amp * (omega**2 - omega_z**2) / denom
    damping = amp * circuit.damping_rate / denom
    return shift, damping


def _momentum_noise_stds(system: System, channels: frozenset[str], dt: float,
                         model: Model) -> dict[str, float]:
    """Per-step momentum increment widths for the particle noise channels."""
    mass = system.particle.mass
    stds: dict[str, float] = {}
    if "gas" in channels:
        gas = system.noise.gas
        stds["gas"] = math.sqrt(2.0 * K_B * gas.temperature
                                * system.derived.gamma_gas * mass * dt)
    if model is Model.REDUCED and "resistive" in channels:
        gain = system.feedback_gain()
        base = math.sqrt(2.0 * K_B * system.circuit.temperature
                         * system.derived.gamma_res * mass * dt)
        stds["resistive"] = (1.0 - gain) * base
        if gain > 0.0 and "feedback" in channels:
            t_n = system.feedback_noise_temperature()
            stds["feedback"] = gain * math.sqrt(
                2.0 * K_B * t_n * system.derived.gamma_res * mass * dt)
    if "electrode" in channels:
        s_e = electrode_noise_psd(system.derived.omega_z, system.trap,
                                  system.noise.electrode,
                                  system.noise.electrode_temp())
        stds["electrode"] = abs(system.particle.charge_coulomb) * math.sqrt(s_e * dt)
    return {name: std for name, std in stds.items() if std > 0.0}


def _circuit_noise_std(system: System, dt: float) -> float:
    """Per-step circuit noise width: sqrt(2 Gamma L k_B T dt) on the flux for
    the series topology, sqrt(2 Gamma C k_B T dt) on the charge for parallel."""
    circuit = system.resolved_circuit
    element = (circuit.inductance if circuit.topology is CircuitTopology.SERIES
               else circuit.capacitance)
    return math.sqrt(2.0 * circuit.damping_rate * element * K_B
                     * circuit.temperature * dt)


def _validate_plan(plan: SimPlan, system: System, dt: float) -> None:
    derived = system.derived
    scales = [derived.circuit.damping_rate, derived.circuit.omega_lc,
              derived.omega_z]
    if plan.potential == "mathieu":
        # the drive is only stepped when the RF potential is active
        scales.append(system.trap.drive_freq)
    fastest = max(scales)
    if dt * fastest > STABILITY_GUARD:
        raise SimPlanError(
            f"dt * max(Gamma, w_D, w_LC, w_z) = {dt * fastest:.3g} exceeds the "
            f"stability guard {STABILITY_GUARD}; reduce dt")
    if plan.duration < dt:
        raise SimPlanError("duration must cover at least one step")
    if plan.model is Model.COUPLED and system.feedback is not None \
            and system.feedback.enabled:
        raise SimPlanError("feedback is supported in the reduced model only")


def _initial_state(plan: SimPlan, system: System, seed: int) -> tuple[float, float]:
    rng = channel_rng(seed, "init")
    mass = system.particle.mass
    omega_z = system.derived.omega_z
    sigma_z = math.sqrt(K_B * plan.initial_temperature / mass) / omega_z
    sigma_v = math.sqrt(K_B * plan.initial_temperature / mass)
    # Always draw both so explicit overrides do not shift the other stream.
    z_draw, v_draw = rng.standard_normal(2)
    z0 = plan.initial_z if plan.initial_z is not None else sigma_z * z_draw
    v0 = plan.initial_v if plan.initial_v is not None else sigma_v * v_draw
    return z0, mass * v0


def _snapshot(system: System, plan: SimPlan, dt: float) -> dict:
    cfg = {
        "particle": asdict(system.particle),
        "trap": asdict(system.trap),
        "circuit": {**asdict(system.circuit), "topology": system.circuit.topology.value},
        "noise": asdict(system.noise),
        "plan": {**asdict(plan), "model": plan.model.value,
                 "noise_channels": sorted(plan.noise_channels), "dt": dt},
    }
    if system.feedback is not None:
        cfg["feedback"] = asdict(system.feedback)
    return cfg


def integrate_ensemble(plan: SimPlan, system: System, seeds) -> list[Trajectory]:
    """Integrate one trajectory per seed in a single vectorized pass.

    Per-trajectory noise streams are keyed by (seed, channel), so each
    returned trajectory is bit-identical to a solo :func:`integrate` run with
    the same seed.
    """
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise SimPlanError("at least one seed is required")
    dt = plan.dt if plan.dt is not None else \
        (2.0 * math.pi / system.trap.drive_freq) / STEPS_PER_DRIVE_PERIOD
    _validate_plan(plan, system, dt)

    model = plan.model
    coupled = model is Model.COUPLED
    allowed = COUPLED_CHANNELS if coupled else REDUCED_CHANNELS
    channels = frozenset(plan.noise_channels) & allowed

    n_traj = len(seeds)
    n_steps = max(1, round(plan.duration / dt))
    decim = plan.output_decimation
    n_out = n_steps // decim + 1

    mass = system.particle.mass
    inv_mass = 1.0 / mass
    k0, k1 = trap_spring_coefficients(system.particle, system.derived,
                                      system.trap.drive_freq, plan.potential)
    gamma_p = _particle_damping(system, channels, model)
    omega_d = system.trap.drive_freq

    p_stds = _momentum_noise_stds(system, channels, dt, model)
    p_gens = {name: [channel_rng(s, name) for s in seeds] for name in p_stds}

    z = np.empty(n_traj)
    p = np.empty(n_traj)
    for i, seed in enumerate(seeds):
        z[i], p[i] = _initial_state(plan, system, seed)

    circuit = system.resolved_circuit
    if coupled:
        charge = np.zeros(n_traj)
        flux = np.zeros(n_traj)
        coupling = system.particle.charge_coulomb / (circuit.capacitance * system.trap.d)
        inv_l = 1.0 / circuit.inductance
        inv_c = 1.0 / circuit.capacitance
        gamma_c = circuit.damping_rate
        series = circuit.topology is CircuitTopology.SERIES
        c_std = _circuit_noise_std(system, dt) if "circuit" in channels else 0.0
        c_gens = [channel_rng(s, "circuit") for s in seeds] if c_std > 0.0 else None

    out_z = np.empty((n_traj, n_out))
    out_v = np.empty((n_traj, n_out))
    out_q = np.empty((n_traj, n_out)) if coupled else None
    out_f = np.empty((n_traj, n_out)) if coupled else None

    def record(idx):
        out_z[:, idx] = z
        out_v[:, idx] = p * inv_mass
        if coupled:
            out_q[:, idx] = charge
            out_f[:, idx] = flux

    record(0)
    half_dt = 0.5 * dt
    # Single trajectories step with Python floats: the update arithmetic is
    # the same IEEE sequence as the vectorized path (the spring grid is
    # always evaluated with np.cos), so solo and ensemble runs stay
    # bit-identical, without the per-op numpy overhead.
    scalar = n_traj == 1
    if scalar:
        z, p = float(z[0]), float(p[0])
        if coupled:
            charge, flux = float(charge[0]), float(flux[0])

        def record(idx, _oz=out_z, _ov=out_v):
            _oz[0, idx] = z
            _ov[0, idx] = p * inv_mass
            if coupled:
                out_q[0, idx] = charge
                out_f[0, idx] = flux

    step = 0
    while step < n_steps:
        m = min(_CHUNK, n_steps - step)
        t_grid = (step + np.arange(m + 1)) * dt
        spring = (k0 + k1 * np.cos(omega_d * t_grid)) if k1 != 0.0 \
            else np.full(m + 1, k0)
        dp_noise = np.zeros((n_traj, m))
        for name, std in p_stds.items():
            gens = p_gens[name]
            for i in range(n_traj):
                dp_noise[i] += std * gens[i].standard_normal(m)
        if coupled and c_std > 0.0:
            dc_noise = np.empty((n_traj, m))
            for i in range(n_traj):
                dc_noise[i] = c_std * c_gens[i].standard_normal(m)

        if scalar:
            spring_list = spring.tolist()
            dp_row = dp_noise[0].tolist()
            dc_row = dc_noise[0].tolist() if coupled and c_std > 0.0 else None
        for k in range(m):
            if scalar:
                s0, s1 = spring_list[k], spring_list[k + 1]
                dp_k = dp_row[k]
            else:
                s0, s1 = spring[k], spring[k + 1]
                dp_k = dp_noise[:, k]
            if coupled:
                if c_std > 0.0:
                    dc_k = dc_row[k] if scalar else dc_noise[:, k]
                else:
                    dc_k = 0.0
                f0z = p * inv_mass
                f0p = s0 * z - coupling * charge - gamma_p * p
                f0q = flux * inv_l
                f0f = -inv_c * charge - coupling * z
                if series:
                    f0f = f0f - gamma_c * flux
                    zs = z + dt * f0z
                    ps = p + dt * f0p + dp_k
                    qs = charge + dt * f0q
                    fs = flux + dt * f0f + dc_k
                else:
                    f0q = f0q - gamma_c * charge
                    zs = z + dt * f0z
                    ps = p + dt * f0p + dp_k
                    qs = charge + dt * f0q + dc_k
                    fs = flux + dt * f0f
                f1z = ps * inv_mass
                f1p = s1 * zs - coupling * qs - gamma_p * ps
                f1q = fs * inv_l
                f1f = -inv_c * qs - coupling * zs
                if series:
                    f1f = f1f - gamma_c * fs
                    flux = flux + half_dt * (f0f + f1f) + dc_k
                    charge = charge + half_dt * (f0q + f1q)
                else:
                    f1q = f1q - gamma_c * qs
                    charge = charge + half_dt * (f0q + f1q) + dc_k
                    flux = flux + half_dt * (f0f + f1f)
                z = z + half_dt * (f0z + f1z)
                p = p + half_dt * (f0p + f1p) + dp_k
            else:
                f0z = p * inv_mass
                f0p = s0 * z - gamma_p * p
                zs = z + dt * f0z
                ps = p + dt * f0p + dp_k
                f1p = s1 * zs - gamma_p * ps
                z = z + half_dt * (f0z + ps * inv_mass)
                p = p + half_dt * (f0p + f1p) + dp_k
            step += 1
            if step % decim == 0:
                record(step // decim)

        finite = (math.isfinite(z) and math.isfinite(p)) if scalar else \
            (np.all(np.isfinite(z)) and np.all(np.isfinite(p)))
        if not finite:
            raise NumericalInstabilityError(
                f"non-finite particle state after step {step} "
                f"(t = {step * dt:.6g} s)")
        if coupled:
            finite_c = (math.isfinite(charge) and math.isfinite(flux)) if scalar \
                else (np.all(np.isfinite(charge)) and np.all(np.isfinite(flux)))
            if not finite_c:
                raise NumericalInstabilityError(
                    f"non-finite circuit state after step {step} "
                    f"(t = {step * dt:.6g} s)")

    times = np.arange(n_out) * (dt * decim)
    gamma_total = gamma_p if not coupled else gamma_p + system.derived.gamma_res
    snapshot = _snapshot(system, plan, dt)
    trajectories = []
    for i, seed in enumerate(seeds):
        trajectories.append(Trajectory(
            times=times.copy(), z=out_z[i].copy(), v=out_v[i].copy(),
            circuit_charge=out_q[i].copy() if coupled else None,
            circuit_flux=out_f[i].copy() if coupled else None,
            seed=seed, dt=dt, decimation=decim, mass=mass,
            omega_z=system.derived.omega_z, omega_drive=omega_d,
            gamma_total=gamma_total, config=dict(snapshot, seed=seed),
        ))
    return trajectories


def integrate(plan: SimPlan, system: System, seed: int) -> Trajectory:
    """Integrate a single trajectory; bit-reproducible for a fixed seed."""
    return integrate_ensemble(plan, system, [seed])[0]


def write_trajectory(trajectory: Trajectory, path) -> None:
    """Write a trajectory as delimited text: '#' metadata header with the
    flattened config snapshot, then a header row and full-precision columns
    t,z,v[,Q,Phi] in SI units."""
    coupled = trajectory.is_coupled
    with open(path, "w") as handle:
        handle.write("# levelec trajectory\n")
        handle.write(f"# seed {trajectory.seed}\n")
        handle.write(f"# dt {trajectory.dt!r}\n")
        handle.write(f"# decimation {trajectory.decimation}\n")
        handle.write(f"# mass {trajectory.mass!r}\n")
        handle.write(f"# omega_z {trajectory.omega_z!r}\n")
        handle.write(f"# omega_drive {trajectory.omega_drive!r}\n")
        handle.write(f"# gamma_total {trajectory.gamma_total!r}\n")
        for key, value in sorted(_flatten(trajectory.config).items()):
            handle.write(f"# cfg {key} {value!r}\n")
        handle.write("t,z,v,Q,Phi\n" if coupled else "t,z,v\n")
        for idx in range(len(trajectory)):
            row = [repr(float(trajectory.times[idx])),
                   repr(float(trajectory.z[idx])),
                   repr(float(trajectory.v[idx]))]
            if coupled:
                row.append(repr(float(trajectory.circuit_charge[idx])))
                row.append(repr(float(trajectory.circuit_flux[idx])))
            handle.write(",".join(row) + "\n")


def read_trajectory(path) -> Trajectory:
    """Read back a trajectory written by :func:`write_trajectory`."""
    meta: dict[str, str] = {}
    cfg_flat: dict[str, str] = {}
    rows = []
    header = None
    with open(path) as handle:
        for line in handle:
            line = line.rstrip("\n")
            if line.startswith("# cfg "):
                _, _, key, value = line.split(" ", 3)
                cfg_flat[key] = value
            elif line.startswith("# "):
                parts = line[2:].split(" ", 1)
                if len(parts) == 2:
                    meta[parts[0]] = parts[1]
            elif header is None:
                header = line.split(",")
            else:
                rows.append([float(v) for v in line.split(",")])
    data = np.array(rows)
    coupled = header is not None and len(header) == 5
    import ast

    config = {}
    for key, raw in cfg_flat.items():
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        try:
            node[parts[-1]] = ast.literal_eval(raw)
        except (ValueError, SyntaxError):
            node[parts[-1]] = raw
    return Trajectory(
        times=data[:, 0], z=data[:, 1], v=data[:, 2],
        circuit_charge=data[:, 3] if coupled else None,
        circuit_flux=data[:, 4] if coupled else None,
        seed=int(meta["seed"]), dt=float(meta["dt"]),
        decimation=int(meta["decimation"]), mass=float(meta["mass"]),
        omega_z=float(meta["omega_z"]), omega_drive=float(meta["omega_drive"]),
        gamma_total=float(meta["gamma_total"]), config=config,
    )


def _flatten(tree: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in tree.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, dotted + "."))
        else:
            flat[dotted] = value
    return flat
