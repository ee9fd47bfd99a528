"""Gaussian-moment dynamics of the particle-circuit system.

The thermalization of the coupled quantum state is governed by a completely
positive master equation whose Hamiltonian is quadratic and whose jump
operator is linear in the canonical coordinates (z, p, Q, Phi).  First and
second moments therefore close on themselves: the means follow the classical
damped equations and the covariance obeys

    dSigma/dt = A Sigma + Sigma A^T + D.

The drift A combines the Hamiltonian flow (harmonic trapping only) with the
circuit friction Gamma acting on the flux; the anti-commutator term of the
master equation contributes exactly the drift that cancels the jump
operator's symmetric damping on the charge, reproducing the classical
friction.  The diffusion D carries the flux diffusion 2 Gamma L k_B T_R and,
with ``quantum_diffusion``, the exact jump-operator charge diffusion
Gamma hbar^2 / (8 L k_B T_R), the term dropped in the high-temperature limit.

Only the series circuit is modeled here; no jump operator is available for
the parallel topology.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import Boltzmann as K_B, hbar as HBAR
from scipy.linalg import expm

from levelec.core import (
    CircuitTopology,
    InvalidParameterError,
    ParticleSpec,
    ResolvedCircuit,
    _require_positive,
)

HEISENBERG_TOL = 1e-9


class UnsupportedPotentialError(InvalidParameterError):
    """Moment dynamics require a harmonic trapping potential."""


class NoSteadyStateError(RuntimeError):
    """The drift matrix is not Hurwitz; no stationary state exists."""


@dataclass(frozen=True)
class GaussianState:
    """Mean vector and symmetric covariance of (z, p, Q, Phi), SI units."""

    mean: np.ndarray        # shape (4,)
    covariance: np.ndarray  # shape (4, 4)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if mean.shape != (4,) or cov.shape != (4, 4):
            raise InvalidParameterError("mean must be (4,) and covariance (4, 4)")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise InvalidParameterError("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", 0.5 * (cov + cov.T))

    def symplectic_eigenvalues(self) -> np.ndarray:
        """Symplectic spectrum of the covariance; physical states satisfy
        nu >= hbar/2 for every eigenvalue.

        SI covariances mix scales across ~20 decades, so the matrix is first
        balanced with a diagonal symplectic rescaling (which leaves the
        symplectic spectrum invariant) before the eigenvalue computation.
        """
        cov = self.covariance
        scales = []
        for mode in (0, 2):
            a, b = cov[mode, mode], cov[mode + 1, mode + 1]
            scales.append((b / a) ** 0.25 if a > 0.0 and b > 0.0 else 1.0)
        balance = np.diag([scales[0], 1.0 / scales[0], scales[1], 1.0 / scales[1]])
        balanced = balance @ cov @ balance
        omega = symplectic_form()
        eigs = np.linalg.eigvals(1j * omega @ balanced)
        nus = np.sort(np.abs(eigs.real))
        return nus[2:]  # eigenvalues come in +/- pairs

    def is_physical(self, tol: float = HEISENBERG_TOL) -> bool:
        """Positive semidefinite and Heisenberg-compatible within tolerance."""
        sym_ok = np.all(np.linalg.eigvalsh(self.covariance) >= -tol * HBAR)
        heis_ok = np.all(self.symplectic_eigenvalues() >= HBAR / 2.0 - tol * HBAR)
        return bool(sym_ok and heis_ok)


def symplectic_form() -> np.ndarray:
    """Commutator matrix Omega with [x_i, x_j] = i hbar Omega_ij for
    x = (z, p, Q, Phi)."""
    omega = np.zeros((4, 4))
    omega[0, 1] = 1.0
    omega[1, 0] = -1.0
    omega[2, 3] = 1.0
    omega[3, 2] = -1.0
    return omega


def thermal_particle_state(mass: float, omega_z: float, temperature: float,
                           circuit: ResolvedCircuit) -> GaussianState:
    """Product state: particle thermal at ``temperature`` (floored at its
    ground state), circuit in its ground state."""
    _require_positive(mass=mass, omega_z=omega_z)
    cov = np.zeros((4, 4))
    cov[0, 0] = max(K_B * temperature / (mass * omega_z**2),
                    HBAR / (2.0 * mass * omega_z))
    cov[1, 1] = max(mass * K_B * temperature, HBAR * mass * omega_z / 2.0)
    cov[2, 2] = HBAR / (2.0 * circuit.inductance * circuit.omega_lc)
    cov[3, 3] = HBAR * circuit.inductance * circuit.omega_lc / 2.0
    return GaussianState(mean=np.zeros(4), covariance=cov)


def moment_generators(particle: ParticleSpec, omega_z: float,
                      circuit: ResolvedCircuit, d: float,
                      quantum_diffusion: bool = True,
                      potential: str = "harmonic") -> tuple[np.ndarray, np.ndarray]:
    """Drift and diffusion matrices of the Gaussian moment flow.

    Parameters
    ----------
    particle, circuit : the working point; series topology only.
    omega_z : harmonic trapping frequency [rad/s].
    d : endcap separation [m].
    quantum_diffusion : include the exact charge-diffusion term
        Gamma hbar^2 / (8 L k_B T_R) alongside the flux diffusion
        2 Gamma L k_B T_R.  Requires T_R > 0.
    potential : must be "harmonic"; anharmonic potentials do not close on
        first and second moments.
    """
    if potential != "harmonic":
        raise UnsupportedPotentialError(
            f"moment dynamics require a harmonic potential, got {potential!r}")
    if circuit.topology is not CircuitTopology.SERIES:
        raise InvalidParameterError(
            "no jump operator is defined for the parallel topology")
    _require_positive(omega_z=omega_z, d=d)
    mass = particle.mass
    q_c = particle.charge_coulomb
    coupling = q_c / (circuit.capacitance * d)
    gamma = circuit.damping_rate
    inductance = circuit.inductance

    drift = np.array([
        [0.0, 1.0 / mass, 0.0, 0.0],
        [-mass * omega_z**2, 0.0, -coupling, 0.0],
        [0.0, 0.0, 0.0, 1.0 / inductance],
        [-coupling, 0.0, -1.0 / circuit.capacitance, -gamma],
    ])
    diffusion = np.zeros((4, 4))
    diffusion[3, 3] = 2.0 * gamma * inductance * K_B * circuit.temperature
    if quantum_diffusion:
        if circuit.temperature <= 0.0:
            raise InvalidParameterError(
                "the jump operator is undefined at zero circuit temperature")
        diffusion[2, 2] = gamma * HBAR**2 / (8.0 * inductance * K_B
                                             * circuit.temperature)
    return drift, diffusion


def is_hurwitz(drift: np.ndarray) -> bool:
    return bool(np.all(np.linalg.eigvals(drift).real < 0.0))


def _lyapunov_solve(drift: np.ndarray, diffusion: np.ndarray) -> np.ndarray:
    """Solve A S + S A^T + D = 0 as a dense linear system on the 10
    independent entries of the symmetric S."""
    n = drift.shape[0]
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    index = {pair: k for k, pair in enumerate(pairs)}
    m = len(pairs)
    system = np.zeros((m, m))
    rhs = np.zeros(m)
    for k, (i, j) in enumerate(pairs):
        # d S_ij / dt = sum_k A_ik S_kj + A_jk S_ik + D_ij
        for l in range(n):
            system[k, index[tuple(sorted((l, j)))]] += drift[i, l]
            system[k, index[tuple(sorted((l, i)))]] += drift[j, l]
        rhs[k] = -diffusion[i, j]
    solution = np.linalg.solve(system, rhs)
    cov = np.zeros((n, n))
    for (i, j), k in index.items():
        cov[i, j] = cov[j, i] = solution[k]
    return cov


def steady_state(drift: np.ndarray, diffusion: np.ndarray) -> GaussianState:
    """Stationary Gaussian state of the moment flow.

    Raises
    ------
    NoSteadyStateError
        If the drift matrix is not Hurwitz.
    """
    if not is_hurwitz(drift):
        raise NoSteadyStateError(
            "drift matrix has eigenvalues with non-negative real part; "
            "the moment flow has no stationary state")
    cov = _lyapunov_solve(drift, diffusion)
    return GaussianState(mean=np.zeros(4), covariance=cov)


def propagate(state: GaussianState, drift: np.ndarray, diffusion: np.ndarray,
              t: float) -> GaussianState:
    """Propagate mean and covariance for a time ``t``.

    Means evolve as exp(A t) <x>; the covariance uses the block-exponential
    of [[A, D], [0, -A^T]], which yields the exact integral
    int_0^t exp(A s) D exp(A^T s) ds without time stepping.
    """
    if t < 0.0:
        raise InvalidParameterError("t must be >= 0")
    n = drift.shape[0]
    prop = expm(drift * t)
    if np.any(diffusion):
        block = np.zeros((2 * n, 2 * n))
        block[:n, :n] = drift
        block[:n, n:] = diffusion
        block[n:, n:] = -drift.T
        exp_block = expm(block * t)
        accumulated = exp_block[:n, n:] @ prop.T
    else:
        accumulated = np.zeros_like(drift)
    mean = prop @ state.mean
    cov = prop @ state.covariance @ prop.T + accumulated
    return GaussianState(mean=mean, covariance=0.5 * (cov + cov.T))


def evolve(state: GaussianState, drift: np.ndarray, diffusion: np.ndarray,
           times) -> list[GaussianState]:
    """States at the requested times (each propagated from the start state)."""
    return [propagate(state, drift, diffusion, float(t)) for t in times]


def occupancy(state: GaussianState, omega_z: float, mass: float) -> float:
    """Mean phonon number of the particle block,
    n = E / (hbar omega_z) - 1/2 with E = S_pp / 2M + M omega_z^2 S_zz / 2."""
    _require_positive(omega_z=omega_z, mass=mass)
    cov = state.covariance
    energy = cov[1, 1] / (2.0 * mass) + 0.5 * mass * omega_z**2 * cov[0, 0]
    return energy / (HBAR * omega_z) - 0.5


def bose_einstein_occupancy(omega_z: float, temperature: float) -> float:
    """Thermal reference occupancy 1 / (exp(hbar w / k_B T) - 1)."""
    _require_positive(omega_z=omega_z)
    if temperature <= 0.0:
        return 0.0
    return 1.0 / math.expm1(HBAR * omega_z / (K_B * temperature))
