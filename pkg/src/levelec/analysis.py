"""Trajectory analysis: spectra, secular temperature, damping-rate fits and
peak readout signals.

Temperatures are secular temperatures: the velocity is band-passed around the
secular frequency to reject micromotion (which doubles the raw kinetic energy
of the driven motion), and the band-passed variance is rescaled by the
fraction of a damped-oscillator velocity spectrum that falls inside the band.
Without that rescaling the estimate would be biased low whenever the damping
rate is comparable to the secular frequency, which is the normal operating
regime for strong resistive cooling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import Boltzmann as K_B
from scipy.integrate import quad
from scipy.optimize import curve_fit
from scipy.signal import welch

from levelec.core import InvalidParameterError, ParticleSpec, TrapConfig, _require_positive
from levelec.dynamics import Trajectory

# Default band-pass around the secular line: total width omega_z / 2, which
# keeps the drive sidebands far outside the band at every reference
# parameter set (drive frequency >> secular frequency).
BAND_HALF_WIDTH_FRACTION = 0.25
DEFAULT_BURN_IN_RATE_MULTIPLE = 3.0


@dataclass
class Spectrum:
    """One-sided averaged-periodogram power spectral density."""

    frequencies: np.ndarray   # Hz
    psd: np.ndarray           # x^2 / Hz
    window: str
    segment_length: int
    segment_count: int

    @property
    def df(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])

    @property
    def peak_frequency(self) -> float:
        """Frequency of the largest PSD bin [Hz]."""
        return float(self.frequencies[np.argmax(self.psd)])

    def power(self, f_lo: float = 0.0, f_hi: float = np.inf) -> float:
        """Integrated power in [f_lo, f_hi] [x^2]."""
        mask = (self.frequencies >= f_lo) & (self.frequencies <= f_hi)
        return float(np.sum(self.psd[mask]) * self.df)


def _resolve_series(data, sample_rate, field):
    if isinstance(data, Trajectory):
        x = getattr(data, field if field != "position" else "z")
        return np.asarray(x, dtype=float), data.sample_rate
    if sample_rate is None:
        raise InvalidParameterError("sample_rate is required for raw arrays")
    return np.asarray(data, dtype=float), float(sample_rate)


def estimate_psd(data, segment_length: int | None = None, overlap: float = 0.5,
                 *, sample_rate: float | None = None, field: str = "z") -> Spectrum:
    """Hann-windowed averaged-periodogram PSD, one-sided, density-normalized
    (the PSD integrates to the time-domain variance).

    ``data`` is a :class:`Trajectory` (``field`` selects ``z`` or ``v``) or a
    raw uniformly-sampled array with an explicit ``sample_rate``.

    Raises
    ------
    InvalidParameterError
        If the series is shorter than two segments.
    """
    x, fs = _resolve_series(data, sample_rate, field)
    if segment_length is None:
        segment_length = max(256, 2 ** int(math.log2(max(len(x) // 8, 2))))
        segment_length = min(segment_length, len(x) // 2)
    if not 0.0 <= overlap < 1.0:
        raise InvalidParameterError(f"overlap must be in [0, 1), got {overlap!r}")
    if len(x) < 2 * segment_length:
        raise InvalidParameterError(
            f"series of {len(x)} samples is shorter than two segments of "
            f"{segment_length}")
    noverlap = int(overlap * segment_length)
    freqs, psd = welch(x, fs=fs, window="hann", nperseg=segment_length,
                       noverlap=noverlap, detrend="constant",
                       scaling="density", return_onesided=True)
    hop = segment_length - noverlap
    n_segments = 1 + (len(x) - segment_length) // hop
    return Spectrum(frequencies=freqs, psd=psd, window="hann",
                    segment_length=segment_length, segment_count=n_segments)


def bandpass(x: np.ndarray, sample_rate: float, lo: float, hi: float) -> np.ndarray:
    """Brick-wall FFT band-pass; ``lo``/``hi`` are angular frequencies [rad/s]."""
    spec = np.fft.rfft(x)
    freqs = 2.0 * math.pi * np.fft.rfftfreq(len(x), 1.0 / sample_rate)
    spec[(freqs < lo) | (freqs > hi)] = 0.0
    return np.fft.irfft(spec, n=len(x))


def model_velocity_autocovariance(tau, omega_z: float, gamma: float):
    """Normalized stationary velocity autocovariance of a damped oscillator
    (``omega_z = 0`` gives the free Ornstein-Uhlenbeck velocity)."""
    tau = np.asarray(tau, dtype=float)
    disc = omega_z**2 - 0.25 * gamma**2
    if disc > 0.0:
        w = math.sqrt(disc)
        return np.exp(-0.5 * gamma * tau) * (np.cos(w * tau)
                                             - (gamma / (2.0 * w)) * np.sin(w * tau))
    if disc < 0.0:
        s = math.sqrt(-disc)
        # write cosh/sinh via exponentials to stay finite for large tau
        decay_slow = np.exp(-(0.5 * gamma - s) * tau)
        decay_fast = np.exp(-(0.5 * gamma + s) * tau)
        a = 0.5 * (1.0 - gamma / (2.0 * s))
        b = 0.5 * (1.0 + gamma / (2.0 * s))
        return b * decay_fast + a * decay_slow
    return np.exp(-0.5 * gamma * tau) * (1.0 - 0.5 * gamma * tau)


def band_capture_fraction(omega_z: float, gamma: float,
                          band: tuple[float, float],
                          n_samples: int | None = None,
                          sample_spacing: float | None = None) -> float:
    """Fraction of the damped-oscillator velocity variance inside ``band``.

    The stationary velocity spectrum of an oscillator with resonance
    ``omega_z`` (0 for a free particle) and momentum damping ``gamma`` is
    S_v(w) ~ w^2 / ((w^2 - wz^2)^2 + g^2 w^2), which integrates to
    pi / (2 g) over w >= 0.

    With ``n_samples`` and ``sample_spacing`` given, the fraction is instead
    the exact expectation of a brick-wall DFT filter applied to a finite
    record: the model autocovariance is weighted by the triangular lag window
    of the record, which accounts for truncation, sampling and the discrete
    frequency grid.  Records only a few damping times long would otherwise
    bias the estimate substantially.
    """
    lo, hi = band
    if not math.isfinite(hi) and lo <= 0.0:
        return 1.0
    if gamma <= 0.0:
        return 1.0 if lo <= omega_z <= hi else 0.0

    if n_samples is not None:
        if sample_spacing is None:
            raise InvalidParameterError("sample_spacing required with n_samples")
        lags = np.arange(n_samples) * sample_spacing
        c = model_velocity_autocovariance(lags, omega_z, gamma) \
            * (1.0 - np.arange(n_samples) / n_samples)
        expected_periodogram = 2.0 * np.real(np.fft.fft(c)) - c[0]
        expected_periodogram = np.clip(expected_periodogram, 0.0, None)
        omega_grid = 2.0 * math.pi * np.fft.fftfreq(n_samples, sample_spacing)
        in_band = (np.abs(omega_grid) >= lo) & (np.abs(omega_grid) <= hi)
        return float(expected_periodogram[in_band].sum() / n_samples)

    def spectrum(w):
        return w * w / ((w * w - omega_z**2) ** 2 + (gamma * w) ** 2)

    if not math.isfinite(hi):
        total = math.pi / (2.0 * gamma)
        low_part, _ = quad(spectrum, 0.0, lo, limit=400,
                           points=[omega_z] if 0.0 < omega_z < lo else None)
        return 1.0 - low_part / total
    part, _ = quad(spectrum, lo, hi, limit=400,
                   points=[omega_z] if lo < omega_z < hi else None)
    return part / (math.pi / (2.0 * gamma))


@dataclass
class TemperatureEstimate:
    temperature: float     # K
    stderr: float          # K, from block averaging
    kappa: float           # in-band fraction used for the rescaling
    n_blocks: int
    flagged: bool          # too little steady-state data; stderr widened

    def __float__(self):
        return self.temperature


def estimate_temperature(trajectory: Trajectory, omega_z: float | None = None,
                         *, gamma: float | None = None,
                         band: tuple[float, float] | None = None,
                         burn_in: float | None = None) -> TemperatureEstimate:
    """Secular centre-of-mass temperature, T = M <v_f^2> / (k_B kappa).

    The velocity is band-passed around ``omega_z`` (default band: total width
    omega_z / 2) after discarding a burn-in of 3 / gamma, and the in-band
    variance is divided by the model capture fraction ``kappa`` so the
    estimate is unbiased at any damping.  ``omega_z`` and ``gamma`` default
    to the trajectory metadata.

    When fewer than ~10 damping times or 8 averaging blocks remain, the
    estimate is flagged and the quoted error is doubled.
    """
    omega_z = trajectory.omega_z if omega_z is None else omega_z
    gamma = trajectory.gamma_total if gamma is None else gamma
    if band is None:
        band = (omega_z * (1.0 - BAND_HALF_WIDTH_FRACTION),
                omega_z * (1.0 + BAND_HALF_WIDTH_FRACTION))
    if burn_in is None:
        burn_in = DEFAULT_BURN_IN_RATE_MULTIPLE / gamma if gamma > 0.0 else 0.0
    keep = trajectory.times >= burn_in
    v = trajectory.v[keep]
    if len(v) < 16:
        raise InvalidParameterError(
            f"only {len(v)} steady-state samples left after a burn-in of "
            f"{burn_in:.3g} s")
    fs = trajectory.sample_rate
    lo, hi = band
    if lo <= 0.0 and not math.isfinite(hi):
        v_f = v - v.mean()
        kappa = 1.0
    else:
        v_f = bandpass(v, fs, lo, hi)
        kappa = band_capture_fraction(omega_z, gamma, band,
                                      n_samples=len(v), sample_spacing=1.0 / fs)
    power = v_f**2
    temperature = trajectory.mass * float(power.mean()) / (K_B * kappa)

    n_blocks = min(12, len(power) // 64) or 1
    blocks = np.array_split(power, n_blocks)
    block_means = np.array([b.mean() for b in blocks])
    if n_blocks > 1:
        stderr = (trajectory.mass / (K_B * kappa)
                  * block_means.std(ddof=1) / math.sqrt(n_blocks))
    else:
        stderr = temperature
    flagged = n_blocks < 8 or (gamma > 0.0 and (trajectory.times[-1] - burn_in) * gamma < 10.0)
    if flagged:
        stderr *= 2.0
    return TemperatureEstimate(temperature=temperature, stderr=float(stderr),
                               kappa=kappa, n_blocks=n_blocks, flagged=flagged)


def ensemble_temperature(trajectories, **kwargs) -> TemperatureEstimate:
    """Combine per-trajectory estimates; the error is the spread of the
    ensemble members divided by sqrt(N)."""
    estimates = [estimate_temperature(t, **kwargs) for t in trajectories]
    values = np.array([e.temperature for e in estimates])
    n = len(values)
    stderr = values.std(ddof=1) / math.sqrt(n) if n > 1 else estimates[0].stderr
    return TemperatureEstimate(
        temperature=float(values.mean()), stderr=float(stderr),
        kappa=estimates[0].kappa, n_blocks=n,
        flagged=any(e.flagged for e in estimates))


def energy_envelope(trajectory: Trajectory, omega_z: float | None = None,
                    window: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Mechanical energy M (v^2 + wz^2 z^2) / 2 averaged over time windows.

    The default window is one drive period, which averages micromotion down
    to a constant multiplicative factor, so the result is proportional to the
    secular energy envelope and directly usable for decay-rate fits.  (An
    FFT low-pass would be wrong here: transient envelopes are not periodic
    and circular filtering rings at the record edges.)
    """
    omega_z = trajectory.omega_z if omega_z is None else omega_z
    if window is None:
        window = 2.0 * math.pi / trajectory.omega_drive
    energy = 0.5 * trajectory.mass * (trajectory.v**2 + omega_z**2 * trajectory.z**2)
    return _window_average(trajectory.times, energy, window)


@dataclass
class DampingFit:
    rate: float         # 1/s
    offset: float       # K-equivalent energy floor (0 for a pure exponential fit)
    residual: float     # rms relative misfit of the envelope
    flagged: bool       # envelope not a decaying exponential beyond noise


def _window_average(times, values, window):
    n_per = max(1, int(round(window / (times[1] - times[0]))))
    n_bins = len(values) // n_per
    if n_bins < 4:
        raise InvalidParameterError(
            f"trajectory too short for envelope windows of {window:.3g} s")
    trimmed = values[:n_bins * n_per].reshape(n_bins, n_per)
    t_trimmed = times[:n_bins * n_per].reshape(n_bins, n_per)
    return t_trimmed.mean(axis=1), trimmed.mean(axis=1)


def fit_damping_rate(trajectory_or_ensemble, omega_z: float | None = None,
                     *, with_offset: bool = False,
                     window: float | None = None) -> DampingFit:
    """Least-squares exponential fit to the secular energy envelope.

    Ensembles are envelope-averaged before fitting; random initial phases
    then cancel the coherent energy oscillation that a single heavily-damped
    trajectory carries.  With ``with_offset`` the model a exp(-r t) + c is
    fitted, which handles decay toward a thermal floor; otherwise the fit is
    linear in log-energy.  Results are invariant under amplitude rescaling
    of the trajectory.

    The fit is flagged when the envelope is not decaying or the relative
    misfit is large.
    """
    if isinstance(trajectory_or_ensemble, Trajectory):
        members = [trajectory_or_ensemble]
    else:
        members = list(trajectory_or_ensemble)
    omega_z = members[0].omega_z if omega_z is None else omega_z
    if window is None:
        span = members[0].times[-1] - members[0].times[0]
        window = min(2.0 * math.pi / members[0].omega_drive, span / 16.0)
    t_env, e_env = energy_envelope(members[0], omega_z, window)
    for traj in members[1:]:
        e_env = e_env + energy_envelope(traj, omega_z, window)[1]
    e_env = e_env / len(members)
    scale = e_env[0]
    if scale <= 0.0:
        raise InvalidParameterError("zero initial envelope energy")
    e_norm = e_env / scale

    if with_offset:
        floor = float(np.median(e_norm[-max(2, len(e_norm) // 8):]))
        amp0 = max(e_norm[0] - floor, 1e-9)
        span = t_env[-1] - t_env[0]
        p0 = (amp0, 2.0 / span, floor)
        popt, _ = curve_fit(
            lambda t, a, r, c: a * np.exp(-r * t) + c,
            t_env, e_norm, p0=p0,
            bounds=([0.0, 0.0, 0.0], [np.inf, np.inf, np.inf]),
            maxfev=20000)
        amp, rate, offset = popt
        model = amp * np.exp(-rate * t_env) + offset
        residual = float(np.sqrt(np.mean((e_norm - model) ** 2)) / e_norm.mean())
        flagged = rate <= 0.0 or residual > 0.5 or amp < 2.0 * offset
        return DampingFit(rate=float(rate), offset=float(offset * scale),
                          residual=residual, flagged=flagged)

    log_e = np.log(np.clip(e_norm, 1e-300, None))
    slope, intercept = np.polyfit(t_env, log_e, 1)
    model = slope * t_env + intercept
    residual = float(np.sqrt(np.mean((log_e - model) ** 2)))
    flagged = slope >= 0.0 or residual > 0.5
    return DampingFit(rate=float(-slope), offset=0.0, residual=residual,
                      flagged=flagged)


def peak_current(particle: ParticleSpec, trap: TrapConfig, t_cm: float) -> float:
    """Peak induced current (q eta / d) sqrt(k_B T_cm / M) at the
    equipartition velocity."""
    if t_cm < 0.0:
        raise InvalidParameterError(f"t_cm must be >= 0, got {t_cm!r}")
    v_max = math.sqrt(K_B * t_cm / particle.mass)
    return abs(particle.charge_coulomb) * trap.eta / trap.d * v_max


def peak_voltage(particle: ParticleSpec, trap: TrapConfig, t_cm: float,
                 r_eff: float) -> float:
    """Peak readout voltage I_max R_eff."""
    _require_positive(r_eff=r_eff)
    return peak_current(particle, trap, t_cm) * r_eff
