"""Dirac diagnostics: drift speeds, Zitterbewegung fits, effective constants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .discrete import SpinorField, WavepacketInit
from .errors import NoOscillation, NotBimodal
from .exact import GridWavefunction

HBAR = 1.054571817e-34  # J s


def mean_position(state) -> float:
    """Mean position in lattice steps; accepts site or grid states."""
    if isinstance(state, SpinorField):
        dens = state.site_density()
        return float(np.sum(state.sites * dens) / np.sum(dens))
    if isinstance(state, GridWavefunction):
        return state.mean_x()
    raise TypeError(f"unsupported state type {type(state).__name__}")


@dataclass(frozen=True)
class ZBFit:
    """Damped-cosine fit of a mean-position series."""

    amplitude: float
    period: float
    damping_D: float
    r_squared: float
    offset: float
    phase: float

    def envelope(self, t: float) -> float:
        """Amplitude attenuation factor (1 + (2 D t)^2)^(-1/4) at time t."""
        return float((1.0 + (2.0 * self.damping_D * t) ** 2) ** -0.25)

    def attenuation_squared_convention(self, t: float) -> float:
        """The same envelope read as (1 + Deff^2 t^2)^(-1/2)."""
        return self.envelope(t) ** 2


def _zb_model(t, x0, A, beta, omega, phase):
    return x0 + A * (1.0 + (beta * t) ** 2) ** -0.25 * np.cos(omega * t + phase)


def lockin_amplitude(t: np.ndarray, x: np.ndarray, omega: float) -> float:
    """Amplitude of the oscillation at a known angular frequency."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    xd = x - np.mean(x)
    z = np.sum(xd * np.exp(-1j * omega * t)) / len(t)
    return 2.0 * abs(z)


def fit_zitterbewegung(t: np.ndarray, x: np.ndarray, E0: float,
                       Omega: float | None = None,
                       sigma: float | None = None) -> ZBFit:
    """Least-squares fit of x(t) to a slowly damped cosine at ~2 E0.

    The envelope (1 + (beta t)^2)^(-1/4) follows the 1/sqrt(1 - i D t)
    diffusion prefactor with beta = 2 D; damping_D returns beta / 2.
    Raises NoOscillation when the series has no spectral peak above the
    noise floor, which is the expected outcome for coherence-free spinors.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if len(t) < 8:
        raise ValueError("series too short to fit")
    span = t[-1] - t[0]
    if E0 > 0 and span < 3 * np.pi / E0:
        raise ValueError("series must span at least three oscillation periods")

    xd = x - np.mean(x)
    dt = np.mean(np.diff(t))
    spectrum = np.abs(np.fft.rfft(xd)) ** 2
    spectrum[0] = 0.0
    peak_idx = int(np.argmax(spectrum))
    noise = np.median(spectrum[1:]) if len(spectrum) > 2 else 0.0
    if spectrum[peak_idx] < 20.0 * max(noise, 1e-300) or np.max(np.abs(xd)) < 1e-12:
        raise NoOscillation(
            f"no spectral peak above the noise floor (peak/median = "
            f"{spectrum[peak_idx] / max(noise, 1e-300):.1f})"
        )
    omega_guess = 2 * np.pi * peak_idx / (len(t) * dt)

    D_guess = 0.0
    if Omega is not None and sigma is not None and E0 > 0:
        D_guess = 4 * Omega**2 / (E0 * sigma**2)
    p0 = [float(np.mean(x)), float(np.max(np.abs(xd))), max(2 * D_guess, 1e-8),
          omega_guess, np.pi]
    popt, _ = curve_fit(_zb_model, t, x, p0=p0, maxfev=40000)
    x0, A, beta, omega, phase = popt
    resid = x - _zb_model(t, *popt)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((x - np.mean(x)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ZBFit(amplitude=abs(A), period=2 * np.pi / abs(omega),
                 damping_D=abs(beta) / 2.0, r_squared=r2,
                 offset=x0, phase=phase)


def zb_presence(init: WavepacketInit, model: str) -> complex:
    """Initial coherence factor whose magnitude scales the trembling motion."""
    a_p, a_m, b_p, b_m = init.weights()
    if model == "spinor2":
        return complex(np.conj(a_p) * a_m)
    if model == "spinor4_dirac":
        return complex(np.conj(a_p) * b_m + np.conj(a_m) * b_p)
    raise ValueError(f"no coherence rule for model {model!r}")


def drift_velocity(positions: np.ndarray, rho_early: np.ndarray,
                   rho_late: np.ndarray, t_early: float, t_late: float):
    """Signed speeds of the two counter-propagating packets.

    Uses sign-split first moments about the origin at the two times; the
    later snapshot must be bimodal (central density well below the peaks
    and at least a tenth of the weight on each side).
    """
    positions = np.asarray(positions, dtype=float)
    if t_late <= t_early:
        raise ValueError("need t_late > t_early")
    center = np.abs(positions) <= 2.0
    peak = float(np.max(rho_late))
    central = float(np.mean(rho_late[center])) if center.any() else 0.0
    left = positions < 0
    right = ~left
    w_left = float(np.sum(rho_late[left]) / np.sum(rho_late))
    if central > 0.5 * peak or min(w_left, 1 - w_left) < 0.10:
        raise NotBimodal(
            f"late snapshot is not bimodal (central/peak = {central / peak:.2f}, "
            f"left weight = {w_left:.2f})"
        )

    def centroids(rho):
        cl = float(np.sum(positions[left] * rho[left]) / np.sum(rho[left]))
        cr = float(np.sum(positions[right] * rho[right]) / np.sum(rho[right]))
        return cl, cr

    l1, r1 = centroids(rho_early)
    l2, r2 = centroids(rho_late)
    dt = t_late - t_early
    return (l2 - l1) / dt, (r2 - r1) / dt


def splitting_speed(times: np.ndarray, left_centroids: np.ndarray,
                    right_centroids: np.ndarray) -> float:
    """Half the fitted separation rate of the two packets.

    A least-squares line through the centroid separation over the supplied
    window gives the asymptotic drift speed of the +-v_D pair.
    """
    sep = np.asarray(right_centroids) - np.asarray(left_centroids)
    slope = np.polyfit(np.asarray(times, dtype=float), sep, 1)[0]
    return 0.5 * float(slope)


def sign_split_centroids(positions: np.ndarray, rho: np.ndarray):
    positions = np.asarray(positions, dtype=float)
    left = positions < 0
    right = ~left
    cl = float(np.sum(positions[left] * rho[left]) / np.sum(rho[left]))
    cr = float(np.sum(positions[right] * rho[right]) / np.sum(rho[right]))
    return cl, cr


@dataclass(frozen=True)
class EffectiveConstants:
    """Dirac parameters of the simulated particle, dimensionless and SI."""

    m_bar: float            # dimensionless rest mass E0 / (4 Omega^2)
    c_bar: float            # dimensionless light speed 2 |Omega|
    m_bar_over_M: float     # effective mass in units of the atom mass
    c_bar_m_per_s: float
    c_bar_over_vR: float
    v_R_m_per_s: float

    def rest_energy(self) -> float:
        """Reproduces the dimensionless mass term E0 = m_bar c_bar^2."""
        return self.m_bar * self.c_bar**2


def effective_constants(E0: float, Omega: float, atom_mass_kg: float,
                        lambda_L_m: float) -> EffectiveConstants:
    """Translate (E0, Omega) into effective mass and light speed.

    Dimensionless: m_bar = E0/(4 Omega^2), c_bar = 2 |Omega|.  Dimensioned:
    c = |Omega| (2 pi^2 hbar / (M lambda_L)) and m = (E0 / (2 pi^2 Omega^2)) M,
    with the recoil velocity v_R = hbar k_L / M as the natural speed scale.
    """
    if Omega == 0:
        raise ValueError("Omega must be nonzero")
    m_bar = E0 / (4 * Omega**2)
    c_bar = 2 * abs(Omega)
    c_dim = abs(Omega) * (2 * np.pi**2 * HBAR / (atom_mass_kg * lambda_L_m))
    m_over = E0 / (2 * np.pi**2 * Omega**2)
    k_L = 2 * np.pi / lambda_L_m
    v_R = HBAR * k_L / atom_mass_kg
    return EffectiveConstants(
        m_bar=m_bar, c_bar=c_bar,
        m_bar_over_M=m_over,
        c_bar_m_per_s=c_dim,
        c_bar_over_vR=c_dim / v_R,
        v_R_m_per_s=v_R,
    )


CESIUM_MASS_KG = 132.905451933 * 1.66053906660e-27
CESIUM_LATTICE_WAVELENGTH_M = 852.34727e-9
