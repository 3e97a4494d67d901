"""Output quadrature noise spectra of the feedback-controlled cavity.

Shot noise is 1/2 in this normalization; ``to_decibels`` reports relative to
that level, so negative dB means squeezing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .model import (MechanicalMode, NoiseModel, SteadyState, SystemParams,
                    VACUUM_NOISE)
from .response import FeedbackLaw, lambda_G, lambda_g, transfer_coefficients

_RESONANT_TOL = 1e-9  # |Delta| / kappa below which the fast path applies


def thermal_coth(omega, temperature: float, hbar: float, k_B: float) -> np.ndarray:
    """coth(hbar omega / 2 k_B T), regularized near omega = 0; 1 at T = 0."""
    omega = np.asarray(omega, dtype=float)
    if temperature == 0.0:
        return np.sign(omega) + (omega == 0.0)  # coth(+inf) with odd parity
    x = hbar * omega / (2.0 * k_B * temperature)
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, x)
    out = np.where(small,
                   np.where(x == 0.0, 0.0, 1.0 / np.where(x == 0.0, 1.0, x) + x / 3.0),
                   1.0 / np.tanh(safe))
    return out


def quadrature_spectra(params: SystemParams, steady: SteadyState,
                       feedback: FeedbackLaw, noise: NoiseModel, omega):
    """(S_X, S_Y, S_XY) from the general transfer-coefficient expressions."""
    omega_in = np.asarray(omega, dtype=float)
    resp = transfer_coefficients(params, steady, feedback, omega_in)
    s, m = resp.sigma, resp.mu

    SaX = noise.S_a_X(omega_in)
    SaY = noise.S_a_Y(omega_in)
    SaXY = noise.S_a_XY(omega_in)
    SbX = noise.S_b_X(omega_in)
    SbY = noise.S_b_Y(omega_in)
    SbXY = noise.S_b_XY(omega_in)
    Svt = noise.S_v_theta(omega_in)

    coth = thermal_coth(omega_in, params.bath.temperature_T,
                        params.constants.hbar, params.constants.k_B)
    therm = coth * resp.lambda_G.imag

    S_X = (np.abs(s[0])**2 * SaX + np.abs(s[1])**2 * SaY
           + 2.0 * (s[0] * np.conj(s[1])).real * SaXY
           + np.abs(s[2])**2 * SbX + np.abs(s[3])**2 * SbY
           + 2.0 * (s[2] * np.conj(s[3])).real * SbXY
           + np.abs(s[4])**2 * Svt + np.abs(s[5])**2 * therm)
    S_Y = (np.abs(m[0])**2 * SaX + np.abs(m[1])**2 * SaY
           + 2.0 * (m[0] * np.conj(m[1])).real * SaXY
           + np.abs(m[2])**2 * SbX + np.abs(m[3])**2 * SbY
           + 2.0 * (m[2] * np.conj(m[3])).real * SbXY
           + np.abs(m[4])**2 * Svt + np.abs(m[5])**2 * therm)
    S_XY = ((s[0] * np.conj(m[0])).real * SaX + (s[1] * np.conj(m[1])).real * SaY
            + (s[0] * np.conj(m[1]) + s[1] * np.conj(m[0])).real * SaXY
            + (s[2] * np.conj(m[2])).real * SbX + (s[3] * np.conj(m[3])).real * SbY
            + (s[2] * np.conj(m[3]) + s[3] * np.conj(m[2])).real * SbXY
            + (s[4] * np.conj(m[4])).real * Svt + (s[5] * np.conj(m[5])).real * therm)
    return S_X, S_Y, S_XY


@dataclass(frozen=True)
class ResonantSpectra:
    """Resonant (Delta = 0, vacuum input) closed-form spectra.

    ``r_terms`` holds the four contributions to S_r separately:
    (beam-splitter, thermal, imaginary-response, feedback-injection).
    """

    omega: np.ndarray
    S_XY: np.ndarray
    S_r: np.ndarray
    S_Y: np.ndarray
    r_terms: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]

    @property
    def S_X(self) -> np.ndarray:
        return np.full_like(np.asarray(self.omega, dtype=float), 0.5)


def resonant_fast_path(params: SystemParams, steady: SteadyState,
                       feedback: FeedbackLaw, omega) -> ResonantSpectra:
    """Closed-form S_XY, S_r and S_Y for the resonantly driven cavity."""
    kappa = params.cavity.kappa
    if abs(steady.effective_detuning_Delta) > _RESONANT_TOL * kappa:
        raise ParameterError(
            "resonant fast path requires zero effective detuning "
            f"(got Delta = {steady.effective_detuning_Delta:g} rad/s)")

    omega_in = np.asarray(omega, dtype=float)
    det = params.detection
    t = det.bs_transmission_t
    r = det.bs_reflection_r
    se = np.sqrt(det.homodyne_efficiency_eta)
    sth = np.sin(det.homodyne_phase_theta)
    cth = np.cos(det.homodyne_phase_theta)

    lG = lambda_G(steady, params.modes, omega_in)
    lg = lambda_g(steady, params.modes, feedback, omega_in)
    B = kappa - 1j * omega_in + r * se * sth * lg
    kk = kappa**2 + omega_in**2

    core = lG / ((kappa + 1j * omega_in) * B)
    S_XY = kappa * t**2 * core.real

    coth = thermal_coth(omega_in, params.bath.temperature_T,
                        params.constants.hbar, params.constants.k_B)
    term_bs = (2.0 * r**2 / t**2) * S_XY**2
    term_th = 2.0 * kappa * t**2 * lG.imag * coth / np.abs(B)**2
    term_im = 2.0 * kappa**2 * t**2 * core.imag**2
    term_fb = (t**2 / 2.0) * (np.abs(lg)**2 * kk
                              - 4.0 * kappa * r * se * cth
                              * (np.conj(lG) * lg * (kappa + 1j * omega_in)).real) \
        / (kk * np.abs(B)**2)
    S_r = term_bs + term_th + term_im + term_fb
    S_Y = 2.0 * S_XY**2 + 0.5 + S_r
    return ResonantSpectra(omega=omega_in, S_XY=S_XY, S_r=S_r, S_Y=S_Y,
                           r_terms=(term_bs, term_th, term_im, term_fb))


def phase_spectrum(S_X, S_Y, S_XY, phi):
    """Noise spectrum of the quadrature at phase phi."""
    S_X = np.asarray(S_X, dtype=float)
    S_Y = np.asarray(S_Y, dtype=float)
    S_XY = np.asarray(S_XY, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return (0.5 * (S_X + S_Y) + 0.5 * (S_X - S_Y) * np.cos(2.0 * phi)
            + S_XY * np.sin(2.0 * phi))


def optimal_spectrum(S_X, S_Y, S_XY):
    """(S_opt, phi_opt): minimum of the phase spectrum and its minimizer.

    S_opt uses the rationalized form to avoid catastrophic cancellation when
    the cross spectrum dominates; phi_opt is resolved to the actual minimizer
    quadrant (phi_opt = 0 for isotropic noise).
    """
    S_X = np.asarray(S_X, dtype=float)
    S_Y = np.asarray(S_Y, dtype=float)
    S_XY = np.asarray(S_XY, dtype=float)
    a = 0.5 * (S_X - S_Y)
    b = S_XY
    amp = np.hypot(a, b)
    S_opt = np.where(
        amp == 0.0,
        0.5 * (S_X + S_Y),
        2.0 * (S_X * S_Y - S_XY**2) / (S_X + S_Y + 2.0 * amp))
    phi_opt = np.where(amp == 0.0, 0.0, 0.5 * np.arctan2(-b, -a))
    if np.ndim(S_X) == 0:
        return float(S_opt), float(phi_opt)
    return S_opt, phi_opt


def heisenberg_margin(S_X, S_Y, S_XY):
    """S_X S_Y - S_XY^2 - 1/4; non-negative for any physical state."""
    return np.asarray(S_X) * np.asarray(S_Y) - np.asarray(S_XY)**2 - 0.25


def squeezing_phase_window(S_XY):
    """Angular width of the phase interval with sub-shot-noise spectrum."""
    S_XY = np.asarray(S_XY, dtype=float)
    out = np.where(S_XY == 0.0, np.pi / 2.0,
                   np.arctan(np.abs(1.0 / np.where(S_XY == 0.0, 1.0, S_XY))))
    if np.ndim(S_XY) == 0:
        return float(out)
    return out


def to_decibels(S):
    """10 log10(S / (1/2)); negative values are below shot noise."""
    S = np.asarray(S, dtype=float)
    if np.any(S <= 0.0):
        raise ParameterError("spectrum must be positive for dB conversion")
    out = 10.0 * np.log10(2.0 * S)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class FrequencyGrid:
    """Ordered positive angular frequencies for spectrum evaluation."""

    points: np.ndarray
    policy: str = "log"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size == 0:
            raise ParameterError("frequency grid must be a non-empty 1-D array")
        if np.any(pts <= 0.0):
            raise ParameterError("frequency grid must exclude omega <= 0")
        if np.any(np.diff(pts) <= 0.0):
            raise ParameterError("frequency grid must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @classmethod
    def build(cls, omega_min: float, omega_max: float,
              modes: Sequence[MechanicalMode] = (),
              policy: str = "log-with-resonance-refinement",
              points_per_decade: int = 2000,
              n_points: int | None = None,
              refine_halfwidth: float = 5.0,
              refine_points: int = 41) -> "FrequencyGrid":
        """Log-spaced grid, optionally refined around mechanical resonances."""
        if omega_min <= 0 or omega_max <= omega_min:
            raise ParameterError("need 0 < omega_min < omega_max")
        if policy not in ("linear", "log", "log-with-resonance-refinement"):
            raise ParameterError(f"unknown grid policy {policy!r}")
        if policy == "linear":
            n = n_points or 2000
            base = np.linspace(omega_min, omega_max, n)
        else:
            if n_points is not None:
                n = n_points
            else:
                decades = np.log10(omega_max / omega_min)
                n = max(2, int(np.ceil(points_per_decade * max(decades, 1.0))))
            base = np.geomspace(omega_min, omega_max, n)
        pts = [base]
        if policy == "log-with-resonance-refinement":
            for m in modes:
                lo = m.omega_j - refine_halfwidth * m.gamma_j
                hi = m.omega_j + refine_halfwidth * m.gamma_j
                lo = max(lo, omega_min)
                hi = min(hi, omega_max)
                if hi > lo:
                    pts.append(np.linspace(lo, hi, refine_points))
        merged = np.unique(np.concatenate(pts))
        merged = merged[(merged >= omega_min) & (merged <= omega_max)]
        return cls(points=merged, policy=policy)


@dataclass(frozen=True)
class SpectrumTable:
    """Tabulated spectra over a frequency grid (the CLI's record set)."""

    omega: np.ndarray
    S_X: np.ndarray
    S_Y: np.ndarray
    S_XY: np.ndarray
    S_r: np.ndarray          # NaN where the resonant decomposition is undefined
    S_opt: np.ndarray
    phi_opt: np.ndarray
    heisenberg: np.ndarray


def evaluate_grid(params: SystemParams, steady: SteadyState,
                  feedback: FeedbackLaw, grid: FrequencyGrid,
                  noise: NoiseModel = VACUUM_NOISE) -> SpectrumTable:
    """Full spectrum table on a grid; resonant S_r filled in when Delta = 0."""
    omega = grid.points
    S_X, S_Y, S_XY = quadrature_spectra(params, steady, feedback, noise, omega)
    kappa = params.cavity.kappa
    if abs(steady.effective_detuning_Delta) <= _RESONANT_TOL * kappa:
        S_r = resonant_fast_path(params, steady, feedback, omega).S_r
    else:
        S_r = np.full_like(omega, np.nan)
    S_opt, phi_opt = optimal_spectrum(S_X, S_Y, S_XY)
    return SpectrumTable(omega=omega, S_X=S_X, S_Y=S_Y, S_XY=S_XY, S_r=S_r,
                         S_opt=S_opt, phi_opt=phi_opt,
                         heisenberg=heisenberg_margin(S_X, S_Y, S_XY))
