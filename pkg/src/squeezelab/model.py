"""Physical parameters, derived couplings, and the semiclassical steady state.

All frequencies and rates are angular (rad/s).  The cavity resonance
``omega_c`` is approximated by the laser frequency ``omega_0`` wherever it
multiplies a coupling constant; the relative error is of order
``Delta_0/omega_0 < 1e-8`` for any configuration handled here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .constants import CODATA, PhysicalConstants
from .errors import NormalizationError, ParameterError


@dataclass(frozen=True)
class CavityParams:
    length_L: float               # m
    kappa: float                  # rad/s, amplitude decay rate
    detuning_Delta0: float        # rad/s, omega_c - omega_0
    laser_omega0: float           # rad/s

    def __post_init__(self):
        if self.length_L <= 0:
            raise ParameterError("cavity length must be positive")
        if self.kappa <= 0:
            raise ParameterError("cavity decay rate must be positive")
        if self.laser_omega0 <= 0:
            raise ParameterError("laser frequency must be positive")

    @property
    def finesse(self) -> float:
        return np.pi * CODATA.c / (2.0 * self.kappa * self.length_L)


@dataclass(frozen=True)
class DriveParams:
    input_power_Pin: float        # W

    def __post_init__(self):
        if self.input_power_Pin < 0:
            raise ParameterError("input power must be non-negative")


@dataclass(frozen=True)
class MechanicalMode:
    omega_j: float                # rad/s
    gamma_j: float                # rad/s
    mass_mj: float                # kg
    overlap_cj: float = 1.0       # dimensionless, -1 <= c_j <= 1

    def __post_init__(self):
        if self.omega_j <= 0 or self.gamma_j <= 0 or self.mass_mj <= 0:
            raise ParameterError("mode frequency, damping and mass must be positive")
        if not -1.0 <= self.overlap_cj <= 1.0:
            raise ParameterError(f"mode overlap {self.overlap_cj} outside [-1, 1]")

    @property
    def Q(self) -> float:
        return self.omega_j / self.gamma_j


@dataclass(frozen=True)
class BathParams:
    temperature_T: float          # K

    def __post_init__(self):
        if self.temperature_T < 0:
            raise ParameterError("temperature must be non-negative")


@dataclass(frozen=True)
class DetectionParams:
    bs_transmission_t: float      # amplitude transmission of the output splitter
    homodyne_efficiency_eta: float = 1.0
    homodyne_phase_theta: float = 0.0   # rad

    def __post_init__(self):
        if not 0.0 < self.bs_transmission_t <= 1.0:
            raise ParameterError("beam-splitter transmission must be in (0, 1]")
        if not 0.0 <= self.homodyne_efficiency_eta <= 1.0:
            raise ParameterError("homodyne efficiency must be in [0, 1]")

    @property
    def bs_reflection_r(self) -> float:
        return float(np.sqrt(max(0.0, 1.0 - self.bs_transmission_t**2)))


@dataclass(frozen=True)
class SystemParams:
    """Full physical configuration of the optomechanical device."""

    cavity: CavityParams
    drive: DriveParams
    modes: tuple[MechanicalMode, ...]
    bath: BathParams
    detection: DetectionParams
    constants: PhysicalConstants = CODATA

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))


def _vacuum_half(omega):
    return np.full_like(np.asarray(omega, dtype=float), 0.5)


def _zero(omega):
    return np.zeros_like(np.asarray(omega, dtype=float))


@dataclass(frozen=True)
class NoiseModel:
    """Input-noise spectral densities as functions of omega.

    Defaults describe vacuum inputs: diagonal quadrature spectra equal to
    1/2 and vanishing cross spectra, for both the cavity input ``a_in`` and
    the beam-splitter port ``b_in``, plus the detector vacuum ``v_in``.
    """

    S_a_X: Callable = _vacuum_half
    S_a_Y: Callable = _vacuum_half
    S_a_XY: Callable = _zero
    S_b_X: Callable = _vacuum_half
    S_b_Y: Callable = _vacuum_half
    S_b_XY: Callable = _zero
    S_v_theta: Callable = _vacuum_half


VACUUM_NOISE = NoiseModel()


@dataclass(frozen=True)
class SteadyState:
    """One semiclassical branch of the driven cavity."""

    alpha_s: float                      # real >= 0 by phase convention
    intensity_I: float                  # |alpha_s|^2
    effective_detuning_Delta: float     # rad/s
    q_s: np.ndarray                     # per-mode displacement (dimensionless)
    G0: np.ndarray                      # per-mode bare coupling, rad/s
    G: np.ndarray                       # per-mode effective coupling, rad/s
    branch_count: int = 1


def drive_amplitude(Pin: float, kappa: float, omega0: float,
                    constants: PhysicalConstants = CODATA) -> float:
    """Drive amplitude E = sqrt(2 Pin kappa / (hbar omega0))."""
    if kappa <= 0 or omega0 <= 0:
        raise ParameterError("kappa and omega0 must be positive")
    if Pin < 0:
        raise ParameterError("input power must be non-negative")
    return float(np.sqrt(2.0 * Pin * kappa / (constants.hbar * omega0)))


def bare_coupling(mode: MechanicalMode, cavity: CavityParams,
                  constants: PhysicalConstants = CODATA) -> float:
    """Single-mode bare optomechanical coupling (omega_0 c_j / L) sqrt(hbar / m_j omega_j)."""
    return (cavity.laser_omega0 * mode.overlap_cj / cavity.length_L
            * np.sqrt(constants.hbar / (mode.mass_mj * mode.omega_j)))


def overlap_integral(v_opt_sq: np.ndarray, u_jx: np.ndarray,
                     cell_area: float) -> float:
    """Overlap of the optical intensity profile with an axial mode shape.

    ``v_opt_sq`` must be normalized so that its grid sum times ``cell_area``
    equals one; the result is then bounded by 1 in modulus for any physical
    mode shape.
    """
    v_opt_sq = np.asarray(v_opt_sq, dtype=float)
    u_jx = np.asarray(u_jx, dtype=float)
    if v_opt_sq.shape != u_jx.shape:
        raise ParameterError(
            f"grid mismatch: {v_opt_sq.shape} vs {u_jx.shape}")
    if cell_area <= 0:
        raise ParameterError("cell area must be positive")
    c_j = float(np.sum(v_opt_sq * u_jx) * cell_area)
    if abs(c_j) > 1.0 + 1e-6:
        raise NormalizationError(
            f"overlap integral {c_j} exceeds unit modulus; check normalization")
    return c_j


def _cubic_roots(beta: float, Delta0: float, kappa: float, E: float) -> list:
    """Branches (I, Delta) of I (kappa^2 + Delta^2) = E^2, Delta = Delta0 - beta I.

    The cubic is solved for the effective detuning Delta rather than for the
    intensity: near the upper branch the subtraction ``Delta0 - beta I`` loses
    all significant digits, while the Delta-form roots stay well conditioned.
    """
    if E == 0.0:
        return [(0.0, Delta0)]
    if beta == 0.0:
        return [(E**2 / (kappa**2 + Delta0**2), Delta0)]
    # (kappa^2 + Delta^2)(Delta0 - Delta) = beta E^2, a cubic in Delta.
    coeffs = [-1.0, Delta0, -(kappa**2), kappa**2 * Delta0 - beta * E**2]
    roots = np.roots(coeffs)
    real = roots[np.abs(roots.imag) < 1e-7 * np.maximum(kappa, np.abs(roots.real))].real

    def f(d):
        return (kappa**2 + d * d) * (Delta0 - d) - beta * E**2

    def fp(d):
        return 2.0 * d * (Delta0 - d) - (kappa**2 + d * d)

    branches = []
    for d in real:
        for _ in range(20):
            slope = fp(d)
            if slope == 0.0:
                break
            step = f(d) / slope
            d = d - step
            if abs(step) <= 1e-15 * max(abs(d), 1.0):
                break
        # Recover I from the drive relation, which is well conditioned in d;
        # (Delta0 - d) / beta loses digits whenever the static shift is small.
        I = E**2 / (kappa**2 + d * d)
        if Delta0 - d >= -1e-9 * max(abs(Delta0), abs(d), kappa):
            branches.append((float(I), float(d)))
    branches.sort()
    merged: list = []
    for I, d in branches:
        if merged and abs(I - merged[-1][0]) < 1e-8 * max(I, abs(merged[-1][0])) \
                and abs(d - merged[-1][1]) < 1e-8 * max(kappa, abs(d)):
            continue
        merged.append((I, d))
    return merged if merged else [(0.0, Delta0)]


def solve_steady_state(params: SystemParams) -> list[SteadyState]:
    """All semiclassical branches, sorted by ascending intracavity intensity."""
    cav = params.cavity
    E = drive_amplitude(params.drive.input_power_Pin, cav.kappa,
                        cav.laser_omega0, params.constants)
    G0 = np.array([bare_coupling(m, cav, params.constants) for m in params.modes])
    omega = np.array([m.omega_j for m in params.modes])
    beta = float(np.sum(G0**2 / omega)) if len(params.modes) else 0.0

    pairs = _cubic_roots(beta, cav.detuning_Delta0, cav.kappa, E)
    branches = []
    for I, Delta in pairs:
        alpha = float(np.sqrt(max(I, 0.0)))
        q_s = G0 * I / omega if len(params.modes) else np.array([])
        G = G0 * alpha * np.sqrt(2.0)
        branches.append(SteadyState(
            alpha_s=alpha, intensity_I=float(I),
            effective_detuning_Delta=float(Delta),
            q_s=q_s, G0=G0, G=G, branch_count=len(pairs)))
    return branches


def steady_state_residual(branch: SteadyState, params: SystemParams) -> float:
    """Relative residual of the steady-state cubic for one branch."""
    cav = params.cavity
    E = drive_amplitude(params.drive.input_power_Pin, cav.kappa,
                        cav.laser_omega0, params.constants)
    I = branch.intensity_I
    lhs = I * (cav.kappa**2 + branch.effective_detuning_Delta**2)
    scale = max(E**2, cav.kappa**2 * max(I, 1.0))
    return abs(lhs - E**2) / scale


def detuning0_for_effective(params_Delta: float, beta: float, kappa: float,
                            E: float) -> float:
    """Bare detuning that yields a branch with the requested effective detuning."""
    I = E**2 / (kappa**2 + params_Delta**2)
    return params_Delta + beta * I


def radiation_pressure_shift_coefficient(params: SystemParams) -> float:
    """beta = sum_j G0_j^2 / omega_j, the intensity-to-detuning shift slope."""
    if not params.modes:
        return 0.0
    G0 = np.array([bare_coupling(m, params.cavity, params.constants)
                   for m in params.modes])
    omega = np.array([m.omega_j for m in params.modes])
    return float(np.sum(G0**2 / omega))


def mean_thermal_occupation(mode: MechanicalMode, bath: BathParams,
                            constants: PhysicalConstants = CODATA) -> float:
    """Bose occupation of a mode at the bath temperature (0 at T = 0)."""
    if bath.temperature_T == 0.0:
        return 0.0
    x = constants.hbar * mode.omega_j / (constants.k_B * bath.temperature_T)
    return 1.0 / np.expm1(x)


def uniform_mode_ladder(count: int, omega_min: float, omega_max: float,
                        mass: float, quality_factor: float,
                        overlap: float = 1.0) -> tuple[MechanicalMode, ...]:
    """Evenly spaced mechanical modes sharing mass, Q and overlap."""
    if count < 1:
        raise ParameterError("mode count must be at least 1")
    if count == 1:
        freqs = np.array([0.5 * (omega_min + omega_max)])
    else:
        freqs = np.linspace(omega_min, omega_max, count)
    return tuple(
        MechanicalMode(omega_j=float(w), gamma_j=float(w / quality_factor),
                       mass_mj=mass, overlap_cj=overlap)
        for w in freqs)
