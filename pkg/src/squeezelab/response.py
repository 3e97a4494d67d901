"""Frequency-domain response: susceptibilities, feedback kernels, and the
twelve transfer coefficients mapping input noises to output quadratures.

Everything here accepts a scalar or an array of angular frequencies and is
vectorized accordingly.  Internally all rates are scaled by the cavity decay
rate before assembling the coefficients, which keeps the floating-point
dynamic range modest even across high-Q mechanical resonances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ParameterError, SingularResponseError
from .model import DetectionParams, MechanicalMode, SteadyState, SystemParams

OFF = "off"
PROPORTIONAL = "proportional"
RATIONAL = "rational"


@dataclass(frozen=True)
class FeedbackLaw:
    """Per-mode feedback transfer functions g_j(omega).

    ``off``           : g_j = 0.
    ``proportional``  : g_j constant and real (``gains``, rad/s per mode).
    ``rational``      : g_j(omega) = N_j(s)/M_j(s) with s = -i*omega and real
                        ascending coefficient lists; every denominator must be
                        Hurwitz (all s-roots in the open left half plane) so
                        that the filter is causal and stable.
    """

    kind: str = OFF
    gains: np.ndarray | None = None
    numerators: tuple[tuple[float, ...], ...] | None = None
    denominators: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if self.kind not in (OFF, PROPORTIONAL, RATIONAL):
            raise ParameterError(f"unknown feedback kind {self.kind!r}")
        if self.kind == PROPORTIONAL:
            if self.gains is None:
                raise ParameterError("proportional feedback needs per-mode gains")
            object.__setattr__(self, "gains",
                               np.atleast_1d(np.asarray(self.gains, dtype=float)))
        if self.kind == RATIONAL:
            if not self.numerators or not self.denominators:
                raise ParameterError("rational feedback needs numerators and denominators")
            if len(self.numerators) != len(self.denominators):
                raise ParameterError("one numerator and one denominator per mode")
            nums = tuple(tuple(float(c) for c in n) for n in self.numerators)
            dens = tuple(tuple(float(c) for c in d) for d in self.denominators)
            object.__setattr__(self, "numerators", nums)
            object.__setattr__(self, "denominators", dens)
            for d in dens:
                arr = np.trim_zeros(np.asarray(d, dtype=float), "b")
                if arr.size == 0:
                    raise ParameterError("feedback denominator is identically zero")
                if arr.size > 1:
                    roots = np.roots(arr[::-1])
                    if np.any(roots.real >= 0.0):
                        raise ParameterError(
                            "feedback filter is not causal/stable: "
                            f"denominator root(s) {roots[roots.real >= 0]} in right half plane")

    @classmethod
    def off(cls) -> "FeedbackLaw":
        return cls(kind=OFF)

    @classmethod
    def proportional(cls, gains) -> "FeedbackLaw":
        return cls(kind=PROPORTIONAL, gains=np.asarray(gains, dtype=float))

    @classmethod
    def rational(cls, numerators, denominators) -> "FeedbackLaw":
        return cls(kind=RATIONAL,
                   numerators=tuple(tuple(n) for n in numerators),
                   denominators=tuple(tuple(d) for d in denominators))

    @property
    def n_modes(self) -> int:
        if self.kind == PROPORTIONAL:
            return len(self.gains)
        if self.kind == RATIONAL:
            return len(self.numerators)
        return 0

    def evaluate(self, j: int, omega) -> np.ndarray:
        """g_j(omega) for mode index j."""
        omega = np.asarray(omega, dtype=float)
        if self.kind == OFF:
            return np.zeros(omega.shape, dtype=complex)
        if self.kind == PROPORTIONAL:
            return np.full(omega.shape, complex(self.gains[j]))
        s = -1j * omega
        num = P.polyval(s, self.numerators[j])
        den = P.polyval(s, self.denominators[j])
        return num / den

    def filter_order(self, j: int) -> int:
        if self.kind != RATIONAL:
            return 0
        d = np.trim_zeros(np.asarray(self.denominators[j], dtype=float), "b")
        return max(0, d.size - 1)


def susceptibility(mode: MechanicalMode, omega) -> np.ndarray:
    """Unperturbed mechanical susceptibility omega_j / (omega_j^2 - omega^2 - i omega gamma_j)."""
    omega = np.asarray(omega, dtype=float)
    return mode.omega_j / (mode.omega_j**2 - omega**2 - 1j * omega * mode.gamma_j)


def _chi_matrix(modes: Sequence[MechanicalMode], omega) -> np.ndarray:
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    wj = np.array([m.omega_j for m in modes])[:, None]
    gj = np.array([m.gamma_j for m in modes])[:, None]
    return wj / (wj**2 - omega[None, :]**2 - 1j * omega[None, :] * gj)


def lambda_G(steady: SteadyState, modes: Sequence[MechanicalMode], omega) -> np.ndarray:
    """Effective mechanical susceptibility sum_j G_j^2 chi_j(omega)."""
    omega_in = np.asarray(omega, dtype=float)
    if not len(modes):
        return np.zeros(omega_in.shape, dtype=complex)
    chi = _chi_matrix(modes, omega_in)
    out = np.sum(steady.G[:, None] ** 2 * chi, axis=0)
    return out.reshape(omega_in.shape)


def lambda_g(steady: SteadyState, modes: Sequence[MechanicalMode],
             feedback: FeedbackLaw, omega) -> np.ndarray:
    """Feedback-weighted susceptibility sum_j G_j chi_j(omega) g_j(omega)."""
    omega_in = np.asarray(omega, dtype=float)
    if feedback.kind == OFF or not len(modes):
        return np.zeros(omega_in.shape, dtype=complex)
    flat = np.atleast_1d(omega_in)
    chi = _chi_matrix(modes, flat)
    g = np.stack([feedback.evaluate(j, flat) for j in range(len(modes))])
    out = np.sum(steady.G[:, None] * chi * g, axis=0)
    return out.reshape(omega_in.shape)


@dataclass(frozen=True)
class ResponseAt:
    """All response functions and transfer coefficients at given frequencies.

    ``sigma`` and ``mu`` are arrays of shape (6,) + omega.shape; ``sigma[5]``
    and ``mu[5]`` carry the sqrt(2 kappa) factor of the thermal channel and
    therefore have units of s**0.5.
    """

    omega: np.ndarray
    chi: np.ndarray              # (n_modes,) + omega.shape
    lambda_G: np.ndarray
    lambda_g: np.ndarray
    D: np.ndarray
    sigma: np.ndarray
    mu: np.ndarray
    kappa: float
    Delta: float
    rse_sin: float               # r sqrt(eta) sin(theta)
    rse_cos: float               # r sqrt(eta) cos(theta)

    def __post_init__(self):
        A = self.kappa - 1j * self.omega
        D_check = (A * (A + self.rse_sin * self.lambda_g)
                   + self.Delta * (self.Delta - self.lambda_G
                                   + self.rse_cos * self.lambda_g))
        scale = np.maximum(np.abs(self.D), self.kappa**2)
        if np.any(np.abs(self.D - D_check) > 1e-10 * scale):
            raise ParameterError("inconsistent denominator assembly in ResponseAt")


def transfer_coefficients(params: SystemParams, steady: SteadyState,
                          feedback: FeedbackLaw, omega) -> ResponseAt:
    """Closed-form sigma/mu coefficients at the given frequencies."""
    omega_in = np.asarray(omega, dtype=float)
    flat = np.atleast_1d(omega_in).astype(float)

    kappa = params.cavity.kappa
    det = params.detection
    t = det.bs_transmission_t
    r = det.bs_reflection_r
    se = np.sqrt(det.homodyne_efficiency_eta)
    sth, cth = np.sin(det.homodyne_phase_theta), np.cos(det.homodyne_phase_theta)

    # kappa-scaled quantities
    w = flat / kappa
    Dl = steady.effective_detuning_Delta / kappa
    chi = _chi_matrix(params.modes, flat) if params.modes else \
        np.zeros((0, flat.size), dtype=complex)
    lG = np.sum((steady.G[:, None] / kappa) ** 2 * chi * kappa, axis=0) \
        if params.modes else np.zeros(flat.size, dtype=complex)
    if feedback.kind != OFF and params.modes:
        g = np.stack([feedback.evaluate(j, flat) for j in range(len(params.modes))])
        lg = np.sum((steady.G[:, None] / kappa) * chi * (g / kappa) * kappa, axis=0)
    else:
        lg = np.zeros(flat.size, dtype=complex)

    A = 1.0 - 1j * w
    B = A + r * se * sth * lg
    C = Dl - lG + r * se * cth * lg
    D = A * B + Dl * C

    if np.any(np.abs(D) < 1e-14):
        raise SingularResponseError(
            "response denominator vanished; configuration sits at an "
            "instability threshold")

    Astar = 1.0 + 1j * w  # kappa + i omega, scaled

    sigma = np.empty((6, flat.size), dtype=complex)
    mu = np.empty((6, flat.size), dtype=complex)
    sigma[0] = t * (Astar * B - Dl * (Dl - lG)) / D
    sigma[1] = t * Dl * (2.0 + r * se * sth * lg) / D
    sigma[2] = -(Dl * se * cth * lg + r * A * B + r * (Dl**2 - Dl * lG)) / D
    sigma[3] = -(t**2 * Dl * se * sth * lg) / D
    sigma[4] = -t * Dl * np.sqrt(1.0 - det.homodyne_efficiency_eta) * lg / D
    sigma[5] = t * Dl * np.sqrt(2.0 / kappa) / D

    mu[0] = -t * (2.0 * Dl - 2.0 * lG + Astar * r * se * cth * lg) / D
    mu[1] = t * (1.0 + w**2 - Dl * (Dl - lG + r * se * cth * lg)) / D
    mu[2] = -t**2 * A * se * cth * lg / D
    mu[3] = -(A * se * sth * lg
              + r * (A**2 + Dl**2 - Dl * lG + Dl * r * se * cth * lg)) / D
    mu[4] = -t * A * np.sqrt(1.0 - det.homodyne_efficiency_eta) * lg / D
    mu[5] = t * A * np.sqrt(2.0 / kappa) / D

    shape = omega_in.shape
    return ResponseAt(
        omega=omega_in,
        chi=chi.reshape((len(params.modes),) + shape),
        lambda_G=(lG * kappa).reshape(shape),
        lambda_g=(lg * kappa).reshape(shape),
        D=(D * kappa**2).reshape(shape),
        sigma=sigma.reshape((6,) + shape),
        mu=mu.reshape((6,) + shape),
        kappa=kappa,
        Delta=steady.effective_detuning_Delta,
        rse_sin=float(r * se * sth),
        rse_cos=float(r * se * cth),
    )


def solve_quadrature_system(params: SystemParams, steady: SteadyState,
                            feedback: FeedbackLaw, omega: float) -> tuple[np.ndarray, np.ndarray]:
    """Independent check of the closed-form coefficients at a single frequency.

    Eliminates the mechanical variables, solves the resulting 2x2 linear
    system for the cavity quadratures numerically, and propagates each noise
    channel through the beam splitter.  Returns (sigma, mu) arrays of length
    6 in the same ordering and units as ``transfer_coefficients``.
    """
    kappa = params.cavity.kappa
    det = params.detection
    t = det.bs_transmission_t
    r = det.bs_reflection_r
    se = np.sqrt(det.homodyne_efficiency_eta)
    sth, cth = np.sin(det.homodyne_phase_theta), np.cos(det.homodyne_phase_theta)
    Delta = steady.effective_detuning_Delta

    lG = complex(lambda_G(steady, params.modes, omega))
    lg = complex(lambda_g(steady, params.modes, feedback, omega))

    A = kappa - 1j * omega
    M = np.array([[A, -Delta],
                  [Delta - lG + r * se * cth * lg, A + r * se * sth * lg]],
                 dtype=complex)

    sig = np.zeros(6, dtype=complex)
    mu = np.zeros(6, dtype=complex)
    sq2k = np.sqrt(2.0 * kappa)
    # Channels: X_a_in, Y_a_in, X_b_in, Y_b_in, theta_v_in, thermal sum.
    # Each right-hand side is (driving of dX, driving of dY) for a unit input;
    # the feedback photocurrent injects the loop noise into the dY equation
    # through lambda_g / sqrt(2 kappa).
    rhs = {
        0: (sq2k, lg / sq2k * se * r * cth),
        1: (0.0, sq2k + lg / sq2k * se * r * sth),
        2: (0.0, -lg / sq2k * se * t * cth),
        3: (0.0, -lg / sq2k * se * t * sth),
        4: (0.0, -lg / sq2k * np.sqrt(1.0 - det.homodyne_efficiency_eta)),
        5: (0.0, 1.0),
    }
    # Direct (input bleed-through) terms of the output d = t a_out - r b_in.
    direct_X = {0: -t, 2: -r}
    direct_Y = {1: -t, 3: -r}
    for ch, (fx, fy) in rhs.items():
        dX, dY = np.linalg.solve(M, np.array([fx, fy], dtype=complex))
        sig[ch] = t * sq2k * dX + direct_X.get(ch, 0.0)
        mu[ch] = t * sq2k * dY + direct_Y.get(ch, 0.0)
    return sig, mu
