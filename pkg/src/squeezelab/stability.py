"""Dynamic stability of the closed loop.

The closed-loop characteristic polynomial is the numerator of
``D(omega) * prod_j (omega_j^2 - omega^2 - i omega gamma_j) * prod_j M_j``
written in the variable s = -i omega (so stability means every root has
negative real part in s, equivalently negative imaginary part in omega).
All coefficients are assembled in kappa-scaled units to keep them bounded
even at degree ~50.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import NumericalError, ParameterError, ResourceError
from .model import SteadyState, SystemParams
from .response import OFF, PROPORTIONAL, RATIONAL, FeedbackLaw

STABLE = "Stable"
MARGINAL = "Marginal"
UNSTABLE = "Unstable"

_MAX_DEGREE = 200


@dataclass(frozen=True)
class CharacteristicPolynomial:
    """Real-coefficient closed-loop polynomial in s = -i omega, kappa-scaled.

    ``coeffs`` are ascending in s/kappa; roots in s scale back by kappa.
    """

    coeffs: np.ndarray
    kappa: float
    coeffs_hp: tuple = None  # extended-precision coefficients for evaluate()

    def evaluate(self, omega) -> np.ndarray:
        """Dimensionless value at physical angular frequency omega (SI).

        Equals the direct product form with every quadratic factor divided
        by kappa^2 and the cavity factor divided by kappa^2, keeping the
        result representable even at degree ~50.  Horner evaluation at
        |s/kappa| > 1 cancels ~16 decimal digits inside the resonance
        cluster, so the sum is carried out in extended precision.
        """
        import mpmath as mp

        omega_arr = np.atleast_1d(np.asarray(omega, dtype=float))
        out = np.empty(omega_arr.shape, dtype=complex)
        coeffs = self.coeffs_hp if self.coeffs_hp is not None else self.coeffs
        with mp.workdps(60):
            for i, w in enumerate(omega_arr.ravel()):
                s = mp.mpc(0.0, -w / self.kappa)
                acc = mp.mpc(0.0)
                for c in coeffs[::-1]:
                    acc = acc * s + c
                out.ravel()[i] = complex(acc)
        if np.isscalar(omega) or np.ndim(omega) == 0:
            return out.reshape(omega_arr.shape)[0]
        return out

    def roots_s(self) -> np.ndarray:
        """Roots in s = -i omega (SI rad/s)."""
        c = np.trim_zeros(self.coeffs, "b")
        if c.size <= 1:
            return np.array([], dtype=complex)
        try:
            r = np.roots(c[::-1])
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"companion eigenvalue solve failed: {exc}") from exc
        if not np.all(np.isfinite(r)):
            raise NumericalError("non-finite characteristic roots")
        return r * self.kappa


@dataclass(frozen=True)
class StabilityReport:
    roots: np.ndarray            # complex omega, rad/s
    max_im: float                # rad/s
    verdict: str
    margin_threshold: float      # rad/s

    @property
    def stable(self) -> bool:
        return self.verdict == STABLE


def _feedback_polys(feedback: FeedbackLaw, n_modes: int, kappa: float):
    """Per-mode (numerator, denominator) in scaled s, with g scaled by 1/kappa."""
    nums, dens = [], []
    for j in range(n_modes):
        if feedback.kind == OFF:
            nums.append(np.array([0.0]))
            dens.append(np.array([1.0]))
        elif feedback.kind == PROPORTIONAL:
            nums.append(np.array([feedback.gains[j] / kappa]))
            dens.append(np.array([1.0]))
        else:
            n = np.asarray(feedback.numerators[j], dtype=float)
            d = np.asarray(feedback.denominators[j], dtype=float)
            # s -> kappa s' and overall 1/kappa on g
            n = n * kappa ** np.arange(n.size) / kappa
            d = d * kappa ** np.arange(d.size)
            # normalize the denominator scale for conditioning
            lead = d[np.nonzero(d)[0][-1]]
            nums.append(n / lead)
            dens.append(d / lead)
    return nums, dens


def characteristic_polynomial(params: SystemParams, steady: SteadyState,
                              feedback: FeedbackLaw) -> CharacteristicPolynomial:
    """Expanded closed-loop polynomial for the given branch and feedback."""
    kappa = params.cavity.kappa
    n_modes = len(params.modes)
    if feedback.kind != OFF and feedback.n_modes not in (0, n_modes):
        raise ParameterError("feedback law does not match the mode count")

    degree = 2 + 2 * n_modes + sum(feedback.filter_order(j)
                                   for j in range(feedback.n_modes))
    if degree > _MAX_DEGREE:
        raise ResourceError(f"characteristic degree {degree} exceeds {_MAX_DEGREE}")

    wj = np.array([m.omega_j for m in params.modes]) / kappa
    gj = np.array([m.gamma_j for m in params.modes]) / kappa
    G = steady.G / kappa
    Dl = steady.effective_detuning_Delta / kappa
    det = params.detection
    rse = det.bs_reflection_r * np.sqrt(det.homodyne_efficiency_eta)
    rse_sin = rse * np.sin(det.homodyne_phase_theta)
    rse_cos = rse * np.cos(det.homodyne_phase_theta)

    # The expansion is carried out in extended precision: with ~25 modes the
    # coefficients reach ~1e19 while the polynomial value at real frequencies
    # inside the resonance cluster is ~1e3, so double-precision coefficients
    # would lose every significant digit to the alternating-sign sum.
    import mpmath as mp

    fnum, fden = _feedback_polys(feedback, n_modes, kappa)

    with mp.workdps(60):
        def as_hp(arr):
            return [mp.mpf(float(x)) for x in np.atleast_1d(arr)]

        def pmul(a, b):
            out = [mp.mpf(0)] * (len(a) + len(b) - 1)
            for i, x in enumerate(a):
                for k, y in enumerate(b):
                    out[i + k] += x * y
            return out

        def padd(a, b):
            if len(a) < len(b):
                a, b = b, a
            out = list(a)
            for i, y in enumerate(b):
                out[i] += y
            return out

        def pscale(c, a):
            return [c * x for x in a]

        mech = [[mp.mpf(float(w))**2, mp.mpf(float(g)), mp.mpf(1)]
                for w, g in zip(wj, gj)]
        fnum = [as_hp(p) for p in fnum]
        fden = [as_hp(p) for p in fden]
        Ghp = as_hp(G)
        Dl_hp = mp.mpf(float(Dl))

        def prod_except(polys, skip=None):
            out = [mp.mpf(1)]
            for i, p in enumerate(polys):
                if i == skip:
                    continue
                out = pmul(out, p)
            return out

        Pm_all = prod_except(mech)
        PM_all = prod_except(fden)
        base = pmul(Pm_all, PM_all)

        # L_G = lambda_G' * prod(mech) * prod(fden)
        LG = [mp.mpf(0)]
        # L_g = lambda_g' * prod(mech) * prod(fden)
        Lg = [mp.mpf(0)]
        for j in range(n_modes):
            rest_m = prod_except(mech, skip=j)
            LG = padd(LG, pscale(Ghp[j]**2 * mp.mpf(float(wj[j])),
                                 pmul(rest_m, PM_all)))
            if feedback.kind != OFF:
                rest_M = prod_except(fden, skip=j)
                term = pscale(Ghp[j] * mp.mpf(float(wj[j])),
                              pmul(fnum[j], pmul(rest_m, rest_M)))
                Lg = padd(Lg, term)

        A = [mp.mpf(1), mp.mpf(1)]  # kappa + s, scaled
        inner = padd(pmul(A, base), pscale(mp.mpf(float(rse_sin)), Lg))
        poly = pmul(A, inner)
        poly = padd(poly, pscale(Dl_hp**2, base))
        poly = padd(poly, pscale(-Dl_hp, LG))
        poly = padd(poly, pscale(Dl_hp * mp.mpf(float(rse_cos)), Lg))

    coeffs = np.array([float(c) for c in poly])
    if not np.all(np.isfinite(coeffs)):
        raise NumericalError("non-finite characteristic coefficients")
    return CharacteristicPolynomial(coeffs=coeffs, kappa=kappa,
                                    coeffs_hp=tuple(poly))


def _filter_realization(num: np.ndarray, den: np.ndarray):
    """Controllable canonical (A, b, c, d) for num(s)/den(s), ascending coeffs."""
    den = np.trim_zeros(np.asarray(den, dtype=float), "b")
    num = np.asarray(num, dtype=float)
    k = den.size - 1
    den = den / den[-1]
    full = np.zeros(k + 1)
    full[:num.size] = num
    d = full[k]
    strictly = full[:k] - d * den[:k]
    if k == 0:
        return (np.zeros((0, 0)), np.zeros(0), np.zeros(0), float(d))
    A = np.zeros((k, k))
    A[:-1, 1:] = np.eye(k - 1)
    A[-1, :] = -den[:k]
    b = np.zeros(k)
    b[-1] = 1.0
    c = strictly
    return (A, b, c, float(d))


def closed_loop_matrix(params: SystemParams, steady: SteadyState,
                       feedback: FeedbackLaw) -> np.ndarray:
    """Deterministic drift matrix of the feedback loop, in units of kappa.

    State ordering: (q_1, p_1, ..., q_N, p_N, dX, dY, filter states...).
    Its eigenvalues are exactly the characteristic roots in s/kappa, obtained
    here from a block linearization instead of expanded coefficients, which
    lose the root locations for many clustered high-Q modes.
    """
    kappa = params.cavity.kappa
    N = len(params.modes)
    wj = np.array([m.omega_j for m in params.modes]) / kappa
    gj = np.array([m.gamma_j for m in params.modes]) / kappa
    G = steady.G / kappa
    Dl = steady.effective_detuning_Delta / kappa
    det = params.detection
    rse = det.bs_reflection_r * np.sqrt(det.homodyne_efficiency_eta)
    sth, cth = np.sin(det.homodyne_phase_theta), np.cos(det.homodyne_phase_theta)

    if feedback.kind == PROPORTIONAL:
        gains = np.asarray(feedback.gains, dtype=float) / kappa
    else:
        gains = np.zeros(N)

    filters = []
    n_extra = 0
    if feedback.kind == RATIONAL:
        for j in range(N):
            n = np.array(feedback.numerators[j]) / kappa
            d = np.array(feedback.denominators[j])
            # s -> kappa * s'
            n = n * kappa ** np.arange(n.size)
            d = d * kappa ** np.arange(d.size)
            filters.append(_filter_realization(n, d))
            n_extra += filters[-1][0].shape[0]

    n = 2 * N + 2 + n_extra
    iX, iY = 2 * N, 2 * N + 1
    A = np.zeros((n, n))
    for j in range(N):
        iq, ip = 2 * j, 2 * j + 1
        A[iq, ip] = wj[j]
        A[ip, iq] = -wj[j]
        A[ip, ip] = -gj[j]
        A[ip, iX] = G[j]
        A[iY, iq] = G[j]
    A[iX, iX] = -1.0
    A[iX, iY] = Dl
    A[iY, iX] = -Dl
    A[iY, iY] = -1.0

    # detected in-loop signal u = r sqrt(eta) (cos(theta) dX + sin(theta) dY);
    # the force on p_j is -g_j(s) u.
    uX, uY = rse * cth, rse * sth
    if feedback.kind == PROPORTIONAL:
        for j in range(N):
            ip = 2 * j + 1
            A[ip, iX] -= gains[j] * uX
            A[ip, iY] -= gains[j] * uY
    elif feedback.kind == RATIONAL:
        off = 2 * N + 2
        for j in range(N):
            ip = 2 * j + 1
            Af, bf, cf, df = filters[j]
            k = Af.shape[0]
            A[ip, iX] -= df * uX
            A[ip, iY] -= df * uY
            if k:
                A[off:off + k, off:off + k] = Af
                A[off:off + k, iX] = bf * uX
                A[off:off + k, iY] = bf * uY
                A[ip, off:off + k] = -cf
                off += k
    return A


def _resonant_reduced_max_re(params: SystemParams, steady: SteadyState,
                             feedback: FeedbackLaw) -> float:
    """Largest Re(s) of the factored resonant condition: s = -kappa joined
    with the roots of (kappa + s) prod(mech) prod(fden) + r sqrt(eta)
    sin(theta) L_g, realized as the (q, p, dY, filters) subsystem at Delta=0
    with the amplitude quadrature removed."""
    kappa = params.cavity.kappa
    N = len(params.modes)
    steady0 = steady
    if steady.effective_detuning_Delta != 0.0:
        from dataclasses import replace
        steady0 = replace(steady, effective_detuning_Delta=0.0)
    A = closed_loop_matrix(params, steady0, feedback)
    iX = 2 * N
    keep = [i for i in range(A.shape[0]) if i != iX]
    sub = A[np.ix_(keep, keep)]
    worst = -1.0  # the decoupled amplitude-quadrature root s = -kappa (scaled)
    if sub.size:
        worst = max(worst, float(np.max(np.linalg.eigvals(sub).real)))
    return worst * kappa


def is_stable(params: SystemParams, steady: SteadyState,
              feedback: FeedbackLaw,
              margin_threshold: float | None = None) -> StabilityReport:
    """Locate all characteristic roots and classify the configuration."""
    kappa = params.cavity.kappa
    threshold = margin_threshold if margin_threshold is not None else 1e-9 * kappa
    n_modes = len(params.modes)
    if feedback.kind != OFF and feedback.n_modes not in (0, n_modes):
        raise ParameterError("feedback law does not match the mode count")
    degree = 2 + 2 * n_modes + sum(feedback.filter_order(j)
                                   for j in range(feedback.n_modes))
    if degree > _MAX_DEGREE:
        raise ResourceError(f"characteristic degree {degree} exceeds {_MAX_DEGREE}")

    A = closed_loop_matrix(params, steady, feedback)
    try:
        s_roots = np.linalg.eigvals(A) * kappa
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"closed-loop eigenvalue solve failed: {exc}") from exc
    if not np.all(np.isfinite(s_roots)):
        raise NumericalError("non-finite characteristic roots")
    omega_roots = 1j * s_roots
    max_im = float(np.max(omega_roots.imag)) if omega_roots.size else -np.inf

    if abs(steady.effective_detuning_Delta) <= 1e-9 * kappa and omega_roots.size:
        reduced = _resonant_reduced_max_re(params, steady, feedback)
        if abs(reduced - max_im) > 1e-5 * kappa + 1e-6 * abs(max_im):
            raise NumericalError(
                "resonant stability cross-check disagrees with the full "
                f"closed loop: {reduced:g} vs {max_im:g} rad/s")

    if max_im > threshold:
        verdict = UNSTABLE
    elif max_im < -threshold:
        verdict = STABLE
    else:
        verdict = MARGINAL
    return StabilityReport(roots=omega_roots, max_im=max_im,
                           verdict=verdict, margin_threshold=threshold)
