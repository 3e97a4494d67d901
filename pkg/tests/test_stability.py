"""Closed-loop characteristic polynomial and root-location verdicts."""

import numpy as np
import pytest

from squeezelab import (FeedbackLaw, ResourceError, characteristic_polynomial,
                        is_stable, lambda_G, lambda_g, uniform_mode_ladder)
from squeezelab.stability import closed_loop_matrix

from conftest import make_params, pick_branch, single_mode


def direct_product(params, steady, feedback, w):
    """D(omega) times the mechanical denominators, in the polynomial's
    kappa-scaled units (each factor divided by kappa^2)."""
    kappa = params.cavity.kappa
    Delta = steady.effective_detuning_Delta
    det = params.detection
    rse = det.bs_reflection_r * np.sqrt(det.homodyne_efficiency_eta)
    lG = lambda_G(steady, params.modes, w)
    lg = lambda_g(steady, params.modes, feedback, w)
    D = ((kappa - 1j * w)
         * (kappa - 1j * w + rse * np.sin(det.homodyne_phase_theta) * lg)
         + Delta * (Delta - lG + rse * np.cos(det.homodyne_phase_theta) * lg))
    prod = np.ones_like(w, dtype=complex)
    for m in params.modes:
        prod *= (m.omega_j**2 - w**2 - 1j * w * m.gamma_j) / kappa**2
    return D / kappa**2 * prod


def test_single_mode_factorization():
    m = single_mode(omega_m=3.0e5, Q=300.0)
    params = make_params((m,))
    steady = pick_branch(params)
    cp = characteristic_polynomial(params, steady, FeedbackLaw.off())
    kappa = params.cavity.kappa
    # (kappa + s)^2 (omega_m^2 + gamma s + s^2), kappa-scaled
    wj, gj = m.omega_j / kappa, m.gamma_j / kappa
    expected = np.polynomial.polynomial.polymul(
        [1.0, 2.0, 1.0], [wj**2, gj, 1.0])
    assert np.allclose(cp.coeffs, expected, rtol=1e-12)
    roots = np.sort_complex(cp.roots_s())
    expected_mech = np.roots([1.0, m.gamma_j, m.omega_j**2])
    target = np.sort_complex(np.array([-kappa, -kappa, *expected_mech]))
    assert np.allclose(roots, target, rtol=1e-6)


@pytest.mark.parametrize("with_feedback", [False, True])
def test_pointwise_polynomial_consistency(fig2_cfg, fig2_steady,
                                          fig2_feedback, with_feedback):
    fb = fig2_feedback if with_feedback else FeedbackLaw.off()
    cp = characteristic_polynomial(fig2_cfg.params, fig2_steady, fb)
    rng = np.random.default_rng(3)
    w = rng.uniform(1.0e3, 5.0e6, 50)
    direct = direct_product(fig2_cfg.params, fig2_steady, fb, w)
    rel = np.abs(cp.evaluate(w) - direct) / np.abs(direct)
    assert rel.max() < 1e-8


def test_roots_conjugate_symmetry(fig2_cfg, fig2_steady, fig2_feedback):
    report = is_stable(fig2_cfg.params, fig2_steady, fig2_feedback)
    roots = report.roots  # complex omega
    scale = np.abs(roots).max()
    for rt in roots:
        # real-coefficient polynomial in s = -i omega: omega pairs (w, -w*)
        assert np.min(np.abs(roots - (-np.conj(rt)))) < 1e-6 * scale


def test_reference_configuration_stable(fig2_cfg, fig2_steady, fig2_feedback):
    on = is_stable(fig2_cfg.params, fig2_steady, fig2_feedback)
    off = is_stable(fig2_cfg.params, fig2_steady, FeedbackLaw.off())
    assert on.verdict == "Stable"
    assert off.verdict == "Stable"
    assert on.max_im < 0.0
    assert len(on.roots) == 52


def test_unit_transmission_always_stable():
    params = make_params((single_mode(),), t_bs=1.0, theta=1.2)
    steady = pick_branch(params)
    fb = FeedbackLaw.proportional([5.0 * steady.G[0]])
    assert is_stable(params, steady, fb).stable


def test_state_matrix_matches_reported_roots(fig2_cfg, fig2_steady,
                                             fig2_feedback):
    A = closed_loop_matrix(fig2_cfg.params, fig2_steady, fig2_feedback)
    kappa = fig2_cfg.params.cavity.kappa
    s = np.sort_complex(np.linalg.eigvals(A) * kappa)
    report = is_stable(fig2_cfg.params, fig2_steady, fig2_feedback)
    # roots are stored as omega = i s
    s_report = np.sort_complex(-1j * report.roots)
    assert np.allclose(s, s_report, rtol=1e-9, atol=1e-9 * kappa)


def gain_ramp_flip(params, steady, scales):
    """First gain scale on the ramp with an Unstable verdict (None if none)."""
    for c in scales:
        fb = FeedbackLaw.proportional(c * steady.G)
        if is_stable(params, steady, fb).verdict == "Unstable":
            return c
    return None


def test_quadrature_phase_gain_ramp_destabilizes():
    params = make_params((single_mode(omega_m=3.0e5, Q=300.0),),
                         theta=np.pi / 2.0)
    steady = pick_branch(params)
    scales = np.linspace(0.0, 2.0e-4, 41)
    flip = gain_ramp_flip(params, steady, scales)
    assert flip is not None and flip > 0.0

    # bisection on max_im localizes the same threshold
    def max_im(c):
        fb = FeedbackLaw.proportional(c * steady.G)
        return is_stable(params, steady, fb).max_im

    lo, hi = flip - scales[1], flip
    assert max_im(lo) < 0.0 < max_im(hi)
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if max_im(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    threshold = 0.5 * (lo + hi)
    assert flip - scales[1] <= threshold <= flip

    # empirical regression guard: max_im does not decrease along the ramp
    vals = [max_im(c) for c in np.linspace(0.0, 2.0 * flip, 15)]
    assert np.all(np.diff(vals) >= -1e-9 * params.cavity.kappa)


def test_marginal_verdict_band():
    params = make_params((single_mode(),))
    steady = pick_branch(params)
    report = is_stable(params, steady, FeedbackLaw.off(),
                       margin_threshold=10.0 * params.cavity.kappa)
    assert report.verdict == "Marginal"


def test_degree_guard():
    modes = uniform_mode_ladder(25, 9.0e5, 3.6e6, mass=1.0e-10,
                                quality_factor=1.0e4)
    params = make_params(modes)
    steady = pick_branch(params)
    den = np.polynomial.polynomial.polypow([1.0e6, 1.0], 6)  # (kappa + s)^6
    fb = FeedbackLaw.rational([[1.0]] * 25, [list(den)] * 25)
    with pytest.raises(ResourceError):
        is_stable(params, steady, fb)
    with pytest.raises(ResourceError):
        characteristic_polynomial(params, steady, fb)
