"""Susceptibilities, feedback laws and the quadrature transfer coefficients."""

import numpy as np
import pytest

from squeezelab import (FeedbackLaw, ParameterError, VACUUM_NOISE,
                        lambda_G, lambda_g, quadrature_spectra,
                        solve_quadrature_system, susceptibility,
                        transfer_coefficients)

from conftest import make_params, pick_branch, single_mode


def test_susceptibility_limits():
    m = single_mode(omega_m=3.0e5, Q=300.0)
    assert susceptibility(m, 0.0) == pytest.approx(1.0 / 3.0e5, rel=1e-14)
    # on resonance the response is purely imaginary, i Q / omega_m in height
    chi = susceptibility(m, 3.0e5)
    assert chi.real == pytest.approx(0.0, abs=1e-20)
    assert chi.imag == pytest.approx(1.0 / m.gamma_j, rel=1e-14)
    # far above resonance the mode responds like a free mass
    w = 3.0e8
    assert susceptibility(m, w) == pytest.approx(-3.0e5 / w**2, rel=1e-4)


def test_lambda_sums_match_manual(fig2_cfg, fig2_steady, fig2_feedback):
    modes = fig2_cfg.params.modes
    w = np.array([1.0e4, 3.0e5, 2.0e6])
    lG = lambda_G(fig2_steady, modes, w)
    manual = sum(fig2_steady.G[j]**2 * susceptibility(modes[j], w)
                 for j in range(len(modes)))
    assert np.allclose(lG, manual, rtol=1e-13)
    lg = lambda_g(fig2_steady, modes, fig2_feedback, w)
    manual_g = sum(fig2_steady.G[j] * susceptibility(modes[j], w)
                   * fig2_feedback.gains[j] for j in range(len(modes)))
    assert np.allclose(lg, manual_g, rtol=1e-13)
    assert np.allclose(
        lambda_g(fig2_steady, modes, FeedbackLaw.off(), w), 0.0)


def test_feedback_law_validation():
    with pytest.raises(ParameterError):
        FeedbackLaw(kind="bogus")
    # non-Hurwitz filter denominator (root at s = +1) is rejected
    with pytest.raises(ParameterError):
        FeedbackLaw.rational([[1.0]], [[-1.0, 1.0]])
    law = FeedbackLaw.rational([[2.0, 1.0]], [[1.0, 1.0]])
    w = np.array([0.0, 0.5, 3.0])
    s = -1j * w
    assert np.allclose(law.evaluate(0, w), (2.0 + s) / (1.0 + s), rtol=1e-14)
    prop = FeedbackLaw.proportional([4.0, 5.0])
    assert np.allclose(prop.evaluate(1, w), 5.0)


def _coefficients_match_direct_solve(params, steady, feedback, omega_list):
    resp = transfer_coefficients(params, steady, feedback,
                                 np.asarray(omega_list))
    for i, w in enumerate(omega_list):
        sig, mu = solve_quadrature_system(params, steady, feedback, float(w))
        for k in range(6):
            scale = max(abs(sig[k]), abs(mu[k]), 1e-300)
            assert abs(resp.sigma[k][i] - sig[k]) / scale < 1e-8
            assert abs(resp.mu[k][i] - mu[k]) / scale < 1e-8


def test_transfer_coefficients_match_linear_solve_resonant(
        fig2_cfg, fig2_steady, fig2_feedback):
    rng = np.random.default_rng(7)
    w = rng.uniform(1.0e3, 5.0e6, 25)
    _coefficients_match_direct_solve(fig2_cfg.params, fig2_steady,
                                     fig2_feedback, w)


def test_transfer_coefficients_match_linear_solve_detuned():
    modes = (single_mode(3.0e5, 300.0), single_mode(5.0e5, 500.0))
    params = make_params(modes, delta_eff=4.0e5, theta=0.7, eta=0.8,
                        t_bs=0.9)
    steady = pick_branch(params, delta_eff=4.0e5)
    fb = FeedbackLaw.rational(
        [[2.0e5, 0.1], [1.0e5, 0.0]],
        [[1.0e6, 1.0], [2.0e6, 1.0]])
    rng = np.random.default_rng(11)
    w = rng.uniform(1.0e3, 3.0e6, 25)
    _coefficients_match_direct_solve(params, steady, fb, w)


def test_response_denominator_assembly(fig2_cfg, fig2_steady, fig2_feedback):
    params = fig2_cfg.params
    w = np.geomspace(1.0e3, 4.0e6, 50)
    resp = transfer_coefficients(params, fig2_steady, fig2_feedback, w)
    kappa = params.cavity.kappa
    Delta = fig2_steady.effective_detuning_Delta
    det = params.detection
    rse = det.bs_reflection_r * np.sqrt(det.homodyne_efficiency_eta)
    D = ((kappa - 1j * w)
         * (kappa - 1j * w + rse * np.sin(det.homodyne_phase_theta)
            * resp.lambda_g)
         + Delta * (Delta - resp.lambda_G
                    + rse * np.cos(det.homodyne_phase_theta) * resp.lambda_g))
    assert np.allclose(resp.D, D, rtol=1e-12)


def test_undriven_cavity_passes_vacuum_through():
    params = make_params((single_mode(),), Pin=0.0)
    steady = pick_branch(params)
    assert steady.alpha_s == 0.0
    w = np.geomspace(1.0e3, 1.0e6, 40)
    S_X, S_Y, S_XY = quadrature_spectra(params, steady, FeedbackLaw.off(),
                                        VACUUM_NOISE, w)
    assert np.allclose(S_X, 0.5, atol=1e-12)
    assert np.allclose(S_Y, 0.5, atol=1e-12)
    assert np.allclose(S_XY, 0.0, atol=1e-12)
