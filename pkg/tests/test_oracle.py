"""Time-domain stochastic integrator and Welch spectrum estimation."""

import numpy as np
import pytest

from squeezelab import (EstimatedSpectra, FeedbackLaw, ParameterError,
                        TrajectoryConfig, compare_to_analytic,
                        estimate_spectra, simulate)
from squeezelab.oracle import _system_matrices, discretize
from squeezelab.stability import closed_loop_matrix

from conftest import make_params, pick_branch, single_mode


def test_trajectory_config_validation():
    with pytest.raises(ParameterError):
        TrajectoryConfig(dt=-1.0e-8, duration=1.0)
    with pytest.raises(ParameterError):
        TrajectoryConfig(dt=1.0e-8, duration=1.0, thermal_model="ballistic")
    params = make_params((single_mode(omega_m=3.0e5, Q=300.0),))
    # too coarse a step for the cavity pole
    with pytest.raises(ParameterError):
        TrajectoryConfig(dt=1.0e-6, duration=1.0).validate_against(params)
    # shorter than 100 mixing times of the slowest decay
    with pytest.raises(ParameterError):
        TrajectoryConfig(dt=4.0e-8, duration=1.0e-3).validate_against(params)


def test_discretize_scalar_ou():
    # dx = -a x dt + sqrt(2 D) dW has exact propagator e^{-a dt} and
    # step variance D (1 - e^{-2 a dt}) / a
    a, D, dt = 3.0, 1.7, 0.25
    Phi, Q = discretize(np.array([[-a]]), np.array([[2.0 * D]]), dt)
    assert Phi[0, 0] == pytest.approx(np.exp(-a * dt), rel=1e-12)
    assert Q[0, 0] == pytest.approx(D * (1.0 - np.exp(-2.0 * a * dt)) / a,
                                    rel=1e-10)


def test_system_matrices_match_stability_model(fig2_cfg, fig2_steady,
                                               fig2_feedback):
    A, B, Dn, C, F = _system_matrices(fig2_cfg.params, fig2_steady,
                                      fig2_feedback)
    kappa = fig2_cfg.params.cavity.kappa
    eig_time = np.sort_complex(np.linalg.eigvals(A))
    eig_stab = np.sort_complex(
        np.linalg.eigvals(closed_loop_matrix(
            fig2_cfg.params, fig2_steady, fig2_feedback)) * kappa)
    assert np.allclose(eig_time, eig_stab, rtol=1e-8, atol=1e-8 * kappa)
    assert B.shape == (A.shape[0], 5 + len(fig2_cfg.params.modes))
    assert C.shape == (2, A.shape[0])
    assert F.shape == (2, B.shape[1])
    assert np.all(Dn > 0)


def test_oracle_rejects_rational_feedback(fig2_cfg, fig2_steady):
    law = FeedbackLaw.rational([[1.0]] * 25, [[1.0e6, 1.0]] * 25)
    with pytest.raises(ParameterError):
        _system_matrices(fig2_cfg.params, fig2_steady, law)


def test_undriven_output_is_shot_noise():
    # with no drive the output port carries pure vacuum: S_X = S_Y = 1/2
    params = make_params((), Pin=0.0, t_bs=0.99)
    steady = pick_branch(params)
    cfg = TrajectoryConfig(dt=4.0e-8, duration=2.0e-3, seed=42)
    traj = simulate(params, steady, FeedbackLaw.off(), cfg)
    assert not traj.diverged
    assert traj.n_steps == int(round(2.0e-3 / 4.0e-8))
    est = estimate_spectra(traj, segment_length=2048)
    assert est.segment_count >= 40
    # keep bins well below the per-step averaging rolloff
    keep = est.frequencies < 0.05 / cfg.dt
    assert np.mean(est.S_X[keep]) == pytest.approx(0.5, rel=0.05)
    assert np.mean(est.S_Y[keep]) == pytest.approx(0.5, rel=0.05)
    assert abs(np.mean(est.S_XY[keep])) < 0.05


def test_simulation_is_reproducible():
    params = make_params((), Pin=0.0)
    steady = pick_branch(params)
    cfg = TrajectoryConfig(dt=4.0e-8, duration=2.0e-4, seed=7)
    t1 = simulate(params, steady, FeedbackLaw.off(), cfg)
    t2 = simulate(params, steady, FeedbackLaw.off(), cfg)
    assert np.array_equal(t1.X_d, t2.X_d)
    assert np.array_equal(t1.Y_d, t2.Y_d)
    t3 = simulate(params, steady, FeedbackLaw.off(),
                  TrajectoryConfig(dt=4.0e-8, duration=2.0e-4, seed=8))
    assert not np.array_equal(t1.X_d, t3.X_d)


def test_estimate_spectra_requires_enough_segments():
    params = make_params((), Pin=0.0)
    steady = pick_branch(params)
    cfg = TrajectoryConfig(dt=4.0e-8, duration=2.0e-4, seed=0)
    traj = simulate(params, steady, FeedbackLaw.off(), cfg)
    with pytest.raises(ParameterError):
        estimate_spectra(traj, segment_length=4096)
    with pytest.raises(ParameterError):
        estimate_spectra(traj, segment_length=256, overlap=1.5)


def synthetic_estimate(freqs, S_X, S_Y, S_XY):
    z = np.zeros_like(freqs)
    return EstimatedSpectra(frequencies=freqs, S_X=S_X, S_Y=S_Y, S_XY=S_XY,
                            se_X=z, se_Y=z, se_XY=z, segment_count=64)


def test_compare_to_analytic_logic():
    w = np.linspace(1.0e4, 1.0e5, 200)
    ref = {"S_X": np.full_like(w, 0.5), "S_Y": 1.0 + (w / 1.0e5) ** 2}
    est = synthetic_estimate(w, ref["S_X"].copy(), ref["S_Y"].copy(),
                             np.zeros_like(w))
    report = compare_to_analytic(est, w, ref, band=(2.0e4, 9.0e4),
                                 tolerance=0.10)
    assert report.passed
    assert max(report.deviations.values()) < 1e-12

    # a 20% bias on S_Y fails at 10% tolerance ...
    biased = synthetic_estimate(w, ref["S_X"].copy(), 1.2 * ref["S_Y"],
                                np.zeros_like(w))
    assert not compare_to_analytic(biased, w, ref, band=(2.0e4, 9.0e4),
                                   tolerance=0.10).passed

    # ... unless the biased bins sit inside a notch
    spiked = ref["S_Y"].copy()
    spike_zone = np.abs(w - 5.0e4) < 2.0e3
    spiked[spike_zone] *= 50.0
    est_sp = synthetic_estimate(w, ref["S_X"].copy(), spiked,
                                np.zeros_like(w))
    assert not compare_to_analytic(est_sp, w, ref, band=(2.0e4, 9.0e4),
                                   tolerance=0.10).passed
    notched = compare_to_analytic(est_sp, w, ref, band=(2.0e4, 9.0e4),
                                  tolerance=0.10, notches=((5.0e4, 2.5e3),))
    assert notched.passed

    with pytest.raises(ParameterError):
        compare_to_analytic(est, w, ref, band=(1.0e3, 9.0e4), tolerance=0.1)
