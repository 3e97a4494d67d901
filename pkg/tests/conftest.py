"""Shared fixtures: preset configurations and parameter builders."""

import numpy as np
import pytest

from squeezelab import (CODATA, CavityParams, DetectionParams, DriveParams,
                        BathParams, MechanicalMode, SystemParams,
                        detuning0_for_effective, drive_amplitude,
                        radiation_pressure_shift_coefficient,
                        solve_steady_state)
from squeezelab.config import load_config

LASER_WAVELENGTH = 1.064e-6
LASER_OMEGA0 = 2.0 * np.pi * CODATA.c / LASER_WAVELENGTH


def make_params(modes, Pin=0.03, T=4.0, t_bs=0.99, eta=1.0, theta=0.0,
                delta_eff=0.0, kappa=1.0e6, L=0.06):
    """SystemParams whose operating branch realizes the requested effective
    detuning (the bare detuning is pre-shifted by the static radiation-
    pressure displacement)."""
    modes = tuple(modes)
    probe = SystemParams(
        cavity=CavityParams(length_L=L, kappa=kappa, detuning_Delta0=0.0,
                            laser_omega0=LASER_OMEGA0),
        drive=DriveParams(input_power_Pin=Pin), modes=modes,
        bath=BathParams(temperature_T=T),
        detection=DetectionParams(bs_transmission_t=t_bs,
                                  homodyne_efficiency_eta=eta,
                                  homodyne_phase_theta=theta))
    E = drive_amplitude(Pin, kappa, LASER_OMEGA0)
    beta = radiation_pressure_shift_coefficient(probe)
    Delta0 = detuning0_for_effective(delta_eff, beta, kappa, E)
    cavity = CavityParams(length_L=L, kappa=kappa, detuning_Delta0=Delta0,
                          laser_omega0=LASER_OMEGA0)
    return SystemParams(cavity=cavity, drive=probe.drive, modes=modes,
                        bath=probe.bath, detection=probe.detection)


def pick_branch(params, delta_eff=0.0):
    return min(solve_steady_state(params),
               key=lambda b: abs(b.effective_detuning_Delta - delta_eff))


def single_mode(omega_m=3.0e5, Q=300.0, mass=1.0e-10, overlap=1.0):
    return MechanicalMode(omega_j=omega_m, gamma_j=omega_m / Q,
                          mass_mj=mass, overlap_cj=overlap)


@pytest.fixture(scope="session")
def fig2_cfg():
    return load_config("fig2")


@pytest.fixture(scope="session")
def fig2_steady(fig2_cfg):
    return fig2_cfg.steady_branch()


@pytest.fixture(scope="session")
def fig2_feedback(fig2_cfg, fig2_steady):
    return fig2_cfg.feedback.build(fig2_steady, fig2_cfg.params.detection)


@pytest.fixture(scope="session")
def single_cfg():
    return load_config("oracle_single_mode")


@pytest.fixture(scope="session")
def single_steady(single_cfg):
    return single_cfg.steady_branch()


@pytest.fixture(scope="session")
def single_feedback(single_cfg, single_steady):
    return single_cfg.feedback.build(single_steady,
                                     single_cfg.params.detection)
