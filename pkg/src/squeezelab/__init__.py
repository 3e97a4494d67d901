"""Output quadrature squeezing of a feedback-assisted optomechanical cavity.

Analytic spectra, stability analysis, feedback tuning, and a time-domain
stochastic cross-check for a driven cavity coupled to a set of mechanical
modes, with the reflected field partly diverted to a homodyne detector that
drives the mechanics through a proportional (or filtered) force.
"""

from .constants import CODATA, PhysicalConstants
from .errors import (ConfigError, InstabilityError, NormalizationError,
                     NumericalError, ParameterError, ResourceError,
                     SingularResponseError, SqueezelabError)
from .model import (VACUUM_NOISE, BathParams, CavityParams, DetectionParams,
                    DriveParams, MechanicalMode, NoiseModel, SteadyState,
                    SystemParams, bare_coupling, detuning0_for_effective,
                    drive_amplitude, mean_thermal_occupation,
                    overlap_integral, radiation_pressure_shift_coefficient,
                    solve_steady_state, steady_state_residual,
                    uniform_mode_ladder)
from .optimize import (BandObjective, TuneResult, band_objective,
                       closed_form_gains, tune_feedback)
from .oracle import (ComparisonReport, EstimatedSpectra, Trajectory,
                     TrajectoryConfig, compare_to_analytic, estimate_spectra,
                     simulate)
from .response import (FeedbackLaw, ResponseAt, lambda_G, lambda_g,
                       solve_quadrature_system, susceptibility,
                       transfer_coefficients)
from .spectra import (FrequencyGrid, ResonantSpectra, SpectrumTable,
                      evaluate_grid, heisenberg_margin, optimal_spectrum,
                      phase_spectrum, quadrature_spectra, resonant_fast_path,
                      squeezing_phase_window, thermal_coth, to_decibels)
from .stability import (CharacteristicPolynomial, StabilityReport,
                        characteristic_polynomial, is_stable)

__version__ = "0.1.0"

__all__ = [
    "CODATA", "PhysicalConstants",
    "SqueezelabError", "ParameterError", "ConfigError", "NormalizationError",
    "SingularResponseError", "InstabilityError", "NumericalError",
    "ResourceError",
    "CavityParams", "DriveParams", "MechanicalMode", "BathParams",
    "DetectionParams", "SystemParams", "NoiseModel", "VACUUM_NOISE",
    "SteadyState", "drive_amplitude", "bare_coupling", "overlap_integral",
    "solve_steady_state", "steady_state_residual", "detuning0_for_effective",
    "radiation_pressure_shift_coefficient", "mean_thermal_occupation",
    "uniform_mode_ladder",
    "FeedbackLaw", "ResponseAt", "susceptibility", "lambda_G", "lambda_g",
    "transfer_coefficients", "solve_quadrature_system",
    "thermal_coth", "quadrature_spectra", "ResonantSpectra",
    "resonant_fast_path", "phase_spectrum", "optimal_spectrum",
    "heisenberg_margin", "squeezing_phase_window", "to_decibels",
    "FrequencyGrid", "SpectrumTable", "evaluate_grid",
    "CharacteristicPolynomial", "StabilityReport",
    "characteristic_polynomial", "is_stable",
    "BandObjective", "TuneResult", "closed_form_gains", "band_objective",
    "tune_feedback",
    "TrajectoryConfig", "Trajectory", "EstimatedSpectra", "ComparisonReport",
    "simulate", "estimate_spectra", "compare_to_analytic",
    "__version__",
]
