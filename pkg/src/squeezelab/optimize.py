"""Feedback tuning: the closed-form proportional optimum and a constrained
derivative-free search over (homodyne phase, overall gain scale)."""

from __future__ import annotations

from dataclasses import dataclass, replace, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InstabilityError, ParameterError
from .model import DetectionParams, SteadyState, SystemParams, VACUUM_NOISE
from .response import FeedbackLaw
from .spectra import FrequencyGrid, optimal_spectrum, quadrature_spectra
from .stability import is_stable


@dataclass(frozen=True)
class BandObjective:
    """Weighted mean of the optimal squeezing spectrum over a band."""

    omega_lo: float
    omega_hi: float
    weight: str = "log-uniform"          # or "uniform"
    n_points: int = 400

    def __post_init__(self):
        if self.omega_lo <= 0 or self.omega_hi <= self.omega_lo:
            raise ParameterError("band must satisfy 0 < omega_lo < omega_hi")
        if self.weight not in ("uniform", "log-uniform"):
            raise ParameterError(f"unknown band weight {self.weight!r}")

    def grid(self) -> np.ndarray:
        if self.weight == "uniform":
            return np.linspace(self.omega_lo, self.omega_hi, self.n_points)
        return np.geomspace(self.omega_lo, self.omega_hi, self.n_points)


def closed_form_gains(steady: SteadyState, detection: DetectionParams) -> FeedbackLaw:
    """Proportional optimum g_j = 2 r sqrt(eta) cos(theta) G_j.

    Returns the Off law when the splitter reflects nothing (t = 1): with no
    light in the loop there is nothing to feed back.
    """
    r = detection.bs_reflection_r
    if r == 0.0:
        return FeedbackLaw.off()
    scale = (2.0 * r * np.sqrt(detection.homodyne_efficiency_eta)
             * np.cos(detection.homodyne_phase_theta))
    return FeedbackLaw.proportional(scale * steady.G)


def band_objective(params: SystemParams, steady: SteadyState,
                   feedback: FeedbackLaw, band: BandObjective,
                   check_stability: bool = True) -> float:
    """Band-mean S_opt; refuses unstable configurations."""
    if check_stability:
        report = is_stable(params, steady, feedback)
        if not report.stable:
            raise InstabilityError(
                f"configuration is {report.verdict} (max Im omega = "
                f"{report.max_im:g} rad/s); refusing band objective")
    omega = band.grid()
    S_X, S_Y, S_XY = quadrature_spectra(params, steady, feedback,
                                        VACUUM_NOISE, omega)
    S_opt, _ = optimal_spectrum(S_X, S_Y, S_XY)
    return float(np.mean(S_opt))


@dataclass(frozen=True)
class TuneResult:
    theta: float
    gain_scale: float
    feedback: FeedbackLaw
    objective: float
    evaluations: tuple[tuple[float, float, float], ...]  # (theta, c, objective)
    budget_exhausted: bool = False


def tune_feedback(params: SystemParams, band: BandObjective,
                  search_budget: int = 400,
                  steady: SteadyState | None = None,
                  c_max: float | None = None,
                  n_starts: int = 3,
                  seed: int = 0) -> TuneResult:
    """Coordinate descent over homodyne phase theta and gain scale c, with
    golden-section line searches and multi-start, restricted to the
    proportional family g_j = c G_j.  Every candidate is stability-gated.

    The steady state is independent of the detection phase, so one branch
    (by default the lowest-intensity branch that is stable without feedback)
    serves for the whole search.
    """
    from .model import solve_steady_state

    det = params.detection
    if steady is None:
        branches = solve_steady_state(params)
        steady = next((b for b in branches
                       if is_stable(params, b, FeedbackLaw.off()).stable),
                      branches[0])
    r = det.bs_reflection_r
    se = np.sqrt(det.homodyne_efficiency_eta)
    c_star = 2.0 * r * se
    if c_max is None:
        c_max = 10.0 * c_star if c_star > 0 else 1.0

    trace: list[tuple[float, float, float]] = []
    evals = 0
    budget_exhausted = False

    def evaluate(theta: float, c: float) -> float:
        nonlocal evals, budget_exhausted
        if evals >= search_budget:
            budget_exhausted = True
            return np.inf
        evals += 1
        p = replace(params, detection=replace(det, homodyne_phase_theta=theta))
        fb = FeedbackLaw.proportional(c * steady.G) if c != 0.0 else FeedbackLaw.off()
        try:
            report = is_stable(p, steady, fb)
            if not report.stable:
                return np.inf
            val = band_objective(p, steady, fb, band, check_stability=False)
        except Exception:
            return np.inf
        trace.append((theta, c, val))
        return val

    rng = np.random.default_rng(seed)
    starts = [(0.0, c_star)]
    for _ in range(max(0, n_starts - 1)):
        starts.append((float(rng.uniform(-np.pi / 2, np.pi / 2)),
                       float(rng.uniform(0.0, c_max))))

    best = (np.inf, 0.0, 0.0)  # (objective, theta, c)
    for theta0, c0 in starts:
        theta, c = theta0, c0
        evaluate(theta0, 0.0)  # feedback-off baseline, also seeds tie-breaking
        f_cur = evaluate(theta, c)
        for _ in range(4):  # coordinate sweeps
            res_c = minimize_scalar(lambda cc: evaluate(theta, cc),
                                    bounds=(0.0, c_max), method="bounded",
                                    options={"xatol": 1e-3 * max(c_max, 1e-12)})
            if np.isfinite(res_c.fun) and res_c.fun <= f_cur:
                c, f_cur = float(res_c.x), float(res_c.fun)
            res_t = minimize_scalar(lambda th: evaluate(th, c),
                                    bounds=(-np.pi / 2, np.pi / 2),
                                    method="bounded", options={"xatol": 1e-4})
            if np.isfinite(res_t.fun) and res_t.fun <= f_cur:
                theta, f_cur = float(res_t.x), float(res_t.fun)
            if budget_exhausted:
                break
        if np.isfinite(f_cur):
            # tie-break toward minimal intervention
            if (f_cur < best[0] - 1e-9
                    or (abs(f_cur - best[0]) <= 1e-9
                        and (abs(c), abs(theta)) < (abs(best[2]), abs(best[1])))):
                best = (f_cur, theta, c)
        if budget_exhausted:
            break

    obj, theta, c = best
    if not np.isfinite(obj):
        raise InstabilityError("no stable feedback candidate found in the search box")

    # Among near-ties prefer the least intervention: smallest |c|, then |theta|.
    ties = [e for e in trace if e[2] <= obj + 1e-9]
    if ties:
        theta, c, obj = min(ties, key=lambda e: (abs(e[1]), abs(e[0])))

    fb = FeedbackLaw.proportional(c * steady.G) if c != 0.0 else FeedbackLaw.off()
    return TuneResult(theta=theta, gain_scale=c, feedback=fb, objective=obj,
                      evaluations=tuple(trace), budget_exhausted=budget_exhausted)
