"""Configuration documents: flat YAML sections with unit-suffixed keys.

Frequency-like keys accept either an ``_rad_per_s`` suffix (used as-is) or a
``_hz`` suffix (multiplied by 2 pi at ingestion).  Mode lists may be written
explicitly or generated from (count, omega_min, omega_max) with shared mass,
quality factor and overlap.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .constants import CODATA
from .errors import ConfigError
from .model import (BathParams, CavityParams, DetectionParams, DriveParams,
                    MechanicalMode, SteadyState, SystemParams,
                    drive_amplitude, radiation_pressure_shift_coefficient,
                    solve_steady_state, uniform_mode_ladder)
from .optimize import BandObjective, closed_form_gains
from .response import FeedbackLaw
from .spectra import FrequencyGrid
from .stability import is_stable

TWO_PI = 2.0 * np.pi


def _num(value, key):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"key {key!r}: expected a number, got {value!r}") from None


def _freq(section: dict, base: str, section_name: str, default=None):
    """Angular frequency from either a _rad_per_s or a _hz suffixed key."""
    k_rad = f"{base}_rad_per_s"
    k_hz = f"{base}_hz"
    if k_rad in section and k_hz in section:
        raise ConfigError(f"{section_name}: give {k_rad} or {k_hz}, not both")
    if k_rad in section:
        return _num(section[k_rad], f"{section_name}.{k_rad}")
    if k_hz in section:
        return TWO_PI * _num(section[k_hz], f"{section_name}.{k_hz}")
    if default is not None:
        return default
    raise ConfigError(f"{section_name}: missing {k_rad} (or {k_hz})")


def _get(section: dict, key: str, section_name: str, default=...):
    if key in section:
        return section[key]
    if default is not ...:
        return default
    raise ConfigError(f"{section_name}: missing key {key!r}")


@dataclass(frozen=True)
class FeedbackSpec:
    kind: str = "off"                     # off | proportional | closed-form
    gain_scale: float | None = None       # g_j = gain_scale * G_j
    gains: tuple[float, ...] | None = None

    def build(self, steady: SteadyState, detection: DetectionParams) -> FeedbackLaw:
        if self.kind == "off":
            return FeedbackLaw.off()
        if self.kind == "closed-form":
            return closed_form_gains(steady, detection)
        if self.gains is not None:
            return FeedbackLaw.proportional(np.asarray(self.gains))
        return FeedbackLaw.proportional(self.gain_scale * steady.G)


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    feedback: FeedbackSpec
    grid: FrequencyGrid
    band: BandObjective
    oracle: dict
    target_effective_detuning: float | None
    raw: dict

    def steady_branch(self) -> SteadyState:
        """Operating branch of the (possibly multivalued) steady state.

        With a target effective detuning the branch realizing that detuning
        is selected; otherwise the lowest-intensity branch that is stable
        with feedback off.
        """
        branches = solve_steady_state(self.params)
        if self.target_effective_detuning is not None:
            return min(branches, key=lambda b: abs(
                b.effective_detuning_Delta - self.target_effective_detuning))
        for b in branches:
            if is_stable(self.params, b, FeedbackLaw.off()).stable:
                return b
        return branches[0]


def _parse_modes(section, name="modes") -> tuple[MechanicalMode, ...]:
    if section is None:
        return ()
    if isinstance(section, list):
        modes = []
        for i, m in enumerate(section):
            sec = f"{name}[{i}]"
            omega = _freq(m, "omega", sec)
            if "gamma_rad_per_s" in m or "gamma_hz" in m:
                gamma = _freq(m, "gamma", sec)
            else:
                gamma = omega / _num(_get(m, "quality_factor", sec), sec)
            modes.append(MechanicalMode(
                omega_j=omega, gamma_j=gamma,
                mass_mj=_num(_get(m, "mass_kg", sec), sec),
                overlap_cj=_num(_get(m, "overlap", sec, 1.0), sec)))
        return tuple(modes)
    if isinstance(section, dict):
        count = int(_num(_get(section, "count", name), name))
        if count == 0:
            return ()
        return uniform_mode_ladder(
            count=count,
            omega_min=_freq(section, "omega_min", name),
            omega_max=_freq(section, "omega_max", name),
            mass=_num(_get(section, "mass_kg", name), name),
            quality_factor=_num(_get(section, "quality_factor", name), name),
            overlap=_num(_get(section, "overlap", name, 1.0), name))
    raise ConfigError(f"{name}: expected a list or a generator mapping")


def parse_config(doc: dict, source: str = "<config>") -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be a mapping")

    cav_sec = _get(doc, "cavity", source)
    if "laser_wavelength_nm" in cav_sec:
        lam = _num(cav_sec["laser_wavelength_nm"], "cavity.laser_wavelength_nm")
        omega0 = TWO_PI * CODATA.c / (lam * 1e-9)
    else:
        omega0 = _freq(cav_sec, "laser_omega0", "cavity")
    kappa = _freq(cav_sec, "kappa", "cavity")

    target_delta = None
    if ("effective_detuning_rad_per_s" in cav_sec
            or "effective_detuning_hz" in cav_sec):
        target_delta = _freq(cav_sec, "effective_detuning", "cavity")
        detuning0 = 0.0  # placeholder, fixed below once beta is known
    else:
        detuning0 = _freq(cav_sec, "detuning0", "cavity", default=0.0)

    modes = _parse_modes(doc.get("modes"))

    drive_sec = _get(doc, "drive", source)
    bath_sec = _get(doc, "bath", source)
    det_sec = _get(doc, "detection", source)

    try:
        params = SystemParams(
            cavity=CavityParams(
                length_L=_num(_get(cav_sec, "length_m", "cavity"), "cavity.length_m"),
                kappa=kappa, detuning_Delta0=detuning0, laser_omega0=omega0),
            drive=DriveParams(
                input_power_Pin=_num(_get(drive_sec, "input_power_w", "drive"),
                                     "drive.input_power_w")),
            modes=modes,
            bath=BathParams(
                temperature_T=_num(_get(bath_sec, "temperature_k", "bath"),
                                   "bath.temperature_k")),
            detection=DetectionParams(
                bs_transmission_t=_num(_get(det_sec, "bs_transmission", "detection"),
                                       "detection.bs_transmission"),
                homodyne_efficiency_eta=_num(
                    _get(det_sec, "homodyne_efficiency", "detection", 1.0),
                    "detection.homodyne_efficiency"),
                homodyne_phase_theta=_num(
                    _get(det_sec, "homodyne_phase_rad", "detection", 0.0),
                    "detection.homodyne_phase_rad")))
    except Exception as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{source}: {exc}") from exc

    if target_delta is not None:
        beta = radiation_pressure_shift_coefficient(params)
        E = drive_amplitude(params.drive.input_power_Pin, kappa, omega0)
        I = E**2 / (kappa**2 + target_delta**2)
        from dataclasses import replace
        params = replace(params, cavity=replace(
            params.cavity, detuning_Delta0=target_delta + beta * I))

    fb_sec = doc.get("feedback") or {}
    kind = _get(fb_sec, "kind", "feedback", "off")
    if kind not in ("off", "proportional", "closed-form"):
        raise ConfigError(f"feedback.kind must be off, proportional or closed-form, "
                          f"got {kind!r}")
    gains = fb_sec.get("gains_rad_per_s")
    gain_scale = fb_sec.get("gain_scale")
    if kind == "proportional" and gains is None and gain_scale is None:
        raise ConfigError("proportional feedback needs gain_scale or gains_rad_per_s")
    feedback = FeedbackSpec(
        kind=kind,
        gain_scale=None if gain_scale is None else _num(gain_scale, "feedback.gain_scale"),
        gains=None if gains is None else tuple(_num(g, "feedback.gains_rad_per_s")
                                               for g in gains))

    grid_sec = doc.get("grid") or {}
    grid = FrequencyGrid.build(
        omega_min=_freq(grid_sec, "omega_min", "grid", default=1e4),
        omega_max=_freq(grid_sec, "omega_max", "grid", default=max(
            [kappa] + [1.2 * m.omega_j for m in modes])),
        modes=modes,
        policy=_get(grid_sec, "policy", "grid", "log-with-resonance-refinement"),
        points_per_decade=int(_num(_get(grid_sec, "points_per_decade", "grid", 2000),
                                   "grid.points_per_decade")),
        n_points=(int(_num(grid_sec["n_points"], "grid.n_points"))
                  if "n_points" in grid_sec else None))

    band_sec = doc.get("band") or {}
    band = BandObjective(
        omega_lo=_freq(band_sec, "omega_lo", "band", default=1e4),
        omega_hi=_freq(band_sec, "omega_hi", "band", default=1.2e5),
        weight=_get(band_sec, "weight", "band", "log-uniform"))

    oracle_sec = doc.get("oracle") or {}

    return RunConfig(params=params, feedback=feedback, grid=grid, band=band,
                     oracle=dict(oracle_sec), target_effective_detuning=target_delta,
                     raw=doc)


def _preset_path(name: str):
    return importlib.resources.files("squeezelab") / "presets" / f"{name}.yaml"


def available_presets() -> list[str]:
    root = importlib.resources.files("squeezelab") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_config(path_or_preset: str) -> RunConfig:
    """Load a config file, or a named preset when no such file exists."""
    p = Path(path_or_preset)
    if p.exists():
        text = p.read_text()
        source = str(p)
    else:
        res = _preset_path(path_or_preset)
        if not res.is_file():
            raise ConfigError(
                f"no config file {path_or_preset!r} and no such preset "
                f"(available: {', '.join(available_presets())})")
        text = res.read_text()
        source = f"preset:{path_or_preset}"
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return parse_config(doc, source=source)
