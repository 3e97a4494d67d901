"""Batch command-line front end.

Subcommands: spectrum, phase-scan, sweep, optimize, oracle, stability.
Every run writes a plain delimited data file with a commented header plus a
YAML manifest next to it; data files contain no timestamps so reruns with
the same config are byte-identical.

Exit codes: 0 success, 2 config error, 3 instability refusal, 4 numerical
error.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import RunConfig, load_config
from .errors import (ConfigError, InstabilityError, NumericalError,
                     ParameterError, SingularResponseError, SqueezelabError)
from .model import VACUUM_NOISE, solve_steady_state
from .optimize import BandObjective, band_objective, tune_feedback
from .oracle import (TrajectoryConfig, compare_to_analytic, estimate_spectra,
                     simulate)
from .response import FeedbackLaw
from .spectra import (FrequencyGrid, evaluate_grid, optimal_spectrum,
                      phase_spectrum, quadrature_spectra, resonant_fast_path,
                      squeezing_phase_window, to_decibels)
from .stability import is_stable

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_NUMERICAL = 4


def _fmt(value) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ""
    if isinstance(value, str):
        return value
    return f"{value:.17g}"


def write_table(path: Path, columns: dict, header_lines: list[str]) -> None:
    """Delimited text with '#' header naming columns; blank cells for NaN."""
    names = list(columns)
    n = len(next(iter(columns.values())))
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("# columns: " + "\t".join(names) + "\n")
        for i in range(n):
            fh.write("\t".join(_fmt(columns[c][i]) for c in names) + "\n")


def read_table(path) -> dict:
    """Round-trip parser for files produced by write_table."""
    names = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                if line.startswith("# columns:"):
                    names = line.split(":", 1)[1].split()
                continue
            if not line.strip():
                continue
            rows.append(line.split("\t"))
    if names is None:
        raise ParameterError(f"{path}: missing '# columns:' header")
    out = {}
    for i, name in enumerate(names):
        cells = [row[i] for row in rows]
        try:
            out[name] = np.array([float(v) if v else np.nan for v in cells])
        except ValueError:
            out[name] = np.array(cells, dtype=object)
    return out


def _write_manifest(path: Path, cfg: RunConfig, steady, report, grid_desc,
                    elapsed: float, extra: dict | None = None) -> None:
    doc = {
        "tool": {"name": "squeezelab", "version": __version__},
        "config": cfg.raw,
        "steady_state": {
            "alpha_s": float(steady.alpha_s),
            "intensity": float(steady.intensity_I),
            "effective_detuning_rad_per_s": float(steady.effective_detuning_Delta),
            "branch_count": int(steady.branch_count),
            "effective_couplings_rad_per_s": [float(g) for g in steady.G],
        },
        "stability": None if report is None else {
            "verdict": report.verdict,
            "max_im_rad_per_s": float(report.max_im),
            "margin_threshold_rad_per_s": float(report.margin_threshold),
            "roots_rad_per_s": [[float(r.real), float(r.imag)]
                                for r in report.roots],
        },
        "grid": grid_desc,
        "wall_clock_s": elapsed,
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def _resolve_feedback(cfg: RunConfig, steady, choice: str) -> FeedbackLaw:
    if choice == "off":
        return FeedbackLaw.off()
    if choice in ("on", "config"):
        return cfg.feedback.build(steady, cfg.params.detection)
    # otherwise: a YAML file {kind, gain_scale|gains_rad_per_s}
    other = load_config_feedback(choice)
    return other.build(steady, cfg.params.detection)


def load_config_feedback(path: str):
    from .config import FeedbackSpec, _num
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"feedback file {path}: {exc}") from exc
    fb = doc.get("feedback", doc)
    gains = fb.get("gains_rad_per_s")
    return FeedbackSpec(
        kind=fb.get("kind", "off"),
        gain_scale=fb.get("gain_scale"),
        gains=None if gains is None else tuple(float(g) for g in gains))


def _gate(cfg: RunConfig, steady, feedback: FeedbackLaw, force: bool):
    report = is_stable(cfg.params, steady, feedback)
    if not report.stable and not force:
        worst = report.roots[np.argmax(report.roots.imag)] if report.roots.size else 0
        raise InstabilityError(
            f"configuration is {report.verdict}: worst root omega = "
            f"{worst:.6g} rad/s (use --force to override)")
    return report


def cmd_spectrum(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    grid = _override_grid(cfg, args)
    steady = cfg.steady_branch()
    feedback = _resolve_feedback(cfg, steady, args.feedback)
    report = _gate(cfg, steady, feedback, args.force)

    table = evaluate_grid(cfg.params, steady, feedback, grid)
    S_dB = to_decibels(table.S_opt)
    out = Path(args.out)
    write_table(out, {
        "omega_rad_per_s": table.omega,
        "S_X": table.S_X, "S_Y": table.S_Y, "S_XY": table.S_XY,
        "S_r": table.S_r,
        "S_opt": table.S_opt, "S_opt_dB": S_dB,
        "phi_opt_rad": table.phi_opt,
    }, ["squeezelab spectrum; shot noise = 1/2 (0 dB)"])
    _write_manifest(out.with_suffix(out.suffix + ".manifest.yaml"), cfg, steady,
                    report, _grid_desc(grid), time.perf_counter() - t0)
    print(f"wrote {out} ({len(table.omega)} points)")
    return EXIT_OK


def _grid_desc(grid: FrequencyGrid) -> dict:
    return {"policy": grid.policy, "n_points": int(len(grid.points)),
            "omega_min_rad_per_s": float(grid.points[0]),
            "omega_max_rad_per_s": float(grid.points[-1])}


def _override_grid(cfg: RunConfig, args) -> FrequencyGrid:
    if getattr(args, "grid", None):
        parts = args.grid.split(",")
        if len(parts) not in (2, 3):
            raise ConfigError("--grid expects lo,hi[,n_points]")
        lo, hi = float(parts[0]), float(parts[1])
        n = int(parts[2]) if len(parts) == 3 else None
        return FrequencyGrid.build(lo, hi, cfg.params.modes,
                                   policy=cfg.grid.policy, n_points=n)
    return cfg.grid


def _override_band(cfg: RunConfig, args) -> BandObjective:
    if getattr(args, "band", None):
        lo, hi = (float(v) for v in args.band.split(","))
        return BandObjective(omega_lo=lo, omega_hi=hi, weight=cfg.band.weight)
    return cfg.band


def cmd_phase_scan(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    scan = cfg.raw.get("phase_scan", {})
    omega = args.omega if args.omega is not None else \
        float(scan.get("omega_rad_per_s", 1e4))
    n_phi = int(scan.get("n_points", 4001))
    steady = cfg.steady_branch()
    feedback = _resolve_feedback(cfg, steady, args.feedback)
    report = _gate(cfg, steady, feedback, args.force)

    S_X, S_Y, S_XY = quadrature_spectra(cfg.params, steady, feedback,
                                        VACUUM_NOISE, omega)
    phi = np.linspace(-np.pi / 2, np.pi / 2, n_phi)
    # deep squeezing dips can be narrower than the uniform spacing, so the
    # scan is refined around the optimal phase
    _, phi_opt = optimal_spectrum(S_X, S_Y, S_XY)
    halfwidth = 5.0 * min(squeezing_phase_window(S_XY), np.pi / 8)
    refine = np.linspace(phi_opt - halfwidth, phi_opt + halfwidth, 801)
    phi = np.unique(np.concatenate([phi, refine]))
    phi = phi[(phi >= -np.pi / 2) & (phi <= np.pi / 2)]
    S_phi = phase_spectrum(S_X, S_Y, S_XY, phi)
    out = Path(args.out)
    write_table(out, {
        "phi_rad": phi,
        "S_phi": S_phi,
        "S_phi_dB": to_decibels(S_phi),
    }, [f"squeezelab phase-scan at omega = {omega:g} rad/s"])
    _write_manifest(out.with_suffix(out.suffix + ".manifest.yaml"), cfg, steady,
                    report, {"phase_points": int(len(phi)),
                             "omega_rad_per_s": omega},
                    time.perf_counter() - t0)
    print(f"wrote {out} ({len(phi)} phases)")
    return EXIT_OK


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    band = _override_band(cfg, args)
    lo, hi, n = args.range.split(",")
    values = (np.geomspace(float(lo), float(hi), int(n)) if args.log
              else np.linspace(float(lo), float(hi), int(n)))

    rows = {"value": [], "band_objective": [], "figure_of_merit": [],
            "status": []}
    steady0 = cfg.steady_branch()
    for v in values:
        # Re-parse with the swept value substituted so that a configured
        # target effective detuning is re-resolved at each point.
        import copy
        from .config import parse_config
        raw = copy.deepcopy(cfg.raw)
        if args.axis == "Pin":
            raw["drive"]["input_power_w"] = float(v)
        elif args.axis == "T":
            raw["bath"]["temperature_k"] = float(v)
        elif args.axis == "theta":
            raw.setdefault("detection", {})["homodyne_phase_rad"] = float(v)
        sub = parse_config(raw, source=f"sweep:{args.axis}={v:g}")
        p = sub.params
        steady = sub.steady_branch()
        if args.axis == "gain_scale":
            feedback = FeedbackLaw.proportional(float(v) * steady.G) \
                if v != 0.0 else FeedbackLaw.off()
        else:
            feedback = _resolve_feedback(sub, steady, args.feedback)
        report = is_stable(p, steady, feedback)
        if not report.stable:
            rows["value"].append(float(v))
            rows["band_objective"].append(np.nan)
            rows["figure_of_merit"].append(np.nan)
            rows["status"].append("refused-" + report.verdict.lower())
            continue
        obj = band_objective(p, steady, feedback, band, check_stability=False)
        try:
            res = resonant_fast_path(p, steady, feedback, band.omega_lo)
            fom = float(2.0 * res.S_XY**2 / res.S_r) if res.S_r != 0 else np.nan
        except ParameterError:
            fom = np.nan  # off-resonant operating point: S_r undefined
        rows["value"].append(float(v))
        rows["band_objective"].append(obj)
        rows["figure_of_merit"].append(fom)
        rows["status"].append("ok")

    out = Path(args.out)
    write_table(out, rows,
                [f"squeezelab sweep over {args.axis}",
                 "figure_of_merit = 2 S_XY^2 / S_r at the band's low edge"])
    _write_manifest(out.with_suffix(out.suffix + ".manifest.yaml"), cfg, steady0,
                    None, {"axis": args.axis, "n_points": int(n)},
                    time.perf_counter() - t0)
    print(f"wrote {out} ({len(values)} sweep points)")
    return EXIT_OK


def cmd_optimize(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    band = _override_band(cfg, args)
    steady = cfg.steady_branch()
    result = tune_feedback(cfg.params, band, search_budget=args.budget,
                           steady=steady,
                           seed=args.seed if args.seed is not None else 0)
    objective_off = band_objective(cfg.params, steady, FeedbackLaw.off(),
                                   band, check_stability=False)
    out = Path(args.out)
    trace = np.array(result.evaluations) if result.evaluations \
        else np.empty((0, 3))
    write_table(out, {
        "theta_rad": trace[:, 0] if trace.size else np.array([]),
        "gain_scale": trace[:, 1] if trace.size else np.array([]),
        "objective": trace[:, 2] if trace.size else np.array([]),
    }, ["squeezelab optimize evaluation trace"])
    _write_manifest(out.with_suffix(out.suffix + ".manifest.yaml"), cfg, steady,
                    None, {"band": [band.omega_lo, band.omega_hi]},
                    time.perf_counter() - t0,
                    extra={"optimum": {
                        "theta_rad": float(result.theta),
                        "gain_scale": float(result.gain_scale),
                        "objective": float(result.objective),
                        "objective_feedback_off": float(objective_off),
                        "budget_exhausted": bool(result.budget_exhausted),
                    }})
    print(f"optimum: theta = {result.theta:.4g} rad, gain scale = "
          f"{result.gain_scale:.4g}, band objective = {result.objective:.4g}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    osec = cfg.oracle
    steady = cfg.steady_branch()
    feedback = _resolve_feedback(cfg, steady, args.feedback)
    tcfg = TrajectoryConfig(
        dt=float(osec.get("dt_s", 4e-8)),
        duration=float(osec.get("duration_s", 0.5)),
        seed=args.seed if args.seed is not None else int(osec.get("seed", 0)))
    traj = simulate(cfg.params, steady, feedback, tcfg, force=args.force)
    if traj.diverged:
        print("trajectory diverged (unstable configuration)")
        return EXIT_NUMERICAL
    est = estimate_spectra(traj,
                           segment_length=int(osec.get("segment_length", 65536)),
                           overlap=float(osec.get("overlap", 0.5)))
    band = (cfg.band.omega_lo, cfg.band.omega_hi)
    mask = (est.frequencies >= band[0] / 2) & (est.frequencies <= band[1] * 2)
    omega = est.frequencies[mask]
    S_X, S_Y, S_XY = quadrature_spectra(cfg.params, steady, feedback,
                                        VACUUM_NOISE, omega)
    notches = tuple((m.omega_j, 3.0 * m.gamma_j) for m in cfg.params.modes)
    report = compare_to_analytic(
        EstimatedSpectra_slice(est, mask), omega,
        {"S_Y": S_Y, "S_XY": S_XY}, band,
        tolerance=float(osec.get("tolerance", 0.10)), notches=notches)

    out = Path(args.out)
    write_table(out, {
        "omega_rad_per_s": omega,
        "S_X_est": est.S_X[mask], "S_Y_est": est.S_Y[mask],
        "S_XY_est": est.S_XY[mask],
        "S_X_analytic": S_X, "S_Y_analytic": S_Y, "S_XY_analytic": S_XY,
    }, [f"squeezelab oracle; {est.segment_count} Welch segments, seed {traj.seed}"])
    _write_manifest(out.with_suffix(out.suffix + ".manifest.yaml"), cfg, steady,
                    None, {"segments": est.segment_count},
                    time.perf_counter() - t0,
                    extra={"comparison": {
                        "band_rad_per_s": list(report.band),
                        "tolerance": report.tolerance,
                        "deviations": report.deviations,
                        "n_bins": report.n_bins,
                        "passed": bool(report.passed),
                    }})
    status = "PASS" if report.passed else "FAIL"
    print(f"{status}: deviations {report.deviations} over {report.n_bins} bins")
    return EXIT_OK if report.passed else EXIT_NUMERICAL


def EstimatedSpectra_slice(est, mask):
    from .oracle import EstimatedSpectra
    return EstimatedSpectra(
        frequencies=est.frequencies[mask], S_X=est.S_X[mask],
        S_Y=est.S_Y[mask], S_XY=est.S_XY[mask], se_X=est.se_X[mask],
        se_Y=est.se_Y[mask], se_XY=est.se_XY[mask],
        segment_count=est.segment_count)


def cmd_stability(args) -> int:
    cfg = load_config(args.config)
    steady = cfg.steady_branch()
    feedback = _resolve_feedback(cfg, steady, args.feedback)
    report = is_stable(cfg.params, steady, feedback)
    out = Path(args.out)
    write_table(out, {
        "root_re_rad_per_s": report.roots.real,
        "root_im_rad_per_s": report.roots.imag,
    }, [f"squeezelab stability: {report.verdict} "
        f"(max Im = {report.max_im:.6g} rad/s)"])
    print(f"{report.verdict}: max Im omega = {report.max_im:.6g} rad/s "
          f"({len(report.roots)} roots)")
    return EXIT_OK if report.stable else EXIT_UNSTABLE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="squeezelab",
        description="Ponderomotive squeezing spectra with homodyne feedback")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", required=True,
                       help="config file path or preset name (fig2, fig3b, ...)")
        if out:
            p.add_argument("--out", required=True, help="output data file")
        p.add_argument("--feedback", default="config",
                       help="on|off|config|<feedback yaml>")
        p.add_argument("--force", action="store_true",
                       help="proceed despite an unstable verdict")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("spectrum", help="quadrature spectra over a grid")
    common(p)
    p.add_argument("--grid", help="lo,hi[,n_points] in rad/s")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("phase-scan", help="S^phi versus homodyne phase")
    common(p)
    p.add_argument("--omega", type=float, default=None, help="rad/s")
    p.set_defaults(func=cmd_phase_scan)

    p = sub.add_parser("sweep", help="band objective along a parameter axis")
    common(p)
    p.add_argument("--axis", required=True,
                   choices=["Pin", "T", "gain_scale", "theta"])
    p.add_argument("--range", required=True, help="lo,hi,n")
    p.add_argument("--log", action="store_true", help="log-spaced sweep values")
    p.add_argument("--band", help="lo,hi in rad/s")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("optimize", help="tune feedback phase and gain")
    common(p)
    p.add_argument("--band", help="lo,hi in rad/s")
    p.add_argument("--budget", type=int, default=400)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("oracle", help="time-domain validation run")
    common(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("stability", help="characteristic roots and verdict")
    common(p)
    p.set_defaults(func=cmd_stability)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InstabilityError as exc:
        print(f"instability refusal: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (NumericalError, SingularResponseError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
