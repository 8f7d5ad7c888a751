"""Command-line entry point binding the solvers into reproducible runs.

Every command reads a single-object JSON config (unknown keys rejected),
materializes all defaults, and writes a run directory:

    <out>/config.json        resolved configuration
    <out>/diagnostics.csv    fixed-schema time series (when a run evolves)
    <out>/report.json        command-specific results
    <out>/snaps/snap_<i>.json  field snapshots at the snapshot stride

Exit codes: 0 success, 1 unknown command, 2 validation error, 3 solver
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, perturbation_field
from .evolution import (
    EvolutionError,
    StepConfig,
    conserved_quantities,
    diagnostics_to_csv,
    evolve,
)
from .grid import Field, field_from_json, field_to_json
from .miura import miura_identity_residual
from .profiles import soliton_samples
from .quadform import QuadFormKind, coercivity, lieb_thirring_report
from .schroedinger import (
    EigensolverError,
    InversionError,
    NewtonDivergenceError,
    NoBoundStateError,
    SpectrumBelowThreshold,
    invert,
)
from .stability import (
    ModulationError,
    apriori_check,
    run_asymptotic_decay,
    run_kink_stability,
    run_soliton_pipeline,
)

COMMANDS = (
    "simulate",
    "invert",
    "quadform",
    "identity-check",
    "kink-stability",
    "soliton-pipeline",
    "apriori",
    "decay",
)

_SOLVER_ERRORS = (
    EvolutionError,
    SpectrumBelowThreshold,
    NoBoundStateError,
    InversionError,
    NewtonDivergenceError,
    EigensolverError,
    ModulationError,
)


def _usage() -> str:
    lines = [f"miura-lab {__version__} - KdV/mKdV stability laboratory", "", "commands:"]
    lines += [f"  {c}" for c in COMMANDS]
    lines.append("")
    lines.append("common flags: --config <path> --out <dir> --format json|csv --seed <int>")
    return "\n".join(lines)


def _build_parser(command: str) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=f"miura-lab {command}", add_help=True)
    parser.add_argument("--config", type=str, default=None)
    parser.add_argument("--out", type=str, default=None)
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--seed", type=int, default=None)
    if command == "invert":
        parser.add_argument("--branch", choices=("f-lambda", "f-star"), required=True)
        parser.add_argument("--field", type=str, default=None)
        parser.add_argument("--lam", type=float, default=None)
    if command == "decay":
        parser.add_argument("--gamma", type=float, default=None)
    if command == "quadform":
        parser.add_argument("--refine", action="store_true")
    return parser


def _load_config(path: Optional[str], seed: Optional[int]) -> ExperimentConfig:
    if path is None:
        cfg = ExperimentConfig()
    else:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        cfg = ExperimentConfig.from_json(p.read_text())
    if seed is not None:
        cfg = cfg.with_seed(seed)
    return cfg


def _load_field(path: str) -> Field:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"field file not found: {p}")
    return field_from_json(p.read_text())


def _run_dir(cfg: ExperimentConfig, out: Optional[str]) -> Path:
    target = Path(out) if out else Path(cfg.output_dir or f"runs/{cfg.name}")
    target.mkdir(parents=True, exist_ok=True)
    return target

def _write_run(
    run_dir: Path,
    cfg: ExperimentConfig,
    report: dict,
    diagnostics: Optional[list] = None,
    snapshots: Optional[list] = None,
) -> None:
    (run_dir / "config.json").write_text(cfg.to_json() + "\n")
    (run_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if diagnostics is not None:
        (run_dir / "diagnostics.csv").write_text(diagnostics_to_csv(diagnostics))
    if snapshots:
        snap_dir = run_dir / "snaps"
        snap_dir.mkdir(exist_ok=True)
        for index, _t, fld in snapshots:
            (snap_dir / f"snap_{index}.json").write_text(field_to_json(fld) + "\n")


def _initial_field(cfg: ExperimentConfig):
    grid = cfg.grid.build()
    if cfg.initial_field is not None:
        return _load_field(cfg.initial_field)
    pert = perturbation_field(cfg.perturbation, grid)
    if cfg.model == "kdv":
        base = soliton_samples(grid.nodes, cfg.profile.c, cfg.profile.x0)
        return Field(grid, base + pert.samples)
    # mkdv evolves the plain field, kink_frame the deviation from tanh.
    return pert


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config, args.seed)
    initial = _initial_field(cfg)
    step = StepConfig(
        dt=cfg.stepping.dt,
        t_end=cfg.stepping.t_end,
        diagnostic_stride=cfg.stepping.diagnostic_stride,
        snapshot_stride=cfg.stepping.snapshot_stride,
    )
    boundary = float(cfg.tolerances.get("boundary", 1e-4))
    traj = evolve(cfg.model, initial, step, boundary_tolerance=boundary)
    summary = {
        "model": cfg.model,
        "t_end": traj.times[-1],
        "steps": step.n_steps,
        "final_l2": traj.diagnostics[-1].get("l2"),
    }
    if cfg.model in ("kdv", "mkdv"):
        summary["conserved_final"] = conserved_quantities(traj.final, cfg.model)
    run_dir = _run_dir(cfg, args.out)
    _write_run(run_dir, cfg, summary, traj.diagnostics, traj.snapshots)
    _emit(args, summary, traj.diagnostics)
    return 0


def _cmd_invert(args) -> int:
    cfg = _load_config(args.config, args.seed)
    if args.field is not None:
        target = _load_field(args.field)
    elif cfg.initial_field is not None:
        target = _load_field(cfg.initial_field)
    else:
        raise ConfigError("invert requires --field or config initial_field")
    branch = "F_star" if args.branch == "f-star" else "F_lambda"
    lam = args.lam if args.lam is not None else (cfg.profile.lam if branch == "F_lambda" else None)
    tol = float(cfg.tolerances.get("inversion", 1e-6))
    result = invert(target, branch, lam=lam, tol=tol)
    payload = {
        "branch": result.branch,
        "lambda": result.lam,
        "rho": result.rho,
        "residual": result.residual,
        "r_tilde": json.loads(field_to_json(result.r_tilde)),
    }
    run_dir = _run_dir(cfg, args.out)
    _write_run(run_dir, cfg, payload)
    _emit(args, payload, None)
    return 0


def _cmd_quadform(args) -> int:
    cfg = _load_config(args.config, args.seed)
    report = lieb_thirring_report()
    bounds = {}
    for label, kind, metric in (
        ("B_L2", QuadFormKind("B"), "L2"),
        ("B_H1", QuadFormKind("B"), "H1"),
        ("B_hat_H1", QuadFormKind("B_hat"), "H1"),
    ):
        entry = coercivity(kind, metric, "with")
        bounds[label] = {
            "min_generalized_eigenvalue": entry.min_generalized_eigenvalue,
            "L": entry.half_length,
            "N": entry.point_count,
        }
        if args.refine:
            from .grid import make_grid

            fine = coercivity(
                kind, metric, "with",
                grid=make_grid(entry.half_length, 2 * entry.point_count),
            )
            bounds[label]["refined_eigenvalue"] = fine.min_generalized_eigenvalue
            bounds[label]["refinement_shift"] = abs(
                fine.min_generalized_eigenvalue - entry.min_generalized_eigenvalue
            )
    report["coercivity"] = bounds
    run_dir = _run_dir(cfg, args.out)
    _write_run(run_dir, cfg, report)
    _emit(args, report, None)
    return 0


def _cmd_identity_check(args) -> int:
    cfg = _load_config(args.config, args.seed)
    grid = cfg.grid.build()
    tol = float(cfg.tolerances.get("identity_residual", 1e-8))
    seed = cfg.perturbation.seed
    rng = np.random.default_rng(seed)
    residuals = []
    for _ in range(int(cfg.tolerances.get("identity_samples", 20))):
        u = _band_limited(grid, rng)
        u_t = _band_limited(grid, rng)
        residuals.append(miura_identity_residual(u, u_t))
    report = {
        "max_residual": max(residuals),
        "tolerance": tol,
        "passed": max(residuals) < tol,
        "residuals": residuals,
    }
    run_dir = _run_dir(cfg, args.out)
    _write_run(run_dir, cfg, report)
    _emit(args, report, None)
    return 0 if report["passed"] else 3


def _band_limited(grid, rng, n_modes: int = 10, amplitude: float = 0.1) -> Field:
    x = grid.nodes
    L = grid.half_length
    wave = np.zeros(grid.point_count)
    coeffs = rng.standard_normal(n_modes) + 1j * rng.standard_normal(n_modes)
    for m, a in enumerate(coeffs, start=1):
        wave += np.real(a * np.exp(1j * math.pi * m * (x + L) / L))
    return Field(grid, amplitude * wave / max(1.0, np.max(np.abs(wave))))


def _cmd_kink_stability(args) -> int:
    cfg = _load_config(args.config, args.seed)
    report = run_kink_stability(cfg)
    run_dir = _run_dir(cfg, args.out)
    snapshots = report.trajectory.snapshots if report.trajectory is not None else None
    _write_run(run_dir, cfg, report.to_dict(), report.diagnostics, snapshots)
    _emit(args, report.to_dict(), report.diagnostics)
    return 0 if report.aborted is None else 3


def _cmd_decay(args) -> int:
    cfg = _load_config(args.config, args.seed)
    gamma = args.gamma if args.gamma is not None else cfg.weights.gamma
    report = run_asymptotic_decay(cfg, gamma=gamma)
    run_dir = _run_dir(cfg, args.out)
    snapshots = report.trajectory.snapshots if report.trajectory is not None else None
    _write_run(run_dir, cfg, report.to_dict(), report.diagnostics, snapshots)
    _emit(args, report.to_dict(), report.diagnostics)
    return 0 if report.aborted is None else 3


def _cmd_soliton_pipeline(args) -> int:
    cfg = _load_config(args.config, args.seed)
    report = run_soliton_pipeline(cfg)
    run_dir = _run_dir(cfg, args.out)
    _write_run(run_dir, cfg, report.to_dict(), report.diagnostics)
    _emit(args, report.to_dict(), report.diagnostics)
    return 0


def _cmd_apriori(args) -> int:
    cfg = _load_config(args.config, args.seed)
    grid = cfg.grid.build()
    base = perturbation_field(cfg.perturbation, grid)
    scales = cfg.tolerances.get("family_scales", [0.1, 0.2, 0.4])
    family = [Field(grid, float(s) * base.samples) for s in scales]
    report = apriori_check(family, cfg)
    report["family_scales"] = list(scales)
    run_dir = _run_dir(cfg, args.out)
    _write_run(run_dir, cfg, report)
    _emit(args, report, None)
    return 0 if report["n_failed"] == 0 else 3


def _emit(args, report: dict, diagnostics: Optional[list]) -> None:
    if args.format == "csv" and diagnostics is not None:
        sys.stdout.write(diagnostics_to_csv(diagnostics))
    else:
        sys.stdout.write(json.dumps(report, indent=2, sort_keys=True, default=str) + "\n")


_HANDLERS = {
    "simulate": _cmd_simulate,
    "invert": _cmd_invert,
    "quadform": _cmd_quadform,
    "identity-check": _cmd_identity_check,
    "kink-stability": _cmd_kink_stability,
    "soliton-pipeline": _cmd_soliton_pipeline,
    "apriori": _cmd_apriori,
    "decay": _cmd_decay,
}


def main(argv: Optional[list] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(_usage())
        return 0 if argv else 1
    command, rest = argv[0], argv[1:]
    if command not in _HANDLERS:
        print(_usage())
        print(f"\nunknown command: {command}", file=sys.stderr)
        return 1
    parser = _build_parser(command)
    try:
        args = parser.parse_args(rest)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        return _HANDLERS[command](args)
    except (ConfigError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except _SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
