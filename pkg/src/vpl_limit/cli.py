"""Command-line entry point ``vpl-limit``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
3 property-suite failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from .config import COMMANDS, ConfigError, ExperimentConfig, load_config, parse_config
from .errors import NumericalError, PropertyFailure
from .phase_grid import DomainError, OverflowGuardError, SpatialGrid, VelocityGrid, default_extent

__all__ = ["main", "build_parser", "execute", "EXIT_OK", "EXIT_USAGE", "EXIT_NUMERICAL",
           "EXIT_PROPERTY"]

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_PROPERTY = 0, 1, 2, 3

log = logging.getLogger("vpl_limit")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(suppress: bool) -> argparse.ArgumentParser:
    # subcommand copies use SUPPRESS so they do not clobber values given before the subcommand
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=d(None), help="TOML experiment file")
    common.add_argument("--quick", action="store_true", default=d(False),
                        help="16^3 velocity grids and 16 cells")
    common.add_argument("--seed", type=int, default=d(None), help="override the config seed")
    common.add_argument("--threads", type=int, default=d(None),
                        help="worker threads for compiled kernels")
    common.add_argument("--output", type=Path, default=d(None), help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vpl-limit", description=__doc__.splitlines()[0], parents=[_common(False)])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    helps = {
        "simulate": "run one simulation; write diagnostics, summary and snapshots",
        "sweep": "coupled runs over eps against the limit run",
        "pp-solve": "solve the Poincare-Poisson equation for a given ion density",
        "check-kernel-bounds": "sample the kernel upper/lower bound ratios",
        "boltzmann-expand": "Landau vs Boltzmann cross-collision norms over eps",
        "macro-diagnose": "local conservation-law residuals along a trajectory",
        "nondim": "dimensionless numbers from physical parameters",
    }
    for name in COMMANDS:
        sub.add_parser(name, help=helps[name], parents=[_common(True)])
    return parser


def _resolve(args) -> ExperimentConfig:
    if args.config is not None:
        try:
            cfg = load_config(args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if args.command and cfg.command != args.command:
            raise ConfigError(f"command: config says {cfg.command!r} but {args.command!r} was requested",
                              "command")
    elif args.command:
        cfg = parse_config(f'command = "{args.command}"\n')
    else:
        raise ConfigError("missing command", "command")
    return cfg.with_overrides(seed=args.seed, output_dir=args.output)


def _set_threads(n: Optional[int]):
    if n is None:
        return
    if n < 1:
        raise ConfigError("threads: must be at least 1", "threads")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


# ---------------------------------------------------------------------------
# commands


def _out(cfg: ExperimentConfig, suffix: str = "", ext: str = "") -> Path:
    from .serialization import output_name
    return Path(cfg.output_dir) / output_name(cfg.command, cfg.seed, suffix, ext)


def _grid_meta(sim) -> dict:
    return {"x": sim.xgrid.to_dict(), "ion": sim.igrid.to_dict(), "electron": sim.egrid.to_dict()}


def cmd_simulate(cfg: ExperimentConfig, quick: bool) -> int:
    from .serialization import write_csv, write_json, write_snapshot, write_trajectory
    from .simulator import DIAGNOSTIC_COLUMNS, Simulator, run

    sim_cfg = cfg.simulation(quick)
    result = run(sim_cfg, keep_frames=sim_cfg.mode == "coupled")
    files = [write_csv(_out(cfg, "diagnostics", "csv"), DIAGNOSTIC_COLUMNS, result.diagnostics.rows)]
    sim = Simulator(sim_cfg)
    meta = {"eps": sim_cfg.eps, "mode": sim_cfg.mode, "grids": _grid_meta(sim),
            "species": ["ion", "electron"] if sim_cfg.mode != "limit" else ["ion"],
            "config": sim_cfg.to_dict()}
    if result.frames:
        files.append(write_trajectory(_out(cfg, "", "snap"), result.frames, meta))
    else:
        st = result.state
        fields = {"F_plus": st.F_plus, "psi": st.psi}
        if st.F_minus is not None:
            fields["F_minus"] = st.F_minus
        files.append(write_snapshot(_out(cfg, "", "snap"), fields,
                                    {**meta, "t": st.t, "gamma": st.gamma}))
    summary = {"command": cfg.command, "seed": cfg.seed, "config": sim_cfg.to_dict(),
               "drifts": result.summary, "fit": {}}
    files.append(write_json(_out(cfg, "summary", "json"), summary, "run_summary"))
    _report(files)
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, quick: bool) -> int:
    from .serialization import write_csv, write_json
    from .simulator import DIAGNOSTIC_COLUMNS, sweep_epsilon

    sim_cfg = cfg.simulation(quick)
    eps_values = cfg.section("sweep")["eps_values"]
    res = sweep_epsilon(sim_cfg, eps_values, progress=log.info)
    files = [write_csv(_out(cfg, "", "csv"), ("eps", "ion_error", "dissipation", "envelope_ratio"),
                       zip(res.eps, res.ion_error, res.dissipation, res.envelope_ratios))]
    for eps in res.eps:
        files.append(write_csv(_out(cfg, f"eps{eps:g}", "csv"), DIAGNOSTIC_COLUMNS, res.runs[eps].rows))
    checks = {
        "ion_error_slope": abs(res.slopes["ion_error"] - 1.0) <= 0.3,
        "dissipation_slope": abs(res.slopes["dissipation"] - 2.0) <= 0.4,
        "envelope_finite": bool(np.isfinite(res.envelope_constant)),
    }
    report = {"command": cfg.command, "seed": cfg.seed, "config": sim_cfg.to_dict(),
              **res.to_dict(), "checks": checks, "passed": all(checks.values())}
    files.append(write_json(_out(cfg, "summary", "json"), report, "sweep_report"))
    _report(files)
    return EXIT_OK if report["passed"] else EXIT_PROPERTY


def pp_density(section: dict, quick: bool) -> np.ndarray:
    if section["profile"]:
        return np.asarray(section["profile"], dtype=float)
    n_x = 16 if quick else section["n_x"]
    x = SpatialGrid(n_x).nodes
    return 1.0 + section["amplitude"] * np.cos(2.0 * np.pi * section["wavenumber"] * x)


def cmd_pp_solve(cfg: ExperimentConfig, quick: bool) -> int:
    from .field_solver import solve_poincare_poisson
    from .serialization import write_csv, write_json

    sec = cfg.section("pp_solve")
    n_plus = pp_density(sec, quick)
    xgrid = SpatialGrid(n_plus.size)
    mass = float(xgrid.integrate(n_plus))
    res = solve_poincare_poisson(n_plus, sec["gamma"], mass, xgrid, tol=sec["tol"],
                                 max_iter=sec["max_iter"], full_output=True)
    files = [write_csv(_out(cfg, "psi", "csv"), ("x", "n_plus", "psi"),
                       zip(xgrid.nodes, n_plus, res.psi))]
    report = {"command": cfg.command, "seed": cfg.seed, "gamma": sec["gamma"], "n_x": int(n_plus.size),
              "electron_mass": mass, **res.to_dict(), "converged": True}
    files.append(write_json(_out(cfg, "report", "json"), report, "pp_report"))
    _report(files)
    return EXIT_OK


def cmd_check_kernel_bounds(cfg: ExperimentConfig, quick: bool) -> int:
    from .landau_kernel import random_nonnegative_field, verify_kernel_bounds
    from .serialization import write_json

    sec = cfg.section("kernel_bounds")
    grid = VelocityGrid(16 if quick else sec["n"], sec["extent"])
    rng = np.random.default_rng(cfg.seed)
    fields = [random_nonnegative_field(grid, rng) for _ in range(sec["fields"])]
    rep = verify_kernel_bounds(fields, grid, sec["samples"], rng)
    out = {**rep.to_dict(), "fields": sec["fields"], "violations": rep.violations,
           "passed": rep.passed, "seed": cfg.seed}
    _report([write_json(_out(cfg, "", "json"), out, "kernel_bounds")])
    return EXIT_OK if rep.passed else EXIT_PROPERTY


def cmd_boltzmann_expand(cfg: ExperimentConfig, quick: bool) -> int:
    from .boltzmann_compare import BoltzmannReport, SphereQuadrature, landau_vs_boltzmann_report
    from .serialization import write_csv, write_json

    sec = cfg.section("boltzmann")
    shrink = (lambda n: min(n, 8 if n < 16 else 12)) if quick else (lambda n: n)
    rep = landau_vs_boltzmann_report(
        sec["eps_values"], shift=tuple(sec["shift"]), beta=sec["beta"], ion_q=sec["ion_q"],
        ion_grid=VelocityGrid(shrink(sec["ion_n"]), 5.0),
        electron_grid=VelocityGrid(shrink(sec["electron_n"]), 6.0),
        landau_ion_grid=VelocityGrid(shrink(sec["landau_n"]), default_extent(sec["ion_q"])),
        landau_electron_grid=VelocityGrid(shrink(sec["landau_n"]), default_extent(sec["beta"])),
        quad=SphereQuadrature(sec["quad_degree"]))
    cols = ("eps",) + BoltzmannReport.COLUMNS
    files = [write_csv(_out(cfg, "", "csv"), cols, rep.rows())]
    files.append(write_json(_out(cfg, "slopes", "json"), {**rep.to_dict(), "seed": cfg.seed},
                            "boltzmann_slopes"))
    _report(files)
    return EXIT_OK if rep.passed else EXIT_PROPERTY


def cmd_macro_diagnose(cfg: ExperimentConfig, quick: bool) -> int:
    from .hermite_macro import macro_residuals
    from .serialization import read_trajectory, write_csv, write_json
    from .simulator import Simulator, run

    path = cfg.section("macro")["trajectory"]
    if path:
        frames, meta = read_trajectory(path)
        g = meta["grids"]
        sim_cfg = cfg.simulation(False)
        eps = float(meta["eps"])
        xgrid = SpatialGrid(g["x"]["n_cells"], g["x"]["length"])
        igrid = VelocityGrid(g["ion"]["n_per_axis"], g["ion"]["extent"])
        egrid = VelocityGrid(g["electron"]["n_per_axis"], g["electron"]["extent"])
        conf = meta.get("config", {})
        collisions = bool(conf.get("collisions", sim_cfg.collisions))
        cross_mode = conf.get("cross_mode", sim_cfg.cross_mode)
        q_i = float(conf.get("ion_beta", sim_cfg.ion_beta))
    else:
        sim_cfg = replace(cfg.simulation(quick), mode="coupled")
        frames = run(sim_cfg, keep_frames=True, with_functionals=False).frames
        sim = Simulator(sim_cfg)
        eps, xgrid, igrid, egrid = sim_cfg.eps, sim.xgrid, sim.igrid, sim.egrid
        collisions, cross_mode, q_i = sim_cfg.collisions, sim_cfg.cross_mode, sim_cfg.ion_beta
    if len(frames) < 3:
        raise ConfigError("macro-diagnose needs a trajectory with at least 3 snapshots", "macro.trajectory")
    res = macro_residuals(frames, eps, xgrid, egrid, igrid, q_i, collisions, cross_mode)
    files = [write_csv(_out(cfg, "", "csv"), ("t", "mass_res", "mom_res", "energy_res", "third_res"),
                       res.rows())]
    summary = {"seed": cfg.seed, "eps": eps, "frames": len(frames),
               "max": {"mass_res": float(res.mass.max()), "mom_res": float(res.momentum.max()),
                       "energy_res": float(res.energy.max()), "third_res": float(res.third.max())}}
    files.append(write_json(_out(cfg, "summary", "json"), summary, "macro_summary"))
    _report(files)
    return EXIT_OK


def cmd_nondim(cfg: ExperimentConfig, quick: bool) -> int:
    from .serialization import write_json
    from .units import PhysicalParameters, nondim

    scales = nondim(PhysicalParameters(**cfg.section("nondim")))
    out = {"input": cfg.section("nondim"), "scales": scales.to_dict()}
    _report([write_json(_out(cfg, "", "json"), out, "nondim")])
    for k, v in scales.to_dict().items():
        print(f"{k} = {v:.10g}")
    return EXIT_OK


HANDLERS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "pp-solve": cmd_pp_solve,
    "check-kernel-bounds": cmd_check_kernel_bounds,
    "boltzmann-expand": cmd_boltzmann_expand,
    "macro-diagnose": cmd_macro_diagnose,
    "nondim": cmd_nondim,
}


def _report(files):
    for f in files:
        print(f)


def execute(cfg: ExperimentConfig, quick: bool = False) -> int:
    """Run ``cfg.command`` and return its exit code (exceptions are not translated)."""
    return HANDLERS[cfg.command](cfg, quick)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        _set_threads(args.threads)
        cfg = _resolve(args)
        return execute(cfg, args.quick)
    except (ConfigError, DomainError) as exc:
        print(f"vpl-limit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PropertyFailure as exc:
        print(f"vpl-limit: property failure: {exc}", file=sys.stderr)
        return EXIT_PROPERTY
    except (NumericalError, OverflowGuardError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"vpl-limit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"vpl-limit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
