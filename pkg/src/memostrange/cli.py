"""Command line front end.

Every subcommand reads one JSON config and writes its artifacts into an
output directory.  Exit codes: 0 on success, 1 when a run or an acceptance
check fails, 2 for configuration and usage problems.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import kernels
from .cell import analytic_fluxes, boundary_fluxes, solve_cell_radial, w_exact
from .config import ConfigError, RunConfig, load_config
from .output import (
    emit_plot_script,
    write_field_dump,
    write_report,
    write_series_csv,
)
from .solver import LinearSolveError, run_simulation
from .sources import SourceError
from .verification import (
    beta_limit_study,
    cell_eps_study,
    comparison_trial,
    convergence_study,
    kernel_equivalence_study,
    steady_state_check,
)

SIGN_TOL = 1e-10  # comparison principle threshold on max(u), max(v)
CELL_W_TOL = 1e-6  # max-norm tolerance for the radial profile
CELL_FLUX_TOL = 1e-4  # relative tolerance for the boundary fluxes


def _thread_map(fn, items):
    """Map over items, threaded when MEMOSTRANGE_THREADS asks for it."""
    workers = int(os.environ.get("MEMOSTRANGE_THREADS", "0") or 0)
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def cmd_solve(config: RunConfig, out_dir: Path) -> int:
    if config.sources is None:
        raise ConfigError("solve needs a 'sources' section in the config")
    result = run_simulation(config)
    csv_path = write_series_csv(out_dir / "series.csv", result.times,
                                result.probe_names, result.probe_table)
    emit_plot_script(csv_path)
    if config.dump_fields:
        write_field_dump(out_dir / "final_u.txt", result.final_state.u, result.final_state.t)
        write_field_dump(out_dir / "final_v.txt", result.final_state.v, result.final_state.t)
    write_report(out_dir / "run_report.json", {
        "t_final": result.final_state.t,
        "steps": result.final_state.step_index,
        "probes": result.probe_names,
        "backend": kernels.backend_name(),
        "params": config.params.to_json(),
    })
    return 0


def cmd_cell(config: RunConfig, out_dir: Path) -> int:
    eps, n_points = config.cell.eps, config.cell.mesh_points
    sol = solve_cell_radial(eps, config.params, n_points=n_points)
    exact = w_exact(sol.r, eps, config.params)
    w_err = float(np.max(np.abs(sol.w - exact)))
    flux_in, flux_out = boundary_fluxes(sol)
    ref_in, ref_out = analytic_fluxes(eps, config.params)
    rel_in = abs(flux_in - ref_in) / abs(ref_in)
    rel_out = abs(flux_out - ref_out) / abs(ref_out)
    passed = w_err <= CELL_W_TOL and rel_in <= CELL_FLUX_TOL and rel_out <= CELL_FLUX_TOL

    csv_path = write_series_csv(out_dir / "cell_profile.csv", sol.r,
                                ["w", "w_exact"], np.column_stack([sol.w, exact]),
                                index_name="r")
    emit_plot_script(csv_path)
    write_report(out_dir / "cell_report.json", {
        "eps": eps,
        "a_eps": sol.a_eps,
        "mesh_points": n_points,
        "w_max_error": w_err,
        "flux_inner": flux_in,
        "flux_outer": flux_out,
        "flux_inner_exact": ref_in,
        "flux_outer_exact": ref_out,
        "flux_inner_rel_error": rel_in,
        "flux_outer_rel_error": rel_out,
        "pass": passed,
    })
    return 0 if passed else 1


def cmd_cell_sweep(config: RunConfig, out_dir: Path) -> int:
    report = cell_eps_study(config.params, config.cell.eps_values)
    write_report(out_dir / "cell_sweep_report.json", report.to_json())
    write_series_csv(out_dir / "cell_sweep.csv", report.resolutions,
                     ["rel_error", "identity_defect"],
                     np.column_stack([report.errors, report.details["identity_defects"]]),
                     index_name="eps")
    return 0 if report.passed else 1


def cmd_kernel(config: RunConfig, out_dir: Path) -> int:
    kinds = ("constant", "ramp", "sinusoid") if config.kernel.input == "all" \
        else (config.kernel.input,)
    jobs = [(kind, scheme) for scheme in config.kernel.schemes for kind in kinds]
    reports = _thread_map(
        lambda job: kernel_equivalence_study(job[0], job[1], levels=config.kernel.levels),
        jobs,
    )
    rows, labels = [], []
    for report in reports:
        for dt, err in zip(report.resolutions, report.errors):
            rows.append([dt, err])
            labels.append(report.kind)
    write_series_csv(out_dir / "kernel_errors.csv",
                     [r[0] for r in rows], ["error"],
                     np.array([[r[1]] for r in rows]), index_name="dt")
    passed = all(r.passed for r in reports)
    write_report(out_dir / "kernel_report.json", {
        "reports": [r.to_json() for r in reports],
        "pass": passed,
    })
    return 0 if passed else 1


def cmd_mms(config: RunConfig, out_dir: Path) -> int:
    kind = config.study.kind
    if kind == "steady":
        report_obj = steady_state_check()
        write_report(out_dir / "steady_report.json", report_obj)
        return 0 if report_obj["pass"] else 1
    if kind == "beta-limit":
        report = beta_limit_study()
    else:
        report = convergence_study(kind, config.study.levels, base=config)
    write_report(out_dir / "mms_report.json", report.to_json())
    return 0 if report.passed else 1


def cmd_compare(config: RunConfig, out_dir: Path) -> int:
    cfg = config.compare
    jobs = [(case, seed) for case in cfg.cases
            for seed in range(config.seed, config.seed + cfg.trials)]
    trials = _thread_map(
        lambda job: comparison_trial(job[1], job[0], cells_per_axis=cfg.cells_per_axis,
                                     dt=cfg.dt, t_final=cfg.T, lam=config.params.lam),
        jobs,
    )
    worst = max(max(t["max_u"], t["max_v"]) for t in trials)
    passed = worst <= SIGN_TOL
    write_report(out_dir / "compare_report.json", {
        "trials": trials,
        "worst_max": worst,
        "threshold": SIGN_TOL,
        "pass": passed,
    })
    return 0 if passed else 1


_COMMANDS = {
    "solve": cmd_solve,
    "cell": cmd_cell,
    "cell-sweep": cmd_cell_sweep,
    "kernel": cmd_kernel,
    "mms": cmd_mms,
    "compare": cmd_compare,
}

_HELP = {
    "solve": "run one configured simulation and write the probe series",
    "cell": "solve the radial cell problem and compare with the closed form",
    "cell-sweep": "effective coefficient across a ladder of eps values",
    "kernel": "memory schemes against the convolution quadrature",
    "mms": "manufactured solution and related solver studies",
    "compare": "randomized sign preservation trials",
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="memostrange",
        description="Reaction-diffusion solver with a nonlocal memory term.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in _HELP.items():
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", default=None, help="output directory (default: config output_dir)")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        out_dir = Path(args.out) if args.out else Path(config.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](config, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (LinearSolveError, SourceError, ValueError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
