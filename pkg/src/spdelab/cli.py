"""Command-line entry point.

Subcommands (all take --scenario and write reports under --out):

    eig       assemble the operator, solve the principal eigenpair
    check     run the structural-condition checkers
    bound     thresholds, comparison ODE, and blow-up time bound
    simulate  Monte Carlo ensemble time series
    lyapunov  linear-growth certificate and global-existence experiment

Exit status: 0 success, 1 runtime failure, 2 configuration error.  Reruns
with the same scenario, seed, and overrides produce byte-identical CSV/JSON
at any thread count.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .blowup import holder_norm_link, make_bound_report
from .coefficients import check_explosion_conditions, check_positivity_conditions
from .elliptic import quadrature
from .errors import ScenarioError, SpdeLabError
from .integrator import run_ensemble
from .lyapunov import global_experiment
from .reporting import config_hash, write_ensemble_csv, write_field_csv, write_json
from .scenario import ScenarioSpec, canned_scenario_path, load_scenario

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spdelab",
        description="Stochastic reaction-diffusion laboratory: simulation, "
                    "blow-up bounds, and stability checks.",
    )
    parser.add_argument("--version", action="version", version=f"spdelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, descr in (
        ("eig", "principal eigenpair of the elliptic operator"),
        ("check", "structural condition checkers"),
        ("bound", "blow-up threshold and time bound"),
        ("simulate", "Monte Carlo ensemble simulation"),
        ("lyapunov", "growth certificate and global-existence experiment"),
    ):
        p = sub.add_parser(name, help=descr)
        p.add_argument("--scenario", required=True,
                       help="scenario file path or canned scenario name")
        p.add_argument("--out", default=None,
                       help="output directory (default $SPDELAB_OUT or ./out)")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--paths", type=int, default=None, help="path count override")
        p.add_argument("--dt", type=float, default=None, help="time step override")
        p.add_argument("--t-end", type=float, default=None, help="horizon override")
        p.add_argument("--threads", type=int, default=None, help="worker thread count")
        p.add_argument("--no-figures", action="store_true",
                       help="skip PNG rendering next to the reports")
    return parser


def _resolve_scenario(arg: str) -> Path:
    p = Path(arg)
    if p.exists():
        return p
    return canned_scenario_path(arg)


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("SPDELAB_OUT") or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _manifest(spec: ScenarioSpec, args) -> tuple[int, str, dict]:
    mc = spec.monte_carlo()
    seed = args.seed if args.seed is not None else mc["seed"]
    paths = args.paths if args.paths is not None else mc["paths"]
    payload = {
        "command": args.command,
        "scenario": spec.to_dict(),
        "overrides": {
            "seed": seed,
            "paths": paths,
            "dt": args.dt,
            "t_end": args.t_end,
        },
        "version": __version__,
    }
    return seed, config_hash(payload), {"paths": paths}


def _cmd_eig(spec: ScenarioSpec, args) -> int:
    out = _out_dir(args)
    seed, h, _ = _manifest(spec, args)
    problem = spec.assemble()
    eig = problem.eig
    write_json(out / "eig.json", {
        "lambda1": eig.lambda1,
        "residual": eig.residual,
        "iterations": eig.iterations,
        "phi_min": float(eig.phi.min()),
        "phi_max": float(eig.phi.max()),
        "phi_integral": quadrature(problem.grid, eig.phi),
        "holder_l2_link": holder_norm_link(problem.grid, eig.phi, 2.0),
    }, seed, h)
    write_field_csv(out / "phi.csv", problem.grid, eig.phi, seed, h)
    if not args.no_figures:
        from .figures import save_eigen_figure

        save_eigen_figure(out / "phi.png", problem.grid, eig)
    return 0


def _cmd_check(spec: ScenarioSpec, args) -> int:
    out = _out_dir(args)
    seed, h, _ = _manifest(spec, args)
    problem = spec.assemble()
    declared = spec.declared_constants()
    pos = check_positivity_conditions(
        problem.drift, problem.diffusion, problem.jump, spec.initial(),
        problem.grid, problem.cov, problem.jumps, problem.operator, declared,
    )
    exp = check_explosion_conditions(
        problem.drift, problem.diffusion, problem.jump, spec.initial(),
        problem.grid, problem.cov, problem.jumps, problem.eig, declared,
    )
    write_json(out / "conditions.json", {
        "positivity": pos.as_dict(),
        "explosion": exp.as_dict(),
        "lambda1": problem.eig.lambda1,
    }, seed, h)
    return 0


def _bound_inputs(spec: ScenarioSpec, problem):
    """Pick the comparison family the declared constants support."""
    declared = spec.declared_constants()
    g_hat = quadrature(problem.grid, problem.initial_field * problem.eig.phi)
    lam1 = problem.eig.lambda1
    if declared.kappa is not None and declared.G_coef is not None:
        return make_bound_report(
            "mean_square", lam1, g_hat**2,
            kappa=declared.kappa, G=declared.G, K=declared.K,
            level_M=declared.level_M,
        )
    drift = problem.drift
    if getattr(drift, "family", None) == "power_drift":
        a1, a2, beta = drift.a1, drift.a2, drift.beta
    elif getattr(drift, "family", None) == "allen_cahn":
        raise ScenarioError("bistable drift has no finite-time escape bound")
    elif getattr(drift, "family", None) == "pure_power":
        a1, a2, beta = 1.0, 0.0, 1.0 + drift.alpha
    else:
        raise ScenarioError("drift family declares no power-law lower bound")
    return make_bound_report("first_moment", lam1, g_hat, a1=a1, a2=a2, beta=beta)


def _cmd_bound(spec: ScenarioSpec, args) -> int:
    out = _out_dir(args)
    seed, h, _ = _manifest(spec, args)
    problem = spec.assemble()
    report = _bound_inputs(spec, problem)
    write_json(out / "bound.json", report.as_dict(), seed, h)
    if not args.no_figures:
        from .figures import save_bound_figure

        save_bound_figure(out / "bound.png", report)
    return 0


def _cmd_simulate(spec: ScenarioSpec, args) -> int:
    out = _out_dir(args)
    seed, h, over = _manifest(spec, args)
    problem = spec.assemble()
    cfg = spec.scheme_config(dt=args.dt, t_end=args.t_end)
    threads = args.threads if args.threads is not None else spec.monte_carlo()["threads"]
    ens = run_ensemble(problem, cfg, seed, over["paths"], threads=threads)
    write_ensemble_csv(out / "ensemble.csv", ens, seed, h)
    write_json(out / "summary.json", {
        "n_paths": ens.n_paths,
        "t_end": float(ens.times[-1]),
        "dt": cfg.dt,
        "lambda1": problem.eig.lambda1,
        "blowup_fraction_final": float(ens.blowup_fraction[-1]),
        "n_alive_final": int(ens.n_alive[-1]),
        "functionals": ens.functional_names(),
    }, seed, h)
    if not args.no_figures:
        from .figures import save_ensemble_figure

        save_ensemble_figure(out / "ensemble.png", ens)
    return 0


def _cmd_lyapunov(spec: ScenarioSpec, args) -> int:
    out = _out_dir(args)
    seed, h, over = _manifest(spec, args)
    problem = spec.assemble()
    cfg = spec.scheme_config(dt=args.dt, t_end=args.t_end)
    threads = args.threads if args.threads is not None else spec.monte_carlo()["threads"]
    report = global_experiment(problem, cfg, seed, over["paths"], threads=threads)
    write_json(out / "lyapunov.json", report.as_dict(), seed, h)
    if not args.no_figures:
        from .figures import save_lyapunov_figure

        save_lyapunov_figure(out / "lyapunov.png", report)
    return 0


_COMMANDS = {
    "eig": _cmd_eig,
    "check": _cmd_check,
    "bound": _cmd_bound,
    "simulate": _cmd_simulate,
    "lyapunov": _cmd_lyapunov,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        spec = load_scenario(_resolve_scenario(args.scenario))
        return _COMMANDS[args.command](spec, args)
    except ScenarioError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SpdeLabError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
