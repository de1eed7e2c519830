"""
Command-Line Interface
======================

Entry point for simulation, identification and benchmarking:
- simulate: trajectory + breach report for a scenario or case
- estimate: run SR / PINN / UKF on fresh or imported measurements
- bench: Monte Carlo tables and traces over registry scenarios
- validate-case: parse and check a grid case file

Configuration precedence: command-line flags > --config JSON file > scenario
registry defaults. The default output directory comes from
LAA_IDENT_OUTPUT_DIR (fallback ./laa_output). Module errors exit with code 2.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from .bench import ESTIMATORS, BenchSettings, run_estimator, run_scenario, write_bench_outputs
from .config import FORMATS, OUTPUT_ENV_VAR, RunConfig
from .dynamics import SimulationSettings, detect_breach, integrate, save_trajectory_csv, validate_budget
from .exceptions import ConfigError, LaaIdentError
from .grid_model import equilibrium, equilibrium_residual, list_cases, load_case
from .metrics import convert_numpy_types, save_estimate
from .pinn import pretrain, save_checkpoint
from .pmu import add_noise, differentiate_angles, load_measurements, measure, sample
from .scenarios import BENCH_SUITE, WINDOW_SWEEPS, list_scenarios
from .sparse_regression import identify_all

logger = logging.getLogger(__name__)

# argparse dests that are not RunConfig fields
_NON_CONFIG = {"command", "config", "verbose", "quiet", "case_file"}


def _common_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a flag given before the subcommand from being reset by the subparser
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, help="Seed base for noise and network initialization")
    common.add_argument("--out", help=f"Output directory (default: ${OUTPUT_ENV_VAR} or ./laa_output)")
    common.add_argument("--format", choices=FORMATS, help="Primary artifact format (default csv)")
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")
    return common


def _scenario_args(p: argparse.ArgumentParser):
    p.add_argument("--scenario", default=None, help=f"Registry id ({', '.join(list_scenarios()[:3])}, ...)")
    p.add_argument("--case", default=None, help=f"Case id ({', '.join(list_cases())}) or JSON path")
    p.add_argument("--parameter-set", default=None, help="Dynamic parameter set tag (A fast, B slow)")
    p.add_argument("--attack", dest="gains", action="append", default=None, metavar="VICTIM:SENSING:K",
                   help="Dynamic attack gain (repeatable); replaces the scenario's gains")
    p.add_argument("--step", dest="steps", action="append", default=None, metavar="VICTIM:EPS",
                   help="Static attack step (repeatable)")
    p.add_argument("--no-attack", action="store_const", const=True, default=None, help="Drop every attack entry")
    p.add_argument("--window", type=float, nargs="+", default=None, metavar="T",
                   help="Observation window: T (from 0) or T0 T1, seconds")
    p.add_argument("--t-end", type=float, default=None, help="Simulation horizon for simulate, seconds")
    p.add_argument("--rate", dest="rate_hz", type=float, default=None, help="PMU frame rate, Hz")
    p.add_argument("--noise", choices=["none", "gaussian", "logistic"], default=None)
    p.add_argument("--sigma", type=float, default=None, help="Noise standard deviation")


def _estimator_args(p: argparse.ArgumentParser):
    p.add_argument("--estimator", dest="estimators", action="append", choices=ESTIMATORS, default=None,
                   help="Estimator tag (repeatable)")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="SR L1 weight, in multiples of the residual noise level")
    p.add_argument("--alpha", type=float, default=None, help="PINN sparsity weight")
    p.add_argument("--optimizer", choices=["lbfgs", "adam"], default=None, help="PINN optimizer")
    p.add_argument("--max-evals", type=int, default=None, help="PINN loss-evaluation cap")
    p.add_argument("--n-jobs", type=int, default=None, help="Parallel workers")
    p.add_argument("--victim", type=int, default=None,
                   help="Row-mode UKF victim bus (default: picked from a sparse-regression pass)")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="laa-ident", parents=[common],
        description="Simulate IoT load-altering attacks on power grids and identify their parameters.",
        epilog="Precedence: command-line flags > --config file > scenario registry defaults.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="Simulate a scenario and report safety-limit breaches")
    _scenario_args(sim)
    sim.add_argument("--full-span", dest="stop_at_breach", action="store_const", const=False, default=None,
                     help="Keep integrating after the first breach")

    est = sub.add_parser("estimate", parents=[common], help="Identify attack parameters from measurements")
    _scenario_args(est)
    _estimator_args(est)
    est.add_argument("--lambda-grid", type=lambda s: [float(v) for v in s.split(",")], default=None,
                     help="Comma-separated lambdas; writes the SR solution path")
    est.add_argument("--measurements", default=None, help="Imported measurement CSV (with JSON sidecar)")
    est.add_argument("--freq-from-angles", action="store_const", const=True, default=None,
                     help="Replace frequency channels with finite differences of the angles")

    bench = sub.add_parser("bench", parents=[common], help="Monte Carlo benchmark over registry scenarios")
    _scenario_args(bench)
    _estimator_args(bench)
    bench.add_argument("--all", dest="run_all", action="store_const", const=True, default=None,
                       help="Every benchmark scenario plus the observation-window sweeps")
    bench.add_argument("--reps", type=int, default=None, help="Repetitions per scenario")

    check = sub.add_parser("validate-case", parents=[common], help="Parse and validate a case file")
    check.add_argument("case_file", help="Case id or JSON path")
    return parser


def _window_value(window: Optional[List[float]]):
    if window is None:
        return None
    if len(window) == 1:
        return (0.0, window[0])
    if len(window) == 2:
        return tuple(window)
    raise ConfigError("--window takes one or two values")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Merge the config file and the given flags into a RunConfig"""
    flags: Dict[str, Any] = {k: v for k, v in vars(args).items() if k not in _NON_CONFIG}
    if "window" in flags:
        flags["window"] = _window_value(flags["window"])
    config_file = getattr(args, "config", None)
    file_values = RunConfig.read_file(config_file) if config_file else None
    return RunConfig.from_layers(args.command, file_values, flags)


# ---- subcommands ----------------------------------------------------------

def cmd_simulate(config: RunConfig) -> int:
    scenario = config.validate()
    model = scenario.load_model()
    attack = scenario.attack(model)
    traj = integrate(model, attack, (0.0, scenario.t_end), SimulationSettings(stop_at_breach=config.stop_at_breach))
    breach = detect_breach(traj)

    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    stem = scenario.scenario_id
    if config.format == "json":
        traj.to_frame().to_json(out / f"{stem}_trajectory.json", orient="records", double_precision=10)
    else:
        save_trajectory_csv(traj, out / f"{stem}_trajectory.csv")

    report = {"scenario": scenario.to_dict(), "breach": breach.to_dict(),
              "status": "breach" if breach.breached else "none"}
    if model.has_vulnerable_load:
        budget = validate_budget(model, attack)
        report["budget"] = {"passed": budget.passed, "failures": budget.failures()}
    with open(out / f"{stem}_breach.json", "w") as f:
        json.dump(convert_numpy_types(report), f, indent=4)

    if breach.breached:
        print(f"{stem}: {breach.limit_hz:g} Hz limit breached at t = {breach.time:.3f} s (bus {breach.bus})")
    else:
        print(f"{stem}: no breach (peak {breach.peak_hz:.4g} Hz)")
    return 0


def _pretrained_checkpoint(model, scenario, settings: BenchSettings, out: Path):
    quiet = integrate(model, None, scenario.sim_span, settings.simulation)
    no_attack = add_noise(sample(quiet, scenario.rate_hz, scenario.window), scenario.noise,
                          scenario.sigma, seed=scenario.seed_base)
    checkpoint = pretrain(model, no_attack, settings.pinn)
    save_checkpoint(checkpoint, out / f"{scenario.scenario_id}_pinn_pretrained.pt")
    return checkpoint


def cmd_estimate(config: RunConfig) -> int:
    scenario = config.validate()
    model = scenario.load_model()
    settings = config.bench_settings()
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)

    if config.measurements:
        ms = load_measurements(config.measurements)
        truth = scenario.attack(model) if config.scenario and not config.no_attack else None
    else:
        truth = scenario.attack(model)
        traj = integrate(model, truth, scenario.sim_span, settings.simulation)
        ms = measure(traj, scenario.rate_hz, scenario.window, scenario.noise, scenario.sigma,
                     seed=scenario.seed_base)
    if config.freq_from_angles:
        ms = differentiate_angles(ms)
    sensing = truth.sensing_buses if truth is not None else scenario.sensing

    checkpoint = None
    if "pinn-pretrained" in config.estimators:
        checkpoint = _pretrained_checkpoint(model, scenario, settings, out)

    for tag in config.estimators:
        result, trace = run_estimator(tag, model, ms, settings, truth=truth, sensing=sensing, checkpoint=checkpoint)
        stem = f"{scenario.scenario_id}_{tag}"
        save_estimate(result, out, stem=stem, fmt=config.format)
        if trace is not None:
            trace.to_csv(out / f"{stem}_trace.csv", index=False, float_format="%.10g")
        eta = f", eta2 = {result.eta2:.4g}" if result.eta2 is not None else ""
        print(f"{tag}: {len(result.attacked_entries())} attacked entries{eta}")

    if config.lambda_grid:
        frames = []
        for lam in config.lambda_grid:
            result = identify_all(model, ms, sensing, replace(settings.lasso, lam=lam), n_jobs=settings.n_jobs)
            if truth is not None:
                result.score(truth)
            frame = result.to_frame()
            frame.insert(0, "lambda", lam)
            frames.append(frame)
        pd.concat(frames, ignore_index=True).to_csv(out / f"{scenario.scenario_id}_sr_lambda_path.csv",
                                                    index=False, float_format="%.10g")
    return 0


def cmd_bench(config: RunConfig) -> int:
    config.validate()
    settings = config.bench_settings()
    settings.show_progress = logging.getLogger().isEnabledFor(logging.INFO)
    if config.run_all:
        ids = list(BENCH_SUITE) + [sid for sweep in WINDOW_SWEEPS.values() for sid in sweep]
    else:
        ids = [config.scenario]
    reports = [run_scenario(config.resolve_scenario(sid), config.estimators, settings) for sid in ids]
    paths = write_bench_outputs(reports, config.output_dir, settings)
    n_failed = sum(not r.ok for rep in reports for r in rep.records)
    print(f"Wrote {len(paths)} files to {config.output_dir} ({n_failed} failed runs)")
    return 0


def cmd_validate_case(case: str) -> int:
    model = load_case(case)
    state = equilibrium(model)
    residual = float(np.max(np.abs(equilibrium_residual(model, state[:model.n_buses]))))
    summary = {
        "name": model.name, "buses": model.n_buses, "generators": list(model.gen_buses),
        "loads": list(model.load_buses), "branches": int(len(model.branches[0])),
        "parameter_sets": sorted(model.parameter_sets), "parameter_set": model.parameter_set,
        "vulnerable_load": model.has_vulnerable_load, "stiffness_bound": model.stiffness_bound(),
        "equilibrium_residual": residual,
    }
    print(json.dumps(convert_numpy_types(summary), indent=4))
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    verbose, quiet = getattr(args, "verbose", False), getattr(args, "quiet", False)
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")

    try:
        if args.command == "validate-case":
            return cmd_validate_case(args.case_file)
        config = config_from_args(args)
        if args.command == "simulate":
            return cmd_simulate(config)
        if args.command == "estimate":
            return cmd_estimate(config)
        return cmd_bench(config)
    except LaaIdentError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
