"""
Benchmark Harness
=================

Monte Carlo evaluation of the identifiers on registry scenarios:
- One noiseless simulation per scenario, fresh noise per repetition (seed base + rep)
- SR, PINN (from scratch and pre-trained) and UKF (row and full) estimators
- Per-repetition failures recorded, never fatal to the batch
- Aggregates: mean eta2 tables, eta1 boxplot statistics, work counts, wall-clock timings
- CSV tables / traces and a summary JSON
"""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from .dynamics import AttackConfig, BreachReport, SimulationSettings, Trajectory, detect_breach, integrate
from .exceptions import ConfigError, LaaIdentError
from .grid_model import GridModel
from .metrics import EstimateResult, convert_numpy_types
from .pinn import PinnSettings, identify_pinn, pretrain
from .pmu import MeasurementSet, NoiseFamily, add_noise, sample
from .scenarios import Scenario
from .sparse_regression import LassoSettings, identify_all
from .ukf import UkfSettings, run_ukf

logger = logging.getLogger(__name__)

ESTIMATORS = ("sr", "pinn", "pinn-pretrained", "ukf", "ukf-full")


@dataclass
class BenchSettings:
    """Estimator settings shared by every repetition"""
    lasso: LassoSettings = field(default_factory=LassoSettings)
    pinn: PinnSettings = field(default_factory=PinnSettings)
    ukf: UkfSettings = field(default_factory=UkfSettings)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    n_jobs: int = 1
    show_progress: bool = False


@dataclass
class RepetitionRecord:
    """One estimator run on one noise realization"""
    rep: int
    seed: int
    estimator: str
    result: Optional[EstimateResult] = None
    error: Optional[str] = None
    trace: Optional[pd.DataFrame] = None

    @property
    def ok(self) -> bool:
        return self.result is not None


@dataclass
class ScenarioData:
    """Deterministic per-scenario inputs shared by all repetitions"""
    scenario: Scenario
    model: GridModel
    attack: AttackConfig
    trajectory: Trajectory
    clean: MeasurementSet
    breach: BreachReport
    checkpoint: Optional[Dict[str, Any]] = None


def validate_estimators(estimators: Sequence[str]) -> Tuple[str, ...]:
    unknown = [e for e in estimators if e not in ESTIMATORS]
    if unknown or not estimators:
        raise ConfigError(f"unknown estimator tag(s) {unknown}; choose from {', '.join(ESTIMATORS)}")
    return tuple(dict.fromkeys(estimators))


def prepare_scenario(scenario: Scenario, estimators: Sequence[str],
                     settings: Optional[BenchSettings] = None) -> ScenarioData:
    """Simulate once, sample the noiseless stream and pre-train when requested"""
    settings = settings or BenchSettings()
    model = scenario.load_model()
    attack = scenario.attack(model)
    traj = integrate(model, attack, scenario.sim_span, settings.simulation)
    clean = sample(traj, scenario.rate_hz, scenario.window)
    data = ScenarioData(scenario, model, attack, traj, clean, detect_breach(traj))

    if "pinn-pretrained" in estimators:
        quiet = integrate(model, None, scenario.sim_span, settings.simulation)
        no_attack = add_noise(sample(quiet, scenario.rate_hz, scenario.window), scenario.noise,
                              scenario.sigma, seed=scenario.seed_base)
        data.checkpoint = pretrain(model, no_attack, settings.pinn)
    logger.info(f"Prepared {scenario.scenario_id}: {clean.n_slots} slots, breach at {data.breach.time}")
    return data


def run_estimator(tag: str, model: GridModel, ms: MeasurementSet, settings: BenchSettings,
                  truth: Optional[AttackConfig] = None, sensing: Optional[Sequence[int]] = None,
                  checkpoint: Optional[Dict[str, Any]] = None) -> Tuple[EstimateResult, Optional[pd.DataFrame]]:
    """
    Run one estimator tag on one measurement set

    Returns:
        (EstimateResult, loss trace for PINN tags / parameter trace for UKF tags / None for SR)
    """
    if sensing is None:
        sensing = truth.sensing_buses if truth is not None else model.gen_buses
    if tag == "sr":
        result = identify_all(model, ms, sensing, settings.lasso, n_jobs=settings.n_jobs)
        if truth is not None:
            result.score(truth)
        return result, None
    if tag in ("pinn", "pinn-pretrained"):
        if tag == "pinn-pretrained" and checkpoint is None:
            raise ConfigError("pinn-pretrained needs a pre-training checkpoint")
        result, report = identify_pinn(model, ms, sensing, settings.pinn, truth=truth,
                                       checkpoint=checkpoint if tag == "pinn-pretrained" else None)
        return result, report.frame()
    if tag in ("ukf", "ukf-full"):
        ukf_settings = replace(settings.ukf, mode="row" if tag == "ukf" else "full")
        return run_ukf(model, ms, sensing, ukf_settings, truth=truth)
    raise ConfigError(f"unknown estimator tag '{tag}'")


def _run_repetition(data: ScenarioData, rep: int, estimators: Sequence[str],
                    settings: BenchSettings) -> List[RepetitionRecord]:
    scenario = data.scenario
    seed = scenario.seed_base + rep
    ms = add_noise(data.clean, scenario.noise, scenario.sigma, seed=seed)
    records = []
    for tag in estimators:
        try:
            result, trace = run_estimator(tag, data.model, ms, settings, truth=data.attack,
                                          checkpoint=data.checkpoint)
            records.append(RepetitionRecord(rep, seed, tag, result=result, trace=trace))
        except (LaaIdentError, ValueError, RuntimeError, np.linalg.LinAlgError) as e:
            logger.warning(f"{scenario.scenario_id} rep {rep}: {tag} failed: {e}")
            records.append(RepetitionRecord(rep, seed, tag, error=f"{type(e).__name__}: {e}"))
    return records


@dataclass
class ScenarioReport:
    """All repetitions of one scenario"""
    scenario: Scenario
    breach: BreachReport
    records: List[RepetitionRecord]
    estimators: Tuple[str, ...]

    def runs(self) -> pd.DataFrame:
        rows = []
        for r in self.records:
            res = r.result
            rows.append({
                "rep": r.rep, "seed": r.seed, "estimator": r.estimator, "ok": r.ok,
                "eta2": res.eta2 if res is not None else np.nan,
                "work": res.flags.get("work", np.nan) if res is not None else np.nan,
                "duration_s": res.duration_s if res is not None else np.nan,
                "low_confidence": bool(res.flags.get("low_confidence", False)) if res is not None else False,
                "error": r.error or "",
            })
        return pd.DataFrame(rows, columns=["rep", "seed", "estimator", "ok", "eta2", "work", "duration_s",
                                           "low_confidence", "error"])

    def eta2_table(self) -> pd.DataFrame:
        runs = self.runs()
        rows = []
        for tag in self.estimators:
            sub = runs[runs.estimator == tag]
            ok = sub[sub.ok]
            rows.append({
                "scenario": self.scenario.scenario_id,
                "parameter_set": self.scenario.parameter_set,
                "noise": self.scenario.noise.value,
                "window_s": self.scenario.window[1] - self.scenario.window[0],
                "estimator": tag,
                "mean_eta2": ok.eta2.mean() if len(ok) else np.nan,
                "median_eta2": ok.eta2.median() if len(ok) else np.nan,
                "std_eta2": ok.eta2.std(ddof=0) if len(ok) else np.nan,
                "n_runs": int(len(ok)),
                "n_failed": int((~sub.ok).sum()),
                "low_confidence_runs": int(sub.low_confidence.sum()),
            })
        return pd.DataFrame(rows)

    def cost_table(self) -> pd.DataFrame:
        """Deterministic work counts per estimator (sweeps, loss evaluations, RHS evaluations)"""
        runs = self.runs()
        units = {r.estimator: r.result.flags.get("work_unit", "") for r in self.records if r.ok}
        rows = []
        for tag in self.estimators:
            ok = runs[(runs.estimator == tag) & runs.ok]
            rows.append({"scenario": self.scenario.scenario_id, "estimator": tag, "n_runs": int(len(ok)),
                         "work_unit": units.get(tag, ""), "mean_work": ok.work.mean() if len(ok) else np.nan})
        return pd.DataFrame(rows, columns=["scenario", "estimator", "n_runs", "work_unit", "mean_work"])

    def timing_table(self) -> pd.DataFrame:
        """Wall-clock means; kept out of the deterministic tables"""
        runs = self.runs()
        means = {tag: runs[(runs.estimator == tag) & runs.ok].duration_s.mean() for tag in self.estimators}
        reference = means.get("sr", np.nan)
        rows = [{"scenario": self.scenario.scenario_id, "estimator": tag, "mean_duration_s": m,
                 "ratio_to_sr": m / reference if reference and np.isfinite(reference) else np.nan}
                for tag, m in means.items()]
        return pd.DataFrame(rows)

    def eta1_stats(self) -> pd.DataFrame:
        """Boxplot statistics of eta1 per attacked entry, and of K_hat for every entry"""
        attack_entries = {(v, s): k for v, s, k in self.scenario.gains}
        rows = []
        for tag in self.estimators:
            results = [r.result for r in self.records if r.estimator == tag and r.ok]
            if not results:
                continue
            gains = np.stack([res.gains for res in results])
            first = results[0]
            for i, v in enumerate(first.load_buses):
                for j, s in enumerate(first.sensing_buses):
                    k_true = attack_entries.get((v, s), 0.0)
                    k_est = gains[:, i, j]
                    if k_true == 0.0:
                        if np.nanmedian(k_est) <= 0.5:
                            continue
                        e1 = np.full_like(k_est, np.nan)
                    else:
                        e1 = (k_true - k_est) / k_true
                    q = np.nanpercentile(e1, [0, 25, 50, 75, 100]) if np.any(np.isfinite(e1)) else [np.nan] * 5
                    rows.append({
                        "scenario": self.scenario.scenario_id,
                        "window_s": self.scenario.window[1] - self.scenario.window[0],
                        "estimator": tag, "victim_bus": v, "sensing_bus": s, "K_true": k_true,
                        "eta1_min": q[0], "eta1_q1": q[1], "eta1_median": q[2], "eta1_q3": q[3], "eta1_max": q[4],
                        "K_est_median": float(np.nanmedian(k_est)),
                    })
        return pd.DataFrame(rows, columns=["scenario", "window_s", "estimator", "victim_bus", "sensing_bus",
                                           "K_true", "eta1_min", "eta1_q1", "eta1_median", "eta1_q3",
                                           "eta1_max", "K_est_median"])

    def max_unattacked_median(self, tag: str) -> float:
        """Largest median estimate over entries that are not attacked"""
        results = [r.result for r in self.records if r.estimator == tag and r.ok]
        if not results:
            return float("nan")
        medians = np.nanmedian(np.stack([res.gains for res in results]), axis=0)
        mask = np.ones_like(medians, dtype=bool)
        first = results[0]
        for v, s, _ in self.scenario.gains:
            mask[first.load_buses.index(v), first.sensing_buses.index(s)] = False
        return float(np.max(medians[mask])) if np.any(mask) else 0.0

    def first_trace(self, tag: str) -> Optional[pd.DataFrame]:
        for r in self.records:
            if r.estimator == tag and r.trace is not None:
                return r.trace
        return None

    def summary(self) -> Dict[str, Any]:
        """Run-time-free summary so repeated runs serialize identically"""
        table = self.eta2_table().set_index("estimator")
        estimators = {}
        for tag in self.estimators:
            estimators[tag] = {
                "mean_eta2": table.loc[tag, "mean_eta2"],
                "median_eta2": table.loc[tag, "median_eta2"],
                "n_runs": table.loc[tag, "n_runs"],
                "low_confidence_runs": table.loc[tag, "low_confidence_runs"],
                "max_unattacked_median": self.max_unattacked_median(tag),
                "failures": [{"rep": r.rep, "error": r.error} for r in self.records
                             if r.estimator == tag and not r.ok],
            }
        return convert_numpy_types({"scenario": self.scenario.to_dict(), "breach": self.breach.to_dict(),
                                    "estimators": estimators})


def run_scenario(scenario: Scenario, estimators: Sequence[str] = ("sr",),
                 settings: Optional[BenchSettings] = None) -> ScenarioReport:
    """
    Monte Carlo over noise realizations of one scenario

    Args:
        scenario: Registry entry or inline definition
        estimators: Subset of ESTIMATORS
        settings: Estimator settings and parallelism

    Returns:
        ScenarioReport with one record per (repetition, estimator), ordered by repetition
    """
    settings = settings or BenchSettings()
    estimators = validate_estimators(estimators)
    data = prepare_scenario(scenario, estimators, settings)
    reps = range(scenario.reps)
    batches = Parallel(n_jobs=settings.n_jobs)(
        delayed(_run_repetition)(data, rep, estimators, settings)
        for rep in tqdm(reps, desc=scenario.scenario_id, disable=not settings.show_progress))
    records = [r for batch in batches for r in batch]
    report = ScenarioReport(scenario, data.breach, records, estimators)
    n_failed = sum(not r.ok for r in records)
    logger.info(f"Scenario {scenario.scenario_id} done: {scenario.reps} repetitions, {n_failed} failed runs")
    return report


def _concat(frames: List[pd.DataFrame], columns: Optional[List[str]] = None) -> pd.DataFrame:
    frames = [f for f in frames if f is not None and len(f)]
    if not frames:
        return pd.DataFrame(columns=columns or [])
    return pd.concat(frames, ignore_index=True)


def write_bench_outputs(reports: Sequence[ScenarioReport], out_dir: Union[str, Path],
                        settings: Optional[BenchSettings] = None) -> Dict[str, Path]:
    """
    Write the table / figure CSVs and summary.json

    table1: mean eta2 under Gaussian noise; table2: under Logistic noise;
    table3: mean work count per estimator; fig4 / fig7: eta1 boxplot statistics
    for single- and multi-point attacks; fig5 / fig6: loss trace and UKF
    parameter trace of the first repetition. Wall-clock means and ratios to SR
    go to timings.csv, the only output that differs between reruns.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    settings = settings or BenchSettings()

    eta2 = _concat([r.eta2_table() for r in reports])
    gaussian = [r for r in reports if r.scenario.noise is NoiseFamily.GAUSSIAN]
    logistic = [r for r in reports if r.scenario.noise is NoiseFamily.LOGISTIC]
    table1 = _concat([r.eta2_table() for r in gaussian], list(eta2.columns))
    table2 = _concat([r.eta2_table() for r in logistic], list(eta2.columns))
    table3 = _concat([r.cost_table() for r in reports])
    timings = _concat([r.timing_table() for r in reports])
    single = [r for r in reports if len(r.scenario.gains) == 1]
    multi = [r for r in reports if len(r.scenario.gains) > 1]
    fig4 = _concat([r.eta1_stats() for r in single])
    fig7 = _concat([r.eta1_stats() for r in multi])

    traces, ukf_traces = [], []
    for r in reports:
        for tag in r.estimators:
            trace = r.first_trace(tag)
            if trace is None:
                continue
            trace = trace.copy()
            trace.insert(0, "estimator", tag)
            trace.insert(0, "scenario", r.scenario.scenario_id)
            (traces if tag.startswith("pinn") else ukf_traces).append(trace)
    fig5 = _concat(traces, ["scenario", "estimator", "iter", "L1", "L2", "L3", "total"])
    fig6 = _concat(ukf_traces, ["scenario", "estimator", "t", "param_id", "estimate", "variance"])

    paths = {}
    outputs = (("table1", table1), ("table2", table2), ("table3", table3), ("fig4_boxplot", fig4),
               ("fig5_losstrace", fig5), ("fig6_ukftrace", fig6), ("fig7_boxplot", fig7), ("timings", timings))
    for name, frame in outputs:
        paths[name] = out_dir / f"{name}.csv"
        frame.to_csv(paths[name], index=False, float_format="%.10g")

    summary = {
        "scenarios": {r.scenario.scenario_id: r.summary() for r in reports},
        "settings": convert_numpy_types({
            "lambda": settings.lasso.lam, "lambda_noise_scaled": settings.lasso.noise_scaled,
            "alpha": settings.pinn.alpha, "optimizer": settings.pinn.optimizer,
            "pinn_max_evals": settings.pinn.max_evals, "ukf_param_process_noise": settings.ukf.param_process_noise,
        }),
    }
    paths["summary"] = out_dir / "summary.json"
    with open(paths["summary"], "w") as f:
        json.dump(summary, f, indent=4, sort_keys=True, default=str)
    logger.info(f"Wrote bench outputs for {len(reports)} scenario(s) to {out_dir}")
    return paths
