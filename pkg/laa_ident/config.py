"""
Run Configuration
=================

Layered configuration for the command-line entry point:
- Registry defaults < JSON config file < command-line flags
- Default output directory from LAA_IDENT_OUTPUT_DIR (fallback ./laa_output)
- Validation of every override before any computation starts
"""

import json
import logging
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from .bench import ESTIMATORS, BenchSettings
from .exceptions import ConfigError
from .grid_model import GridModel, load_case
from .pinn import PinnSettings
from .pmu import MAX_RATE_HZ, MIN_RATE_HZ, NoiseFamily
from .scenarios import BENCH_SUITE, Scenario, get_scenario
from .sparse_regression import LassoSettings
from .ukf import UkfSettings

logger = logging.getLogger(__name__)

OUTPUT_ENV_VAR = "LAA_IDENT_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "laa_output"
FORMATS = ("csv", "json")
KEY_ALIASES = {"lambda": "lam", "rate": "rate_hz", "estimator": "estimators", "attack": "gains", "step": "steps",
               "all": "run_all"}


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV_VAR, DEFAULT_OUTPUT_DIR))


def parse_gain(text: str) -> Tuple[int, int, float]:
    """'VICTIM:SENSING:K' -> (victim, sensing, K)"""
    try:
        victim, sensing, value = text.split(":")
        return int(victim), int(sensing), float(value)
    except ValueError:
        raise ConfigError(f"attack entry '{text}' is not VICTIM:SENSING:K") from None


def parse_step(text: str) -> Tuple[int, float]:
    """'VICTIM:EPS' -> (victim, eps)"""
    try:
        victim, value = text.split(":")
        return int(victim), float(value)
    except ValueError:
        raise ConfigError(f"step entry '{text}' is not VICTIM:EPS") from None


@dataclass
class RunConfig:
    """Everything one CLI invocation needs, after merging all layers"""
    command: str
    scenario: Optional[str] = None
    case: Optional[str] = None
    parameter_set: Optional[str] = None
    gains: Optional[List[Tuple[int, int, float]]] = None
    steps: Optional[List[Tuple[int, float]]] = None
    no_attack: bool = False
    window: Optional[Tuple[float, float]] = None
    t_end: Optional[float] = None
    rate_hz: Optional[float] = None
    noise: Optional[str] = None
    sigma: Optional[float] = None
    reps: Optional[int] = None
    seed: Optional[int] = None
    estimators: Optional[List[str]] = None       # estimate: ["sr"]; bench: every tag
    lam: Optional[float] = None
    lambda_grid: Optional[List[float]] = None
    alpha: Optional[float] = None
    optimizer: Optional[str] = None
    max_evals: Optional[int] = None
    measurements: Optional[str] = None
    victim: Optional[int] = None                 # row-mode UKF victim; selected by SR when unset
    freq_from_angles: bool = False
    run_all: bool = False
    n_jobs: int = 1
    out: Optional[str] = None
    format: str = "csv"
    stop_at_breach: bool = True

    # ---- layering --------------------------------------------------------

    @classmethod
    def from_layers(cls, command: str, file_values: Optional[Dict[str, Any]] = None,
                    flag_values: Optional[Dict[str, Any]] = None) -> "RunConfig":
        """Merge config-file values and explicitly given flags (None means 'not given')"""
        known = {f.name for f in fields(cls)}
        merged: Dict[str, Any] = {}
        for layer_name, layer in (("config file", file_values or {}), ("flags", flag_values or {})):
            for key, value in layer.items():
                key = KEY_ALIASES.get(key, key).replace("-", "_")
                if key not in known or key == "command":
                    raise ConfigError(f"unknown {layer_name} key '{key}'")
                if value is not None:
                    merged[key] = value
        config = cls(command=command, **merged)
        config._normalize()
        return config

    @staticmethod
    def read_file(path: Union[str, Path]) -> Dict[str, Any]:
        try:
            with open(path) as f:
                values = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from None
        if not isinstance(values, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        return values

    def _normalize(self):
        if self.gains is not None:
            self.gains = [parse_gain(g) if isinstance(g, str) else tuple(g) for g in self.gains]
        if self.steps is not None:
            self.steps = [parse_step(s) if isinstance(s, str) else tuple(s) for s in self.steps]
        if self.window is not None:
            if isinstance(self.window, (int, float)):
                self.window = (0.0, float(self.window))
            self.window = tuple(float(w) for w in self.window)
        if self.estimators is None:
            self.estimators = list(ESTIMATORS) if self.command == "bench" else ["sr"]
        if isinstance(self.estimators, str):
            self.estimators = [self.estimators]
        self.estimators = list(dict.fromkeys(self.estimators))

    # ---- resolution ------------------------------------------------------

    @property
    def output_dir(self) -> Path:
        return Path(self.out) if self.out else default_output_dir()

    def base_scenario(self) -> Optional[Scenario]:
        return get_scenario(self.scenario) if self.scenario else None

    def resolve_scenario(self, scenario_id: Optional[str] = None) -> Scenario:
        """Registry entry (or a bare case) with every override applied"""
        base = get_scenario(scenario_id) if scenario_id else self.base_scenario()
        if base is None:
            if not self.case:
                raise ConfigError("either a scenario or a case is required")
            base = Scenario(scenario_id=f"{Path(self.case).stem}-custom", case=self.case,
                            parameter_set=self.parameter_set or "A", gains=(), steps=())
        changes: Dict[str, Any] = {}
        if self.case and (scenario_id or self.scenario):
            changes["case"] = self.case
        if self.parameter_set:
            changes["parameter_set"] = self.parameter_set
        if self.no_attack:
            changes["gains"], changes["steps"] = (), ()
        else:
            if self.gains is not None:
                changes["gains"] = tuple(self.gains)
            if self.steps is not None:
                changes["steps"] = tuple(self.steps)
        if self.window is not None:
            changes["window"] = self.window
            changes["t_end"] = max(base.t_end, self.window[1])
        if self.t_end is not None:
            changes["t_end"] = self.t_end
        for name in ("rate_hz", "sigma", "reps"):
            if getattr(self, name) is not None:
                changes[name] = getattr(self, name)
        if self.noise is not None:
            changes["noise"] = NoiseFamily(self.noise)
        if self.seed is not None:
            changes["seed_base"] = self.seed
        return replace(base, **changes) if changes else base

    def bench_settings(self) -> BenchSettings:
        lasso = LassoSettings(lam=self.lam) if self.lam is not None else LassoSettings()
        pinn_kw = {k: v for k, v in (("alpha", self.alpha), ("optimizer", self.optimizer),
                                     ("max_evals", self.max_evals)) if v is not None}
        pinn = PinnSettings(**pinn_kw)
        if self.seed is not None:
            pinn = replace(pinn, seed=self.seed)
        return BenchSettings(lasso=lasso, pinn=pinn, ukf=UkfSettings(victim_bus=self.victim), n_jobs=self.n_jobs)

    # ---- validation ------------------------------------------------------

    def validate(self, model: Optional[GridModel] = None) -> Optional[Scenario]:
        """
        Check every override against the target scenario before running

        Returns:
            The resolved scenario (None for `bench --all`)
        """
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        unknown = [e for e in self.estimators if e not in ESTIMATORS]
        if unknown or not self.estimators:
            raise ConfigError(f"unknown estimator(s) {unknown}; choose from {', '.join(ESTIMATORS)}")
        if self.lam is not None and self.lam < 0:
            raise ConfigError("lambda must be nonnegative")
        if self.lambda_grid is not None and any(v < 0 for v in self.lambda_grid):
            raise ConfigError("lambda grid values must be nonnegative")
        if self.alpha is not None and self.alpha < 0:
            raise ConfigError("alpha must be nonnegative")
        if self.optimizer is not None and self.optimizer not in ("lbfgs", "adam"):
            raise ConfigError(f"unknown optimizer '{self.optimizer}'")
        if self.max_evals is not None and self.max_evals < 1:
            raise ConfigError("max_evals must be at least 1")
        if self.sigma is not None and self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")
        if self.reps is not None and self.reps < 1:
            raise ConfigError("--reps must be at least 1")
        if self.rate_hz is not None and not MIN_RATE_HZ <= self.rate_hz <= MAX_RATE_HZ:
            raise ConfigError(f"rate must lie in [{MIN_RATE_HZ:g}, {MAX_RATE_HZ:g}] Hz")
        if self.n_jobs == 0:
            raise ConfigError("n_jobs must be nonzero")
        if self.noise is not None and self.noise not in {f.value for f in NoiseFamily}:
            raise ConfigError(f"unknown noise family '{self.noise}'")
        if self.no_attack and (self.gains or self.steps):
            raise ConfigError("--no-attack conflicts with explicit attack entries")
        if self.command == "bench" and not (self.run_all or self.scenario):
            raise ConfigError("bench needs --scenario or --all")
        if self.command == "bench" and self.measurements:
            raise ConfigError("bench always simulates; --measurements is for estimate")
        if self.run_all and self.victim is not None:
            raise ConfigError("--victim names one bus and cannot span every scenario of --all")
        if self.run_all:
            for scenario_id in BENCH_SUITE:
                self.resolve_scenario(scenario_id)
            return None

        try:
            scenario = self.resolve_scenario()
        except ValueError as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(str(e)) from None
        model = model or load_case(scenario.case, scenario.parameter_set)
        t0, t1 = scenario.window
        if t0 < 0 or t1 > scenario.t_end:
            raise ConfigError(f"window {scenario.window} outside the scenario span")
        sensing = scenario.sensing or model.gen_buses
        for victim, sense, k in scenario.gains:
            if victim not in model.load_buses:
                raise ConfigError(f"attack victim {victim} is not a load bus of {model.name}")
            if sense not in sensing:
                raise ConfigError(f"attack sensing bus {sense} is not a sensing bus of {model.name}")
            if k < 0:
                raise ConfigError(f"attack gain {victim}:{sense} is negative")
        for victim, _ in scenario.steps:
            if victim not in model.load_buses:
                raise ConfigError(f"step victim {victim} is not a load bus of {model.name}")
        if self.victim is not None and self.victim not in model.load_buses:
            raise ConfigError(f"UKF victim {self.victim} is not a load bus of {model.name}")
        return scenario
