"""
Scenario Registry
=================

Named, immutable experiment definitions:
- Single-point attacks on fast (set A) and slow (set B) dynamics
- Multi-point attacks on fast and slow dynamics
- Logistic measurement noise
- Observation-window sweeps for the accuracy boxplots
- A small 6-bus scenario for quick runs
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

from .dynamics import AttackConfig
from .exceptions import ConfigError, ScenarioError
from .grid_model import GridModel, load_case
from .pmu import NoiseFamily

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scenario:
    """One experiment: case, dynamics regime, attack, PMU stream and repetitions"""
    scenario_id: str
    case: str
    parameter_set: str
    gains: Tuple[Tuple[int, int, float], ...]      # (victim, sensing, K)
    steps: Tuple[Tuple[int, float], ...] = ()      # (victim, eps)
    window: Tuple[float, float] = (0.0, 15.0)      # s
    t_end: float = 30.0                            # s, simulation horizon for `simulate`
    rate_hz: float = 50.0
    noise: NoiseFamily = NoiseFamily.GAUSSIAN
    sigma: float = 0.01
    reps: int = 100
    seed_base: int = 0
    sensing: Optional[Tuple[int, ...]] = None      # defaults to the generators
    description: str = ""

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError("repetition count must be at least 1")
        if not self.window[1] > self.window[0]:
            raise ConfigError(f"window {self.window} is empty")
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")

    def load_model(self) -> GridModel:
        return load_case(self.case, parameter_set=self.parameter_set)

    def attack(self, model: GridModel) -> AttackConfig:
        return AttackConfig.from_entries(model, gains={(v, s): k for v, s, k in self.gains},
                                         steps=dict(self.steps), sensing=self.sensing)

    @property
    def sim_span(self) -> Tuple[float, float]:
        """Integration span needed for the observation window"""
        return 0.0, self.window[1]

    def with_overrides(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def to_dict(self) -> Dict:
        return {
            "scenario_id": self.scenario_id, "case": self.case, "parameter_set": self.parameter_set,
            "gains": [{"victim": v, "sensing": s, "K": k} for v, s, k in self.gains],
            "steps": [{"victim": v, "eps": e} for v, e in self.steps],
            "window": list(self.window), "t_end": self.t_end, "rate_hz": self.rate_hz,
            "noise": self.noise.value, "sigma": self.sigma, "reps": self.reps, "seed_base": self.seed_base,
            "sensing": list(self.sensing) if self.sensing is not None else None,
        }


SINGLE = ((19, 33, 18.0),)
SINGLE_SLOW = ((19, 33, 25.0),)
MULTI = ((15, 33, 4.0), (19, 33, 14.0), (20, 33, 4.0))
STEP = ((19, 0.1),)


def _build_registry() -> Dict[str, Scenario]:
    base = [
        Scenario("ieee39-fast-single", "ieee39", "A", SINGLE, STEP, window=(0.0, 15.0), t_end=30.0,
                 description="single-point attack, fast dynamics"),
        Scenario("ieee39-slow-single", "ieee39", "B", SINGLE_SLOW, STEP, window=(0.0, 40.0), t_end=60.0,
                 description="single-point attack, slow oscillatory dynamics"),
        Scenario("ieee39-fast-multi", "ieee39", "A", MULTI, STEP, window=(0.0, 16.0), t_end=30.0,
                 description="multi-point attack at buses 15, 19, 20, fast dynamics"),
        Scenario("ieee39-slow-multi", "ieee39", "B", MULTI, STEP, window=(0.0, 40.0), t_end=60.0,
                 description="multi-point attack at buses 15, 19, 20, slow dynamics"),
        Scenario("ieee39-fast-logistic", "ieee39", "A", SINGLE, STEP, window=(0.0, 15.0), t_end=30.0,
                 noise=NoiseFamily.LOGISTIC, description="single-point attack, Logistic noise"),
        Scenario("ieee6-fast-single", "ieee6", "A", ((5, 2, 30.0),), ((5, 0.05),), window=(0.0, 10.0),
                 t_end=20.0, reps=20, description="single-point attack on the 6-bus system"),
    ]
    registry = {s.scenario_id: s for s in base}
    for T in (12, 13, 14, 15, 16):
        sid = f"ieee39-fast-single-window-{T}"
        registry[sid] = replace(registry["ieee39-fast-single"], scenario_id=sid, window=(0.0, float(T)),
                                description=f"fast single-point attack, {T} s window")
    for T in (30, 35, 40, 45):
        sid = f"ieee39-slow-single-window-{T}"
        registry[sid] = replace(registry["ieee39-slow-single"], scenario_id=sid, window=(0.0, float(T)),
                                t_end=max(60.0, float(T)), description=f"slow single-point attack, {T} s window")
    return registry


REGISTRY: Dict[str, Scenario] = _build_registry()

# scenarios `bench --all` covers, in output order
BENCH_SUITE = ("ieee39-fast-single", "ieee39-slow-single", "ieee39-fast-multi", "ieee39-slow-multi",
               "ieee39-fast-logistic")
WINDOW_SWEEPS = {
    "ieee39-fast-single": tuple(f"ieee39-fast-single-window-{T}" for T in (12, 13, 14, 15, 16)),
    "ieee39-slow-single": tuple(f"ieee39-slow-single-window-{T}" for T in (30, 35, 40, 45)),
}


def get_scenario(scenario_id: str) -> Scenario:
    try:
        return REGISTRY[scenario_id]
    except KeyError:
        raise ScenarioError(f"unknown scenario '{scenario_id}'; known: {', '.join(sorted(REGISTRY))}") from None


def list_scenarios() -> List[str]:
    return sorted(REGISTRY)
