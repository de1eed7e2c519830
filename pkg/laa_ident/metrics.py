"""
Estimation Metrics Module
=========================

Accuracy measures for attack-parameter estimates:
- eta1: relative error of one attacked gain
- eta2: sum of squared gain errors over the full gain matrix
- EstimateResult: estimate plus ground truth, metrics and run metadata
- Estimate CSV / summary JSON export
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .dynamics import AttackConfig
from .exceptions import MetricError

logger = logging.getLogger(__name__)


def eta1(k_true: float, k_est: float) -> float:
    """(K - K_hat) / K, defined for attacked entries only"""
    if k_true == 0:
        raise MetricError("eta1 is undefined for a zero true gain")
    return (k_true - k_est) / k_true


def eta2(k_true: np.ndarray, k_est: np.ndarray) -> float:
    """Sum over all entries of (K - K_hat)^2"""
    k_true = np.asarray(k_true, dtype=float)
    k_est = np.asarray(k_est, dtype=float)
    if k_true.shape != k_est.shape:
        raise MetricError(f"shape mismatch: truth {k_true.shape} vs estimate {k_est.shape}")
    return float(np.sum((k_true - k_est) ** 2))


def convert_numpy_types(obj):
    """Make numpy scalars and arrays JSON serializable"""
    if isinstance(obj, dict):
        return {str(k): convert_numpy_types(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [convert_numpy_types(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return convert_numpy_types(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        value = float(obj)
        return None if not np.isfinite(value) else value
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


@dataclass
class EstimateResult:
    """Estimated attack parameters of one estimator run"""
    estimator: str
    load_buses: Tuple[int, ...]
    sensing_buses: Tuple[int, ...]
    gains: np.ndarray            # L x S
    steps: np.ndarray            # L
    truth: Optional[AttackConfig] = None
    duration_s: float = 0.0
    flags: Dict[str, Any] = field(default_factory=dict)
    failed_buses: List[int] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)
    eta1: Dict[Tuple[int, int], float] = field(init=False, default_factory=dict)
    eta2: Optional[float] = field(init=False, default=None)
    step_sq_error: Optional[float] = field(init=False, default=None)

    def __post_init__(self):
        self.load_buses = tuple(self.load_buses)
        self.sensing_buses = tuple(self.sensing_buses)
        self.gains = np.asarray(self.gains, dtype=float).reshape(len(self.load_buses), len(self.sensing_buses))
        self.steps = np.asarray(self.steps, dtype=float).reshape(len(self.load_buses))
        if self.truth is not None:
            self.score(self.truth)

    def score(self, truth: AttackConfig):
        """Attach ground truth and recompute eta1 / eta2"""
        if truth.load_buses != self.load_buses or truth.sensing_buses != self.sensing_buses:
            raise MetricError("truth and estimate cover different buses")
        self.truth = truth
        self.eta1 = {(v, s): eta1(k, self.gain(v, s)) for v, s, k in truth.nonzero_entries()}
        self.eta2 = eta2(truth.gains, self.gains)
        self.step_sq_error = float(np.sum((truth.static_step - self.steps) ** 2))

    def gain(self, victim: int, sensing: int) -> float:
        return float(self.gains[self.load_buses.index(victim), self.sensing_buses.index(sensing)])

    def step(self, victim: int) -> float:
        return float(self.steps[self.load_buses.index(victim)])

    def attacked_entries(self, threshold: float = 0.5) -> List[Tuple[int, int, float]]:
        """Entries whose |K_hat| exceeds the report threshold"""
        rows, cols = np.nonzero(np.abs(np.nan_to_num(self.gains)) > threshold)
        return [(self.load_buses[i], self.sensing_buses[j], float(self.gains[i, j])) for i, j in zip(rows, cols)]

    @property
    def succeeded(self) -> bool:
        return not self.failed_buses and np.all(np.isfinite(self.gains))

    def to_frame(self) -> pd.DataFrame:
        rows = []
        true_gains = self.truth.gains if self.truth is not None else np.full_like(self.gains, np.nan)
        for i, v in enumerate(self.load_buses):
            for j, s in enumerate(self.sensing_buses):
                k_true = true_gains[i, j]
                rows.append({"victim_bus": v, "sensing_bus": s, "K_true": k_true, "K_est": self.gains[i, j],
                             "eta1": eta1(k_true, self.gains[i, j]) if np.isfinite(k_true) and k_true != 0.0
                             else np.nan})
        return pd.DataFrame(rows, columns=["victim_bus", "sensing_bus", "K_true", "K_est", "eta1"])

    def summary(self) -> Dict[str, Any]:
        return convert_numpy_types({
            "estimator": self.estimator,
            "eta2": self.eta2,
            "step_sq_error": self.step_sq_error,
            "eta1": {f"{v}-{s}": e for (v, s), e in self.eta1.items()},
            "attacked_entries": [{"victim": v, "sensing": s, "K_est": k} for v, s, k in self.attacked_entries()],
            "steps": {str(b): e for b, e in zip(self.load_buses, self.steps) if e != 0.0},
            "failed_buses": self.failed_buses,
            "flags": self.flags,
        })


def save_estimate(result: EstimateResult, out_dir: Union[str, Path], stem: str = "estimate",
                  fmt: str = "csv") -> Tuple[Path, Path]:
    """Write the per-entry table (csv or json records) and the summary JSON"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table_path = out_dir / f"{stem}.{fmt}"
    json_path = out_dir / f"{stem}_summary.json"
    if fmt == "json":
        result.to_frame().to_json(table_path, orient="records", double_precision=10, indent=2)
    else:
        result.to_frame().to_csv(table_path, index=False, float_format="%.10g")
    with open(json_path, "w") as f:
        json.dump(result.summary(), f, indent=4, default=str)
    logger.info(f"Saved {result.estimator} estimate to {table_path}")
    return table_path, json_path
