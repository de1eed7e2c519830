"""
PINN Identification Module
==========================

Physics-informed neural-network identifier for LAA parameters:
- StateNet: time -> (all bus angles, generator frequencies), tanh MLP
- Data, physics and sparsity losses over the measurement instants
- Data-fit warm-up, least-squares (K, eps) start, then joint training of network
  weights and attack parameters (LBFGS, Adam fallback)
- Time derivatives of the network by forward-mode autograd
- No-attack pre-training with checkpoint save / load
- Decentralized per-bus problem using only the bus's information pattern
- Loss-trace export for log-log convergence plots
"""

import logging
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import torch
import torch.nn as nn
from scipy.optimize import lsq_linear
from tqdm import tqdm

from .autodiff import forward_time_derivative
from .dynamics import AttackConfig
from .exceptions import ConfigError, TrainingDivergedError
from .grid_model import GridModel
from .metrics import EstimateResult
from .pmu import MeasurementSet

logger = logging.getLogger(__name__)

DTYPE = torch.float64
TRACE_COLUMNS = ["iter", "L1", "L2", "L3", "total"]


class TrainingStatus(Enum):
    """Outcome of a training run"""
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    STALLED = "stalled"


@dataclass
class PinnSettings:
    """PINN tunables"""
    hidden: Tuple[int, ...] = (50, 50, 50)
    alpha: float = 1e-3                 # sparsity weight
    optimizer: str = "lbfgs"            # "lbfgs" or "adam"
    lr: float = 1.0                     # LBFGS step; Adam uses adam_lr
    adam_lr: float = 1e-3
    max_evals: int = 50000              # loss evaluations
    chunk: int = 20                     # evaluations per LBFGS step() call
    history_size: int = 50
    tol: float = 1e-9                   # relative decrease over `window` evaluations
    window: int = 100
    stall_ratio: float = 0.01           # final / initial loss above this after early stop => stalled
    fit_evals: int = 2000               # data-only warm-up before joint training; 0 skips it
    pretrain_evals: int = 2000
    nonneg: bool = True
    seed: int = 0
    show_progress: bool = False

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.alpha < 0:
            raise ConfigError("alpha must be nonnegative")
        if self.optimizer not in ("lbfgs", "adam"):
            raise ConfigError(f"unknown optimizer '{self.optimizer}'")
        if self.max_evals < 1 or self.chunk < 1 or self.window < 2:
            raise ConfigError("max_evals, chunk and window must be positive")
        if self.fit_evals < 0:
            raise ConfigError("fit_evals must be nonnegative")
        if not self.hidden or min(self.hidden) < 1:
            raise ConfigError("hidden layer widths must be positive")


class StateNet(nn.Module):
    """Fully connected tanh network on normalized time"""

    def __init__(self, n_out: int, hidden: Sequence[int] = (50, 50, 50), seed: int = 0):
        super(StateNet, self).__init__()
        widths = [1] + list(hidden)
        self.hidden_layers = nn.ModuleList(
            [nn.Linear(a, b).to(DTYPE) for a, b in zip(widths[:-1], widths[1:])])
        self.output_layer = nn.Linear(widths[-1], n_out).to(DTYPE)
        self.n_out = n_out
        self.hidden = tuple(hidden)
        self.reset_parameters(seed)

    def reset_parameters(self, seed: int):
        """Symmetric uniform fan-in initialization from a seeded generator"""
        gen = torch.Generator().manual_seed(int(seed))
        with torch.no_grad():
            for layer in list(self.hidden_layers) + [self.output_layer]:
                bound = 1.0 / np.sqrt(layer.in_features)
                for p in (layer.weight, layer.bias):
                    p.copy_((torch.rand(p.shape, generator=gen, dtype=DTYPE) * 2.0 - 1.0) * bound)

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        x = t
        for layer in self.hidden_layers:
            x = torch.tanh(layer(x))
        return self.output_layer(x)

    def forward_with_derivative(self, t: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """Outputs and their derivative with respect to the (normalized) input"""
        return forward_time_derivative(self.forward, t)


def _normalization(targets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mean = targets.mean(axis=0)
    std = targets.std(axis=0)
    std = np.where(std <= 1e-8, 1.0, std)
    return mean, std


class _PinnProblemBase:
    """Shared data binding, normalization and parameter handling"""

    n_out: int

    def __init__(self, model: GridModel, ms: MeasurementSet, sensing: Optional[Sequence[int]],
                 settings: Optional[PinnSettings]):
        self.model = model
        self.settings = settings or PinnSettings()
        self.sensing = tuple(model.gen_buses if sensing is None else sensing)
        self.alpha = self.settings.alpha
        self.net: nn.Module = StateNet(self.n_out, self.settings.hidden, self.settings.seed)
        self.warm_started = False
        self.mean = None
        self.std = None
        self.bind(ms)

    # ---- data ----------------------------------------------------------

    def _targets(self, ms: MeasurementSet) -> np.ndarray:
        raise NotImplementedError

    def bind(self, ms: MeasurementSet, keep_normalization: bool = False):
        """Attach a measurement set as data and collocation grid"""
        targets = self._targets(ms)
        self.ms = ms
        t0, t1 = ms.window
        self.t_range = (t0, t1 if t1 > t0 else t0 + ms.sample_period)
        span = self.t_range[1] - self.t_range[0]
        self.time_scale = 2.0 / span
        tn = 2.0 * (ms.time - self.t_range[0]) / span - 1.0
        self.t_norm = torch.tensor(tn[:, None], dtype=DTYPE)
        self.targets = torch.tensor(targets, dtype=DTYPE)
        if not keep_normalization or self.mean is None:
            mean, std = _normalization(targets)
            self.mean = torch.tensor(mean, dtype=DTYPE)
            self.std = torch.tensor(std, dtype=DTYPE)
        self._bind_fixed(ms)

    def _bind_fixed(self, ms: MeasurementSet):
        pass

    def outputs(self) -> Tuple[torch.Tensor, torch.Tensor]:
        """Network outputs and time derivatives in physical units"""
        out, d_out = self.net.forward_with_derivative(self.t_norm)
        return self.mean + self.std * out, self.std * d_out * self.time_scale

    # ---- parameters ----------------------------------------------------

    def trainable(self) -> List[torch.Tensor]:
        return list(self.net.parameters()) + [self.K, self.eps]

    def project(self):
        if self.settings.nonneg:
            with torch.no_grad():
                self.K.clamp_(min=0.0)

    def sparsity_loss(self) -> torch.Tensor:
        return self.alpha * (self.K.abs().sum() + self.eps.abs().sum())

    def losses(self) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        raise NotImplementedError

    def data_loss(self) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """(L1, 0, 0), for fitting the network alone"""
        zero = torch.zeros((), dtype=DTYPE)
        return self.fit_loss(), zero, zero

    def fit_loss(self) -> torch.Tensor:
        raise NotImplementedError

    def load_terms(self) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Load-bus residual split as f3 = drive - sensed @ K.T + eps

        Returns:
            (drive T x rows, sensed T x S) at the current network
        """
        raise NotImplementedError

    def initialize_parameters(self):
        """Set (K, eps) to the bounded least-squares fit of the load-bus residual"""
        drive, sensed = (x.detach().numpy() for x in self.load_terms())
        S = sensed.shape[1]
        design = np.hstack([sensed, -np.ones((len(sensed), 1))])
        lower = np.full(S + 1, -np.inf)
        if self.settings.nonneg:
            lower[:S] = 0.0
        gains = np.zeros((drive.shape[1], S))
        steps = np.zeros(drive.shape[1])
        for row in range(drive.shape[1]):
            fit = lsq_linear(design, drive[:, row], bounds=(lower, np.inf))
            gains[row], steps[row] = fit.x[:S], fit.x[S]
        with torch.no_grad():
            self.K.copy_(torch.tensor(gains, dtype=DTYPE))
            self.eps.copy_(torch.tensor(steps, dtype=DTYPE))

    def load_weights(self, checkpoint: Dict[str, Any]):
        """Initialize the network from a pre-training checkpoint"""
        if checkpoint["n_out"] != self.n_out or tuple(checkpoint["hidden"]) != tuple(self.settings.hidden):
            raise ConfigError(f"checkpoint architecture {checkpoint['hidden']} -> {checkpoint['n_out']} "
                              f"does not match {self.settings.hidden} -> {self.n_out}")
        self.net.load_state_dict(checkpoint["state_dict"])
        self.warm_started = True


class PinnProblem(_PinnProblemBase):
    """
    Centralized inverse problem over the whole grid

    The network predicts every bus angle and every generator frequency; the
    physics residuals cover the generator angle-frequency link, the
    generator swing equation and the attacked load-bus equation.
    """

    def __init__(self, model: GridModel, ms: MeasurementSet, sensing: Optional[Sequence[int]] = None,
                 settings: Optional[PinnSettings] = None):
        self.n_out = model.n_buses + model.n_gens
        super().__init__(model, ms, sensing, settings)
        self.K = nn.Parameter(torch.zeros((model.n_loads, len(self.sensing)), dtype=DTYPE))
        self.eps = nn.Parameter(torch.zeros(model.n_loads, dtype=DTYPE))

        f, t, b = model.branches
        self._from = torch.tensor(f, dtype=torch.long)
        self._to = torch.tensor(t, dtype=torch.long)
        self._b = torch.tensor(b, dtype=DTYPE)
        self._incidence = torch.tensor(model.incidence, dtype=DTYPE)
        self._gen = torch.tensor(model.gen_index, dtype=torch.long)
        self._load = torch.tensor(model.load_index, dtype=torch.long)
        self._M = torch.tensor(model.inertia, dtype=DTYPE)
        self._gen_friction = torch.tensor(model.gen_damping + model.gov_p_gain, dtype=DTYPE)
        self._Ki = torch.tensor(model.gov_i_gain, dtype=DTYPE)
        self._D_load = torch.tensor(model.load_damping, dtype=DTYPE)
        self._P_secure = torch.tensor(model.secure_load, dtype=DTYPE)
        # each sensing bus reads omega (generator) or delta_dot (load)
        self._sense_from_omega = [model.is_generator(s) for s in self.sensing]
        self._sense_index = [model.gen_position(s) if model.is_generator(s) else s - 1 for s in self.sensing]

    def _targets(self, ms: MeasurementSet) -> np.ndarray:
        buses = list(range(1, self.model.n_buses + 1))
        return np.hstack([ms.angles(buses), ms.freqs(self.model.gen_buses)])

    def power_flow(self, delta: torch.Tensor) -> torch.Tensor:
        flow = self._b * torch.sin(delta[:, self._from] - delta[:, self._to])
        return flow @ self._incidence

    def state(self):
        """(delta_hat, omega_hat, delta_hat_dot, omega_hat_dot), each T x channels"""
        y, dy = self.outputs()
        N = self.model.n_buses
        return y[:, :N], y[:, N:], dy[:, :N], dy[:, N:]

    def sensed_frequency(self, omega: torch.Tensor, delta_dot: torch.Tensor) -> torch.Tensor:
        cols = [omega[:, k] if from_omega else delta_dot[:, k]
                for from_omega, k in zip(self._sense_from_omega, self._sense_index)]
        return torch.stack(cols, dim=1)

    def _terms(self, delta, omega, delta_dot):
        flow = self.power_flow(delta)
        drive = self._D_load * delta_dot[:, self._load] + self._P_secure + flow[:, self._load]
        return flow, drive, self.sensed_frequency(omega, delta_dot)

    def load_terms(self) -> Tuple[torch.Tensor, torch.Tensor]:
        delta, omega, delta_dot, _ = self.state()
        _, drive, sensed = self._terms(delta, omega, delta_dot)
        return drive, sensed

    def residuals(self) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        delta, omega, delta_dot, omega_dot = self.state()
        flow, drive, sensed = self._terms(delta, omega, delta_dot)
        f1 = delta_dot[:, self._gen] - omega
        f2 = (self._M * omega_dot + self._gen_friction * omega + self._Ki * delta[:, self._gen]
              + flow[:, self._gen])
        f3 = drive - sensed @ self.K.T + self.eps
        return f1, f2, f3

    def fit_loss(self) -> torch.Tensor:
        y = self.mean + self.std * self.net(self.t_norm)
        return ((y - self.targets) ** 2).sum(dim=1).mean()

    def losses(self) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        l1 = self.fit_loss()
        f1, f2, f3 = self.residuals()
        l2 = (f1 ** 2).sum(dim=1).mean() + (f2 ** 2).sum(dim=1).mean() + (f3 ** 2).sum(dim=1).mean()
        return l1, l2, self.sparsity_loss()

    def estimates(self) -> Tuple[Tuple[int, ...], np.ndarray, np.ndarray]:
        return self.model.load_buses, self.K.detach().numpy().copy(), self.eps.detach().numpy().copy()


class LocalPinnProblem(_PinnProblemBase):
    """
    Decentralized inverse problem at one load bus

    The network predicts only the bus's own angle. Neighbor angles and
    sensing-bus frequencies enter the load-bus residual as fixed measured
    data, so the problem needs nothing outside the bus's information pattern.
    """

    def __init__(self, model: GridModel, ms: MeasurementSet, bus: int, sensing: Optional[Sequence[int]] = None,
                 settings: Optional[PinnSettings] = None):
        if bus not in model.load_buses:
            raise ValueError(f"bus {bus} is not a load bus")
        self.bus = bus
        self.n_out = 1
        self.neighbors = tuple(sorted(model.neighbors[bus]))
        super().__init__(model, ms, sensing, settings)
        self.K = nn.Parameter(torch.zeros((1, len(self.sensing)), dtype=DTYPE))
        self.eps = nn.Parameter(torch.zeros(1, dtype=DTYPE))
        self._D = float(model.damping[bus - 1])
        self._P_secure = float(model.secure_load[model.load_position(bus)])
        self._b = torch.tensor([model.susceptance[bus - 1, j - 1] for j in self.neighbors], dtype=DTYPE)

    def _targets(self, ms: MeasurementSet) -> np.ndarray:
        return ms.angles([self.bus])

    def _bind_fixed(self, ms: MeasurementSet):
        self.own_freq = torch.tensor(ms.freqs([self.bus])[:, 0], dtype=DTYPE)
        self.neighbor_angles = torch.tensor(ms.angles(self.neighbors), dtype=DTYPE)
        self.sensed = torch.tensor(ms.freqs(self.sensing), dtype=DTYPE)

    def load_terms(self) -> Tuple[torch.Tensor, torch.Tensor]:
        y, dy = self.outputs()
        delta, delta_dot = y[:, 0], dy[:, 0]
        flow = (self._b * torch.sin(delta[:, None] - self.neighbor_angles)).sum(dim=1)
        return (self._D * delta_dot + self._P_secure + flow)[:, None], self.sensed

    def residuals(self) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        drive, sensed = self.load_terms()
        f3 = drive - sensed @ self.K.T + self.eps
        empty = torch.zeros((len(drive), 0), dtype=DTYPE)
        return empty, empty, f3

    def fit_loss(self) -> torch.Tensor:
        y, dy = self.outputs()
        return ((y[:, 0] - self.targets[:, 0]) ** 2 + (dy[:, 0] - self.own_freq) ** 2).mean()

    def losses(self) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        l1 = self.fit_loss()
        _, _, f3 = self.residuals()
        l2 = (f3 ** 2).sum(dim=1).mean()
        return l1, l2, self.sparsity_loss()

    def estimates(self) -> Tuple[Tuple[int, ...], np.ndarray, np.ndarray]:
        return (self.bus,), self.K.detach().numpy().copy(), self.eps.detach().numpy().copy()


def losses(problem: _PinnProblemBase, ms: Optional[MeasurementSet] = None
           ) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(L1, L2, L3) of a problem, optionally rebound to another measurement set"""
    if ms is not None:
        problem.bind(ms, keep_normalization=True)
    return problem.losses()


# ---- training ------------------------------------------------------------

@dataclass
class TrainingReport:
    """Loss trace and stopping information of one training run"""
    status: TrainingStatus
    trace: List[Tuple[int, float, float, float, float]]
    n_evals: int
    duration_s: float

    @property
    def initial_loss(self) -> float:
        return self.trace[0][4] if self.trace else float("nan")

    @property
    def final_loss(self) -> float:
        return self.trace[-1][4] if self.trace else float("nan")

    @property
    def low_confidence(self) -> bool:
        return self.status is TrainingStatus.STALLED

    def followed_by(self, later: "TrainingReport") -> "TrainingReport":
        """One report for two consecutive phases; the later phase decides the status"""
        offset = len(self.trace)
        trace = self.trace + [(i + offset, *rest) for i, *rest in later.trace]
        return TrainingReport(status=later.status, trace=trace, n_evals=self.n_evals + later.n_evals,
                              duration_s=self.duration_s + later.duration_s)

    def frame(self) -> pd.DataFrame:
        return loss_trace_frame(self.trace)


def loss_trace_frame(trace: Sequence[Tuple[int, float, float, float, float]]) -> pd.DataFrame:
    return pd.DataFrame(list(trace), columns=TRACE_COLUMNS)


def save_loss_trace(trace: Sequence[Tuple[int, float, float, float, float]], path: Union[str, Path]) -> Path:
    path = Path(path)
    loss_trace_frame(trace).to_csv(path, index=False, float_format="%.10g")
    return path


def _optimize(problem: _PinnProblemBase, params: List[torch.Tensor], loss_fn, settings: PinnSettings,
              max_evals: int, desc: str) -> TrainingReport:
    """Run the configured optimizer until convergence, stall or the evaluation cap"""
    if settings.optimizer == "lbfgs":
        optimizer = torch.optim.LBFGS(params, lr=settings.lr, max_iter=settings.chunk,
                                      history_size=settings.history_size, line_search_fn="strong_wolfe",
                                      tolerance_grad=1e-12, tolerance_change=1e-15)
    else:
        optimizer = torch.optim.Adam(params, lr=settings.adam_lr)

    trace: List[Tuple[int, float, float, float, float]] = []
    best: List[float] = []

    def closure():
        optimizer.zero_grad()
        l1, l2, l3 = loss_fn()
        total = l1 + l2 + l3
        if not torch.isfinite(total):
            raise TrainingDivergedError(f"non-finite loss after {len(trace)} evaluations", trace)
        total.backward()
        value = total.item()
        trace.append((len(trace), l1.item(), l2.item(), l3.item(), value))
        best.append(min(value, best[-1]) if best else value)
        return total

    start = time.perf_counter()
    status = TrainingStatus.MAX_ITER
    early = False
    with tqdm(total=max_evals, desc=desc, leave=False, disable=not settings.show_progress) as bar:
        while len(trace) < max_evals:
            before = len(trace)
            if settings.optimizer == "lbfgs":
                optimizer.step(closure)
            else:
                for _ in range(min(settings.chunk, max_evals - len(trace))):
                    optimizer.step(closure)
            problem.project()
            made = len(trace) - before
            bar.update(made)

            if settings.optimizer == "lbfgs" and made <= 1:
                early = True
                break
            if len(best) > settings.window:
                reference = best[-settings.window - 1]
                if (reference - best[-1]) <= settings.tol * max(abs(reference), 1e-300):
                    early = True
                    break

    if early:
        ratio = best[-1] / best[0] if best and best[0] > 0 else 0.0
        status = TrainingStatus.STALLED if ratio > settings.stall_ratio else TrainingStatus.CONVERGED
    report = TrainingReport(status=status, trace=trace, n_evals=len(trace),
                            duration_s=time.perf_counter() - start)
    logger.info(f"{desc}: {status.value} after {report.n_evals} evaluations, "
                f"loss {report.initial_loss:.4g} -> {report.final_loss:.4g}")
    if status is TrainingStatus.STALLED:
        logger.warning(f"{desc}: training stalled, result flagged low-confidence")
    return report


def train(problem: _PinnProblemBase, truth: Optional[AttackConfig] = None,
          estimator: str = "pinn") -> Tuple[EstimateResult, TrainingReport]:
    """
    Minimize L1 + L2 + L3 jointly over the network weights and (K, eps)

    A network that was not warm-started from a checkpoint first fits the data
    alone for `fit_evals` evaluations; (K, eps) then start from the bounded
    least-squares solution of the load-bus residual at that network.

    Args:
        problem: PinnProblem or LocalPinnProblem
        truth: Ground truth for scoring (centralized problems only)
        estimator: Tag written into the result

    Returns:
        (EstimateResult, TrainingReport with the per-evaluation loss trace)
    """
    settings = problem.settings
    warmup = None
    if not problem.warm_started and settings.fit_evals > 0:
        warmup = _optimize(problem, list(problem.net.parameters()), problem.data_loss, settings,
                           settings.fit_evals, desc=f"{estimator} data fit")
        problem.initialize_parameters()
    report = _optimize(problem, problem.trainable(), problem.losses, settings, settings.max_evals,
                       desc=f"{estimator} training")
    if warmup is not None:
        report = warmup.followed_by(report)
    load_buses, gains, steps = problem.estimates()
    final = report.trace[-1] if report.trace else (0, np.nan, np.nan, np.nan, np.nan)
    result = EstimateResult(
        estimator=estimator, load_buses=load_buses, sensing_buses=problem.sensing, gains=gains, steps=steps,
        truth=truth if isinstance(problem, PinnProblem) else None, duration_s=report.duration_s,
        flags={"status": report.status.value, "low_confidence": report.low_confidence,
               "evaluations": report.n_evals, "work": report.n_evals, "work_unit": "loss_evaluations",
               "alpha": settings.alpha, "optimizer": settings.optimizer},
        details={"final_losses": dict(zip(TRACE_COLUMNS[1:], final[1:])), "trace": report.trace})
    return result, report


def identify_pinn(model: GridModel, ms: MeasurementSet, sensing: Optional[Sequence[int]] = None,
                  settings: Optional[PinnSettings] = None, truth: Optional[AttackConfig] = None,
                  checkpoint: Optional[Dict[str, Any]] = None) -> Tuple[EstimateResult, TrainingReport]:
    """Build a centralized problem, optionally warm-start it, and train"""
    problem = PinnProblem(model, ms, sensing, settings)
    estimator = "pinn"
    if checkpoint is not None:
        problem.load_weights(checkpoint)
        estimator = "pinn-pretrained"
    return train(problem, truth=truth, estimator=estimator)


def train_local(model: GridModel, ms: MeasurementSet, bus: int, sensing: Optional[Sequence[int]] = None,
                settings: Optional[PinnSettings] = None) -> Tuple[EstimateResult, TrainingReport]:
    """Decentralized PINN at one load bus from its information pattern"""
    problem = LocalPinnProblem(model, ms, bus, sensing, settings)
    return train(problem, estimator="pinn-local")


# ---- pre-training ----------------------------------------------------------

def pretrain(model: GridModel, ms_no_attack: MeasurementSet,
             settings: Optional[PinnSettings] = None) -> Dict[str, Any]:
    """
    Fit StateNet to no-attack measurements with the data loss only

    Returns:
        Checkpoint dict usable by PinnProblem.load_weights / save_checkpoint
    """
    settings = settings or PinnSettings()
    problem = PinnProblem(model, ms_no_attack, None, settings)
    report = _optimize(problem, list(problem.net.parameters()), problem.data_loss, settings,
                       settings.pretrain_evals, desc="pinn pre-training")
    return {
        "state_dict": {k: v.detach().clone() for k, v in problem.net.state_dict().items()},
        "t_range": torch.tensor(problem.t_range, dtype=DTYPE),
        "mean": problem.mean.clone(),
        "std": problem.std.clone(),
        "hidden": list(settings.hidden),
        "n_out": problem.n_out,
        "final_loss": report.final_loss,
    }


def save_checkpoint(checkpoint: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(checkpoint, path)
    logger.info(f"Saved PINN checkpoint to {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> Dict[str, Any]:
    return torch.load(Path(path))
