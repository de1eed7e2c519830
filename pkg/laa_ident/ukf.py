"""
UKF Identification Module
=========================

Joint state and parameter estimation with an unscented Kalman filter:
- Augmented state [delta (all buses), omega (generators), attack parameters]
- "row" mode: one victim row K_v,. plus eps_v (S + 1 unknowns); the victim is
  given or picked from a sparse-regression pass over the same frames
- "full" mode: every gain and every static step
- RK4 propagation of sigma points through the attacked swing dynamics
- Linear measurement of all angles and generator frequencies
- Symmetrized, PSD-checked covariance at every step
- Parameter-trace export (t, param_id, estimate, variance)
"""

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.linalg import cholesky, LinAlgError
from tqdm import tqdm

from .dynamics import AttackConfig
from .exceptions import ConfigError, UkfError
from .grid_model import GridModel
from .metrics import EstimateResult
from .pmu import MeasurementSet
from .sparse_regression import identify_all

logger = logging.getLogger(__name__)

PSD_TOLERANCE = 1e-9
JITTER_STEPS = (0.0, 1e-12, 1e-10, 1e-8, 1e-6)
VICTIM_FLOOR = 1e-8                    # smaller regression rows count as unattacked


@dataclass
class UkfSettings:
    """UKF tunables"""
    mode: str = "row"                    # "row" or "full"
    victim_bus: Optional[int] = None     # row mode; selected from a sparse-regression pass when unset
    alpha: float = 1.0                   # sigma-point spread; below 1 the centre weight goes negative
    beta: float = 2.0                    # prior-knowledge weight
    kappa: float = 0.0                   # secondary scaling
    param_process_noise: float = 1e-6    # random-walk variance per step
    state_process_noise: float = 0.0
    measurement_noise: Optional[float] = None   # variance; defaults to the synthesis sigma^2
    param_variance: float = 100.0        # initial parameter variance
    initial_params: Optional[np.ndarray] = None
    show_progress: bool = False

    def __post_init__(self):
        if self.mode not in ("row", "full"):
            raise ConfigError(f"unknown UKF mode '{self.mode}'")
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if min(self.param_process_noise, self.state_process_noise, self.param_variance) < 0:
            raise ConfigError("noise variances must be nonnegative")
        if self.measurement_noise is not None and self.measurement_noise < 0:
            raise ConfigError("measurement noise must be nonnegative")


@dataclass
class UkfState:
    """Filter mean and covariance after `step` updates"""
    mean: np.ndarray
    cov: np.ndarray
    t: float                  # s
    step: int = 0
    min_eig: float = 0.0


@dataclass
class SigmaWeights:
    lam: float
    mean: np.ndarray
    cov: np.ndarray


def sigma_weights(n: int, alpha: float = 1.0, beta: float = 2.0, kappa: float = 0.0) -> SigmaWeights:
    """Scaled unscented-transform weights for an n-dimensional state"""
    lam = alpha ** 2 * (n + kappa) - n
    wi = 1.0 / (2.0 * (n + lam))
    wm = np.full(2 * n + 1, wi)
    wm[0] = 1.0 - 2 * n * wi
    wc = wm.copy()
    wc[0] += 1.0 - alpha ** 2 + beta
    return SigmaWeights(lam, wm, wc)


def _factor(matrix: np.ndarray, step: int) -> np.ndarray:
    """Lower Cholesky factor, retried with growing diagonal jitter"""
    scale = max(float(np.max(np.abs(np.diag(matrix)))), 1.0)
    for jitter in JITTER_STEPS:
        try:
            return cholesky(matrix + jitter * scale * np.eye(len(matrix)), lower=True)
        except LinAlgError:
            continue
    raise UkfError("covariance is not positive definite after jitter retries", step)


def sigma_points(mean: np.ndarray, cov: np.ndarray, weights: SigmaWeights, step: int = 0) -> np.ndarray:
    """(2n + 1) x n sigma points"""
    n = len(mean)
    L = _factor((n + weights.lam) * cov, step)
    return np.vstack([mean, mean + L.T, mean - L.T])


def unscented_transform(mean: np.ndarray, cov: np.ndarray, fn: Callable[[np.ndarray], np.ndarray],
                        settings: Optional[UkfSettings] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Propagate a Gaussian through fn

    Args:
        mean: n-vector
        cov: n x n covariance
        fn: Maps a batch of points (k x n) to outputs (k x m)
        settings: Sigma-point parameters

    Returns:
        (output mean, output covariance)
    """
    settings = settings or UkfSettings()
    mean = np.asarray(mean, dtype=float)
    weights = sigma_weights(len(mean), settings.alpha, settings.beta, settings.kappa)
    Y = np.atleast_2d(fn(sigma_points(mean, np.asarray(cov, dtype=float), weights)))
    y_mean = weights.mean @ Y
    dev = Y - y_mean
    return y_mean, (weights.cov[:, None] * dev).T @ dev


class UnscentedKalmanFilter:
    """
    Augmented-state UKF for the attacked swing dynamics

    Sigma points carry their own attack parameters, so each point is
    propagated with its own load-bus injection. Sensing buses must be
    generator buses.
    """

    def __init__(self, model: GridModel, sensing: Sequence[int], settings: Optional[UkfSettings] = None,
                 victim_bus: Optional[int] = None, onset_time: float = 0.0):
        self.model = model
        self.settings = settings or UkfSettings()
        self.sensing = tuple(sensing)
        self.onset_time = onset_time
        self.logger = logging.getLogger(__name__)
        self.n_repairs = 0
        self.n_evals = 0
        for bus in self.sensing:
            if not model.is_generator(bus):
                raise ConfigError(f"UKF sensing bus {bus} must be a generator bus")

        N, G, L, S = model.n_buses, model.n_gens, model.n_loads, len(self.sensing)
        self.n_phys = N + G
        self.sense_state = np.array([N + model.gen_position(b) for b in self.sensing], dtype=int)
        if self.settings.mode == "row":
            if victim_bus is None or victim_bus not in model.load_buses:
                raise ConfigError(f"row mode needs a load victim bus, got {victim_bus}")
            self.victim_bus = victim_bus
            self.victim_row = model.load_position(victim_bus)
            self.param_ids = [f"K_{victim_bus}_{s}" for s in self.sensing] + [f"eps_{victim_bus}"]
        else:
            self.victim_bus = None
            self.victim_row = None
            self.param_ids = ([f"K_{v}_{s}" for v in model.load_buses for s in self.sensing]
                              + [f"eps_{v}" for v in model.load_buses])
        self.n_params = len(self.param_ids)
        self.n = self.n_phys + self.n_params
        self.n_loads, self.n_sensing = L, S
        self.weights = sigma_weights(self.n, self.settings.alpha, self.settings.beta, self.settings.kappa)

        # RK4 is stable for real eigenvalues down to about -2.78 / h
        bound = max(model.stiffness_bound(), 1e-12)
        self.max_substep = 2.5 / bound

        self.Q = np.zeros((self.n, self.n))
        self.Q[:self.n_phys, :self.n_phys] = self.settings.state_process_noise * np.eye(self.n_phys)
        self.Q[self.n_phys:, self.n_phys:] = self.settings.param_process_noise * np.eye(self.n_params)

    # ---- model ---------------------------------------------------------

    def _split_params(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Batched (gains k x L x S, steps k x L) from augmented points"""
        P = X[:, self.n_phys:]
        k = X.shape[0]
        L, S = self.n_loads, self.n_sensing
        gains = np.zeros((k, L, S))
        steps = np.zeros((k, L))
        if self.settings.mode == "row":
            gains[:, self.victim_row, :] = P[:, :S]
            steps[:, self.victim_row] = P[:, S]
        else:
            gains[:] = P[:, :L * S].reshape(k, L, S)
            steps[:] = P[:, L * S:]
        return gains, steps

    def derivative(self, t: float, X: np.ndarray) -> np.ndarray:
        """Time derivative of a batch of augmented states; parameters are constant"""
        self.n_evals += len(X)
        model = self.model
        N = model.n_buses
        delta = X[:, :N]
        omega = X[:, N:self.n_phys]
        flow = model.power_flow(delta)
        out = np.zeros_like(X)
        out[:, model.gen_index] = omega
        out[:, N:self.n_phys] = (-(model.gen_damping + model.gov_p_gain) * omega
                                 - model.gov_i_gain * delta[:, model.gen_index]
                                 - flow[:, model.gen_index]) / model.inertia
        load_rhs = -model.secure_load - flow[:, model.load_index]
        if t >= self.onset_time:
            gains, steps = self._split_params(X)
            load_rhs = load_rhs + np.einsum("kls,ks->kl", gains, X[:, self.sense_state]) - steps
        out[:, model.load_index] = load_rhs / model.load_damping
        return out

    def propagate(self, X: np.ndarray, t: float, dt: float) -> np.ndarray:
        """Classical RK4 over dt with substeps below the stability bound"""
        n_sub = max(1, int(np.ceil(dt / self.max_substep)))
        h = dt / n_sub
        for i in range(n_sub):
            ti = t + i * h
            k1 = self.derivative(ti, X)
            k2 = self.derivative(ti + h / 2, X + h / 2 * k1)
            k3 = self.derivative(ti + h / 2, X + h / 2 * k2)
            k4 = self.derivative(ti + h, X + h * k3)
            X = X + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        return X

    # ---- filter --------------------------------------------------------

    def _condition(self, cov: np.ndarray, step: int) -> Tuple[np.ndarray, float]:
        """Re-symmetrize and check the smallest eigenvalue"""
        cov = 0.5 * (cov + cov.T)
        eigvals, eigvecs = np.linalg.eigh(cov)
        min_eig = float(eigvals[0])
        if min_eig < -PSD_TOLERANCE:
            self.logger.warning(f"Step {step}: covariance eigenvalue {min_eig:.3g}, clipping to zero")
            self.n_repairs += 1
            cov = (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T
            cov = 0.5 * (cov + cov.T)
            min_eig = float(max(eigvals[0], 0.0))
        return cov, min_eig

    def initial_state(self, frame: np.ndarray, t0: float, meas_var: float) -> UkfState:
        params = self.settings.initial_params
        params = np.zeros(self.n_params) if params is None else np.asarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise ConfigError(f"initial_params must have {self.n_params} entries, got {params.shape}")
        mean = np.concatenate([frame, params])
        cov = np.zeros((self.n, self.n))
        cov[:self.n_phys, :self.n_phys] = max(meas_var, 1e-12) * np.eye(self.n_phys)
        cov[self.n_phys:, self.n_phys:] = self.settings.param_variance * np.eye(self.n_params)
        return UkfState(mean=mean, cov=cov, t=t0, step=0, min_eig=float(np.min(np.diag(cov))))

    def step(self, state: UkfState, frame: np.ndarray, dt: float, meas_var: float) -> UkfState:
        """
        One predict + update cycle

        Args:
            state: Filter state at time t
            frame: Measured [delta (all buses), omega (generators)] at t + dt
            dt: Frame interval, s
            meas_var: Measurement noise variance

        Returns:
            Filter state at t + dt
        """
        if dt <= 0:
            raise ValueError("dt must be positive")
        k = state.step + 1
        W = self.weights

        # predict
        X = sigma_points(state.mean, state.cov, W, k)
        X = self.propagate(X, state.t, dt)
        mean = W.mean @ X
        dev = X - mean
        cov = (W.cov[:, None] * dev).T @ dev + self.Q
        cov, _ = self._condition(cov, k)

        # update: the measurement selects the physical states, so the
        # cross-covariance and innovation covariance are read off directly
        m = self.n_phys
        R = max(meas_var, 1e-12) * np.eye(m)
        S = cov[:m, :m] + R
        Pxz = cov[:, :m]
        gain = np.linalg.solve(S, Pxz.T).T
        mean = mean + gain @ (frame - mean[:m])
        # Joseph form
        IKH = np.eye(self.n)
        IKH[:, :m] -= gain
        cov = IKH @ cov @ IKH.T + gain @ R @ gain.T
        cov, min_eig = self._condition(cov, k)
        if not np.all(np.isfinite(mean)):
            raise UkfError("non-finite state estimate", k)
        return UkfState(mean=mean, cov=cov, t=state.t + dt, step=k, min_eig=min_eig)

    def estimates(self, state: UkfState) -> Tuple[np.ndarray, np.ndarray]:
        gains, steps = self._split_params(state.mean[None, :])
        return gains[0], steps[0]


def _frames(model: GridModel, ms: MeasurementSet) -> np.ndarray:
    return np.hstack([ms.angles(range(1, model.n_buses + 1)), ms.freqs(model.gen_buses)])


def select_victim(model: GridModel, ms: MeasurementSet, sensing: Sequence[int]) -> int:
    """
    Victim row for row-mode filtering, taken from a sparse-regression pass

    The load bus with the largest total estimated gain wins; with every gain
    at zero the largest static step decides.
    """
    support = identify_all(model, ms, sensing=sensing)
    totals = np.abs(np.nan_to_num(support.gains)).sum(axis=1)
    steps = np.abs(np.nan_to_num(support.steps))
    if np.max(totals) > VICTIM_FLOOR:
        row = int(np.argmax(totals))
    elif np.max(steps) > VICTIM_FLOOR:
        row = int(np.argmax(steps))
    else:
        raise ConfigError("sparse regression found no attacked load bus; set victim_bus (--victim)")
    victim = model.load_buses[row]
    logger.info(f"Row-mode UKF victim {victim} selected by sparse regression")
    return victim


def run_ukf(model: GridModel, ms: MeasurementSet, sensing: Optional[Sequence[int]] = None,
            settings: Optional[UkfSettings] = None, truth: Optional[AttackConfig] = None
            ) -> Tuple[EstimateResult, pd.DataFrame]:
    """
    Filter every frame of a measurement set

    Args:
        model: Grid model
        ms: Uniform measurements covering all buses
        sensing: Sensing buses (defaults to the generators)
        settings: UKF settings
        truth: Ground truth, used for scoring and the attack onset only

    Returns:
        (EstimateResult, parameter trace with columns t, param_id, estimate, variance)
    """
    settings = settings or UkfSettings()
    sensing = tuple(model.gen_buses if sensing is None else sensing)
    victim, victim_source = settings.victim_bus, "settings"
    if settings.mode == "row" and victim is None:
        victim, victim_source = select_victim(model, ms, sensing), "sparse-regression"
    onset = truth.onset_time if truth is not None else 0.0

    meas_var = settings.measurement_noise
    if meas_var is None:
        meas_var = ms.noise.sigma ** 2
    frames = _frames(model, ms)
    times = ms.time

    start = time.perf_counter()
    ukf = UnscentedKalmanFilter(model, sensing, settings, victim_bus=victim, onset_time=onset)
    state = ukf.initial_state(frames[0], times[0], meas_var)
    estimates = [state.mean[ukf.n_phys:].copy()]
    variances = [np.diag(state.cov)[ukf.n_phys:].copy()]
    min_eigs = [state.min_eig]
    for k in tqdm(range(1, ms.n_slots), desc=f"UKF ({settings.mode})", leave=False,
                  disable=not settings.show_progress):
        state = ukf.step(state, frames[k], ms.sample_period, meas_var)
        estimates.append(state.mean[ukf.n_phys:].copy())
        variances.append(np.diag(state.cov)[ukf.n_phys:].copy())
        min_eigs.append(state.min_eig)
    duration = time.perf_counter() - start

    gains, steps = ukf.estimates(state)
    estimates = np.array(estimates)
    variances = np.array(variances)
    n_p = ukf.n_params
    trace = pd.DataFrame({
        "t": np.repeat(times, n_p),
        "param_id": np.tile(ukf.param_ids, len(times)),
        "estimate": estimates.reshape(-1),
        "variance": variances.reshape(-1),
    })
    logger.info(f"UKF ({settings.mode}) filtered {ms.n_slots} frames in {duration:.2f} s")
    result = EstimateResult(
        estimator="ukf" if settings.mode == "row" else "ukf-full",
        load_buses=model.load_buses, sensing_buses=sensing, gains=gains, steps=steps, truth=truth,
        duration_s=duration,
        flags={"mode": settings.mode, "victim_bus": victim,
               "victim_source": victim_source if settings.mode == "row" else None,
               "work": ukf.n_evals, "work_unit": "rhs_evaluations", "psd_repairs": ukf.n_repairs,
               "min_eigenvalue": float(np.min(min_eigs)), "measurement_noise": meas_var},
        details={"min_eigenvalues": min_eigs})
    return result, trace


def save_ukf_trace(trace: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    trace.to_csv(path, index=False, float_format="%.10g")
    return path
