"""
Sparse Regression Module
========================

Sparse identification of the attack parameters at each load bus:
- Per-bus linear system theta_dot = Omega k from PMU measurements
- LASSO by cyclic coordinate descent with soft-thresholding
- Active-set polishing and KKT-based stopping
- Optional nonnegativity of the gains and column standardization
- lambda_max and warm-started lambda paths
- lambda scaled by the per-bus noise level estimated from the least-squares residual
- Decentralized per-bus solves over the local information pattern
"""

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Set, Tuple

import numpy as np
from joblib import Parallel, delayed

from .exceptions import LaaIdentError
from .grid_model import GridModel
from .metrics import EstimateResult
from .pmu import MeasurementSet

logger = logging.getLogger(__name__)


@dataclass
class RegressionSystem:
    """theta_dot (T) = Omega (T x (S+1)) @ [K_i,k1 .. K_i,kS, eps_i]"""
    bus: int
    sensing_buses: Tuple[int, ...]
    response: np.ndarray         # theta_dot, T
    design: np.ndarray           # Omega, T x (S+1)
    damping: float

    def __post_init__(self):
        if self.design.shape != (len(self.response), len(self.sensing_buses) + 1):
            raise ValueError(f"design shape {self.design.shape} does not match "
                             f"{len(self.response)} slots and {len(self.sensing_buses)} sensing buses")


@dataclass
class LassoSettings:
    """Coordinate-descent tunables.

    With ``noise_scaled`` on, ``lam`` multiplies the per-bus noise level: the
    effective L1 weight is 2 * lam * sigma_hat, i.e. unit-norm columns are
    thresholded at lam standard deviations of the residual noise.
    """
    lam: float = 3.0
    noise_scaled: bool = True
    tol: float = 1e-8
    max_sweeps: int = 10000
    nonneg: bool = True
    standardize: bool = True
    report_threshold: float = 0.5

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.tol <= 0 or self.max_sweeps < 1:
            raise ValueError("tol must be positive and max_sweeps at least 1")


@dataclass
class SparseSolution:
    """Solution of min ||Omega k - theta_dot||^2 + lam * sum_j w_j |k_j|.

    ``penalty_weights`` are the column norms when the design was standardized
    and ones otherwise.
    """
    coef: np.ndarray             # [K_i,k1 .. K_i,kS, eps_i]
    lam: float
    objective: float
    n_sweeps: int
    converged: bool
    kkt_residual: float
    penalty_weights: np.ndarray
    objective_trace: List[float] = field(default_factory=list)
    bus: Optional[int] = None

    @property
    def gains(self) -> np.ndarray:
        return self.coef[:-1]

    @property
    def step(self) -> float:
        return float(self.coef[-1])

    @property
    def n_nonzero(self) -> int:
        return int(np.count_nonzero(self.coef))


def information_pattern(model: GridModel, bus: int, sensing: Sequence[int]) -> Set[int]:
    """Buses whose signals a substation needs: itself, its neighbors, the sensing buses"""
    return {bus} | set(model.neighbors[bus]) | set(sensing)


def assemble(model: GridModel, ms: MeasurementSet, bus: int,
             sensing: Optional[Sequence[int]] = None) -> RegressionSystem:
    """
    Build theta_dot and Omega for one load bus

    Reads only the bus's own angle and frequency, its neighbors' angles and
    the sensing-bus frequencies.
    """
    if bus not in model.load_buses:
        raise ValueError(f"bus {bus} is not a load bus")
    sensing = tuple(model.gen_buses if sensing is None else sensing)
    D = float(model.damping[bus - 1])

    own_angle = ms.angles([bus])[:, 0]
    own_freq = ms.freqs([bus])[:, 0]
    flow = np.zeros(ms.n_slots)
    for j in sorted(model.neighbors[bus]):
        flow += model.susceptance[bus - 1, j - 1] * np.sin(own_angle - ms.angles([j])[:, 0])
    secure = float(model.secure_load[model.load_position(bus)])

    response = own_freq + (secure + flow) / D
    design = np.hstack([ms.freqs(sensing), -np.ones((ms.n_slots, 1))]) / D
    return RegressionSystem(bus=bus, sensing_buses=sensing, response=response, design=design, damping=D)


def _column_norms(X: np.ndarray, standardize: bool) -> np.ndarray:
    if not standardize:
        return np.ones(X.shape[1])
    norms = np.linalg.norm(X, axis=0)
    norms[norms == 0.0] = 1.0
    return norms


def lambda_max(system: RegressionSystem, standardize: bool = True) -> float:
    """Smallest lambda for which the all-zero vector solves the problem"""
    norms = _column_norms(system.design, standardize)
    X = system.design / norms
    return float(2.0 * np.max(np.abs(X.T @ system.response)))


def soft_threshold(z: float, t: float) -> float:
    return np.sign(z) * max(abs(z) - t, 0.0)


class CoordinateDescentLasso:
    """Cyclic coordinate descent for ||y - Xb||^2 + lam ||b||_1"""

    def __init__(self, X: np.ndarray, y: np.ndarray, lam: float, nonneg_mask: np.ndarray):
        self.X = X
        self.y = y
        self.lam = lam
        self.nonneg = nonneg_mask
        self.G = X.T @ X
        self.c = X.T @ y
        self.scale = max(1.0, 2.0 * float(np.max(np.abs(self.c)))) if self.c.size else 1.0
        self.live = np.diag(self.G) > 0.0

    def objective(self, b: np.ndarray) -> float:
        r = self.y - self.X @ b
        return float(r @ r + self.lam * np.sum(np.abs(b)))

    def kkt_residual(self, b: np.ndarray) -> float:
        g = 2.0 * (self.G @ b - self.c)
        viol = np.zeros_like(b)
        nz = b != 0.0
        viol[nz] = np.abs(g[nz] + self.lam * np.sign(b[nz]))
        zero_free = ~nz & ~self.nonneg
        viol[zero_free] = np.maximum(np.abs(g[zero_free]) - self.lam, 0.0)
        zero_pos = ~nz & self.nonneg
        viol[zero_pos] = np.maximum(-g[zero_pos] - self.lam, 0.0)
        viol[~self.live] = 0.0
        return float(np.max(viol) / self.scale) if viol.size else 0.0

    def sweep(self, b: np.ndarray):
        half = 0.5 * self.lam
        for j in range(len(b)):
            if not self.live[j]:
                continue
            z = self.c[j] - self.G[j] @ b + self.G[j, j] * b[j]
            if self.nonneg[j]:
                b[j] = max(z - half, 0.0) / self.G[j, j]
            else:
                b[j] = soft_threshold(z, half) / self.G[j, j]

    def polish(self, b: np.ndarray, current: float) -> Tuple[np.ndarray, float]:
        """Active-set refinement.

        Solves the stationarity equations on the current support with the
        signs held fixed. When the solution flips a sign, steps only as far as
        the first coordinate reaching zero, drops it and repeats. Along each
        step the objective is a convex quadratic decreasing toward the solve,
        so every accepted iterate is no worse than the last.
        """
        for _ in range(len(b) + 1):
            active = np.flatnonzero(b)
            if active.size == 0:
                break
            s = np.sign(b[active])
            try:
                sub = np.linalg.solve(self.G[np.ix_(active, active)], self.c[active] - 0.5 * self.lam * s)
            except np.linalg.LinAlgError:
                break
            trial = np.zeros_like(b)
            flipped = np.sign(sub) != s
            if not np.any(flipped):
                trial[active] = sub
                done = True
            else:
                ratios = b[active][flipped] / (b[active][flipped] - sub[flipped])
                k = int(np.argmin(ratios))
                alpha = float(ratios[k])
                trial[active] = b[active] + alpha * (sub - b[active])
                trial[active[np.flatnonzero(flipped)[k]]] = 0.0
                done = False
            value = self.objective(trial)
            if value > current:
                break
            b, current = trial, value
            if done:
                break
        return b, current

    def solve(self, b0: np.ndarray, tol: float, max_sweeps: int):
        b = np.array(b0, dtype=float)
        b[self.nonneg] = np.maximum(b[self.nonneg], 0.0)
        b[~self.live] = 0.0
        trace = [self.objective(b)]
        kkt = self.kkt_residual(b)
        sweeps = 0
        while kkt > tol and sweeps < max_sweeps:
            self.sweep(b)
            value = self.objective(b)
            b, value = self.polish(b, value)
            trace.append(value)
            kkt = self.kkt_residual(b)
            sweeps += 1
        return b, trace, sweeps, kkt


def lasso(system: RegressionSystem, lam: float = 0.1, tol: float = 1e-8, max_sweeps: int = 10000,
          nonneg: bool = True, standardize: bool = True,
          warm_start: Optional[np.ndarray] = None) -> SparseSolution:
    """
    Solve the per-bus LASSO problem

    Args:
        system: Assembled regression system
        lam: L1 weight (applies to standardized coefficients when standardize is on)
        tol: KKT residual tolerance, relative to max(1, 2 ||X^T y||_inf)
        max_sweeps: Coordinate-descent sweep budget
        nonneg: Constrain the gain coordinates to be >= 0 (the step stays free)
        standardize: Scale design columns to unit norm before solving
        warm_start: Initial coefficients in physical units

    Returns:
        SparseSolution; converged is False when the sweep budget ran out
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if system.design.size == 0:
        raise ValueError("empty design matrix")
    norms = _column_norms(system.design, standardize)
    X = system.design / norms
    mask = np.zeros(X.shape[1], dtype=bool)
    if nonneg:
        mask[:-1] = True
    solver = CoordinateDescentLasso(X, system.response, lam, mask)
    b0 = np.zeros(X.shape[1]) if warm_start is None else np.asarray(warm_start, dtype=float) * norms
    b, trace, sweeps, kkt = solver.solve(b0, tol, max_sweeps)
    converged = kkt <= tol
    if not converged:
        logger.warning(f"LASSO at bus {system.bus} stopped after {sweeps} sweeps with KKT residual {kkt:.2e}")
    return SparseSolution(coef=b / norms, lam=lam, objective=trace[-1], n_sweeps=sweeps, converged=converged,
                          kkt_residual=kkt, penalty_weights=norms, objective_trace=trace, bus=system.bus)


def lambda_path(system: RegressionSystem, lambdas: Sequence[float], **kwargs) -> List[SparseSolution]:
    """Solutions over a lambda grid, warm-started from large to small lambda; returned in input order"""
    order = np.argsort(lambdas)[::-1]
    out: List[Optional[SparseSolution]] = [None] * len(lambdas)
    warm = None
    for idx in order:
        sol = lasso(system, lam=float(lambdas[idx]), warm_start=warm, **kwargs)
        out[idx] = sol
        warm = sol.coef
    return out


def noise_level(system: RegressionSystem) -> float:
    """Residual standard deviation of the unpenalized least-squares fit"""
    coef, *_ = np.linalg.lstsq(system.design, system.response, rcond=None)
    residual = system.response - system.design @ coef
    dof = max(len(system.response) - system.design.shape[1], 1)
    return float(np.sqrt(residual @ residual / dof))


def effective_lambda(system: RegressionSystem, settings: LassoSettings) -> float:
    if not settings.noise_scaled:
        return settings.lam
    return 2.0 * settings.lam * noise_level(system)


def identify_bus_local(model: GridModel, local_ms: MeasurementSet, bus: int,
                       sensing: Optional[Sequence[int]] = None,
                       settings: Optional[LassoSettings] = None) -> SparseSolution:
    """Solve one substation's problem from its local measurements only"""
    settings = settings or LassoSettings()
    system = assemble(model, local_ms, bus, sensing)
    return lasso(system, lam=effective_lambda(system, settings), tol=settings.tol, max_sweeps=settings.max_sweeps,
                 nonneg=settings.nonneg, standardize=settings.standardize)


def _solve_bus(model, ms, bus, sensing, settings):
    try:
        return bus, identify_bus_local(model, ms, bus, sensing, settings), None
    except (LaaIdentError, ValueError, np.linalg.LinAlgError) as e:
        return bus, None, str(e)


def identify_all(model: GridModel, ms: MeasurementSet, sensing: Optional[Sequence[int]] = None,
                 settings: Optional[LassoSettings] = None, n_jobs: int = 1,
                 buses: Optional[Sequence[int]] = None) -> EstimateResult:
    """
    Run assemble + lasso independently at every load bus

    Args:
        model: Grid model
        ms: Measurements covering all buses
        sensing: Sensing buses (defaults to the generators)
        settings: LASSO settings
        n_jobs: Parallel per-bus solves (threads)
        buses: Restrict to these load buses (others are reported as zero)

    Returns:
        EstimateResult with the gain matrix, steps and per-bus solver flags
    """
    settings = settings or LassoSettings()
    sensing = tuple(model.gen_buses if sensing is None else sensing)
    buses = list(model.load_buses if buses is None else buses)
    start = time.perf_counter()

    results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_solve_bus)(model, ms, bus, sensing, settings) for bus in buses)

    gains = np.zeros((model.n_loads, len(sensing)))
    steps = np.zeros(model.n_loads)
    failed, errors, solutions, not_converged = [], {}, {}, []
    for bus, sol, err in results:
        row = model.load_position(bus)
        if sol is None:
            gains[row] = np.nan
            steps[row] = np.nan
            failed.append(bus)
            errors[bus] = err
            logger.warning(f"SR failed at bus {bus}: {err}")
            continue
        gains[row] = sol.gains
        steps[row] = sol.step
        solutions[bus] = sol
        if not sol.converged:
            not_converged.append(bus)

    return EstimateResult(
        estimator="sr", load_buses=model.load_buses, sensing_buses=sensing, gains=gains, steps=steps,
        duration_s=time.perf_counter() - start,
        flags={"lambda": settings.lam, "noise_scaled": settings.noise_scaled,
               "work": sum(sol.n_sweeps for sol in solutions.values()), "work_unit": "sweeps",
               "effective_lambda": {bus: sol.lam for bus, sol in solutions.items()},
               "converged": len(not_converged) == 0, "not_converged_buses": not_converged,
               "nonneg": settings.nonneg, "standardize": settings.standardize, "errors": errors},
        failed_buses=failed, details={"solutions": solutions})
