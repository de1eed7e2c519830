"""
LAA Dynamics Module
===================

Swing dynamics of the grid under load-altering attacks (LAAs):
- Attack definition (dynamic gains K^L on sensed frequencies, static steps eps^L)
- Right-hand side of the attacked dynamics, batched over states
- Adaptive Dormand-Prince RK45 integration with breach events
- Attack budget reporting against the vulnerable load
- Safety-limit breach detection on generator frequencies

Frequencies are carried in the case's frequency unit (delta_dot = omega, see
GridModel.frequency_unit); Hz appears only at the breach limit and in exports.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from .exceptions import AttackConfigError, BudgetUnavailableError, IntegrationError
from .grid_model import GridModel, equilibrium

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AttackConfig:
    """Dynamic and static LAA components.

    ``gains`` has one row per load bus (model order) and one column per
    sensing bus; ``static_step`` has one entry per load bus.
    """
    load_buses: Tuple[int, ...]
    sensing_buses: Tuple[int, ...]
    gains: np.ndarray            # pu load per frequency unit
    static_step: np.ndarray      # pu
    onset_time: float = 0.0      # s

    def __post_init__(self):
        load = tuple(int(b) for b in self.load_buses)
        sensing = tuple(int(b) for b in self.sensing_buses)
        object.__setattr__(self, "load_buses", load)
        object.__setattr__(self, "sensing_buses", sensing)
        if len(set(sensing)) != len(sensing):
            raise AttackConfigError("sensing buses must be distinct")

        gains = np.array(self.gains, dtype=float).reshape(len(load), len(sensing))
        step = np.array(self.static_step, dtype=float).reshape(len(load))
        if not (np.all(np.isfinite(gains)) and np.all(np.isfinite(step))):
            raise AttackConfigError("attack parameters must be finite")
        if np.any(gains < 0):
            i, j = np.argwhere(gains < 0)[0]
            raise AttackConfigError(f"gain K[{load[i]},{sensing[j]}] = {gains[i, j]} is negative")
        gains.flags.writeable = False
        step.flags.writeable = False
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "static_step", step)

    @classmethod
    def none(cls, model: GridModel, sensing: Optional[Sequence[int]] = None) -> "AttackConfig":
        """No attack; sensing defaults to the generator buses"""
        sensing = tuple(model.gen_buses if sensing is None else sensing)
        return cls(model.load_buses, sensing, np.zeros((model.n_loads, len(sensing))), np.zeros(model.n_loads))

    @classmethod
    def from_entries(cls, model: GridModel, gains: Dict[Tuple[int, int], float],
                     steps: Optional[Dict[int, float]] = None,
                     sensing: Optional[Sequence[int]] = None, onset_time: float = 0.0) -> "AttackConfig":
        """
        Build an attack from sparse entries

        Args:
            model: Grid model
            gains: {(victim_bus, sensing_bus): K}
            steps: {victim_bus: eps}
            sensing: Sensing buses (defaults to the generator buses)
            onset_time: Attack start, seconds
        """
        sensing = tuple(model.gen_buses if sensing is None else sensing)
        for bus in sensing:
            if not 1 <= bus <= model.n_buses:
                raise AttackConfigError(f"sensing bus {bus} is not in the grid")
        K = np.zeros((model.n_loads, len(sensing)))
        eps = np.zeros(model.n_loads)
        for (victim, sense), value in gains.items():
            if victim not in model.load_buses:
                raise AttackConfigError(f"victim bus {victim} is not a load bus")
            if sense not in sensing:
                raise AttackConfigError(f"bus {sense} is not a sensing bus")
            K[model.load_position(victim), sensing.index(sense)] = value
        for victim, value in (steps or {}).items():
            if victim not in model.load_buses:
                raise AttackConfigError(f"victim bus {victim} is not a load bus")
            eps[model.load_position(victim)] = value
        return cls(model.load_buses, sensing, K, eps, onset_time)

    def __add__(self, other: "AttackConfig") -> "AttackConfig":
        if (self.load_buses, self.sensing_buses, self.onset_time) != \
                (other.load_buses, other.sensing_buses, other.onset_time):
            raise AttackConfigError("attacks must share load buses, sensing buses and onset")
        return AttackConfig(self.load_buses, self.sensing_buses, self.gains + other.gains,
                            self.static_step + other.static_step, self.onset_time)

    @property
    def victim_buses(self) -> Tuple[int, ...]:
        rows = np.flatnonzero(np.any(self.gains != 0, axis=1) | (self.static_step != 0))
        return tuple(self.load_buses[i] for i in rows)

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.gains) or np.any(self.static_step))

    def gain(self, victim: int, sensing: int) -> float:
        return float(self.gains[self.load_buses.index(victim), self.sensing_buses.index(sensing)])

    def nonzero_entries(self) -> List[Tuple[int, int, float]]:
        return [(self.load_buses[i], self.sensing_buses[j], float(self.gains[i, j]))
                for i, j in zip(*np.nonzero(self.gains))]

    def to_dict(self) -> Dict:
        return {
            "sensing_buses": list(self.sensing_buses),
            "gains": [{"victim": v, "sensing": s, "K": k} for v, s, k in self.nonzero_entries()],
            "steps": [{"victim": self.load_buses[i], "eps": float(self.static_step[i])}
                      for i in np.flatnonzero(self.static_step)],
            "onset_time": self.onset_time,
        }


class SwingDynamics:
    """Attacked swing-equation right-hand side for one (model, attack) pair"""

    def __init__(self, model: GridModel, attack: Optional[AttackConfig] = None):
        self.model = model
        self.attack = attack if attack is not None else AttackConfig.none(model)
        if self.attack.load_buses != model.load_buses:
            raise AttackConfigError("attack rows do not match the model's load buses")

        N = model.n_buses
        self.n_buses = N
        self.gen_idx = model.gen_index
        self.load_idx = model.load_index
        self.M = model.inertia
        self.gen_friction = model.gen_damping + model.gov_p_gain
        self.Ki = model.gov_i_gain
        self.D_load = model.load_damping
        self.P_secure = model.secure_load

        # Split sensing columns into generator omega (explicit) and load delta_dot (implicit)
        gen_cols, gen_state, load_cols, load_rows = [], [], [], []
        for j, bus in enumerate(self.attack.sensing_buses):
            if model.is_generator(bus):
                gen_cols.append(j)
                gen_state.append(N + model.gen_position(bus))
            else:
                load_cols.append(j)
                load_rows.append(model.load_position(bus))
        self.gen_state = np.array(gen_state, dtype=int)
        self.K_gen = self.attack.gains[:, gen_cols]
        self.eps = self.attack.static_step

        coupling = np.zeros((model.n_loads, model.n_loads))
        for j, pos in zip(load_cols, load_rows):
            coupling[:, pos] += self.attack.gains[:, j]
        self.implicit = bool(np.any(coupling))
        self.load_system = np.diag(self.D_load) - coupling if self.implicit else None

    def _generator_rates(self, delta, omega, flow):
        return (-self.gen_friction * omega - self.Ki * delta[..., self.gen_idx] - flow[..., self.gen_idx]) / self.M

    def _assemble(self, state, load_rate, gen_rate):
        out = np.empty_like(state)
        delta_dot = out[..., :self.n_buses]
        delta_dot[..., self.gen_idx] = state[..., self.n_buses:]
        delta_dot[..., self.load_idx] = load_rate
        out[..., self.n_buses:] = gen_rate
        return out

    def no_attack(self, t: float, state: np.ndarray) -> np.ndarray:
        """Right-hand side of the unattacked dynamics"""
        state = np.asarray(state, dtype=float)
        delta = state[..., :self.n_buses]
        omega = state[..., self.n_buses:]
        flow = self.model.power_flow(delta)
        load_rate = (-self.P_secure - flow[..., self.load_idx]) / self.D_load
        return self._assemble(state, load_rate, self._generator_rates(delta, omega, flow))

    def load_frequency(self, t: float, state: np.ndarray) -> np.ndarray:
        """Load-bus delta_dot at one time for (a batch of) states"""
        state = np.asarray(state, dtype=float)
        delta = state[..., :self.n_buses]
        flow = self.model.power_flow(delta)
        return self._load_rate(t, state, flow)

    def _load_rate(self, t, state, flow):
        base = -self.P_secure - flow[..., self.load_idx]
        if t < self.attack.onset_time:
            return base / self.D_load
        injection = state[..., self.gen_state] @ self.K_gen.T
        rhs = injection - self.eps + base
        if not self.implicit:
            return rhs / self.D_load
        flat = rhs.reshape(-1, rhs.shape[-1])
        return np.linalg.solve(self.load_system, flat.T).T.reshape(rhs.shape)

    def __call__(self, t: float, state: np.ndarray) -> np.ndarray:
        state = np.asarray(state, dtype=float)
        delta = state[..., :self.n_buses]
        omega = state[..., self.n_buses:]
        flow = self.model.power_flow(delta)
        load_rate = self._load_rate(t, state, flow)
        return self._assemble(state, load_rate, self._generator_rates(delta, omega, flow))


def rhs(model: GridModel, attack: AttackConfig, t: float, state: np.ndarray) -> np.ndarray:
    """State derivative of the attacked dynamics at (t, state)"""
    state = np.asarray(state, dtype=float)
    if state.shape[-1] != model.state_size:
        raise ValueError(f"state has {state.shape[-1]} entries, expected {model.state_size}")
    return SwingDynamics(model, attack)(t, state)


def rhs_no_attack(model: GridModel, t: float, state: np.ndarray) -> np.ndarray:
    """State derivative of the unattacked dynamics"""
    state = np.asarray(state, dtype=float)
    if state.shape[-1] != model.state_size:
        raise ValueError(f"state has {state.shape[-1]} entries, expected {model.state_size}")
    return SwingDynamics(model).no_attack(t, state)


@dataclass
class SimulationSettings:
    """Integrator tolerances and limits"""
    rtol: float = 1e-6
    atol: float = 1e-8
    max_step: float = np.inf
    first_step: Optional[float] = None
    stop_at_breach: bool = False

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")


@dataclass
class Trajectory:
    """Accepted integrator steps of one simulation"""
    model: GridModel
    attack: AttackConfig
    time: np.ndarray             # s
    delta: np.ndarray            # rad, T x N
    omega: np.ndarray            # frequency unit, T x G
    load_freq: np.ndarray        # frequency unit, T x L
    event_time: Optional[float] = None
    n_rhs_evals: int = 0

    def __post_init__(self):
        T = len(self.time)
        if T == 0:
            raise ValueError("trajectory is empty")
        if T > 1 and np.any(np.diff(self.time) <= 0):
            raise ValueError("trajectory time must be strictly increasing")
        for name, width in (("delta", self.model.n_buses), ("omega", self.model.n_gens),
                            ("load_freq", self.model.n_loads)):
            if getattr(self, name).shape != (T, width):
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {(T, width)}")

    @property
    def states(self) -> np.ndarray:
        return np.hstack([self.delta, self.omega])

    @property
    def span(self) -> Tuple[float, float]:
        return float(self.time[0]), float(self.time[-1])

    def frequencies(self) -> np.ndarray:
        """delta_dot at every bus, T x N"""
        out = np.empty_like(self.delta)
        out[:, self.model.gen_index] = self.omega
        out[:, self.model.load_index] = self.load_freq
        return out

    def to_frame(self) -> pd.DataFrame:
        """Tabular export with frequencies as deviations in Hz"""
        cols = {"t": self.time}
        for i in range(self.model.n_buses):
            cols[f"delta_{i + 1}"] = self.delta[:, i]
        for k, bus in enumerate(self.model.gen_buses):
            cols[f"omega_g{bus}"] = self.model.to_hz(self.omega[:, k])
        for k, bus in enumerate(self.model.load_buses):
            cols[f"freq_l{bus}"] = self.model.to_hz(self.load_freq[:, k])
        return pd.DataFrame(cols)


def save_trajectory_csv(traj: Trajectory, path: Union[str, Path]):
    with open(path, "w", newline="") as f:
        f.write(f"# t [s]; delta [rad]; omega_g*, freq_l* [Hz deviation from "
                f"{traj.model.nominal_freq_hz:g} Hz]\n")
        traj.to_frame().to_csv(f, index=False, float_format="%.10g")


def integrate_ode(fun: Callable, t_span: Tuple[float, float], y0: np.ndarray,
                  settings: SimulationSettings, events=None):
    """Dormand-Prince RK45 with one output row per accepted step"""
    kwargs = dict(method="RK45", rtol=settings.rtol, atol=settings.atol, max_step=settings.max_step)
    if settings.first_step is not None:
        kwargs["first_step"] = settings.first_step
    sol = solve_ivp(fun, t_span, y0, events=events, **kwargs)
    if sol.status < 0:
        t_fail = float(sol.t[-1]) if sol.t.size else float(t_span[0])
        raise IntegrationError(f"integration failed: {sol.message}", time=t_fail)
    if not np.all(np.isfinite(sol.y)):
        bad = int(np.argmax(~np.all(np.isfinite(sol.y), axis=0)))
        raise IntegrationError("state left the representable range", time=float(sol.t[bad]))
    return sol


def integrate(model: GridModel, attack: Optional[AttackConfig], t_span: Tuple[float, float],
              settings: Optional[SimulationSettings] = None,
              y0: Optional[np.ndarray] = None) -> Trajectory:
    """
    Simulate the attacked dynamics

    Args:
        model: Grid model
        attack: Attack definition (None for no attack)
        t_span: (t0, t1) in seconds, t1 > t0
        settings: Tolerances and event behaviour
        y0: Initial state (defaults to the no-attack equilibrium)

    Returns:
        Trajectory with one row per accepted step
    """
    settings = settings or SimulationSettings()
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError(f"t_span must be increasing, got {t_span}")
    attack = attack if attack is not None else AttackConfig.none(model)
    dyn = SwingDynamics(model, attack)
    y0 = equilibrium(model) if y0 is None else np.asarray(y0, dtype=float)
    if y0.shape != (model.state_size,):
        raise ValueError(f"y0 has shape {y0.shape}, expected {(model.state_size,)}")

    limit = model.freq_limit
    N = model.n_buses

    def breach(t, y):
        return np.max(np.abs(y[N:])) - limit
    breach.terminal = settings.stop_at_breach
    breach.direction = 1.0

    sol = integrate_ode(dyn, (t0, t1), y0, settings, events=[breach])
    Y = sol.y.T
    time = sol.t

    load_freq = np.empty((len(time), model.n_loads))
    active = time >= attack.onset_time
    if np.any(active):
        load_freq[active] = dyn.load_frequency(max(t0, attack.onset_time), Y[active])
    if np.any(~active):
        load_freq[~active] = dyn.load_frequency(-np.inf, Y[~active])

    event_time = float(sol.t_events[0][0]) if sol.t_events and len(sol.t_events[0]) else None
    traj = Trajectory(model=model, attack=attack, time=time, delta=Y[:, :N].copy(),
                      omega=Y[:, N:].copy(), load_freq=load_freq, event_time=event_time,
                      n_rhs_evals=int(sol.nfev))
    logger.info(f"Integrated {model.name} over [{t0:g}, {t1:g}] s: {len(time)} steps, "
                f"{sol.nfev} RHS evaluations, breach event {event_time}")
    return traj


@dataclass
class BreachReport:
    """First excursion of a generator frequency beyond the safety limit"""
    time: Optional[float]        # s, None when no breach
    bus: Optional[int]
    limit_hz: float
    peak_hz: float

    @property
    def breached(self) -> bool:
        return self.time is not None

    def to_dict(self) -> Dict:
        return {"breached": self.breached, "time": self.time, "bus": self.bus,
                "limit_hz": self.limit_hz, "peak_hz": self.peak_hz}


def detect_breach(traj: Trajectory, omega_max_hz: Optional[float] = None) -> BreachReport:
    """
    Earliest time a generator's |frequency deviation| exceeds the limit

    Linear interpolation between stored points locates the crossing.
    """
    limit = traj.model.max_freq_dev_hz if omega_max_hz is None else float(omega_max_hz)
    dev = np.abs(traj.model.to_hz(traj.omega))
    peak = float(dev.max()) if dev.size else 0.0
    over = np.any(dev > limit, axis=1)
    if not np.any(over):
        # a terminal event stops the run exactly on the limit
        if traj.event_time is not None and omega_max_hz is None:
            g = int(np.argmax(dev[-1]))
            return BreachReport(time=traj.event_time, bus=traj.model.gen_buses[g], limit_hz=limit, peak_hz=peak)
        return BreachReport(time=None, bus=None, limit_hz=limit, peak_hz=peak)

    k = int(np.argmax(over))
    if k == 0:
        g = int(np.argmax(dev[0]))
        return BreachReport(time=float(traj.time[0]), bus=traj.model.gen_buses[g], limit_hz=limit, peak_hz=peak)

    t_a, t_b = traj.time[k - 1], traj.time[k]
    best_t, best_bus = np.inf, None
    for g in np.flatnonzero(dev[k] > limit):
        d_a, d_b = dev[k - 1, g], dev[k, g]
        t_cross = t_a + (limit - d_a) / (d_b - d_a) * (t_b - t_a)
        if t_cross < best_t:
            best_t, best_bus = t_cross, traj.model.gen_buses[g]
    return BreachReport(time=float(best_t), bus=best_bus, limit_hz=limit, peak_hz=peak)


@dataclass
class BudgetEntry:
    bus: int
    static_step: float
    dynamic_load: float          # sum_j K_ij * omega_max
    static_margin: float         # P^LV - eps
    dynamic_margin: float        # (P^LV - eps) / 2 - dynamic_load
    passed: bool
    victim: bool


@dataclass
class BudgetReport:
    omega_max: float             # frequency unit
    entries: List[BudgetEntry] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self) -> List[int]:
        return [e.bus for e in self.entries if not e.passed]


def validate_budget(model: GridModel, attack: AttackConfig,
                    omega_max: Optional[float] = None, slack: float = 1e-12) -> BudgetReport:
    """
    Check eps <= P^LV and sum_j K_ij * omega_max <= (P^LV - eps) / 2 per load bus

    Args:
        model: Grid model with vulnerable loads
        attack: Attack to check
        omega_max: Frequency limit in state units (defaults to the case limit)
        slack: Relative rounding allowance at the boundary

    Returns:
        Per-bus margins; the report never blocks a simulation
    """
    if model.vulnerable_load is None:
        raise BudgetUnavailableError(f"case {model.name} does not declare vulnerable loads")
    omega_max = model.freq_limit if omega_max is None else float(omega_max)
    victims = set(attack.victim_buses)
    report = BudgetReport(omega_max=omega_max)
    for k, bus in enumerate(model.load_buses):
        plv = float(model.vulnerable_load[k])
        eps = float(attack.static_step[k])
        dyn = float(np.sum(attack.gains[k]) * omega_max)
        static_margin = plv - eps
        dynamic_margin = static_margin / 2.0 - dyn
        tol = slack * max(1.0, abs(plv))
        passed = static_margin >= -tol and dynamic_margin >= -tol
        report.entries.append(BudgetEntry(bus, eps, dyn, static_margin, dynamic_margin, passed, bus in victims))
    if not report.passed:
        logger.info(f"Attack exceeds the vulnerable-load budget at buses {report.failures()}")
    return report
