"""
PMU Synthesis Module
====================

Turns simulated trajectories into PMU-style measurement sets:
- Uniform resampling of angles and frequencies by cubic interpolation
- Gaussian and Logistic measurement noise with seeded generators
- Finite-difference frequency channels for sensitivity studies
- Information-pattern subsets for decentralized estimators
- CSV + JSON sidecar export and import
"""

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline

from .dynamics import SwingDynamics, Trajectory
from .exceptions import MissingChannelError, WindowError

logger = logging.getLogger(__name__)

MIN_RATE_HZ = 1.0
MAX_RATE_HZ = 1000.0


class NoiseFamily(Enum):
    """Measurement noise distributions"""
    NONE = "none"
    GAUSSIAN = "gaussian"
    LOGISTIC = "logistic"


@dataclass(frozen=True)
class NoiseDescriptor:
    family: NoiseFamily = NoiseFamily.NONE
    sigma: float = 0.0
    seed: Optional[int] = None

    def to_dict(self) -> Dict:
        return {"family": self.family.value, "sigma": self.sigma, "seed": self.seed}


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Uniformly sampled angle and frequency channels.

    Column k of ``angle`` and ``freq`` belongs to ``bus_ids[k]``. Angles are
    in radians, frequencies in the case's frequency unit.
    """
    bus_ids: Tuple[int, ...]
    t0: float                    # s
    sample_period: float         # s
    angle: np.ndarray            # T x n
    freq: np.ndarray             # T x n
    gen_buses: Tuple[int, ...] = ()
    noise: NoiseDescriptor = field(default_factory=NoiseDescriptor)

    def __post_init__(self):
        object.__setattr__(self, "bus_ids", tuple(int(b) for b in self.bus_ids))
        object.__setattr__(self, "gen_buses", tuple(int(b) for b in self.gen_buses))
        if self.sample_period <= 0:
            raise WindowError(f"sample period must be positive, got {self.sample_period}")
        angle = np.array(self.angle, dtype=float)
        freq = np.array(self.freq, dtype=float)
        if angle.ndim != 2 or angle.shape != freq.shape or angle.shape[1] != len(self.bus_ids):
            raise ValueError(f"channel arrays {angle.shape} / {freq.shape} do not match {len(self.bus_ids)} buses")
        angle.flags.writeable = False
        freq.flags.writeable = False
        object.__setattr__(self, "angle", angle)
        object.__setattr__(self, "freq", freq)

    @property
    def n_slots(self) -> int:
        return self.angle.shape[0]

    @property
    def rate_hz(self) -> float:
        return 1.0 / self.sample_period

    @property
    def time(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_slots) * self.sample_period

    @property
    def window(self) -> Tuple[float, float]:
        return self.t0, self.t0 + (self.n_slots - 1) * self.sample_period

    def column(self, bus: int, channel: str = "angle") -> int:
        try:
            return self.bus_ids.index(bus)
        except ValueError:
            raise MissingChannelError(bus, channel) from None

    def angles(self, buses: Sequence[int]) -> np.ndarray:
        return self.angle[:, [self.column(b, "angle") for b in buses]]

    def freqs(self, buses: Sequence[int]) -> np.ndarray:
        return self.freq[:, [self.column(b, "frequency") for b in buses]]

    def subset(self, buses: Iterable[int]) -> "MeasurementSet":
        """Restrict to the given buses, kept in ascending order"""
        keep = sorted(set(int(b) for b in buses))
        cols = [self.column(b) for b in keep]
        return replace(self, bus_ids=tuple(keep), angle=self.angle[:, cols], freq=self.freq[:, cols],
                       gen_buses=tuple(b for b in self.gen_buses if b in keep))

    def same_as(self, other: "MeasurementSet") -> bool:
        return (self.bus_ids == other.bus_ids and self.t0 == other.t0
                and self.sample_period == other.sample_period
                and np.array_equal(self.angle, other.angle) and np.array_equal(self.freq, other.freq))


def sample_count(window: Tuple[float, float], rate_hz: float) -> int:
    """T = floor((t1 - t0) * rate) + 1"""
    return int(np.floor((window[1] - window[0]) * rate_hz + 1e-9)) + 1


def sample(traj: Trajectory, rate_hz: float, window: Optional[Tuple[float, float]] = None) -> MeasurementSet:
    """
    Resample a trajectory onto a uniform PMU grid

    Angles and generator frequencies are cubic-spline interpolated; load-bus
    frequencies are recomputed from the dynamics at the interpolated states
    so that they stay consistent with the load-bus equation.

    Args:
        traj: Simulated trajectory
        rate_hz: Frames per second, in [1, 1000]
        window: (t0, t1) in seconds, defaults to the full trajectory span

    Returns:
        Noiseless MeasurementSet covering every bus
    """
    if not MIN_RATE_HZ <= rate_hz <= MAX_RATE_HZ:
        raise WindowError(f"rate {rate_hz} Hz outside [{MIN_RATE_HZ:g}, {MAX_RATE_HZ:g}]")
    span = traj.span
    t0, t1 = span if window is None else (float(window[0]), float(window[1]))
    slack = 1e-9 * max(1.0, abs(span[1]))
    if t1 < t0 or t0 < span[0] - slack or t1 > span[1] + slack:
        raise WindowError(f"window [{t0}, {t1}] outside trajectory span [{span[0]}, {span[1]}]")
    if len(traj.time) < 2:
        raise WindowError("trajectory needs at least two points to resample")

    T = sample_count((t0, t1), rate_hz)
    Ts = 1.0 / rate_hz
    instants = np.clip(t0 + np.arange(T) * Ts, span[0], span[1])

    model = traj.model
    delta = CubicSpline(traj.time, traj.delta, axis=0)(instants)
    omega = CubicSpline(traj.time, traj.omega, axis=0)(instants)

    dyn = SwingDynamics(model, traj.attack)
    states = np.hstack([delta, omega])
    load_freq = np.empty((T, model.n_loads))
    active = instants >= traj.attack.onset_time
    if np.any(active):
        load_freq[active] = dyn.load_frequency(traj.attack.onset_time, states[active])
    if np.any(~active):
        load_freq[~active] = dyn.load_frequency(-np.inf, states[~active])

    freq = np.empty_like(delta)
    freq[:, model.gen_index] = omega
    freq[:, model.load_index] = load_freq
    logger.debug(f"Sampled {T} slots at {rate_hz:g} fps over [{t0:g}, {t1:g}] s")
    return MeasurementSet(bus_ids=tuple(range(1, model.n_buses + 1)), t0=t0, sample_period=Ts,
                          angle=delta, freq=freq, gen_buses=model.gen_buses)


def add_noise(ms: MeasurementSet, family: Union[str, NoiseFamily], sigma: float,
              seed: Optional[int] = None, angle_sigma: Optional[float] = None) -> MeasurementSet:
    """
    Add i.i.d. noise to every angle and frequency sample

    Logistic noise uses scale sigma * sqrt(3) / pi so its standard deviation
    equals sigma.

    Args:
        ms: Measurement set
        family: "gaussian" or "logistic"
        sigma: Standard deviation (frequency channels, case frequency unit)
        seed: Generator seed
        angle_sigma: Standard deviation on angle channels (radians); defaults to sigma

    Returns:
        New MeasurementSet; sigma = 0 returns an identical copy
    """
    family = NoiseFamily(family) if not isinstance(family, NoiseFamily) else family
    angle_sigma = sigma if angle_sigma is None else angle_sigma
    if sigma < 0 or angle_sigma < 0:
        raise ValueError("noise standard deviation must be nonnegative")
    descriptor = NoiseDescriptor(family=family, sigma=float(sigma), seed=seed)
    if family is NoiseFamily.NONE or (sigma == 0 and angle_sigma == 0):
        return replace(ms, noise=descriptor)

    rng = np.random.default_rng(seed)
    shape = (2,) + ms.angle.shape
    if family is NoiseFamily.GAUSSIAN:
        draws = rng.standard_normal(shape)
    else:
        draws = rng.logistic(0.0, np.sqrt(3.0) / np.pi, shape)
    return replace(ms, angle=ms.angle + angle_sigma * draws[0], freq=ms.freq + sigma * draws[1],
                   noise=descriptor)


def measure(traj: Trajectory, rate_hz: float, window: Optional[Tuple[float, float]] = None,
            family: Union[str, NoiseFamily] = NoiseFamily.GAUSSIAN, sigma: float = 0.01,
            seed: Optional[int] = None) -> MeasurementSet:
    """Sample then add noise"""
    return add_noise(sample(traj, rate_hz, window), family, sigma, seed)


def differentiate_angles(ms: MeasurementSet, buses: Optional[Sequence[int]] = None) -> MeasurementSet:
    """Replace frequency channels with finite differences of the angle channels"""
    buses = ms.bus_ids if buses is None else buses
    cols = [ms.column(b) for b in buses]
    freq = np.array(ms.freq)
    freq[:, cols] = np.gradient(ms.angle[:, cols], ms.sample_period, axis=0)
    return replace(ms, freq=freq)


def _column_names(ms: MeasurementSet):
    angle_cols = [f"delta_{b}" for b in ms.bus_ids]
    freq_cols = [f"omega_g{b}" if b in ms.gen_buses else f"freq_l{b}" for b in ms.bus_ids]
    return angle_cols, freq_cols


def save_measurements(ms: MeasurementSet, path: Union[str, Path]) -> Path:
    """Write the CSV and its JSON sidecar; returns the sidecar path"""
    path = Path(path)
    angle_cols, freq_cols = _column_names(ms)
    frame = pd.DataFrame(np.hstack([ms.time[:, None], ms.angle, ms.freq]),
                         columns=["t"] + angle_cols + freq_cols)
    with open(path, "w", newline="") as f:
        f.write("# t [s]; delta [rad]; omega_g*, freq_l* [deviation, case frequency unit]\n")
        frame.to_csv(f, index=False, float_format="%.17g")
    sidecar = path.with_suffix(".json")
    with open(sidecar, "w") as f:
        json.dump({"rate_hz": ms.rate_hz, "window": list(ms.window), "t0": ms.t0,
                   "sample_period": ms.sample_period, "n_slots": ms.n_slots,
                   "bus_ids": list(ms.bus_ids), "gen_buses": list(ms.gen_buses),
                   "noise": ms.noise.to_dict()}, f, indent=4)
    return sidecar


def load_measurements(path: Union[str, Path]) -> MeasurementSet:
    path = Path(path)
    with open(path.with_suffix(".json")) as f:
        meta = json.load(f)
    frame = pd.read_csv(path, comment="#", float_precision="round_trip")
    bus_ids = [int(b) for b in meta["bus_ids"]]
    ms = MeasurementSet(bus_ids=tuple(bus_ids), t0=float(meta["t0"]),
                        sample_period=float(meta["sample_period"]),
                        angle=np.zeros((len(frame), len(bus_ids))), freq=np.zeros((len(frame), len(bus_ids))),
                        gen_buses=tuple(meta.get("gen_buses", ())))
    angle_cols, freq_cols = _column_names(ms)
    missing = [c for c in angle_cols + freq_cols if c not in frame.columns]
    if missing:
        raise MissingChannelError(int(missing[0].split("_")[-1].lstrip("gl")), "csv column")
    noise = meta.get("noise", {})
    return replace(ms, angle=frame[angle_cols].to_numpy(), freq=frame[freq_cols].to_numpy(),
                   noise=NoiseDescriptor(NoiseFamily(noise.get("family", "none")),
                                         float(noise.get("sigma", 0.0)), noise.get("seed")))
