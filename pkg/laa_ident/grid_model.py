"""
Grid Model Module
=================

Static description of a test system for the swing-equation grid model:
- Case file loading, validation and serialization (JSON, see cases/SCHEMA.md)
- Generator / load bus partition and neighbor map
- Network power flow P^F and its Jacobian
- Named dynamic parameter sets (fast / slow dynamics)
- No-attack equilibrium by damped Newton iteration
"""

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .exceptions import CaseFormatError, CaseValidationError, EquilibriumError

logger = logging.getLogger(__name__)

CASES_DIR = Path(__file__).parent / "cases"

# Hz represented by one unit of the frequency state (delta_dot = omega)
FREQUENCY_UNITS = ("rad/s", "Hz", "pu")


@dataclass(frozen=True)
class NeighborMap:
    """Adjacency of the network: buses joined by a nonzero susceptance"""
    adjacency: Dict[int, Tuple[int, ...]]

    def __getitem__(self, bus: int) -> Tuple[int, ...]:
        return self.adjacency[bus]

    def __iter__(self) -> Iterator[int]:
        return iter(self.adjacency)

    def __len__(self) -> int:
        return len(self.adjacency)

    def items(self):
        return self.adjacency.items()

    def as_sets(self) -> Dict[int, set]:
        return {bus: set(nbrs) for bus, nbrs in self.adjacency.items()}


@dataclass(frozen=True, eq=False)
class GridModel:
    """Topology and dynamic parameters of one test system.

    Bus ids are 1-based. Per-generator arrays follow ``gen_buses`` order,
    per-load arrays follow ``load_buses`` order, ``damping`` and
    ``susceptance`` are indexed by ``bus_id - 1``.
    """
    name: str
    gen_buses: Tuple[int, ...]
    load_buses: Tuple[int, ...]
    inertia: np.ndarray          # pu s^2, per generator
    damping: np.ndarray          # pu, per bus
    gov_p_gain: np.ndarray       # pu, per generator
    gov_i_gain: np.ndarray       # pu/s, per generator
    susceptance: np.ndarray      # pu, N x N
    secure_load: np.ndarray      # pu, per load bus
    vulnerable_load: Optional[np.ndarray] = None  # pu, per load bus
    nominal_freq_hz: float = 50.0
    max_freq_dev_hz: float = 2.0
    base_mva: float = 100.0
    frequency_unit: str = "rad/s"
    description: str = ""
    parameter_sets: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    parameter_set: Optional[str] = None

    def __post_init__(self):
        gen = tuple(int(b) for b in self.gen_buses)
        load = tuple(int(b) for b in self.load_buses)
        object.__setattr__(self, "gen_buses", gen)
        object.__setattr__(self, "load_buses", load)

        n = len(gen) + len(load)
        if set(gen) & set(load):
            raise CaseValidationError(f"buses {sorted(set(gen) & set(load))} are both generator and load",
                                      field="buses")
        if set(gen) | set(load) != set(range(1, n + 1)):
            raise CaseValidationError(f"generator and load buses must partition 1..{n}", field="buses")

        for name, size in (("inertia", len(gen)), ("gov_p_gain", len(gen)), ("gov_i_gain", len(gen)),
                           ("damping", n), ("secure_load", len(load))):
            self._freeze_array(name, (size,))
        self._freeze_array("susceptance", (n, n))
        if self.vulnerable_load is not None:
            self._freeze_array("vulnerable_load", (len(load),))

        B = self.susceptance
        if not np.all(np.isfinite(B)):
            raise CaseValidationError("non-finite entries", field="susceptance")
        if not np.array_equal(B, B.T):
            i, j = np.argwhere(B != B.T)[0]
            raise CaseValidationError(f"asymmetric: B[{i + 1},{j + 1}]={B[i, j]} but "
                                      f"B[{j + 1},{i + 1}]={B[j, i]}", field="susceptance")
        if np.any(np.diag(B) != 0.0):
            raise CaseValidationError("diagonal must be zero", field="susceptance")
        if np.any(self.inertia <= 0):
            raise CaseValidationError("inertia must be positive for every generator", field="inertia")
        if np.any(self.damping <= 0):
            raise CaseValidationError("damping must be positive for every bus", field="damping")
        if np.any(self.secure_load < 0):
            raise CaseValidationError("secure load must be nonnegative", field="secure_load")
        if self.vulnerable_load is not None and np.any(self.vulnerable_load < 0):
            raise CaseValidationError("vulnerable load must be nonnegative", field="vulnerable_load")
        if self.nominal_freq_hz <= 0 or self.max_freq_dev_hz <= 0:
            raise CaseValidationError("frequencies must be positive", field="limits")
        if self.frequency_unit not in FREQUENCY_UNITS:
            raise CaseValidationError(f"unknown frequency unit '{self.frequency_unit}' "
                                      f"(choose from {', '.join(FREQUENCY_UNITS)})", field="limits")

    def _freeze_array(self, name: str, shape: Tuple[int, ...]):
        arr = np.array(getattr(self, name), dtype=float)
        if arr.shape != shape:
            raise CaseValidationError(f"expected shape {shape}, got {arr.shape}", field=name)
        arr.flags.writeable = False
        object.__setattr__(self, name, arr)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridModel):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = object.__hash__

    # ---- sizes and index helpers -------------------------------------

    @property
    def n_buses(self) -> int:
        return len(self.gen_buses) + len(self.load_buses)

    @property
    def n_gens(self) -> int:
        return len(self.gen_buses)

    @property
    def n_loads(self) -> int:
        return len(self.load_buses)

    @property
    def state_size(self) -> int:
        """Length of the (delta, omega) state vector"""
        return self.n_buses + self.n_gens

    @cached_property
    def gen_index(self) -> np.ndarray:
        """0-based bus indices of generators, in generator order"""
        return np.array(self.gen_buses, dtype=int) - 1

    @cached_property
    def load_index(self) -> np.ndarray:
        return np.array(self.load_buses, dtype=int) - 1

    @cached_property
    def load_damping(self) -> np.ndarray:
        return self.damping[self.load_index]

    @cached_property
    def gen_damping(self) -> np.ndarray:
        return self.damping[self.gen_index]

    def gen_position(self, bus: int) -> int:
        try:
            return self.gen_buses.index(bus)
        except ValueError:
            raise KeyError(f"bus {bus} is not a generator bus") from None

    def load_position(self, bus: int) -> int:
        try:
            return self.load_buses.index(bus)
        except ValueError:
            raise KeyError(f"bus {bus} is not a load bus") from None

    def is_generator(self, bus: int) -> bool:
        return bus in self.gen_buses

    @cached_property
    def neighbors(self) -> NeighborMap:
        adjacency = {}
        for i in range(self.n_buses):
            adjacency[i + 1] = tuple(int(j) + 1 for j in np.flatnonzero(self.susceptance[i]))
        return NeighborMap(adjacency)

    # ---- network flow ------------------------------------------------

    @cached_property
    def branches(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(from_index, to_index, susceptance) over the upper triangle"""
        f, t = np.nonzero(np.triu(self.susceptance, k=1))
        return f, t, self.susceptance[f, t]

    @cached_property
    def incidence(self) -> np.ndarray:
        """Branch-bus incidence matrix, +1 at the from bus and -1 at the to bus"""
        f, t, _ = self.branches
        A = np.zeros((len(f), self.n_buses))
        A[np.arange(len(f)), f] = 1.0
        A[np.arange(len(f)), t] = -1.0
        return A

    def power_flow(self, delta: np.ndarray) -> np.ndarray:
        """P^F_i = sum_j B_ij sin(delta_i - delta_j); ``delta`` may carry leading batch axes"""
        f, t, b = self.branches
        flow = b * np.sin(delta[..., f] - delta[..., t])
        return flow @ self.incidence

    def power_flow_jacobian(self, delta: np.ndarray) -> np.ndarray:
        """dP^F/d(delta): a weighted Laplacian with weights B_ij cos(delta_i - delta_j)"""
        W = self.susceptance * np.cos(delta[:, None] - delta[None, :])
        np.fill_diagonal(W, 0.0)
        return np.diag(W.sum(axis=1)) - W

    def stiffness_bound(self) -> float:
        """Gershgorin bound on the fastest load-bus rate, 1/s"""
        row_sums = np.abs(self.susceptance).sum(axis=1)
        return float(np.max(2.0 * row_sums[self.load_index] / self.load_damping)) if self.n_loads else 0.0

    @property
    def hz_per_unit(self) -> float:
        """Hz represented by one unit of the frequency state"""
        if self.frequency_unit == "Hz":
            return 1.0
        if self.frequency_unit == "pu":
            return float(self.nominal_freq_hz)
        return 1.0 / (2.0 * np.pi)

    @property
    def freq_limit(self) -> float:
        """Safety limit on generator frequency deviation in state units"""
        return self.max_freq_dev_hz / self.hz_per_unit

    def to_hz(self, freq: np.ndarray) -> np.ndarray:
        return np.asarray(freq) * self.hz_per_unit

    @property
    def has_vulnerable_load(self) -> bool:
        return self.vulnerable_load is not None

    # ---- parameter sets and serialization ------------------------------

    def with_parameter_set(self, tag: str) -> "GridModel":
        """Return a copy with the named dynamic parameter set applied"""
        if tag not in self.parameter_sets:
            raise CaseValidationError(f"unknown parameter set '{tag}' (have {sorted(self.parameter_sets)})",
                                      field="parameter_sets")
        ps = self.parameter_sets[tag]
        damping = np.array(self.damping)
        if "gen_damping" in ps:
            damping[self.gen_index] = _per_entry(ps["gen_damping"], self.n_gens, "gen_damping")
        if "load_damping" in ps:
            damping[self.load_index] = _per_entry(ps["load_damping"], self.n_loads, "load_damping")
        return GridModel(
            name=self.name,
            gen_buses=self.gen_buses,
            load_buses=self.load_buses,
            inertia=_per_entry(ps.get("inertia", self.inertia), self.n_gens, "inertia"),
            damping=damping,
            gov_p_gain=_per_entry(ps.get("gov_p_gain", self.gov_p_gain), self.n_gens, "gov_p_gain"),
            gov_i_gain=_per_entry(ps.get("gov_i_gain", self.gov_i_gain), self.n_gens, "gov_i_gain"),
            susceptance=self.susceptance,
            secure_load=self.secure_load,
            vulnerable_load=self.vulnerable_load,
            nominal_freq_hz=self.nominal_freq_hz,
            max_freq_dev_hz=self.max_freq_dev_hz,
            base_mva=self.base_mva,
            frequency_unit=self.frequency_unit,
            description=self.description,
            parameter_sets=self.parameter_sets,
            parameter_set=tag,
        )

    def to_dict(self) -> Dict[str, Any]:
        """Case-file document for this model"""
        f, t, b = self.branches
        loads = []
        for k, bus in enumerate(self.load_buses):
            entry = {"bus": bus, "damping": float(self.damping[bus - 1]),
                     "secure": float(self.secure_load[k])}
            if self.vulnerable_load is not None:
                entry["vulnerable"] = float(self.vulnerable_load[k])
            loads.append(entry)
        doc = {
            "name": self.name,
            "description": self.description,
            "base_mva": float(self.base_mva),
            "buses": [{"id": i, "type": "generator" if i in self.gen_buses else "load"}
                      for i in range(1, self.n_buses + 1)],
            "generators": [{"bus": bus,
                            "inertia": float(self.inertia[k]),
                            "damping": float(self.damping[bus - 1]),
                            "gov_p_gain": float(self.gov_p_gain[k]),
                            "gov_i_gain": float(self.gov_i_gain[k])}
                           for k, bus in enumerate(self.gen_buses)],
            "branches": [{"from": int(i) + 1, "to": int(j) + 1, "susceptance": float(v)}
                         for i, j, v in zip(f, t, b)],
            "loads": loads,
            "limits": {"nominal_freq_hz": float(self.nominal_freq_hz),
                       "max_freq_dev_hz": float(self.max_freq_dev_hz),
                       "frequency_unit": self.frequency_unit},
            "parameter_sets": self.parameter_sets,
        }
        if self.parameter_set is not None:
            doc["default_parameter_set"] = self.parameter_set
        return doc


def _per_entry(value, size: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(size, float(arr[0]))
    if arr.shape != (size,):
        raise CaseValidationError(f"expected {size} entries, got {arr.size}", field=name)
    return arr


def _require(doc: Dict[str, Any], key: str, where: str = ""):
    if not isinstance(doc, dict) or key not in doc:
        raise CaseFormatError("missing required key", field=f"{where}{key}")
    return doc[key]


def case_path(name_or_path: Union[str, Path]) -> Path:
    """Resolve a shipped case id (``ieee39``) or a filesystem path"""
    p = Path(name_or_path)
    if p.exists():
        return p
    shipped = CASES_DIR / f"{name_or_path}.json"
    if shipped.exists():
        return shipped
    raise CaseFormatError(f"no such case file or shipped case: {name_or_path}", field="path")


def parse_case(doc: Dict[str, Any]) -> GridModel:
    """Build a GridModel from a case-file document"""
    name = str(_require(doc, "name"))
    base_mva = float(_require(doc, "base_mva"))
    if base_mva <= 0:
        raise CaseValidationError("must be positive", field="base_mva")

    buses = _require(doc, "buses")
    try:
        ids = [int(b["id"]) for b in buses]
        types = [str(b["type"]) for b in buses]
    except (KeyError, TypeError, ValueError) as e:
        raise CaseFormatError(f"malformed bus entry ({e})", field="buses") from None
    n = len(ids)
    if sorted(ids) != list(range(1, n + 1)):
        raise CaseValidationError(f"bus ids must be exactly 1..{n}", field="buses")
    bad = [t for t in types if t not in ("generator", "load")]
    if bad:
        raise CaseValidationError(f"unknown bus type '{bad[0]}'", field="buses")
    bus_type = dict(zip(ids, types))

    damping = np.zeros(n)
    gens = _require(doc, "generators")
    gen_buses, inertia, kp, ki = [], [], [], []
    for k, g in enumerate(gens):
        try:
            bus = int(g["bus"])
            inertia.append(float(g["inertia"]))
            damping[bus - 1] = float(g["damping"])
            kp.append(float(g["gov_p_gain"]))
            ki.append(float(g["gov_i_gain"]))
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise CaseFormatError(f"malformed generator entry {k} ({e})", field="generators") from None
        if bus_type.get(bus) != "generator":
            raise CaseValidationError(f"bus {bus} is not declared as a generator", field="generators")
        gen_buses.append(bus)
    if len(set(gen_buses)) != len(gen_buses) or set(gen_buses) != {i for i, t in bus_type.items() if t == "generator"}:
        raise CaseValidationError("every generator bus must appear exactly once", field="generators")

    loads = _require(doc, "loads")
    load_buses, secure, vulnerable = [], [], []
    for k, ld in enumerate(loads):
        try:
            bus = int(ld["bus"])
            damping[bus - 1] = float(ld["damping"])
            secure.append(float(ld["secure"]))
            vulnerable.append(None if ld.get("vulnerable") is None else float(ld["vulnerable"]))
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise CaseFormatError(f"malformed load entry {k} ({e})", field="loads") from None
        if bus_type.get(bus) != "load":
            raise CaseValidationError(f"bus {bus} is not declared as a load", field="loads")
        load_buses.append(bus)
    if len(set(load_buses)) != len(load_buses) or set(load_buses) != {i for i, t in bus_type.items() if t == "load"}:
        raise CaseValidationError("every load bus must appear exactly once", field="loads")

    B = np.zeros((n, n))
    for k, br in enumerate(_require(doc, "branches")):
        try:
            i, j, b = int(br["from"]), int(br["to"]), float(br["susceptance"])
        except (KeyError, TypeError, ValueError) as e:
            raise CaseFormatError(f"malformed branch entry {k} ({e})", field="branches") from None
        if not (1 <= i <= n and 1 <= j <= n) or i == j:
            raise CaseValidationError(f"branch {k} joins invalid buses {i}-{j}", field="branches")
        if b == 0.0 or not np.isfinite(b):
            raise CaseValidationError(f"branch {k} has susceptance {b}", field="branches")
        B[i - 1, j - 1] += b
        B[j - 1, i - 1] += b

    limits = _require(doc, "limits")
    model = GridModel(
        name=name,
        gen_buses=tuple(gen_buses),
        load_buses=tuple(load_buses),
        inertia=np.array(inertia),
        damping=damping,
        gov_p_gain=np.array(kp),
        gov_i_gain=np.array(ki),
        susceptance=B,
        secure_load=np.array(secure),
        vulnerable_load=None if any(v is None for v in vulnerable) else np.array(vulnerable),
        nominal_freq_hz=float(_require(limits, "nominal_freq_hz", "limits.")),
        max_freq_dev_hz=float(_require(limits, "max_freq_dev_hz", "limits.")),
        base_mva=base_mva,
        frequency_unit=str(limits.get("frequency_unit", "rad/s")),
        description=str(doc.get("description", "")),
        parameter_sets=dict(doc.get("parameter_sets", {})),
    )
    default = doc.get("default_parameter_set")
    return model.with_parameter_set(default) if default else model


def load_case(path: Union[str, Path], parameter_set: Optional[str] = None) -> GridModel:
    """
    Load and validate a case file

    Args:
        path: Path to a case JSON file, or the id of a shipped case
        parameter_set: Optional parameter set tag overriding the file default

    Returns:
        Validated GridModel
    """
    p = case_path(path)
    try:
        with open(p) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise CaseFormatError(f"invalid JSON at line {e.lineno}: {e.msg}", field=str(p)) from None
    model = parse_case(doc)
    if parameter_set is not None:
        model = model.with_parameter_set(parameter_set)
    logger.info(f"Loaded case {model.name}: {model.n_gens} generators, {model.n_loads} loads, "
                f"parameter set {model.parameter_set}")
    return model


def save_case(model: GridModel, path: Union[str, Path]):
    with open(path, "w") as f:
        json.dump(model.to_dict(), f, indent=2)


def equilibrium_residual(model: GridModel, delta: np.ndarray) -> np.ndarray:
    """Algebraic residual of the steady-state equations at angles ``delta``"""
    res = -model.power_flow(delta)
    res[model.gen_index] -= model.gov_i_gain * delta[model.gen_index]
    res[model.load_index] -= model.secure_load
    return res


def _check_islands(model: GridModel):
    graph = csr_matrix(model.susceptance != 0.0)
    n_comp, labels = connected_components(graph, directed=False)
    if n_comp == 1:
        return
    gen_labels = set(labels[model.gen_index])
    for comp in range(n_comp):
        if comp in gen_labels:
            continue
        members = np.flatnonzero(labels == comp)
        loaded = [int(i) + 1 for i in members
                  if i in model.load_index and model.secure_load[model.load_position(int(i) + 1)] != 0.0]
        if loaded:
            raise EquilibriumError(f"load buses {loaded} are not connected to any generator; "
                                   f"their injection cannot be balanced")


def equilibrium(model: GridModel, delta0: Optional[np.ndarray] = None,
                tol: float = 1e-11, max_iter: int = 50) -> np.ndarray:
    """
    No-attack equilibrium (delta*, omega* = 0)

    Damped Newton on 0 = -K^I delta - P^F (generators), 0 = -P^LS - P^F (loads).
    The integral term pins generator angles, so no slack bus is needed.

    Args:
        model: Grid model
        delta0: Initial angle guess (defaults to all zeros)
        tol: Convergence threshold on the residual infinity-norm, pu
        max_iter: Newton iteration budget

    Returns:
        State vector of length N + G with the generator frequencies zero
    """
    delta = np.zeros(model.n_buses) if delta0 is None else np.array(delta0, dtype=float)
    res = equilibrium_residual(model, delta)
    norm = np.max(np.abs(res)) if res.size else 0.0

    if norm > tol:
        _check_islands(model)

    k_int = np.zeros(model.n_buses)
    k_int[model.gen_index] = model.gov_i_gain
    it = 0
    while norm > tol:
        if it >= max_iter:
            raise EquilibriumError(f"Newton did not converge in {max_iter} iterations (residual {norm:.3e})",
                                   iterations=it, residual=norm)
        J = -np.diag(k_int) - model.power_flow_jacobian(delta)
        try:
            step = np.linalg.solve(J, -res)
        except np.linalg.LinAlgError:
            raise EquilibriumError("singular Jacobian", iterations=it, residual=norm) from None
        if not np.all(np.isfinite(step)):
            raise EquilibriumError("non-finite Newton step", iterations=it, residual=norm)

        scale = 1.0
        for _ in range(30):
            trial = delta + scale * step
            trial_res = equilibrium_residual(model, trial)
            trial_norm = np.max(np.abs(trial_res))
            if trial_norm < norm:
                break
            scale *= 0.5
        else:
            logger.warning(f"Equilibrium line search exhausted at iteration {it}")
            raise EquilibriumError("line search failed to reduce the residual", iterations=it, residual=norm)
        delta, res, norm = trial, trial_res, trial_norm
        it += 1
        logger.debug(f"Newton iteration {it}: residual {norm:.3e}, step scale {scale}")

    state = np.zeros(model.state_size)
    state[:model.n_buses] = delta
    logger.info(f"Equilibrium of {model.name} found in {it} iterations (residual {norm:.2e})")
    return state


def list_cases() -> List[str]:
    return sorted(p.stem for p in CASES_DIR.glob("*.json"))
