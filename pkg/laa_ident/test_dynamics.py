"""
Tests for the attacked swing dynamics, integration and breach detection
"""

from dataclasses import replace

import numpy as np
import pytest

from laa_ident.conftest import make_toy_model
from laa_ident.dynamics import (
    AttackConfig,
    SimulationSettings,
    SwingDynamics,
    Trajectory,
    detect_breach,
    integrate,
    integrate_ode,
    rhs,
    rhs_no_attack,
    save_trajectory_csv,
    validate_budget,
)
from laa_ident.exceptions import AttackConfigError, BudgetUnavailableError
from laa_ident.grid_model import equilibrium
from laa_ident.scenarios import get_scenario


def _random_states(model, n=8, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, 0.3, size=(n, model.state_size))


@pytest.mark.parametrize("fixture", ["toy_model", "ieee39_fast"])
def test_zero_attack_matches_no_attack_rhs(request, fixture):
    model = request.getfixturevalue(fixture)
    states = _random_states(model)
    zero = AttackConfig.none(model)
    for state in states:
        assert np.array_equal(rhs(model, zero, 1.0, state), rhs_no_attack(model, 1.0, state))


def test_attack_injection_is_affine(ieee39_fast):
    model = ieee39_fast
    first = AttackConfig.from_entries(model, {(19, 33): 18.0}, {19: 0.1})
    second = AttackConfig.from_entries(model, {(15, 33): 4.0, (20, 31): 2.5}, {4: -0.05})
    zero = AttackConfig.none(model)
    for state in _random_states(model, n=4, seed=3):
        base = rhs(model, zero, 0.5, state)
        lhs = rhs(model, first + second, 0.5, state) - base
        parts = (rhs(model, first, 0.5, state) - base) + (rhs(model, second, 0.5, state) - base)
        np.testing.assert_allclose(lhs, parts, rtol=1e-9, atol=1e-9)


def test_batched_rhs_matches_rows(toy_model, toy_attack):
    dyn = SwingDynamics(toy_model, toy_attack)
    states = _random_states(toy_model, n=5)
    batch = dyn(0.0, states)
    for k, state in enumerate(states):
        np.testing.assert_allclose(batch[k], dyn(0.0, state), rtol=0, atol=1e-14)


def test_load_sensing_solves_implicit_equation(toy_model):
    attack = AttackConfig.from_entries(toy_model, {(2, 3): 0.2}, sensing=(1, 3))
    dyn = SwingDynamics(toy_model, attack)
    state = _random_states(toy_model, n=1)[0]
    d_state = dyn(0.0, state)
    delta_dot = d_state[:toy_model.n_buses]
    flow = toy_model.power_flow(state[:toy_model.n_buses])
    # D_2 delta_dot_2 = K_23 delta_dot_3 - P_2 - flow_2 must hold with the solved rates
    lhs = toy_model.damping[1] * delta_dot[1]
    rhs_value = 0.2 * delta_dot[2] - toy_model.secure_load[0] - flow[1]
    assert lhs == pytest.approx(rhs_value, abs=1e-12)


def test_attack_config_validation(toy_model):
    with pytest.raises(AttackConfigError):
        AttackConfig.from_entries(toy_model, {(2, 1): -1.0})
    with pytest.raises(AttackConfigError):
        AttackConfig.from_entries(toy_model, {(1, 1): 1.0})
    with pytest.raises(AttackConfigError):
        AttackConfig.from_entries(toy_model, {(2, 3): 1.0})
    with pytest.raises(AttackConfigError):
        AttackConfig.from_entries(toy_model, {}, sensing=(1, 7))


def test_victim_buses(toy_model, toy_attack):
    assert toy_attack.victim_buses == (2,)
    assert toy_attack.gain(2, 1) == 0.5
    assert AttackConfig.none(toy_model).is_zero


def test_no_attack_stays_at_equilibrium(toy_model):
    traj = integrate(toy_model, None, (0.0, 60.0), SimulationSettings(max_step=0.05))
    assert np.max(np.abs(traj.omega)) <= 1e-8
    assert not detect_breach(traj).breached


@pytest.mark.slow
def test_no_attack_stays_at_equilibrium_ieee39(ieee39_fast):
    settings = SimulationSettings(max_step=2.5 / ieee39_fast.stiffness_bound())
    traj = integrate(ieee39_fast, None, (0.0, 60.0), settings)
    assert np.max(np.abs(traj.omega)) <= 1e-8


def test_rk45_order_on_exponential_decay():
    def decay(t, y):
        return -y

    errors = []
    for h in (0.1, 0.05):
        # tolerances loose enough that every capped step is accepted
        settings = SimulationSettings(rtol=1.0, atol=1.0, max_step=h, first_step=h)
        sol = integrate_ode(decay, (0.0, 1.0), np.array([1.0]), settings)
        errors.append(abs(sol.y[0, -1] - np.exp(-1.0)))
    order = np.log2(errors[0] / errors[1])
    assert 4.0 < order < 6.0


def test_tighter_tolerances_agree(toy_model, toy_attack):
    loose = integrate(toy_model, toy_attack, (0.0, 5.0), SimulationSettings(rtol=1e-6, atol=1e-8))
    tight = integrate(toy_model, toy_attack, (0.0, 5.0), SimulationSettings(rtol=1e-8, atol=1e-10))
    np.testing.assert_allclose(loose.states[-1], tight.states[-1], atol=1e-5)


def test_trajectory_starts_at_equilibrium(toy_trajectory, toy_model):
    np.testing.assert_allclose(toy_trajectory.states[0], equilibrium(toy_model))
    assert toy_trajectory.time[0] == 0.0
    assert toy_trajectory.time[-1] == pytest.approx(5.0)
    assert np.all(np.diff(toy_trajectory.time) > 0)


def test_onset_delays_attack(toy_model):
    delayed = AttackConfig.from_entries(toy_model, {(2, 1): 0.5}, {2: 0.05}, onset_time=2.0)
    traj = integrate(toy_model, delayed, (0.0, 4.0), SimulationSettings(max_step=0.05))
    before = traj.time < 2.0
    assert np.max(np.abs(traj.omega[before])) <= 1e-8
    assert np.max(np.abs(traj.omega[~before])) > 1e-4


def test_trajectory_csv(tmp_path, toy_trajectory):
    path = tmp_path / "traj.csv"
    save_trajectory_csv(toy_trajectory, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[1] == "t,delta_1,delta_2,delta_3,omega_g1,freq_l2,freq_l3"
    assert len(lines) == len(toy_trajectory.time) + 2


def test_frequency_unit_conversion(toy_model):
    assert toy_model.to_hz(2 * np.pi) == pytest.approx(1.0)
    assert toy_model.freq_limit == pytest.approx(2 * np.pi * 2.0)
    hz = replace(toy_model, frequency_unit="Hz")
    assert hz.to_hz(0.5) == pytest.approx(0.5)
    assert hz.freq_limit == pytest.approx(2.0)
    pu = replace(toy_model, frequency_unit="pu")
    assert pu.to_hz(0.01) == pytest.approx(0.5)
    assert pu.freq_limit == pytest.approx(0.04)


def test_breach_limit_follows_frequency_unit(toy_model):
    hz = replace(toy_model, frequency_unit="Hz")
    omega = np.array([0.0, 1.0, 3.0])
    traj = Trajectory(model=hz, attack=AttackConfig.none(hz), time=np.arange(3.0),
                      delta=np.zeros((3, hz.n_buses)), omega=omega[:, None], load_freq=np.zeros((3, hz.n_loads)))
    assert detect_breach(traj).time == pytest.approx(1.5)


def _synthetic(model, omega_hz):
    T = len(omega_hz)
    return Trajectory(model=model, attack=AttackConfig.none(model), time=np.arange(T, dtype=float),
                      delta=np.zeros((T, model.n_buses)), omega=2 * np.pi * np.asarray(omega_hz)[:, None],
                      load_freq=np.zeros((T, model.n_loads)))


def test_breach_interpolates_crossing(toy_model):
    report = detect_breach(_synthetic(toy_model, [0.0, 1.0, 3.0]))
    assert report.breached
    assert report.time == pytest.approx(1.5)
    assert report.bus == 1
    assert report.peak_hz == pytest.approx(3.0)


def test_negative_excursion_counts(toy_model):
    report = detect_breach(_synthetic(toy_model, [0.0, -1.0, -2.5, -1.0]))
    assert report.time == pytest.approx(1.0 + 1.0 / 1.5)


def test_no_breach_reports_peak(toy_model):
    report = detect_breach(_synthetic(toy_model, [0.0, 0.5, 1.9]))
    assert not report.breached
    assert report.to_dict()["time"] is None
    assert report.peak_hz == pytest.approx(1.9)


def test_custom_limit(toy_model):
    report = detect_breach(_synthetic(toy_model, [0.0, 0.5, 1.0]), omega_max_hz=0.75)
    assert report.time == pytest.approx(1.5)


def test_stop_at_breach_ends_run():
    model = make_toy_model(max_freq_dev_hz=1e-4)
    attack = AttackConfig.from_entries(model, {}, {2: 0.05})
    traj = integrate(model, attack, (0.0, 10.0), SimulationSettings(stop_at_breach=True))
    assert traj.event_time is not None
    assert traj.time[-1] == pytest.approx(traj.event_time)
    report = detect_breach(traj)
    assert report.breached
    assert report.time == pytest.approx(traj.event_time, abs=1e-3)


def test_budget_report(toy_model, toy_attack):
    report = validate_budget(toy_model, toy_attack)
    assert not report.passed
    assert report.failures() == [2]
    entry = report.entries[0]
    assert entry.victim
    assert entry.dynamic_load == pytest.approx(0.5 * 2 * np.pi * 2.0)
    assert entry.static_margin == pytest.approx(0.25)

    small = AttackConfig.from_entries(toy_model, {(2, 1): 0.001}, {2: 0.05})
    assert validate_budget(toy_model, small).passed


def test_budget_needs_vulnerable_load(toy_model, toy_attack):
    model = replace(toy_model, vulnerable_load=None)
    with pytest.raises(BudgetUnavailableError):
        validate_budget(model, toy_attack)


@pytest.mark.slow
def test_fast_single_point_attack_breaches(ieee39_fast, ieee39_slow):
    fast = get_scenario("ieee39-fast-single")
    traj = integrate(ieee39_fast, fast.attack(ieee39_fast), (0.0, 30.0), SimulationSettings(stop_at_breach=True))
    report = detect_breach(traj)
    assert report.breached
    assert 5.0 <= report.time <= 30.0

    slow = get_scenario("ieee39-slow-single")
    slow_traj = integrate(ieee39_slow, slow.attack(ieee39_slow), (0.0, 60.0),
                          SimulationSettings(stop_at_breach=True))
    slow_report = detect_breach(slow_traj)
    assert slow_report.breached
    assert slow_report.time > report.time
    assert report.bus in ieee39_fast.gen_buses
    # no branch slips out of step before the generator limit is hit
    f, t, _ = ieee39_fast.branches
    assert np.max(np.abs(traj.delta[:, f] - traj.delta[:, t])) < np.pi / 2
