"""
Tests for the per-bus LASSO identifier
"""

import numpy as np
import pytest
from sklearn.linear_model import Lasso

from laa_ident.exceptions import MissingChannelError
from laa_ident.dynamics import AttackConfig, integrate
from laa_ident.pmu import add_noise, sample
from laa_ident.scenarios import get_scenario
from laa_ident.sparse_regression import (
    LassoSettings,
    RegressionSystem,
    assemble,
    effective_lambda,
    identify_all,
    identify_bus_local,
    information_pattern,
    lambda_max,
    lambda_path,
    lasso,
    noise_level,
    soft_threshold,
)


def _random_system(n=200, p=6, seed=0, noise=0.05):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    beta = np.zeros(p)
    beta[[0, 3]] = [2.0, -1.5]
    beta[-1] = -0.7
    y = X @ beta + noise * rng.normal(size=n)
    return RegressionSystem(bus=0, sensing_buses=tuple(range(p - 1)), response=y, design=X, damping=1.0)


def test_soft_threshold():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    assert soft_threshold(0.5, 1.0) == 0.0


@pytest.mark.parametrize("lam", [0.0, 0.3, 5.0, 50.0])
def test_single_column_closed_form(lam):
    rng = np.random.default_rng(1)
    x = rng.normal(size=(40, 1))
    y = 0.8 * x[:, 0] + 0.1 * rng.normal(size=40)
    system = RegressionSystem(bus=0, sensing_buses=(), response=y, design=x, damping=1.0)
    sol = lasso(system, lam=lam, nonneg=False, standardize=False, tol=1e-12)
    z = float(x[:, 0] @ y)
    expected = np.sign(z) * max(abs(z) - lam / 2, 0.0) / float(x[:, 0] @ x[:, 0])
    assert sol.coef[0] == pytest.approx(expected, abs=1e-10)


def test_objective_monotone_and_kkt():
    system = _random_system()
    sol = lasso(system, lam=2.0, tol=1e-10)
    trace = np.array(sol.objective_trace)
    assert np.all(np.diff(trace) <= 1e-12 * np.abs(trace[:-1]))
    assert sol.converged
    assert sol.kkt_residual <= 1e-10


@pytest.mark.parametrize("lam", [0.5, 4.0, 20.0])
def test_matches_sklearn(lam):
    system = _random_system(seed=3)
    sol = lasso(system, lam=lam, nonneg=False, standardize=False, tol=1e-12)
    n = len(system.response)
    oracle = Lasso(alpha=lam / (2 * n), fit_intercept=False, tol=1e-14, max_iter=100000)
    oracle.fit(system.design, system.response)
    np.testing.assert_allclose(sol.coef, oracle.coef_, atol=1e-6)


def test_nonneg_keeps_gains_nonnegative():
    system = _random_system(seed=5)
    sol = lasso(system, lam=0.5, nonneg=True)
    assert np.all(sol.gains >= 0.0)
    assert sol.gains[3] == 0.0
    # the static step stays free
    assert sol.step < 0.0


def test_lambda_max_zeroes_everything():
    system = _random_system(seed=2)
    lmax = lambda_max(system)
    assert lasso(system, lam=lmax * 1.0001, nonneg=False).n_nonzero == 0
    assert lasso(system, lam=lmax * 0.9, nonneg=False).n_nonzero > 0


def test_lambda_path_order_and_warm_start():
    system = _random_system(seed=4)
    lambdas = [0.1, 10.0, 1.0]
    path = lambda_path(system, lambdas, nonneg=False, tol=1e-12)
    assert [s.lam for s in path] == lambdas
    for lam, sol in zip(lambdas, path):
        cold = lasso(system, lam=lam, nonneg=False, tol=1e-12)
        np.testing.assert_allclose(sol.coef, cold.coef, atol=1e-8)


def test_negative_lambda():
    with pytest.raises(ValueError):
        LassoSettings(lam=-1.0)
    with pytest.raises(ValueError):
        lasso(_random_system(), lam=-1.0)


def test_assemble_shapes(toy_model, toy_clean):
    system = assemble(toy_model, toy_clean, 2)
    assert system.design.shape == (toy_clean.n_slots, 2)
    assert system.sensing_buses == (1,)
    np.testing.assert_allclose(system.design[:, -1], -1.0 / 0.5)
    with pytest.raises(ValueError):
        assemble(toy_model, toy_clean, 1)


def test_noiseless_recovery_toy(toy_model, toy_clean):
    result = identify_all(toy_model, toy_clean, settings=LassoSettings(lam=1e-6, tol=1e-12))
    assert result.gain(2, 1) == pytest.approx(0.5, abs=1e-3)
    assert result.step(2) == pytest.approx(0.05, abs=1e-3)
    assert abs(result.gain(3, 1)) <= 1e-3
    assert abs(result.step(3)) <= 1e-3
    assert result.flags["converged"]


def test_huge_lambda_gives_zero_gains(toy_model, toy_clean):
    result = identify_all(toy_model, toy_clean, settings=LassoSettings(lam=1e9, noise_scaled=False))
    np.testing.assert_array_equal(result.gains, 0.0)


def test_noise_level_tracks_residual_scale():
    system = _random_system(n=4000, noise=0.05)
    assert noise_level(system) == pytest.approx(0.05, rel=0.1)
    assert effective_lambda(system, LassoSettings(lam=3.0)) == pytest.approx(6.0 * noise_level(system))
    assert effective_lambda(system, LassoSettings(lam=3.0, noise_scaled=False)) == 3.0


def test_noise_scaled_lambda_is_reported(toy_model, toy_clean):
    noisy = add_noise(toy_clean, "gaussian", 0.01, seed=4)
    result = identify_all(toy_model, noisy)
    used = result.flags["effective_lambda"]
    assert result.flags["noise_scaled"]
    assert set(used) == {2, 3}
    assert all(value > 0 for value in used.values())
    clean = identify_all(toy_model, toy_clean)
    assert max(clean.flags["effective_lambda"].values()) < min(used.values())


def test_decentralized_rows_are_identical(toy_model, toy_clean):
    noisy = add_noise(toy_clean, "gaussian", 0.01, seed=1)
    settings = LassoSettings(lam=0.1)
    result = identify_all(toy_model, noisy, settings=settings, n_jobs=2)
    for bus in toy_model.load_buses:
        local = noisy.subset(information_pattern(toy_model, bus, (1,)))
        sol = identify_bus_local(toy_model, local, bus, (1,), settings)
        row = toy_model.load_position(bus)
        assert np.array_equal(result.gains[row], sol.gains)
        assert result.steps[row] == sol.step


def test_information_pattern(ieee39_fast):
    assert information_pattern(ieee39_fast, 19, (33,)) == {16, 19, 20, 33}


def test_missing_channel_marks_bus_failed(toy_model, toy_clean):
    partial = toy_clean.subset([1, 2])
    result = identify_all(toy_model, partial)
    assert result.failed_buses == [2, 3]
    assert np.all(np.isnan(result.gains))
    assert not result.succeeded
    with pytest.raises(MissingChannelError):
        assemble(toy_model, partial, 2)


@pytest.mark.slow
def test_noiseless_recovery_ieee39(ieee39_fast, fast_clean):
    settings = LassoSettings(lam=1e-6, tol=1e-12)
    result = identify_all(ieee39_fast, fast_clean, settings=settings)
    assert result.gain(19, 33) == pytest.approx(18.0, abs=1e-6)
    assert result.step(19) == pytest.approx(0.1, abs=1e-6)
    others = result.gains.copy()
    others[ieee39_fast.load_position(19), ieee39_fast.gen_buses.index(33)] = 0.0
    assert np.max(np.abs(others)) <= 1e-6

    system = assemble(ieee39_fast, fast_clean, 19)
    dense, *_ = np.linalg.lstsq(system.design, system.response, rcond=None)
    row = ieee39_fast.load_position(19)
    np.testing.assert_allclose(result.gains[row], dense[:-1], atol=1e-6)


@pytest.mark.slow
def test_lambda_path_sparsity_is_monotone(ieee39_fast, fast_clean):
    system = assemble(ieee39_fast, fast_clean, 19)
    lambdas = np.logspace(-4, np.log10(lambda_max(system)), 10)
    path = lambda_path(system, lambdas)
    counts = [s.n_nonzero for s in path]
    assert all(a <= b for a, b in zip(counts[1:], counts[:-1]))


def _clean_stream(scenario_id):
    scenario = get_scenario(scenario_id)
    model = scenario.load_model()
    attack = scenario.attack(model)
    clean = sample(integrate(model, attack, scenario.sim_span), scenario.rate_hz, scenario.window)
    return scenario, model, attack, clean


def _eta2_over_reps(scenario_id, reps):
    scenario, model, attack, clean = _clean_stream(scenario_id)
    values = []
    for rep in range(reps):
        ms = add_noise(clean, scenario.noise, scenario.sigma, seed=rep)
        result = identify_all(model, ms)
        result.score(attack)
        values.append(result.eta2)
    return values


@pytest.mark.slow
def test_sr_mean_eta2_band_fast():
    assert np.mean(_eta2_over_reps("ieee39-fast-single", 20)) <= 5.0


@pytest.mark.slow
def test_sr_mean_eta2_band_slow():
    assert np.mean(_eta2_over_reps("ieee39-slow-single", 10)) <= 5.0


@pytest.mark.slow
def test_sr_mean_eta2_band_logistic():
    assert np.mean(_eta2_over_reps("ieee39-fast-logistic", 10)) <= 5.0


@pytest.mark.slow
def test_sr_multi_point_medians():
    scenario, model, attack, clean = _clean_stream("ieee39-fast-multi")
    estimates = {(v, s): [] for v, s, _ in scenario.gains}
    spurious = []
    for rep in range(20):
        result = identify_all(model, add_noise(clean, scenario.noise, scenario.sigma, seed=rep))
        for v, s in estimates:
            estimates[(v, s)].append(result.gain(v, s))
        others = result.gains.copy()
        for v, s in estimates:
            others[model.load_position(v), model.gen_buses.index(s)] = 0.0
        spurious.append(others)
    for v, s, k in scenario.gains:
        assert abs(np.median((k - np.array(estimates[(v, s)])) / k)) <= 0.1
    assert np.max(np.median(np.stack(spurious), axis=0)) <= 0.5


@pytest.mark.slow
def test_noiseless_recovery_random_attacks(ieee39_fast):
    model = ieee39_fast
    rng = np.random.default_rng(7)
    settings = LassoSettings(lam=1e-6, tol=1e-12)
    for _ in range(3):
        victims = rng.choice(model.load_buses, size=2, replace=False)
        gains = {}
        for v in victims:
            for s in rng.choice(model.gen_buses, size=3, replace=False):
                gains[(int(v), int(s))] = float(rng.uniform(0.5, 3.0))
        attack = AttackConfig.from_entries(model, gains, {int(victims[0]): 0.1})
        clean = sample(integrate(model, attack, (0.0, 15.0)), 50.0, (0.0, 15.0))
        result = identify_all(model, clean, settings=settings)
        np.testing.assert_allclose(result.gains, attack.gains, atol=1e-4)
        np.testing.assert_allclose(result.steps, attack.static_step, atol=1e-4)
