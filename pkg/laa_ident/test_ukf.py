"""
Tests for the unscented Kalman filter identifier
"""

import numpy as np
import pytest

from laa_ident.dynamics import SwingDynamics, integrate
from laa_ident.exceptions import ConfigError, UkfError
from laa_ident.pmu import add_noise, sample
from laa_ident.scenarios import get_scenario
from laa_ident.sparse_regression import identify_all
from laa_ident.ukf import (
    UkfSettings,
    UnscentedKalmanFilter,
    _factor,
    run_ukf,
    save_ukf_trace,
    select_victim,
    sigma_weights,
    unscented_transform,
)


@pytest.mark.parametrize("n,alpha", [(3, 1e-3), (12, 1e-3), (5, 0.5), (12, 1.0)])
def test_sigma_weights_sum_to_one(n, alpha):
    weights = sigma_weights(n, alpha=alpha)
    assert len(weights.mean) == 2 * n + 1
    assert weights.mean.sum() == pytest.approx(1.0, abs=1e-6)
    assert weights.cov[0] - weights.mean[0] == pytest.approx(1.0 - alpha ** 2 + 2.0)


def test_linear_transform_is_exact():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(2, 3))
    b = np.array([0.5, -1.0])
    mean = np.array([0.1, -0.2, 0.3])
    root = rng.normal(size=(3, 3))
    cov = root @ root.T + 0.1 * np.eye(3)
    y_mean, y_cov = unscented_transform(mean, cov, lambda X: X @ A.T + b, UkfSettings(alpha=0.5))
    np.testing.assert_allclose(y_mean, A @ mean + b, atol=1e-10)
    np.testing.assert_allclose(y_cov, A @ cov @ A.T, atol=1e-10)


def test_indefinite_covariance_raises():
    with pytest.raises(UkfError) as info:
        _factor(np.diag([1.0, -1.0]), step=7)
    assert info.value.step == 7


def test_settings_validation():
    with pytest.raises(ConfigError):
        UkfSettings(mode="diag")
    with pytest.raises(ConfigError):
        UkfSettings(alpha=0.0)
    with pytest.raises(ConfigError):
        UkfSettings(param_variance=-1.0)


def test_load_sensing_bus_rejected(toy_model):
    with pytest.raises(ConfigError):
        UnscentedKalmanFilter(toy_model, (2,), victim_bus=2)


def test_row_mode_needs_a_victim(toy_model):
    quiet = sample(integrate(toy_model, None, (0.0, 5.0)), 50.0, (0.0, 5.0))
    with pytest.raises(ConfigError):
        run_ukf(toy_model, quiet)
    with pytest.raises(ConfigError):
        UnscentedKalmanFilter(toy_model, (1,), UkfSettings(mode="row"), victim_bus=1)


def test_derivative_matches_swing_dynamics(toy_model, toy_attack):
    ukf = UnscentedKalmanFilter(toy_model, (1,), UkfSettings(mode="full"))
    assert ukf.param_ids == ["K_2_1", "K_3_1", "eps_2", "eps_3"]
    rng = np.random.default_rng(5)
    phys = rng.normal(0.0, 0.2, size=(4, ukf.n_phys))
    X = np.hstack([phys, np.tile([0.5, 0.0, 0.05, 0.0], (4, 1))])
    d = ukf.derivative(1.0, X)
    expected = SwingDynamics(toy_model, toy_attack)(1.0, phys)
    np.testing.assert_allclose(d[:, :ukf.n_phys], expected, atol=1e-12)
    np.testing.assert_array_equal(d[:, ukf.n_phys:], 0.0)


def test_truth_is_a_fixed_point(toy_model, toy_clean, toy_attack):
    settings = UkfSettings(victim_bus=2, initial_params=np.array([0.5, 0.05]), param_variance=1e-8,
                           measurement_noise=1e-10)
    result, trace = run_ukf(toy_model, toy_clean, settings=settings, truth=toy_attack)
    assert result.gain(2, 1) == pytest.approx(0.5, abs=1e-2)
    assert result.step(2) == pytest.approx(0.05, abs=1e-2)
    assert result.estimator == "ukf"
    assert result.flags["min_eigenvalue"] >= -1e-9


def test_trace_layout(tmp_path, toy_model, toy_clean, toy_attack):
    noisy = add_noise(toy_clean, "gaussian", 0.001, seed=2)
    result, trace = run_ukf(toy_model, noisy, truth=toy_attack)
    assert list(trace.columns) == ["t", "param_id", "estimate", "variance"]
    assert len(trace) == noisy.n_slots * 2
    assert list(trace["param_id"][:2]) == ["K_2_1", "eps_2"]
    assert result.flags["victim_bus"] == 2
    assert result.flags["victim_source"] == "sparse-regression"
    assert result.flags["measurement_noise"] == pytest.approx(1e-6)
    path = save_ukf_trace(trace, tmp_path / "trace.csv")
    assert path.read_text().splitlines()[0] == "t,param_id,estimate,variance"


def test_full_mode(toy_model, toy_clean, toy_attack):
    noisy = add_noise(toy_clean, "gaussian", 0.001, seed=3)
    result, trace = run_ukf(toy_model, noisy, settings=UkfSettings(mode="full"), truth=toy_attack)
    assert result.estimator == "ukf-full"
    assert trace["param_id"].nunique() == 4
    assert result.gains.shape == (2, 1)
    assert result.eta2 is not None


def test_parameter_variance_never_grows(toy_model, toy_clean, toy_attack):
    noisy = add_noise(toy_clean, "gaussian", 0.001, seed=4)
    settings = UkfSettings(param_process_noise=0.0)
    _, trace = run_ukf(toy_model, noisy, settings=settings, truth=toy_attack)
    for _, group in trace.groupby("param_id"):
        var = group["variance"].to_numpy()
        assert np.all(var[1:] <= var[:-1] * (1 + 1e-6) + 1e-15)


def test_default_weights_are_nonnegative():
    weights = sigma_weights(60)
    assert np.all(weights.mean >= 0.0)
    assert weights.mean[0] == pytest.approx(0.0)


def test_counters_exist_before_filtering(toy_model):
    ukf = UnscentedKalmanFilter(toy_model, (1,), UkfSettings(mode="full"))
    assert ukf.n_repairs == 0
    assert ukf.n_evals == 0
    ukf.derivative(0.0, np.zeros((3, ukf.n)))
    assert ukf.n_evals == 3


def test_victim_comes_from_the_measurements(toy_model, toy_clean):
    noisy = add_noise(toy_clean, "gaussian", 0.001, seed=6)
    assert select_victim(toy_model, noisy, (1,)) == 2
    # no ground truth is handed over, yet the filter finds the attacked row
    result, trace = run_ukf(toy_model, noisy)
    assert result.flags["victim_bus"] == 2
    assert result.truth is None
    assert result.flags["work_unit"] == "rhs_evaluations"
    assert result.flags["work"] > 0


def test_victim_from_settings_wins(toy_model, toy_clean, toy_attack):
    result, trace = run_ukf(toy_model, toy_clean, settings=UkfSettings(victim_bus=3), truth=toy_attack)
    assert result.flags["victim_bus"] == 3
    assert result.flags["victim_source"] == "settings"
    assert set(trace.param_id) == {"K_3_1", "eps_3"}


def _ukf_eta2(scenario_id, reps, mode="row"):
    scenario = get_scenario(scenario_id)
    model = scenario.load_model()
    attack = scenario.attack(model)
    clean = sample(integrate(model, attack, scenario.sim_span), scenario.rate_hz, scenario.window)
    results = []
    for rep in range(reps):
        ms = add_noise(clean, scenario.noise, scenario.sigma, seed=rep)
        result, _ = run_ukf(model, ms, settings=UkfSettings(mode=mode), truth=attack)
        results.append(result)
    return model, clean, results


@pytest.mark.slow
def test_ukf_row_mode_fast_and_slow_accuracy():
    for scenario_id in ("ieee39-fast-single", "ieee39-slow-single"):
        _, _, results = _ukf_eta2(scenario_id, 3)
        assert all(r.flags["victim_bus"] == 19 for r in results)
        assert np.mean([r.eta2 for r in results]) <= 10.0


@pytest.mark.slow
def test_full_mode_costs_far_more_than_sparse_regression():
    model, clean, results = _ukf_eta2("ieee39-fast-single", 1, mode="full")
    scenario = get_scenario("ieee39-fast-single")
    sr = identify_all(model, add_noise(clean, scenario.noise, scenario.sigma, seed=0))
    assert results[0].duration_s >= 10.0 * sr.duration_s
