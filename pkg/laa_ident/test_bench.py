"""
Tests for the Monte Carlo benchmark harness
"""

import json
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from laa_ident.bench import (
    BenchSettings,
    prepare_scenario,
    run_estimator,
    run_scenario,
    validate_estimators,
    write_bench_outputs,
)
from laa_ident.exceptions import ConfigError
from laa_ident.scenarios import Scenario, get_scenario
from laa_ident.ukf import UkfSettings


@pytest.fixture
def toy_scenario(toy_case_path):
    return Scenario("toy-bench", str(toy_case_path), "A", ((2, 1, 0.5),), ((2, 0.05),),
                    window=(0.0, 5.0), t_end=10.0, sigma=0.001, reps=3, seed_base=10)


def test_validate_estimators():
    assert validate_estimators(["sr", "ukf", "sr"]) == ("sr", "ukf")
    with pytest.raises(ConfigError):
        validate_estimators(["sr", "kalman"])
    with pytest.raises(ConfigError):
        validate_estimators([])


def test_prepare_scenario(toy_scenario):
    data = prepare_scenario(toy_scenario, ["sr"])
    assert data.clean.n_slots == 251
    assert data.attack.gain(2, 1) == 0.5
    assert data.checkpoint is None
    assert data.trajectory.time[-1] == pytest.approx(5.0)


def test_pretrained_tag_needs_checkpoint(toy_model, toy_clean):
    with pytest.raises(ConfigError):
        run_estimator("pinn-pretrained", toy_model, toy_clean, BenchSettings())
    with pytest.raises(ConfigError):
        run_estimator("lasso", toy_model, toy_clean, BenchSettings())


def test_records_per_repetition(toy_scenario):
    report = run_scenario(toy_scenario, ["sr", "ukf"])
    assert len(report.records) == 6
    assert [(r.rep, r.estimator) for r in report.records[:2]] == [(0, "sr"), (0, "ukf")]
    assert [r.seed for r in report.records[::2]] == [10, 11, 12]
    assert all(r.ok for r in report.records)
    table = report.eta2_table()
    assert list(table.estimator) == ["sr", "ukf"]
    assert list(table.n_runs) == [3, 3]
    assert report.first_trace("ukf") is not None
    assert report.first_trace("sr") is None


def test_repetitions_differ_by_noise_only(toy_scenario):
    report = run_scenario(toy_scenario, ["sr"])
    gains = [r.result.gains for r in report.records]
    assert not np.array_equal(gains[0], gains[1])


def test_summary_is_deterministic(toy_scenario):
    first = run_scenario(toy_scenario, ["sr", "ukf"]).summary()
    second = run_scenario(toy_scenario, ["sr", "ukf"]).summary()
    assert json.dumps(first, sort_keys=True) == json.dumps(second, sort_keys=True)
    assert "duration" not in json.dumps(first)


def test_failed_runs_are_recorded(toy_scenario):
    settings = BenchSettings(ukf=UkfSettings(initial_params=np.zeros(5)))
    report = run_scenario(toy_scenario, ["sr", "ukf"], settings)
    failed = [r for r in report.records if not r.ok]
    assert [r.estimator for r in failed] == ["ukf"] * 3
    assert failed[0].error.startswith("ConfigError")
    table = report.eta2_table().set_index("estimator")
    assert table.loc["ukf", "n_failed"] == 3
    assert table.loc["sr", "n_runs"] == 3
    assert len(report.summary()["estimators"]["ukf"]["failures"]) == 3


def test_parallel_matches_serial(toy_scenario):
    serial = run_scenario(toy_scenario, ["sr"]).summary()
    parallel = run_scenario(toy_scenario, ["sr"], BenchSettings(n_jobs=2)).summary()
    assert json.dumps(serial, sort_keys=True) == json.dumps(parallel, sort_keys=True)


def test_write_bench_outputs(tmp_path, toy_scenario):
    report = run_scenario(toy_scenario, ["sr", "ukf"])
    paths = write_bench_outputs([report], tmp_path)
    for name in ("table1", "table2", "table3", "fig4_boxplot", "fig5_losstrace", "fig6_ukftrace",
                 "fig7_boxplot", "timings", "summary"):
        assert paths[name].exists()
    table1 = pd.read_csv(paths["table1"])
    assert list(table1.estimator) == ["sr", "ukf"]
    fig4 = pd.read_csv(paths["fig4_boxplot"])
    assert set(fig4.victim_bus) >= {2}
    fig6 = pd.read_csv(paths["fig6_ukftrace"])
    assert set(fig6.param_id) == {"K_2_1", "eps_2"}
    summary = json.loads(paths["summary"].read_text())
    assert summary["scenarios"]["toy-bench"]["scenario"]["reps"] == 3
    assert summary["settings"]["lambda"] == 3.0
    assert summary["settings"]["lambda_noise_scaled"]
    table3 = pd.read_csv(paths["table3"])
    assert set(table3.work_unit) == {"sweeps", "rhs_evaluations"}
    assert "mean_duration_s" in pd.read_csv(paths["timings"]).columns


def test_cost_table_is_deterministic(tmp_path, toy_scenario):
    first = write_bench_outputs([run_scenario(toy_scenario, ["sr", "ukf"])], tmp_path / "a")
    second = write_bench_outputs([run_scenario(toy_scenario, ["sr", "ukf"])], tmp_path / "b")
    assert first["table3"].read_bytes() == second["table3"].read_bytes()


@pytest.mark.slow
def test_estimator_ranking_on_ieee39():
    fast = replace(get_scenario("ieee39-fast-single"), reps=2)
    table = run_scenario(fast, ["sr", "pinn", "ukf-full"]).eta2_table().set_index("estimator")
    assert table.loc["sr", "mean_eta2"] < table.loc["ukf-full", "mean_eta2"]
    assert table.loc["pinn", "mean_eta2"] < table.loc["ukf-full", "mean_eta2"]

    slow = replace(get_scenario("ieee39-slow-single"), reps=1)
    table = run_scenario(slow, ["pinn", "ukf"]).eta2_table().set_index("estimator")
    assert table.loc["ukf", "mean_eta2"] <= 10.0
    assert table.loc["pinn", "low_confidence_runs"] == 1
