"""
Tests for estimation error metrics and result export
"""

import json

import numpy as np
import pandas as pd
import pytest

from laa_ident.dynamics import AttackConfig
from laa_ident.exceptions import MetricError
from laa_ident.metrics import EstimateResult, convert_numpy_types, eta1, eta2, save_estimate


def test_eta1():
    assert eta1(18.0, 17.1) == pytest.approx(0.05)
    assert eta1(25.0, 26.25) == pytest.approx(-0.05)
    with pytest.raises(MetricError):
        eta1(0.0, 1.0)


def test_eta2():
    assert eta2(np.array([[18.0, 0.0]]), np.zeros((1, 2))) == pytest.approx(324.0)
    with pytest.raises(MetricError):
        eta2(np.zeros((2, 2)), np.zeros((2, 3)))


def test_convert_numpy_types():
    doc = convert_numpy_types({"a": np.float64(1.5), "b": np.array([1, 2]), 3: np.nan, "c": (np.int64(4),)})
    assert doc == {"a": 1.5, "b": [1, 2], "3": None, "c": [4]}
    json.dumps(doc)


def _scored(toy_model):
    truth = AttackConfig.from_entries(toy_model, {(2, 1): 0.5}, {2: 0.05})
    return EstimateResult(estimator="sr", load_buses=(2, 3), sensing_buses=(1,),
                          gains=np.array([[0.45], [0.1]]), steps=np.array([0.05, 0.0]),
                          truth=truth, duration_s=1.25, flags={"lambda": 0.1})


def test_scoring(toy_model):
    result = _scored(toy_model)
    assert result.eta1 == {(2, 1): pytest.approx(0.1)}
    # independent sum over every gain entry
    expected = (0.5 - 0.45) ** 2 + (0.0 - 0.1) ** 2
    assert result.eta2 == pytest.approx(expected)
    assert result.step_sq_error == pytest.approx(0.0)
    assert result.succeeded


def test_attacked_entries(toy_model):
    result = _scored(toy_model)
    assert result.attacked_entries(0.2) == [(2, 1, 0.45)]
    assert result.attacked_entries() == []


def test_mismatched_truth(toy_model):
    result = _scored(toy_model)
    other = AttackConfig.from_entries(toy_model, {}, sensing=(1, 3))
    with pytest.raises(MetricError):
        result.score(other)


def test_save_estimate(tmp_path, toy_model):
    result = _scored(toy_model)
    table, summary_path = save_estimate(result, tmp_path, stem="toy_sr")
    frame = pd.read_csv(table)
    assert list(frame.columns) == ["victim_bus", "sensing_bus", "K_true", "K_est", "eta1"]
    assert len(frame) == 2
    assert np.isnan(frame["eta1"][1])

    summary = json.loads(summary_path.read_text())
    assert summary["estimator"] == "sr"
    assert summary["eta1"] == {"2-1": pytest.approx(0.1)}
    assert summary["steps"] == {"2": 0.05}
    # wall-clock time stays out of the reproducible summary
    assert "duration_s" not in json.dumps(summary)

    records, _ = save_estimate(result, tmp_path, stem="toy_sr", fmt="json")
    assert records.suffix == ".json"
    assert len(json.loads(records.read_text())) == 2


def test_unscored_result_has_no_truth_columns(toy_model):
    result = EstimateResult(estimator="sr", load_buses=(2, 3), sensing_buses=(1,),
                            gains=np.zeros((2, 1)), steps=np.zeros(2))
    assert result.eta2 is None
    assert result.to_frame()["K_true"].isna().all()
