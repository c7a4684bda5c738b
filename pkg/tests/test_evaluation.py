"""
Tests for accuracy metrics and comparison reports
"""

import io
import json

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import mean_absolute_error, mean_squared_error, r2_score

from src.clustering.bubbles import BubbleAssignment
from src.core.exceptions import EvaluationError
from src.models.forecaster import init_weights
from src.models.training import prepare_client
from src.monitoring.evaluation import ClientEvaluation, MetricTriple, evaluate_client, metrics, split_signature
from src.monitoring.report import (
    CSV_COLUMNS,
    EXCLUDED_MARK,
    build_report,
    compute_deltas,
    format_r2,
    summarize_repeats,
)

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


def _eval(client, method, rmse, mae=1.0, r2=0.5, split="s"):
    return ClientEvaluation(client, method, MetricTriple(rmse, mae, r2), split)


class TestMetrics:
    """Test RMSE, MAE and R²"""

    def test_perfect_fit(self):
        """Test y_hat = y gives (0, 0, 1)"""
        triple = metrics([1.0, 2.0, 4.0], [1.0, 2.0, 4.0])
        assert (triple.rmse, triple.mae, triple.r2) == (0.0, 0.0, 1.0)

    def test_hand_example(self):
        """Test y = [0, 2], y_hat = [1, 1] gives RMSE 1, MAE 1, R² 0"""
        triple = metrics([0.0, 2.0], [1.0, 1.0])
        assert triple.rmse == pytest.approx(1.0)
        assert triple.mae == pytest.approx(1.0)
        assert triple.r2 == pytest.approx(0.0)

    def test_mean_prediction(self):
        """Test predicting the mean gives R² 0"""
        y = np.array([3.0, 5.0, 10.0])
        assert metrics(y, np.full(3, y.mean())).r2 == pytest.approx(0.0)

    def test_constant_target(self, caplog):
        """Test a constant target leaves R² undefined but keeps the errors"""
        triple = metrics([2.0, 2.0], [1.0, 3.0])
        assert triple.r2 is None
        assert not triple.r2_defined
        assert triple.rmse == pytest.approx(1.0)
        assert "R² is undefined" in caplog.text

    def test_length_mismatch(self):
        """Test unequal or empty inputs are rejected"""
        with pytest.raises(EvaluationError) as info:
            metrics([1.0, 2.0], [1.0])
        assert info.value.error_code == "EVAL_001"
        with pytest.raises(EvaluationError):
            metrics([], [])

    @given(st.lists(st.tuples(finite, finite), min_size=2, max_size=30), finite)
    @settings(max_examples=100, deadline=None)
    def test_translation(self, pairs, shift):
        """Test adding one constant to y and y_hat changes nothing"""
        y, y_hat = (np.array(column) for column in zip(*pairs))
        base, moved = metrics(y, y_hat), metrics(y + shift, y_hat + shift)
        assert moved.rmse == pytest.approx(base.rmse, abs=1e-6)
        assert moved.mae == pytest.approx(base.mae, abs=1e-6)
        if base.r2 is not None and np.ptp(y) > 1e-3:
            assert moved.r2 == pytest.approx(base.r2, abs=1e-6)

    def test_matches_sklearn(self):
        """Test agreement with scikit-learn's metrics"""
        rng = np.random.default_rng(0)
        y, y_hat = rng.standard_normal(50), rng.standard_normal(50)
        triple = metrics(y, y_hat)
        assert triple.rmse == pytest.approx(np.sqrt(mean_squared_error(y, y_hat)))
        assert triple.mae == pytest.approx(mean_absolute_error(y, y_hat))
        assert triple.r2 == pytest.approx(r2_score(y, y_hat))


class TestEvaluateClient:
    """Test client scoring"""

    def test_scores_test_split(self, two_regime_clients, tiny_config):
        """Test a client is scored on its own held-out rows"""
        clients, _ = two_regime_clients
        prepared = prepare_client(clients[0], tiny_config)
        evaluation = evaluate_client(init_weights(tiny_config), prepared, tiny_config, "local")
        assert evaluation.client_id == clients[0].client_id
        assert evaluation.method == "local"
        assert evaluation.split == split_signature(clients[0].test_idx)
        assert evaluation.metrics.rmse >= 0.0

    def test_signature_tracks_split(self):
        """Test different splits hash differently"""
        assert split_signature(np.array([1, 2])) != split_signature(np.array([1, 3]))
        assert split_signature(np.array([1, 2])) == split_signature([1, 2])


class TestReport:
    """Test the comparison report"""

    def test_single_cell(self):
        """Test one client and one method give a one-row table"""
        report = build_report({"local": [_eval("A", "local", 2.0)]})
        frame = report.to_frame()
        assert list(frame.columns) == CSV_COLUMNS
        assert len(frame) == 1
        assert frame.loc[0, "rmse"] == "2.000000"
        assert frame.loc[0, "r2"] == "50.00%"

    def test_excluded_marker(self):
        """Test a client excluded from pa_cfl shows the dash marker"""
        assignment = BubbleAssignment(("A", "B", "C"), {"A": 0, "B": 0, "C": 1}, 2)
        evaluations = {
            "pa_cfl": [_eval("A", "pa_cfl", 1.0), _eval("B", "pa_cfl", 1.0)],
            "local": [_eval(c, "local", 2.0) for c in "ABC"],
        }
        report = build_report(evaluations, assignment, excluded=["C"])
        assert report.methods == ["local", "pa_cfl"]
        assert report.excluded == ["C"]
        assert report.metric("C", "pa_cfl") is None
        frame = report.to_frame()
        row = frame[(frame.client == "C") & (frame.method == "pa_cfl")].iloc[0]
        assert (row.rmse, row.mae, row.r2) == (EXCLUDED_MARK,) * 3
        assert row.bubble == "1"

    def test_deltas(self):
        """Test local RMSE 10 against PA-CFL RMSE 5 is a 50% reduction"""
        evaluations = {
            "local": [_eval("A", "local", 10.0, mae=4.0, r2=0.2)],
            "pa_cfl": [_eval("A", "pa_cfl", 5.0, mae=1.0, r2=0.7)],
        }
        deltas = build_report(evaluations).deltas["pa_cfl"]
        assert deltas["rmse_reduction_pct"] == pytest.approx(50.0)
        assert deltas["mae_reduction_pct"] == pytest.approx(75.0)
        assert deltas["r2_improvement"] == pytest.approx(50.0)

    def test_deltas_need_baseline(self):
        """Test no deltas are computed without the local baseline"""
        assert compute_deltas({"A": {"pooled": MetricTriple(1.0, 1.0, 0.1)}}, ["pooled"]) == {}

    def test_split_mismatch(self):
        """Test methods scored on different splits are refused"""
        evaluations = {
            "local": [_eval("A", "local", 1.0, split="x")],
            "pooled": [_eval("A", "pooled", 1.0, split="y")],
        }
        with pytest.raises(EvaluationError) as info:
            build_report(evaluations)
        assert info.value.error_code == "EVAL_002"

    def test_undefined_r2(self):
        """Test an undefined R² prints as nan"""
        assert format_r2(None) == "nan"
        assert format_r2(0.1234) == "12.34%"

    def test_exports(self):
        """Test the CSV and JSON exports carry every cell"""
        report = build_report({"local": [_eval("A", "local", 1.5)], "pooled": [_eval("A", "pooled", 1.0)]},
                              seed=4, config={"epsilon": 10.0})
        frame = pd.read_csv(io.StringIO(report.to_csv()), dtype=str, keep_default_na=False)
        assert list(frame.method) == ["local", "pooled"]
        payload = json.loads(report.to_json())
        assert payload["seed"] == 4
        assert payload["config"] == {"epsilon": 10.0}
        assert payload["clients"][0]["metrics"]["pooled"]["rmse"] == 1.0


class TestSummarizeRepeats:
    """Test averaging over seeds"""

    def test_means_and_exclusions(self):
        """Test metrics are averaged over runs where the client took part"""
        assignment = BubbleAssignment(("A", "B"), {"A": 0, "B": 0}, 1)
        first = build_report({"local": [_eval("A", "local", 1.0), _eval("B", "local", 2.0)],
                              "pa_cfl": [_eval("A", "pa_cfl", 1.0), _eval("B", "pa_cfl", 1.0)]},
                             assignment, seed=0)
        second = build_report({"local": [_eval("A", "local", 3.0), _eval("B", "local", 2.0)],
                               "pa_cfl": [_eval("A", "pa_cfl", 2.0)]},
                              assignment, excluded=["B"], seed=1)
        summary = summarize_repeats([first, second]).set_index(["client", "method"])
        assert summary.loc[("A", "local"), "rmse"] == "2.000000"
        assert summary.loc[("B", "pa_cfl"), "runs"] == 1
        assert summary.loc[("B", "pa_cfl"), "excluded_runs"] == 1

    def test_empty(self):
        """Test summarizing nothing fails"""
        with pytest.raises(EvaluationError):
            summarize_repeats([])
