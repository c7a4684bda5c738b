"""
Tests for federated averaging, bubble rounds and the baselines
"""

from dataclasses import replace

import numpy as np
import pytest

from src.clustering.bubbles import BubbleAssignment
from src.core.exceptions import ConfigurationError, FederationError
from src.core.seeding import derive_seed
from src.federation.fedavg import aggregate_global, fedavg
from src.federation.orchestrator import (
    RoundPlan,
    exclude_singletons,
    run_baseline_local,
    run_baseline_pooled,
    run_bubble,
    run_pa_cfl,
)
from src.models.forecaster import init_weights
from src.models.training import prepare_client, train_epochs
from src.models.weights import ModelWeights


def _w(*values):
    return ModelWeights(np.array(values, dtype=np.float64), (("w", (len(values),)),))


@pytest.fixture
def prepared(two_regime_clients, tiny_config):
    clients, _ = two_regime_clients
    return [prepare_client(client, tiny_config) for client in clients]


@pytest.fixture
def short_plan():
    return RoundPlan(rounds=2, local_epochs=1, tolerance=0.0, local_only_epochs=2)


class TestFedAvg:
    """Test weight averaging"""

    def test_mean(self):
        """Test [1,3] and [3,5] average to [2,4]"""
        np.testing.assert_array_equal(fedavg([_w(1, 3), _w(3, 5)]).values, [2.0, 4.0])

    def test_idempotent(self):
        """Test identical vectors come back unchanged"""
        w = _w(0.1, 0.7)
        np.testing.assert_array_equal(fedavg([w, w.copy(), w.copy()]).values, w.values)

    def test_layout_mismatch(self):
        """Test differently shaped models cannot be averaged"""
        with pytest.raises(FederationError) as info:
            fedavg([_w(1, 2), _w(1, 2, 3)])
        assert info.value.error_code == "FED_001"

    def test_empty(self):
        """Test averaging nothing fails"""
        with pytest.raises(FederationError):
            fedavg([])


class TestAggregateGlobal:
    """Test cross-bubble aggregation"""

    def test_one_bubble(self):
        """Test a single bubble keeps its own weights"""
        np.testing.assert_array_equal(aggregate_global({0: _w(1, 2)}, {0: 3}).values, [1.0, 2.0])

    def test_size_weighted(self):
        """Test sizes 2 and 2 with weights 0 and 4 give 2"""
        result = aggregate_global({0: _w(0, 0), 1: _w(4, 4)}, {0: 2, 1: 2})
        np.testing.assert_array_equal(result.values, [2.0, 2.0])

    def test_unequal_sizes(self):
        """Test larger bubbles weigh more"""
        result = aggregate_global({0: _w(0, 0), 1: _w(4, 4)}, {0: 3, 1: 5})
        np.testing.assert_allclose(result.values, [2.5, 2.5])

    def test_singleton_ignored(self):
        """Test a singleton bubble does not contribute"""
        result = aggregate_global({0: _w(1, 1), 1: _w(9, 9)}, {0: 3, 1: 1})
        np.testing.assert_array_equal(result.values, [1.0, 1.0])

    def test_nothing_eligible(self):
        """Test only singletons leave nothing to aggregate"""
        with pytest.raises(FederationError) as info:
            aggregate_global({0: _w(1, 1)}, {0: 1})
        assert info.value.error_code == "FED_002"


class TestRoundPlan:
    """Test the communication schedule"""

    def test_defaults(self):
        """Test the default schedule"""
        plan = RoundPlan()
        assert (plan.rounds, plan.local_epochs, plan.tolerance) == (10, 10, 1e-4)
        assert not plan.cross_bubble_aggregation

    def test_invalid(self):
        """Test zero rounds or negative tolerance are rejected"""
        with pytest.raises(ConfigurationError):
            RoundPlan(rounds=0)
        with pytest.raises(ConfigurationError):
            RoundPlan(tolerance=-1.0)


class TestExcludeSingletons:
    """Test singleton exclusion"""

    def test_lone_client_excluded(self, caplog):
        """Test bubbles {A,B},{C} exclude C"""
        assignment = BubbleAssignment(("A", "B", "C"), {"A": 0, "B": 0, "C": 1}, 2)
        participating, excluded = exclude_singletons(assignment)
        assert participating == {0: ["A", "B"]}
        assert excluded == ["C"]
        assert "Client 'C' is alone in its bubble" in caplog.text

    def test_nothing_excluded(self):
        """Test bubbles of two or more keep everyone"""
        assignment = BubbleAssignment(("A", "B", "C", "D"), {"A": 0, "B": 1, "C": 0, "D": 1}, 2)
        participating, excluded = exclude_singletons(assignment)
        assert excluded == []
        assert participating == {0: ["A", "C"], 1: ["B", "D"]}


class TestRunBubble:
    """Test FedAvg rounds inside a bubble"""

    def test_single_member_matches_local_training(self, prepared, tiny_config, short_plan):
        """Test a one-member round is exactly that client's local update"""
        client = prepared[0]
        plan = replace(short_plan, rounds=1)
        state = run_bubble([client], plan, tiny_config, seed=7)
        expected = train_epochs(init_weights(tiny_config), client.train_tokens, client.train_target, tiny_config,
                                epochs=1, seed=derive_seed(7, "federated-training", client.client_id, 0))
        np.testing.assert_array_equal(state.weights[client.client_id].values, expected.weights.values)

    def test_infinite_tolerance_stops_after_one_round(self, prepared, tiny_config, short_plan):
        """Test tolerance = inf converges after the first round"""
        state = run_bubble(prepared[:2], replace(short_plan, rounds=5, tolerance=float("inf")), tiny_config)
        assert len(state.rounds) == 1
        assert state.converged == {0: True}

    def test_zero_local_epochs(self, prepared, tiny_config, short_plan):
        """Test rounds without local epochs return the initial weights"""
        state = run_bubble(prepared[:2], replace(short_plan, local_epochs=0), tiny_config)
        initial = init_weights(tiny_config)
        for weights in state.weights.values():
            np.testing.assert_array_equal(weights.values, initial.values)
        assert state.rounds[0].weight_delta == 0.0

    def test_members_share_weights(self, prepared, tiny_config, short_plan):
        """Test every member ends with the bubble model and a full round log"""
        state = run_bubble(prepared[:2], short_plan, tiny_config, bubble=3)
        first, second = (state.weights[c.client_id] for c in prepared[:2])
        np.testing.assert_array_equal(first.values, second.values)
        assert [r.round for r in state.rounds] == [0, 1]
        assert all(r.bubble == 3 for r in state.rounds)
        assert set(state.rounds[0].val_loss) == {prepared[0].client_id, prepared[1].client_id}
        assert len(state.loss_curves[prepared[0].client_id]) == 2

    def test_threads_match_sequential(self, prepared, tiny_config, short_plan):
        """Test concurrent client training gives the sequential result"""
        sequential = run_bubble(prepared, short_plan, tiny_config, workers=1)
        threaded = run_bubble(prepared, short_plan, tiny_config, workers=4)
        for client in prepared:
            np.testing.assert_array_equal(sequential.weights[client.client_id].values,
                                          threaded.weights[client.client_id].values)

    def test_client_order_does_not_matter(self, prepared, tiny_config, short_plan):
        """Test shuffled client order gives bit-identical weights, curves and validation losses"""
        state = run_bubble(prepared, short_plan, tiny_config, seed=4)
        order = np.random.default_rng(0).permutation(len(prepared))
        shuffled = run_bubble([prepared[i] for i in order], short_plan, tiny_config, seed=4)
        for client in prepared:
            np.testing.assert_array_equal(state.weights[client.client_id].values,
                                          shuffled.weights[client.client_id].values)
            assert state.loss_curves[client.client_id] == shuffled.loss_curves[client.client_id]
        assert [r.val_loss for r in state.rounds] == [r.val_loss for r in shuffled.rounds]

    def test_all_diverged_keeps_weights(self, prepared, tiny_config, short_plan, caplog):
        """Test a round where every client diverges keeps the broadcast weights"""
        config = replace(tiny_config, learning_rate=1e300)
        state = run_bubble(prepared[:2], replace(short_plan, local_epochs=3), config)
        np.testing.assert_array_equal(state.weights[prepared[0].client_id].values, init_weights(config).values)
        assert sorted(state.rounds[0].dropped) == sorted(c.client_id for c in prepared[:2])
        assert "dropping" in caplog.text

    def test_empty_bubble(self, tiny_config, short_plan):
        """Test a bubble without clients is rejected"""
        with pytest.raises(FederationError) as info:
            run_bubble([], short_plan, tiny_config)
        assert info.value.error_code == "FED_003"


class TestMethods:
    """Test PA-CFL and the baselines"""

    def test_local_baseline(self, prepared, tiny_config):
        """Test local training gives every client its own model"""
        state = run_baseline_local(prepared, tiny_config, epochs=2, seed=1)
        assert set(state.weights) == {c.client_id for c in prepared}
        assert all(len(curve) == 2 for curve in state.loss_curves.values())
        a, b = (state.weights[c.client_id] for c in prepared[:2])
        assert not np.array_equal(a.values, b.values)

    def test_local_baseline_ignores_co_runners(self, prepared, tiny_config):
        """Test a client's local model is the same trained alone, with others, or in another order"""
        together = run_baseline_local(prepared, tiny_config, epochs=2, seed=1)
        alone = run_baseline_local([prepared[2]], tiny_config, epochs=2, seed=1)
        reversed_order = run_baseline_local(prepared[::-1], tiny_config, epochs=2, seed=1, workers=2)
        client = prepared[2].client_id
        np.testing.assert_array_equal(together.weights[client].values, alone.weights[client].values)
        np.testing.assert_array_equal(together.weights[client].values, reversed_order.weights[client].values)

    def test_single_bubble_equals_pooled(self, prepared, tiny_config, short_plan):
        """Test PA-CFL with one bubble reproduces pooled FedAvg exactly"""
        ids = tuple(c.client_id for c in prepared)
        assignment = BubbleAssignment(ids, {client: 0 for client in ids}, 1)
        pa_cfl = run_pa_cfl(prepared, assignment, short_plan, tiny_config, seed=2)
        pooled = run_baseline_pooled(prepared, short_plan, tiny_config, seed=2)
        for client in ids:
            np.testing.assert_array_equal(pa_cfl.weights[client].values, pooled.weights[client].values)

    def test_bubbles_train_separately(self, prepared, tiny_config, short_plan, two_regime_clients):
        """Test each bubble ends with its own model"""
        _, labels = two_regime_clients
        ids = tuple(c.client_id for c in prepared)
        assignment = BubbleAssignment(ids, dict(zip(ids, (int(label) for label in labels))), 2)
        state = run_pa_cfl(prepared, assignment, short_plan, tiny_config)
        assert set(state.bubble_weights) == {0, 1}
        assert state.excluded == []
        np.testing.assert_array_equal(state.weights[ids[0]].values, state.weights[ids[1]].values)
        assert not np.array_equal(state.weights[ids[0]].values, state.weights[ids[2]].values)

    def test_singleton_gets_no_model(self, prepared, tiny_config, short_plan):
        """Test a lone client is excluded and receives no federated weights"""
        ids = tuple(c.client_id for c in prepared)
        assignment = BubbleAssignment(ids, {ids[0]: 0, ids[1]: 0, ids[2]: 0, ids[3]: 1}, 2)
        state = run_pa_cfl(prepared, assignment, short_plan, tiny_config)
        assert state.excluded == [ids[3]]
        assert ids[3] not in state.weights

    def test_cross_bubble_aggregation(self, prepared, tiny_config, short_plan):
        """Test the optional global model reaches every participating client"""
        ids = tuple(c.client_id for c in prepared)
        assignment = BubbleAssignment(ids, {ids[0]: 0, ids[1]: 0, ids[2]: 1, ids[3]: 1}, 2)
        plan = replace(short_plan, cross_bubble_aggregation=True)
        state = run_pa_cfl(prepared, assignment, plan, tiny_config)
        assert state.global_weights is not None
        for client in ids:
            np.testing.assert_array_equal(state.weights[client].values, state.global_weights.values)

    def test_unknown_client(self, prepared, tiny_config, short_plan):
        """Test an assignment naming clients that were never prepared fails"""
        assignment = BubbleAssignment(("ghost", "other"), {"ghost": 0, "other": 0}, 1)
        with pytest.raises(FederationError):
            run_pa_cfl(prepared, assignment, short_plan, tiny_config)
