"""
Federated training orchestration
Per-bubble FedAvg rounds, singleton exclusion and the local/pooled baselines
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

from loguru import logger

from ..clustering.bubbles import BubbleAssignment
from ..core.exceptions import ConfigurationError, DivergenceError, FederationError
from ..core.seeding import derive_seed
from ..models.forecaster import ForecasterConfig, init_weights
from ..models.training import PreparedClient, TrainingResult, mse_loss, train_epochs
from ..models.weights import ModelWeights
from .fedavg import aggregate_global, fedavg

T = TypeVar("T")
R = TypeVar("R")


@dataclass
class RoundPlan:
    """Communication schedule"""
    rounds: int = 10
    local_epochs: int = 10
    tolerance: float = 1e-4
    cross_bubble_aggregation: bool = False
    local_only_epochs: int = 50

    def __post_init__(self):
        if self.rounds < 1:
            raise ConfigurationError("At least one round is required", "CONFIG_003")
        if self.local_epochs < 0 or self.local_only_epochs < 0:
            raise ConfigurationError("Epoch counts must be non-negative", "CONFIG_003")
        if not self.tolerance >= 0:
            raise ConfigurationError("Convergence tolerance must be non-negative", "CONFIG_003")


@dataclass
class RoundRecord:
    """One (bubble, round) entry of the round log"""
    bubble: int
    round: int
    weight_delta: float
    val_loss: Dict[str, float]
    dropped: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bubble": self.bubble,
            "round": self.round,
            "weight_delta": self.weight_delta,
            "val_loss": dict(self.val_loss),
            "dropped": list(self.dropped),
        }


@dataclass
class FederationState:
    """Final per-client and per-bubble weights of one training method"""
    method: str
    weights: Dict[str, ModelWeights] = field(default_factory=dict)
    bubble_weights: Dict[int, ModelWeights] = field(default_factory=dict)
    rounds: List[RoundRecord] = field(default_factory=list)
    loss_curves: Dict[str, List[float]] = field(default_factory=dict)
    converged: Dict[int, bool] = field(default_factory=dict)
    excluded: List[str] = field(default_factory=list)
    global_weights: Optional[ModelWeights] = None

    def merge(self, other: "FederationState") -> None:
        self.weights.update(other.weights)
        self.bubble_weights.update(other.bubble_weights)
        self.rounds.extend(other.rounds)
        self.loss_curves.update(other.loss_curves)
        self.converged.update(other.converged)


def _map(fn: Callable[[T], R], items: Sequence[T], workers: int) -> List[R]:
    """Order-preserving map, threaded when workers > 1"""
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def exclude_singletons(assignment: BubbleAssignment) -> Tuple[Dict[int, List[str]], List[str]]:
    """
    Split bubbles into federating ones and excluded (singleton) clients

    Returns:
        Tuple of bubble id -> members for bubbles of two or more, and the excluded clients
    """
    participating: Dict[int, List[str]] = {}
    excluded: List[str] = []
    for bubble, members in assignment.bubbles().items():
        if len(members) == 1:
            excluded.extend(members)
        else:
            participating[bubble] = members

    for client in excluded:
        logger.warning(f"Client '{client}' is alone in its bubble; flagged and excluded from federation")
    return participating, excluded


def run_bubble(
    clients: Sequence[PreparedClient],
    plan: RoundPlan,
    config: ForecasterConfig,
    seed: int = 0,
    bubble: int = 0,
    workers: int = 1,
    initial: Optional[ModelWeights] = None,
    method: str = "bubble",
) -> FederationState:
    """
    FedAvg rounds inside one bubble

    Every round each client trains ``plan.local_epochs`` from the broadcast
    weights; the server averages the results and broadcasts again. Training
    stops early once the L2 change of the shared weights drops below
    ``plan.tolerance``. A client whose training diverges sits the round out.

    Args:
        clients: Bubble members
        plan: Communication schedule
        config: Forecaster configuration
        seed: Global seed; client streams depend on (seed, client, round) only
        bubble: Bubble id for the log
        workers: Threads training clients concurrently
        initial: Starting weights, ``init_weights(config)`` when omitted
        method: Label of the resulting state

    Returns:
        FederationState: Shared final weights for every member and the round log
    """
    if not clients:
        raise FederationError(f"Bubble {bubble} has no clients", "FED_003")

    shared = initial.copy() if initial is not None else init_weights(config)
    state = FederationState(method=method)
    curves: Dict[str, List[float]] = {c.client_id: [] for c in clients}
    converged = False

    for round_index in range(plan.rounds):
        def local_update(client: PreparedClient) -> Optional[TrainingResult]:
            try:
                return train_epochs(
                    shared, client.train_tokens, client.train_target, config,
                    epochs=plan.local_epochs,
                    seed=derive_seed(seed, "federated-training", client.client_id, round_index),
                    client_id=client.client_id,
                )
            except DivergenceError as e:
                logger.warning(f"Bubble {bubble} round {round_index}: dropping '{client.client_id}' ({e.message})")
                return None

        results = _map(local_update, list(clients), workers)
        survivors = [r for r in results if r is not None]
        dropped = [c.client_id for c, r in zip(clients, results) if r is None]
        for client, result in zip(clients, results):
            if result is not None:
                curves[client.client_id].extend(result.losses)

        if not survivors:
            logger.warning(f"Bubble {bubble} round {round_index}: every client diverged, keeping weights")
            state.rounds.append(RoundRecord(bubble, round_index, 0.0, {}, dropped))
            break

        # summed in client-id order, independent of scheduling order
        ordered = sorted(
            ((c.client_id, r.weights) for c, r in zip(clients, results) if r is not None),
            key=lambda pair: pair[0],
        )
        updated = fedavg([weights for _, weights in ordered])
        delta = updated.distance(shared)
        shared = updated

        val_loss = {
            c.client_id: mse_loss(shared, c.test_tokens, c.test_target, config) for c in clients
        }
        state.rounds.append(RoundRecord(bubble, round_index, delta, val_loss, dropped))
        logger.debug(f"Bubble {bubble} round {round_index}: |dW|={delta:.6f}")

        if delta < plan.tolerance:
            converged = True
            break

    logger.info(
        f"Bubble {bubble}: {len(state.rounds)} round(s), "
        f"{'converged' if converged else 'round limit reached'}"
    )
    state.weights = {c.client_id: shared.copy() for c in clients}
    state.bubble_weights = {bubble: shared}
    state.loss_curves = curves
    state.converged = {bubble: converged}
    return state


def run_baseline_pooled(
    clients: Sequence[PreparedClient],
    plan: RoundPlan,
    config: ForecasterConfig,
    seed: int = 0,
    workers: int = 1,
) -> FederationState:
    """FedAvg over all clients as a single bubble"""
    logger.info(f"Pooled FedAvg over {len(clients)} clients")
    return run_bubble(clients, plan, config, seed=seed, bubble=0, workers=workers, method="pooled")


def run_baseline_local(
    clients: Sequence[PreparedClient],
    config: ForecasterConfig,
    epochs: Optional[int] = None,
    seed: int = 0,
    workers: int = 1,
) -> FederationState:
    """
    Independent per-client training with no communication

    Args:
        clients: All clients
        config: Forecaster configuration
        epochs: Local epoch budget, ``config.epochs`` when omitted
        seed: Global seed
        workers: Threads training clients concurrently

    Returns:
        FederationState: Per-client weights and loss curves
    """
    if not clients:
        raise FederationError("No clients to train", "FED_003")

    start = init_weights(config)
    logger.info(f"Local training for {len(clients)} clients")

    def train_alone(client: PreparedClient) -> TrainingResult:
        return train_epochs(
            start, client.train_tokens, client.train_target, config,
            epochs=epochs, seed=derive_seed(seed, "local-training", client.client_id),
            client_id=client.client_id,
        )

    results = _map(train_alone, list(clients), workers)
    state = FederationState(method="local")
    for client, result in zip(clients, results):
        state.weights[client.client_id] = result.weights
        state.loss_curves[client.client_id] = result.losses
    return state


def run_pa_cfl(
    clients: Sequence[PreparedClient],
    assignment: BubbleAssignment,
    plan: RoundPlan,
    config: ForecasterConfig,
    seed: int = 0,
    workers: int = 1,
) -> FederationState:
    """
    Train every multi-client bubble in isolation

    Singleton bubbles are excluded and get no federated weights. With
    ``plan.cross_bubble_aggregation`` the bubble models are finally combined
    by size-weighted averaging and sent back to every participating client.

    Returns:
        FederationState: Weights for participating clients plus the excluded list
    """
    by_id = {c.client_id: c for c in clients}
    missing = set(assignment.client_ids) - set(by_id)
    if missing:
        raise FederationError(f"Assignment names unknown clients {sorted(missing)}", "FED_003")

    participating, excluded = exclude_singletons(assignment)
    state = FederationState(method="pa_cfl", excluded=list(excluded))
    initial = init_weights(config)

    for bubble in sorted(participating):
        members = [by_id[client] for client in participating[bubble]]
        logger.info(f"Bubble {bubble}: federating {[c.client_id for c in members]}")
        state.merge(run_bubble(members, plan, config, seed=seed, bubble=bubble, workers=workers,
                               initial=initial, method="pa_cfl"))

    if not participating:
        logger.warning("No bubble has more than one client; nothing to federate")
    elif plan.cross_bubble_aggregation:
        sizes = {bubble: len(members) for bubble, members in participating.items()}
        state.global_weights = aggregate_global(state.bubble_weights, sizes)
        for client in state.weights:
            state.weights[client] = state.global_weights.copy()
        logger.info("Cross-bubble aggregate sent to all participating clients")

    return state
