"""
Forecaster training: standardization, lookback windows, gradients and Adam epochs
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import torch
from loguru import logger
from torch.nn.utils import parameters_to_vector

from ..core.exceptions import DivergenceError, ModelError
from ..core.seeding import make_torch_generator
from ..data.partition import ClientDataset
from .forecaster import DTYPE, ForecasterConfig, as_tokens, build_module, extract_weights, load_into
from .weights import ModelWeights


@dataclass
class Standardizer:
    """Z-score statistics fitted on a client's training split"""
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray) -> "Standardizer":
        x_std = X.std(axis=0)
        y_std = float(y.std())
        return cls(
            x_mean=X.mean(axis=0),
            x_std=np.where(x_std > 0, x_std, 1.0),
            y_mean=float(y.mean()),
            y_std=y_std if y_std > 0 else 1.0,
        )

    def transform_X(self, X: np.ndarray) -> np.ndarray:
        return (X - self.x_mean) / self.x_std

    def transform_y(self, y: np.ndarray) -> np.ndarray:
        return (y - self.y_mean) / self.y_std

    def inverse_y(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y) * self.y_std + self.y_mean


def make_windows(
    X: np.ndarray,
    y: np.ndarray,
    sequence_length: int,
    hidden: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Lookback token sequences, one per row

    Token t of row i describes row i - T + 1 + t: its features followed by
    its sales. The last token is row i itself with the sales slot zeroed.
    Positions before the first row are zero tokens. Rows listed in ``hidden``
    contribute their features but a zero sales slot wherever they appear.

    Returns:
        np.ndarray: (n, T, d + 1); with T = 1 the plain features (n, d)
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if sequence_length == 1:
        return X

    n, d = X.shape
    rows = np.concatenate([X, y[:, None]], axis=1)
    if hidden is not None:
        rows[np.asarray(hidden), d] = 0.0
    padded = np.vstack([np.zeros((sequence_length - 1, d + 1)), rows])
    windows = np.stack([padded[i:i + sequence_length] for i in range(n)])
    windows[:, -1, d] = 0.0
    return windows


@dataclass
class PreparedClient:
    """Standardized train/test tensors for one client"""
    client_id: str
    train_tokens: torch.Tensor
    train_target: torch.Tensor
    test_tokens: torch.Tensor
    test_target: torch.Tensor
    standardizer: Standardizer
    y_test: np.ndarray
    test_idx: np.ndarray

    @property
    def n_train(self) -> int:
        return self.train_target.shape[0]


def prepare_client(client: ClientDataset, config: ForecasterConfig) -> PreparedClient:
    """Standardize a client with train-split statistics and build its model inputs"""
    scaler = Standardizer.fit(client.X_train, client.y_train)
    features = scaler.transform_X(client.X)
    target = scaler.transform_y(client.y)
    # training windows never see held-out sales
    train_tokens = make_windows(features, target, config.sequence_length, hidden=client.test_idx)
    tokens = make_windows(features, target, config.sequence_length)

    return PreparedClient(
        client_id=client.client_id,
        train_tokens=as_tokens(train_tokens[client.train_idx], config),
        train_target=torch.as_tensor(target[client.train_idx], dtype=DTYPE),
        test_tokens=as_tokens(tokens[client.test_idx], config),
        test_target=torch.as_tensor(target[client.test_idx], dtype=DTYPE),
        standardizer=scaler,
        y_test=client.y_test.copy(),
        test_idx=client.test_idx.copy(),
    )


def gradient(weights: ModelWeights, tokens, targets, config: ForecasterConfig) -> np.ndarray:
    """
    Gradient of the batch mean squared error with respect to the flat weights

    Dropout is disabled.
    """
    module = load_into(build_module(config), weights)
    tokens = as_tokens(tokens, config)
    targets = torch.as_tensor(targets, dtype=DTYPE)

    loss = torch.mean((module(tokens) - targets) ** 2)
    grads = torch.autograd.grad(loss, list(module.parameters()))
    return parameters_to_vector(grads).detach().numpy().copy()


def mse_loss(weights: ModelWeights, tokens, targets, config: ForecasterConfig) -> float:
    """Eval-mode mean squared error"""
    module = load_into(build_module(config), weights)
    with torch.no_grad():
        out = module(as_tokens(tokens, config))
    return float(torch.mean((out - torch.as_tensor(targets, dtype=DTYPE)) ** 2))


@dataclass
class TrainingResult:
    """Updated weights and per-epoch mean training loss"""
    weights: ModelWeights
    losses: List[float] = field(default_factory=list)
    initial_loss: Optional[float] = None


def train_epochs(
    weights: ModelWeights,
    tokens,
    targets,
    config: ForecasterConfig,
    epochs: Optional[int] = None,
    seed: int = 0,
    client_id: str = "",
) -> TrainingResult:
    """
    Mini-batch Adam on mean squared error

    Each call starts a fresh optimizer. Shuffling and dropout draw from one
    generator seeded by ``seed``.

    Args:
        weights: Starting weights
        tokens: Training inputs
        targets: Standardized training targets
        config: Forecaster configuration (learning rate, batch size, dropout)
        epochs: Epoch count, ``config.epochs`` when omitted
        seed: Seed for shuffling and dropout
        client_id: Owner, for logs

    Returns:
        TrainingResult: Final weights and the loss curve
    """
    epochs = config.epochs if epochs is None else epochs
    tokens = as_tokens(tokens, config)
    targets = torch.as_tensor(targets, dtype=DTYPE)
    n = targets.shape[0]
    if n == 0:
        raise ModelError(f"Client '{client_id}' has no training rows", "MODEL_002")

    initial_loss = mse_loss(weights, tokens, targets, config)
    if epochs == 0:
        return TrainingResult(weights.copy(), [], initial_loss)

    module = load_into(build_module(config), weights)
    optimizer = torch.optim.Adam(module.parameters(), lr=config.learning_rate)
    generator = make_torch_generator(seed)
    last_good = weights.copy()
    losses: List[float] = []

    for epoch in range(epochs):
        order = torch.randperm(n, generator=generator)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            optimizer.zero_grad()
            try:
                out = module(tokens[batch], generator)
            except ModelError as e:
                logger.error(f"Client '{client_id}': {e.message} at epoch {epoch}")
                raise DivergenceError(f"Training diverged at epoch {epoch}", last_weights=last_good,
                                      details={"client_id": client_id, "epoch": epoch})
            loss = torch.mean((out - targets[batch]) ** 2)
            if not torch.isfinite(loss):
                logger.error(f"Client '{client_id}': non-finite loss at epoch {epoch}")
                raise DivergenceError(f"Training diverged at epoch {epoch}", last_weights=last_good,
                                      details={"client_id": client_id, "epoch": epoch})
            loss.backward()
            optimizer.step()
            total += float(loss) * batch.shape[0]

        current = parameters_to_vector(module.parameters()).detach().numpy()
        if not np.isfinite(current).all():
            raise DivergenceError(f"Weights became non-finite at epoch {epoch}", last_weights=last_good,
                                  details={"client_id": client_id, "epoch": epoch})
        last_good = extract_weights(module)
        losses.append(total / n)

    logger.debug(
        f"Client '{client_id}': {epochs} epochs, loss {initial_loss:.5f} -> {losses[-1]:.5f}"
    )
    return TrainingResult(last_good, losses, initial_loss)


def predict(weights: ModelWeights, tokens, config: ForecasterConfig) -> np.ndarray:
    """Eval-mode predictions on the standardized scale"""
    module = load_into(build_module(config), weights)
    with torch.no_grad():
        return module(as_tokens(tokens, config)).numpy().copy()


def predict_sales(weights: ModelWeights, prepared: PreparedClient, config: ForecasterConfig) -> np.ndarray:
    """Test-split predictions on the original sales scale"""
    return prepared.standardizer.inverse_y(predict(weights, prepared.test_tokens, config))
