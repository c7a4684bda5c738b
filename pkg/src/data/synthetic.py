"""
Synthetic heterogeneous clients

Each regime owns a disjoint set of dominant features; a client in regime r
draws standard-normal features and sales y = X beta_r + noise.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from ..core.exceptions import DatasetError
from ..core.seeding import derive_seed, make_rng
from .partition import ClientDataset, split_indices


@dataclass
class SyntheticSpec:
    """Generator settings for regime-structured clients"""
    n_regimes: int = 2
    clients_per_regime: Union[int, Sequence[int]] = 4
    samples_per_client: int = 200
    features_per_regime: int = 4
    n_features: Optional[int] = None
    dominant_features: Optional[Sequence[Sequence[int]]] = None
    coefficients: Optional[Sequence[Sequence[float]]] = None
    noise: float = 0.1
    test_fraction: float = 0.2
    seed: int = 0

    def regime_sizes(self) -> List[int]:
        if isinstance(self.clients_per_regime, int):
            return [self.clients_per_regime] * self.n_regimes
        return [int(count) for count in self.clients_per_regime]

    def regime_features(self) -> List[List[int]]:
        if self.dominant_features is not None:
            return [sorted(int(j) for j in block) for block in self.dominant_features]
        width = self.features_per_regime
        return [list(range(r * width, (r + 1) * width)) for r in range(self.n_regimes)]

    def total_features(self) -> int:
        if self.n_features is not None:
            return int(self.n_features)
        return max(max(block) for block in self.regime_features()) + 1

    def validate(self):
        """Raise DatasetError when these settings cannot produce separable regimes"""
        if self.n_regimes < 1:
            raise DatasetError("n_regimes must be at least 1", "DATA_005")
        sizes = self.regime_sizes()
        if len(sizes) != self.n_regimes or min(sizes) < 1:
            raise DatasetError("Every regime needs at least one client", "DATA_005")
        if self.samples_per_client < 2:
            raise DatasetError("samples_per_client must be at least 2", "DATA_005")
        if self.noise < 0:
            raise DatasetError("noise must be non-negative", "DATA_005")

        blocks = self.regime_features()
        if len(blocks) != self.n_regimes or any(not block for block in blocks):
            raise DatasetError("Every regime needs a nonempty dominant-feature set", "DATA_005")

        seen = set()
        for block in blocks:
            overlap = seen.intersection(block)
            if overlap:
                raise DatasetError(
                    f"Regimes share dominant features {sorted(overlap)}", "DATA_006",
                    {"overlap": sorted(overlap)},
                )
            seen.update(block)

        n_features = self.total_features()
        if min(seen) < 0 or max(seen) >= n_features:
            raise DatasetError("Dominant feature index outside the feature range", "DATA_005")

        if self.coefficients is not None:
            if len(self.coefficients) != self.n_regimes or any(
                len(beta) != len(block) for beta, block in zip(self.coefficients, blocks)
            ):
                raise DatasetError("coefficients must match the dominant-feature sets", "DATA_005")

    def regime_coefficients(self) -> np.ndarray:
        """Full coefficient matrix [n_regimes x n_features], zero off each regime's support"""
        n_features = self.total_features()
        betas = np.zeros((self.n_regimes, n_features))
        for r, block in enumerate(self.regime_features()):
            if self.coefficients is not None:
                betas[r, block] = np.asarray(self.coefficients[r], dtype=np.float64)
            else:
                rng = make_rng(self.seed, "synthetic", "coefficients", r)
                magnitude = rng.uniform(1.0, 2.0, size=len(block))
                sign = np.where(rng.random(len(block)) < 0.5, -1.0, 1.0)
                betas[r, block] = magnitude * sign
        return betas


def generate_synthetic(spec: SyntheticSpec) -> Tuple[List[ClientDataset], np.ndarray]:
    """
    Generate clients with ground-truth regime labels

    Args:
        spec: Generator settings

    Returns:
        Tuple of the clients (regime by regime) and their regime labels
    """
    spec.validate()
    betas = spec.regime_coefficients()
    n_features = spec.total_features()
    names = [f"x{j}" for j in range(n_features)]

    clients: List[ClientDataset] = []
    labels: List[int] = []
    for regime, size in enumerate(spec.regime_sizes()):
        for member in range(size):
            client_id = f"regime{regime}-client{member}"
            rng = make_rng(spec.seed, "synthetic", client_id)

            X = rng.standard_normal((spec.samples_per_client, n_features))
            y = X @ betas[regime]
            if spec.noise > 0:
                y = y + spec.noise * rng.standard_normal(spec.samples_per_client)

            train, test = split_indices(
                spec.samples_per_client, spec.test_fraction, make_rng(spec.seed, "partition", client_id),
            )
            clients.append(ClientDataset(
                client_id=client_id,
                X=X,
                y=y,
                feature_names=names,
                train_idx=train,
                test_idx=test,
                seed=derive_seed(spec.seed, "client", client_id),
                regime=regime,
            ))
            labels.append(regime)

    logger.info(f"Generated {len(clients)} synthetic clients over {spec.n_regimes} regimes")
    return clients, np.asarray(labels, dtype=np.int64)
