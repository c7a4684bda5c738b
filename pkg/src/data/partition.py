"""
Client datasets and region partitioning
"""

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from ..core.exceptions import DatasetError
from ..core.seeding import derive_seed, make_rng
from .ingest import RawTable

MIN_CLIENT_SAMPLES = 10


@dataclass
class ClientDataset:
    """One client's feature matrix, sales target and train/test split"""
    client_id: str
    X: np.ndarray
    y: np.ndarray
    feature_names: Tuple[str, ...]
    train_idx: np.ndarray
    test_idx: np.ndarray
    seed: int
    regime: Optional[int] = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        self.feature_names = tuple(self.feature_names)
        self.train_idx = np.asarray(self.train_idx, dtype=np.int64)
        self.test_idx = np.asarray(self.test_idx, dtype=np.int64)

        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise DatasetError(f"Client {self.client_id}: X and y disagree on sample count", "DATA_005")
        if self.X.shape[1] != len(self.feature_names):
            raise DatasetError(f"Client {self.client_id}: feature names misaligned", "DATA_005")
        if not (np.isfinite(self.X).all() and np.isfinite(self.y).all()):
            raise DatasetError(f"Client {self.client_id}: non-finite values in X or y", "DATA_005")

        covered = np.concatenate([self.train_idx, self.test_idx])
        if len(np.intersect1d(self.train_idx, self.test_idx)) or \
                not np.array_equal(np.sort(covered), np.arange(self.n_samples)):
            raise DatasetError(f"Client {self.client_id}: train/test split is not a partition", "DATA_005")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def X_train(self) -> np.ndarray:
        return self.X[self.train_idx]

    @property
    def y_train(self) -> np.ndarray:
        return self.y[self.train_idx]

    @property
    def X_test(self) -> np.ndarray:
        return self.X[self.test_idx]

    @property
    def y_test(self) -> np.ndarray:
        return self.y[self.test_idx]

    def with_features(self, columns: Sequence[int]) -> "ClientDataset":
        """Copy restricted to the given column indices"""
        columns = list(columns)
        return replace(
            self,
            X=self.X[:, columns],
            feature_names=tuple(self.feature_names[j] for j in columns),
        )


def split_indices(n_samples: int, test_fraction: float, rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Split sample indices into train and test

    Without a generator the split is chronological (last rows are the test set);
    with one it is a seeded uniform split.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DatasetError(f"test_fraction must be in (0, 1), got {test_fraction}", "DATA_005")

    n_test = min(max(int(round(n_samples * test_fraction)), 1), n_samples - 1)
    if rng is None:
        order = np.arange(n_samples)
    else:
        order = rng.permutation(n_samples)

    test = np.sort(order[n_samples - n_test:]) if rng is None else np.sort(order[:n_test])
    train = np.setdiff1d(np.arange(n_samples), test)
    return train, test


def partition_by_region(
    table: RawTable,
    encoded: np.ndarray,
    feature_names: Sequence[str],
    test_fraction: float = 0.2,
    seed: int = 0,
    min_samples: int = MIN_CLIENT_SAMPLES,
) -> List[ClientDataset]:
    """
    Build one client per region

    When the table has a timestamp column, each client's rows are ordered by the
    first timestamp column and the last ``test_fraction`` becomes the test set;
    otherwise a seeded uniform split is used.

    Args:
        table: Ingested table
        encoded: Encoded feature matrix aligned with ``table.frame``
        feature_names: Names of the encoded columns
        test_fraction: Share of each client's rows held out for testing
        seed: Global seed
        min_samples: Regions with fewer rows are excluded

    Returns:
        List[ClientDataset]: Clients in sorted region order
    """
    if not 0.0 < test_fraction < 1.0:
        raise DatasetError(f"test_fraction must be in (0, 1), got {test_fraction}", "DATA_005")

    encoded = np.asarray(encoded, dtype=np.float64)
    if encoded.shape[0] != table.n_rows:
        raise DatasetError("Encoded matrix rows do not match the table", "DATA_005")

    regions = table.frame[table.region_column].to_numpy()
    target = table.frame[table.target_column].to_numpy(dtype=np.float64)
    time_column = table.timestamp_columns[0] if table.timestamp_columns else None

    clients: List[ClientDataset] = []
    for region in table.regions():
        rows = np.flatnonzero(regions == region)
        client_id = str(region)

        if len(rows) < min_samples:
            logger.warning(f"Excluding region '{client_id}': {len(rows)} samples < {min_samples}")
            continue

        if time_column is not None:
            stamps = table.frame[time_column].to_numpy()[rows]
            order = np.argsort(stamps, kind="mergesort")
            rows = rows[order]
            train, test = split_indices(len(rows), test_fraction)
        else:
            train, test = split_indices(len(rows), test_fraction, make_rng(seed, "partition", client_id))

        clients.append(ClientDataset(
            client_id=client_id,
            X=encoded[rows],
            y=target[rows],
            feature_names=feature_names,
            train_idx=train,
            test_idx=test,
            seed=derive_seed(seed, "client", client_id),
        ))
        logger.debug(f"Client '{client_id}': {len(train)} train / {len(test)} test rows")

    logger.info(f"Partitioned table into {len(clients)} clients")
    return clients
