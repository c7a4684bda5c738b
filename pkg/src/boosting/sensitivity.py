"""
Leave-one-out local sensitivity of normalized feature importance
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from loguru import logger

from ..core.exceptions import BoostingError
from .gbt import GbtConfig, feature_importance, train_gbt
from .importance import normalize


@dataclass
class Sensitivity:
    """Largest per-feature importance change caused by removing one record"""
    client_id: str
    delta: float
    n_evaluated: int = 0
    exact: bool = True

    def __post_init__(self):
        if not self.delta >= 0.0:
            raise BoostingError(f"Sensitivity must be non-negative, got {self.delta}", "GBT_002")


def importance_distribution(X: np.ndarray, y: np.ndarray, config: GbtConfig) -> np.ndarray:
    """Normalized gain importance of a freshly trained ensemble"""
    return normalize(feature_importance(train_gbt(X, y, config))).values


def local_sensitivity(
    X: np.ndarray,
    y: np.ndarray,
    config: GbtConfig,
    subsample: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    client_id: str = "",
    workers: int = 1,
) -> Sensitivity:
    """
    Estimate the local sensitivity of a client's importance distribution

    Retrains the ensemble once per left-out row and takes the maximum absolute
    change of any normalized importance entry. With ``subsample`` set and more
    rows than that, only a seeded random subset of rows is left out, which can
    only under-estimate the exact value.

    Args:
        X: Client feature matrix
        y: Client target
        config: Ensemble hyperparameters
        subsample: Number of rows to leave out (None for the exact estimate)
        rng: Generator choosing the subsample
        client_id: Owner, for logs and the result
        workers: Threads running retrainings concurrently

    Returns:
        Sensitivity: The estimate
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n_samples = X.shape[0]

    if n_samples < 2:
        raise BoostingError("Sensitivity needs at least 2 samples", "GBT_002")
    if n_samples - 1 < 2 * config.min_samples_leaf:
        raise BoostingError(
            f"{n_samples} samples leave too few rows for retraining after removal", "GBT_002",
            {"client_id": client_id},
        )

    base = importance_distribution(X, y, config)

    exact = subsample is None or n_samples <= subsample
    if exact:
        rows = np.arange(n_samples)
    else:
        if rng is None:
            raise BoostingError("A generator is required for subsampled sensitivity", "GBT_002")
        rows = np.sort(rng.choice(n_samples, size=subsample, replace=False))

    def change_without(row: int) -> float:
        keep = np.arange(n_samples) != row
        return float(np.max(np.abs(importance_distribution(X[keep], y[keep], config) - base)))

    logger.debug(f"Client '{client_id}': {len(rows)} leave-one-out retrainings")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            changes = list(pool.map(change_without, rows))
    else:
        changes = [change_without(row) for row in rows]

    delta = max(changes) if changes else 0.0
    logger.info(f"Client '{client_id}': sensitivity {delta:.5f} ({'exact' if exact else 'subsampled'})")
    return Sensitivity(client_id=client_id, delta=delta, n_evaluated=len(rows), exact=exact)
