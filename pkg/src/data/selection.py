"""
Feature selection: Pearson-correlation pruning and ANOVA F-test ranking
"""

from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from sklearn.feature_selection import f_regression

from ..core.exceptions import DatasetError
from .partition import ClientDataset

DEFAULT_CORRELATION_THRESHOLD = 0.95
DEFAULT_P_THRESHOLD = 0.06
DEFAULT_TOP_K = 25


class FeatureScore(NamedTuple):
    """ANOVA score of one feature"""
    feature: str
    index: int
    f_value: float
    p_value: float


def prune_correlated(
    X: np.ndarray,
    names: Sequence[str],
    threshold: float = DEFAULT_CORRELATION_THRESHOLD,
) -> Tuple[np.ndarray, List[str]]:
    """
    Drop the later column of every highly correlated pair

    Single pass in index order: a column is dropped when its absolute Pearson
    correlation with an already kept column reaches ``threshold``.
    Zero-variance columns are correlated with nothing; they are kept and reported.

    Args:
        X: Finite feature matrix
        names: Column names aligned with ``X``
        threshold: Correlation cutoff in (0, 1]

    Returns:
        Tuple of the pruned matrix and its column names
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(names):
        raise DatasetError("Feature matrix and names are misaligned", "DATA_005")
    if not 0.0 < threshold <= 1.0:
        raise DatasetError(f"Correlation threshold must be in (0, 1], got {threshold}", "DATA_005")
    if not np.isfinite(X).all():
        raise DatasetError("Feature matrix contains non-finite values", "DATA_005")

    centered = X - X.mean(axis=0)
    norms = np.sqrt((centered ** 2).sum(axis=0))
    constant = norms == 0.0

    if constant.any():
        flagged = [names[j] for j in np.flatnonzero(constant)]
        logger.warning(f"Zero-variance columns kept without correlation test: {flagged}")

    safe = np.where(constant, 1.0, norms)
    unit = centered / safe
    corr = unit.T @ unit

    kept: List[int] = []
    for j in range(X.shape[1]):
        if not constant[j]:
            tested = [i for i in kept if not constant[i]]
            if tested and np.max(np.abs(corr[tested, j])) >= threshold:
                logger.debug(f"Pruning '{names[j]}' (correlated with a kept column)")
                continue
        kept.append(j)

    logger.info(f"Correlation pruning kept {len(kept)} of {X.shape[1]} features")
    return X[:, kept], [names[j] for j in kept]


def rank_features_anova(
    X: np.ndarray,
    y: np.ndarray,
    p_threshold: float = DEFAULT_P_THRESHOLD,
    names: Optional[Sequence[str]] = None,
) -> List[FeatureScore]:
    """
    Rank features by univariate regression F-statistic

    Args:
        X: Feature matrix
        y: Target vector
        p_threshold: Features with a larger p-value are excluded
        names: Optional column names (defaults to "x0", "x1", ...)

    Returns:
        List[FeatureScore]: Significant features by descending F (ties by index)
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] < 3:
        raise DatasetError("ANOVA ranking needs at least 3 samples", "DATA_005")
    if names is None:
        names = [f"x{j}" for j in range(X.shape[1])]

    f_values, p_values = f_regression(X, y, force_finite=True)

    scores = [
        FeatureScore(names[j], j, float(f_values[j]), float(p_values[j]))
        for j in range(X.shape[1])
        if f_values[j] > 0.0 and p_values[j] <= p_threshold
    ]
    scores.sort(key=lambda score: (-score.f_value, score.index))
    return scores


def select_features(
    clients: Sequence[ClientDataset],
    corr_threshold: float = DEFAULT_CORRELATION_THRESHOLD,
    p_threshold: float = DEFAULT_P_THRESHOLD,
    top_k: Optional[int] = DEFAULT_TOP_K,
    scope: str = "global",
) -> List[ClientDataset]:
    """
    Choose one shared feature set for all clients from their training rows

    ``scope="global"`` ranks on the pooled training data; ``scope="per_client"``
    ranks on each client and keeps the union of the per-client top-k. Either way
    every client ends up with the same columns in their original order.

    Args:
        clients: Clients sharing one encoded feature space
        corr_threshold: Pearson pruning cutoff
        p_threshold: ANOVA p-value cutoff
        top_k: Number of features to keep per ranking (None keeps all significant)
        scope: "global" or "per_client"

    Returns:
        List[ClientDataset]: Clients restricted to the selected columns
    """
    if not clients:
        raise DatasetError("No clients to select features for", "DATA_005")
    if scope not in ("global", "per_client"):
        raise DatasetError(f"Unknown selection scope '{scope}'", "DATA_005")

    names = list(clients[0].feature_names)
    X_pool = np.vstack([client.X_train for client in clients])
    y_pool = np.concatenate([client.y_train for client in clients])

    _, pruned_names = prune_correlated(X_pool, names, corr_threshold)
    pruned_index = [names.index(name) for name in pruned_names]

    if scope == "global":
        ranking = rank_features_anova(X_pool[:, pruned_index], y_pool, p_threshold, pruned_names)
        chosen = {score.feature for score in ranking[:top_k]}
    else:
        chosen = set()
        for client in clients:
            ranking = rank_features_anova(client.X_train[:, pruned_index], client.y_train, p_threshold, pruned_names)
            chosen.update(score.feature for score in ranking[:top_k])

    if not chosen:
        raise DatasetError(f"No feature passed the ANOVA threshold p <= {p_threshold}", "DATA_004")

    selected = [j for j, name in enumerate(names) if name in chosen]
    logger.info(f"Selected {len(selected)} shared features ({scope} ranking)")
    return [client.with_features(selected) for client in clients]
