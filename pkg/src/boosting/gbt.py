"""
Gradient-boosted regression trees for per-client feature importance
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from loguru import logger
from sklearn.ensemble import GradientBoostingRegressor

from ..core.exceptions import BoostingError, ConfigurationError


@dataclass
class GbtConfig:
    """Tree-ensemble hyperparameters"""
    n_trees: int = 50
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigurationError("n_trees must be at least 1", "CONFIG_003", {"field": "gbt.n_trees"})
        if self.max_depth < 1:
            raise ConfigurationError("max_depth must be at least 1", "CONFIG_003", {"field": "gbt.max_depth"})
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigurationError("learning_rate must be in (0, 1]", "CONFIG_003",
                                     {"field": "gbt.learning_rate"})
        if self.min_samples_leaf < 1:
            raise ConfigurationError("min_samples_leaf must be at least 1", "CONFIG_003",
                                     {"field": "gbt.min_samples_leaf"})


@dataclass
class GbtModel:
    """Fitted ensemble: mean(y) plus shrunken trees fit to residuals"""
    estimator: Optional[GradientBoostingRegressor]
    n_features: int
    base_prediction: float
    constant_target: bool = False

    @property
    def n_trees(self) -> int:
        return 0 if self.estimator is None else int(self.estimator.n_estimators_)

    def trees(self):
        """Underlying sklearn regression trees in boosting order"""
        if self.estimator is None:
            return []
        return [stage[0].tree_ for stage in self.estimator.estimators_]

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.estimator is None:
            return np.full(X.shape[0], self.base_prediction)
        return self.estimator.predict(X)


def train_gbt(X: np.ndarray, y: np.ndarray, config: GbtConfig) -> GbtModel:
    """
    Fit a squared-error gradient-boosting ensemble with exact greedy splits

    Args:
        X: Feature matrix
        y: Target vector
        config: Ensemble hyperparameters

    Returns:
        GbtModel: Fitted model; a constant target yields a tree-free model
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)

    if X.shape[0] < 2 * config.min_samples_leaf:
        raise BoostingError(
            f"Need at least {2 * config.min_samples_leaf} samples, got {X.shape[0]}", "GBT_001",
        )
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise BoostingError("Training data contains non-finite values", "GBT_001")

    if np.ptp(y) == 0.0:
        logger.warning("Constant target: importance will be all-zero")
        return GbtModel(estimator=None, n_features=X.shape[1], base_prediction=float(y.mean()),
                        constant_target=True)

    estimator = GradientBoostingRegressor(
        loss="squared_error",
        criterion="squared_error",
        n_estimators=config.n_trees,
        learning_rate=config.learning_rate,
        max_depth=config.max_depth,
        min_samples_leaf=config.min_samples_leaf,
        subsample=1.0,
        max_features=None,
        random_state=config.seed % (2 ** 32),
    )
    estimator.fit(X, y)
    return GbtModel(estimator=estimator, n_features=X.shape[1], base_prediction=float(y.mean()))


def split_gains(tree) -> np.ndarray:
    """Squared-error reduction of every internal node of an sklearn tree (NaN for leaves)"""
    left, right = tree.children_left, tree.children_right
    weighted = tree.weighted_n_node_samples * tree.impurity
    internal = left != -1

    gains = np.full(tree.node_count, np.nan)
    gains[internal] = weighted[internal] - weighted[left[internal]] - weighted[right[internal]]
    return gains


def feature_importance(model: GbtModel) -> np.ndarray:
    """
    Raw gain importance

    importance[j] is the summed squared-error reduction over every split on
    feature j, across all trees. Not normalized.

    Args:
        model: Fitted model

    Returns:
        np.ndarray: Non-negative vector of length ``model.n_features``
    """
    importance = np.zeros(model.n_features)
    for tree in model.trees():
        gains = split_gains(tree)
        internal = np.flatnonzero(~np.isnan(gains))
        np.add.at(importance, tree.feature[internal], np.maximum(gains[internal], 0.0))
    return importance
