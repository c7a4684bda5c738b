"""
Forecast accuracy metrics: RMSE, MAE and R²
"""

import hashlib
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
from loguru import logger

from ..core.exceptions import EvaluationError
from ..models.forecaster import ForecasterConfig
from ..models.training import PreparedClient, predict_sales
from ..models.weights import ModelWeights


@dataclass(frozen=True)
class MetricTriple:
    """Error metrics on the sales scale; r2 is None when the target is constant"""
    rmse: float
    mae: float
    r2: Optional[float]

    @property
    def r2_defined(self) -> bool:
        return self.r2 is not None

    def to_dict(self) -> Dict[str, Any]:
        return {"rmse": self.rmse, "mae": self.mae, "r2": self.r2}


def metrics(y_true, y_pred) -> MetricTriple:
    """
    RMSE, MAE and coefficient of determination

    Args:
        y_true: Observed values
        y_pred: Predictions of equal length

    Returns:
        MetricTriple: With ``r2=None`` if ``y_true`` is constant
    """
    y_true = np.asarray(y_true, dtype=np.float64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.float64).reshape(-1)
    if y_true.size == 0 or y_true.shape != y_pred.shape:
        raise EvaluationError(
            f"Need equal nonzero lengths, got {y_true.size} and {y_pred.size}", "EVAL_001",
        )

    residual = y_true - y_pred
    rmse = float(np.sqrt(np.mean(residual ** 2)))
    mae = float(np.mean(np.abs(residual)))

    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0.0:
        logger.warning("Constant target: R² is undefined")
        return MetricTriple(rmse, mae, None)

    r2 = 1.0 - float(np.sum(residual ** 2)) / ss_tot
    return MetricTriple(rmse, mae, r2)


def split_signature(test_idx: np.ndarray) -> str:
    """Content hash of a test split, used to check methods share it"""
    return hashlib.sha256(np.asarray(test_idx, dtype="<i8").tobytes()).hexdigest()[:16]


@dataclass
class ClientEvaluation:
    """One client's metrics under one method"""
    client_id: str
    method: str
    metrics: MetricTriple
    split: str


def evaluate_client(
    weights: ModelWeights,
    prepared: PreparedClient,
    config: ForecasterConfig,
    method: str,
) -> ClientEvaluation:
    """Score a client's test split with de-standardized predictions"""
    triple = metrics(prepared.y_test, predict_sales(weights, prepared, config))
    logger.debug(f"{method} / '{prepared.client_id}': rmse={triple.rmse:.4f} mae={triple.mae:.4f} r2={triple.r2}")
    return ClientEvaluation(prepared.client_id, method, triple, split_signature(prepared.test_idx))
