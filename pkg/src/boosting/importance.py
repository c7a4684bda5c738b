"""
Feature-importance distributions
"""

import json
from dataclasses import dataclass
from typing import Any, Dict, Sequence

import numpy as np
from loguru import logger

from ..core.exceptions import BoostingError

SIMPLEX_TOLERANCE = 1e-9


@dataclass
class ImportanceDistribution:
    """A client's normalized feature importance (clean or noise-perturbed)"""
    client_id: str
    values: np.ndarray
    noisy: bool = False
    degenerate: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size == 0:
            raise BoostingError("Importance values must be a nonempty vector", "GBT_003")
        if (self.values < 0).any() or abs(self.values.sum() - 1.0) > SIMPLEX_TOLERANCE:
            raise BoostingError(f"Importance of client {self.client_id} is not on the simplex", "GBT_003")

    def __len__(self) -> int:
        return self.values.size

    def to_dict(self) -> Dict[str, Any]:
        return {
            "client_id": self.client_id,
            "values": [float(v) for v in self.values],
            "noisy": self.noisy,
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ImportanceDistribution":
        return cls(
            client_id=data["client_id"],
            values=np.asarray(data["values"], dtype=np.float64),
            noisy=bool(data.get("noisy", False)),
            degenerate=bool(data.get("degenerate", False)),
        )


def normalize(raw: Sequence[float], client_id: str = "", noisy: bool = False) -> ImportanceDistribution:
    """
    Project a raw importance vector onto the simplex

    Negative entries are clipped to zero before dividing by the sum; an all-zero
    vector becomes the uniform distribution and is flagged degenerate.

    Args:
        raw: Raw (possibly noisy) importance
        client_id: Owner of the vector
        noisy: Whether the vector carries privacy noise

    Returns:
        ImportanceDistribution: Normalized distribution
    """
    clipped = np.clip(np.asarray(raw, dtype=np.float64), 0.0, None)
    total = clipped.sum()

    if total <= 0.0 or not np.isfinite(total):
        logger.warning(f"Degenerate importance for client '{client_id}': using uniform distribution")
        uniform = np.full(clipped.size, 1.0 / clipped.size)
        return ImportanceDistribution(client_id, uniform, noisy=noisy, degenerate=True)

    return ImportanceDistribution(client_id, clipped / total, noisy=noisy)


def dump_importances(distributions: Sequence[ImportanceDistribution]) -> str:
    """JSON audit export of several distributions"""
    return json.dumps([dist.to_dict() for dist in distributions], indent=2, sort_keys=True)
