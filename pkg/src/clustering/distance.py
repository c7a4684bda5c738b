"""
Distances between importance distributions
"""

from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import cosine

from ..boosting.importance import ImportanceDistribution
from ..core.exceptions import ClusteringError

VectorLike = Union[ImportanceDistribution, Sequence[float], np.ndarray]


@dataclass
class DistanceMatrix:
    """Symmetric client-by-client distance matrix with a zero diagonal"""
    d: np.ndarray
    client_ids: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=np.float64)
        if self.d.ndim != 2 or self.d.shape[0] != self.d.shape[1]:
            raise ClusteringError("Distance matrix must be square", "CLUSTER_004")
        if not np.isfinite(self.d).all() or (self.d < 0).any():
            raise ClusteringError("Distances must be finite and non-negative", "CLUSTER_004")
        if not np.array_equal(self.d, self.d.T) or np.any(np.diag(self.d) != 0):
            raise ClusteringError("Distance matrix must be symmetric with a zero diagonal", "CLUSTER_004")
        if not self.client_ids:
            self.client_ids = tuple(str(i) for i in range(self.n))
        self.client_ids = tuple(self.client_ids)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def scaled(self, factor: float) -> "DistanceMatrix":
        return DistanceMatrix(self.d * factor, self.client_ids)

    def permuted(self, order: Sequence[int]) -> "DistanceMatrix":
        order = list(order)
        return DistanceMatrix(self.d[np.ix_(order, order)], tuple(self.client_ids[i] for i in order))


def _values(vector: VectorLike) -> np.ndarray:
    if isinstance(vector, ImportanceDistribution):
        return vector.values
    return np.asarray(vector, dtype=np.float64)


def emd(p: VectorLike, q: VectorLike) -> float:
    """
    Earth mover's distance between two distributions over the feature axis

    Features sit at unit spacing, so the distance is the summed absolute
    difference of the two cumulative distributions.
    """
    p, q = _values(p), _values(q)
    if p.shape != q.shape:
        raise ClusteringError(
            f"Importance vectors have different lengths ({p.size} vs {q.size})", "CLUSTER_001",
        )
    return float(np.abs(np.cumsum(p) - np.cumsum(q)).sum())


def cosine_distance(p: VectorLike, q: VectorLike) -> float:
    """One minus cosine similarity"""
    p, q = _values(p), _values(q)
    if p.shape != q.shape:
        raise ClusteringError(
            f"Importance vectors have different lengths ({p.size} vs {q.size})", "CLUSTER_001",
        )
    return float(max(cosine(p, q), 0.0))


METRICS = {
    "emd": emd,
    "cosine": cosine_distance,
}


def pairwise_distances(dists: Sequence[ImportanceDistribution], metric: str = "emd") -> DistanceMatrix:
    """
    Full distance matrix over clients

    Args:
        dists: One importance distribution per client
        metric: "emd" (default) or "cosine"

    Returns:
        DistanceMatrix: Symmetric matrix in client order
    """
    if len(dists) < 2:
        raise ClusteringError("Need at least 2 clients for pairwise distances", "CLUSTER_004")
    if metric not in METRICS:
        raise ClusteringError(f"Unknown distance metric '{metric}'", "CLUSTER_004")

    distance = METRICS[metric]
    n = len(dists)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = distance(dists[i], dists[j])

    return DistanceMatrix(d, tuple(dist.client_id for dist in dists))
