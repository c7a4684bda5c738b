"""
Davies-Bouldin index on a precomputed distance matrix
"""

from typing import Sequence

import numpy as np
from loguru import logger

from ..core.exceptions import ClusteringError
from .agglomerative import average_linkage
from .distance import DistanceMatrix

DBI_MODES = ("as_written", "standard")


def scatter(dm: DistanceMatrix, cluster: Sequence[int], mode: str = "as_written") -> float:
    """
    Intra-cluster scatter S_i

    "as_written": summed distances over all ordered member pairs (self-pairs
    included) divided by |C| once. "standard": mean distance over distinct
    ordered pairs, zero for a singleton.
    """
    cluster = list(cluster)
    total = float(dm.d[np.ix_(cluster, cluster)].sum())
    size = len(cluster)
    if mode == "as_written":
        return total / size
    if mode == "standard":
        return total / (size * (size - 1)) if size > 1 else 0.0
    raise ClusteringError(f"Unknown DBI mode '{mode}'", "CLUSTER_002")


def davies_bouldin(dm: DistanceMatrix, partition: Sequence[Sequence[int]], mode: str = "as_written") -> float:
    """
    Davies-Bouldin index with average-linkage separation

    DBI = (1/k) sum_i max_{j != i} (S_i + S_j) / d(C_i, C_j). Lower is better.
    Two clusters at zero average-linkage distance make the index +inf.

    Args:
        dm: Client distance matrix
        partition: At least two nonempty member lists
        mode: "as_written" or "standard" intra-cluster scatter

    Returns:
        float: The index (possibly +inf)
    """
    clusters = [list(cluster) for cluster in partition]
    if len(clusters) < 2 or any(not cluster for cluster in clusters):
        raise ClusteringError("DBI needs at least two nonempty clusters", "CLUSTER_002")

    k = len(clusters)
    spreads = [scatter(dm, cluster, mode) for cluster in clusters]

    total = 0.0
    for i in range(k):
        worst = 0.0
        for j in range(k):
            if i == j:
                continue
            between = average_linkage(dm, clusters[i], clusters[j])
            if between == 0.0:
                logger.warning(f"Clusters {i} and {j} are at zero distance; DBI is infinite")
                return float("inf")
            worst = max(worst, (spreads[i] + spreads[j]) / between)
        total += worst

    return total / k
