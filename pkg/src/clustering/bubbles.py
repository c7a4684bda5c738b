"""
Bubble assignment: k* selection by Davies-Bouldin index and singleton flagging
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from ..boosting.importance import ImportanceDistribution
from ..core.exceptions import ClusteringError
from .agglomerative import build_dendrogram
from .distance import DistanceMatrix, pairwise_distances
from .validity import DBI_MODES, davies_bouldin


@dataclass
class ClusteringOptions:
    """How clients are grouped into bubbles"""
    metric: str = "emd"
    dbi_mode: str = "standard"
    k_min: int = 2
    k_max: Optional[int] = None
    fast_linkage: bool = False

    def k_range(self, n: int) -> Tuple[int, int]:
        upper = n - 1 if self.k_max is None else min(self.k_max, n - 1)
        return max(self.k_min, 2), upper


@dataclass
class BubbleAssignment:
    """Client-to-bubble labels with singleton (potential attacker) flags"""
    client_ids: Tuple[str, ...]
    labels: Dict[str, int]
    k_star: int
    dbi_by_k: Dict[int, float] = field(default_factory=dict)
    forced: bool = False
    singleton_flags: Dict[str, bool] = field(init=False)

    def __post_init__(self):
        self.client_ids = tuple(self.client_ids)
        if set(self.labels) != set(self.client_ids):
            raise ClusteringError("Every client needs exactly one bubble label", "CLUSTER_002")
        if sorted(set(self.labels.values())) != list(range(self.k_star)):
            raise ClusteringError(f"Labels must cover bubbles 0..{self.k_star - 1}", "CLUSTER_002")

        sizes = self.bubble_sizes()
        self.singleton_flags = {client: sizes[self.labels[client]] == 1 for client in self.client_ids}

    def bubble_sizes(self) -> Dict[int, int]:
        sizes = {bubble: 0 for bubble in range(self.k_star)}
        for client in self.client_ids:
            sizes[self.labels[client]] += 1
        return sizes

    def bubbles(self) -> Dict[int, List[str]]:
        """Bubble id -> member clients in client order"""
        members: Dict[int, List[str]] = {bubble: [] for bubble in range(self.k_star)}
        for client in self.client_ids:
            members[self.labels[client]].append(client)
        return members

    def singletons(self) -> List[str]:
        return [client for client in self.client_ids if self.singleton_flags[client]]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k_star": self.k_star,
            "labels": {client: self.labels[client] for client in self.client_ids},
            "singletons": self.singletons(),
            "dbi_by_k": {str(k): _json_float(value) for k, value in sorted(self.dbi_by_k.items())},
            "forced": self.forced,
        }


def _json_float(value: float):
    return "inf" if np.isinf(value) else float(value)


def _assignment(client_ids: Sequence[str], partition, k: int, dbi_by_k, forced: bool) -> BubbleAssignment:
    labels = {}
    for bubble, cluster in enumerate(partition):
        for index in cluster:
            labels[client_ids[index]] = bubble
    return BubbleAssignment(tuple(client_ids), labels, k, dict(dbi_by_k), forced)


def select_k(
    dm: DistanceMatrix,
    k_range: Optional[Tuple[int, int]] = None,
    dbi_mode: str = "standard",
    fast: bool = False,
    k_override: Optional[int] = None,
) -> BubbleAssignment:
    """
    Pick the bubble count minimizing the Davies-Bouldin index

    Args:
        dm: Client distance matrix
        k_range: Inclusive (low, high) within [2, n - 1]; defaults to the whole interval
        dbi_mode: "standard" (mean pairwise) or "as_written" intra-cluster scatter
        fast: Lance-Williams linkage updates
        k_override: Force this bubble count (the trace is still computed)

    Returns:
        BubbleAssignment: Labels for k* (ties resolved to the smallest k) and the DBI trace
    """
    if dbi_mode not in DBI_MODES:
        raise ClusteringError(f"Unknown DBI mode '{dbi_mode}'", "CLUSTER_002")

    n = dm.n
    low, high = k_range if k_range is not None else (2, n - 1)
    if low > high:
        if k_override is None:
            raise ClusteringError(f"Empty k range [{low}, {high}] for {n} clients", "CLUSTER_003")
    elif low < 2 or high > n - 1:
        raise ClusteringError(f"k range [{low}, {high}] must lie within [2, {n - 1}]", "CLUSTER_002")

    if k_override is not None and not 1 <= k_override <= n:
        raise ClusteringError(f"k override must be in [1, {n}], got {k_override}", "CLUSTER_002")

    dendrogram = build_dendrogram(dm, fast=fast)
    dbi_by_k: Dict[int, float] = {}
    for k in range(low, high + 1):
        dbi_by_k[k] = davies_bouldin(dm, dendrogram.cut(k), dbi_mode)
        logger.debug(f"DBI(k={k}) = {dbi_by_k[k]:.5f}")

    if k_override is not None:
        k_star, forced = k_override, True
    else:
        k_star = min(dbi_by_k, key=lambda k: (dbi_by_k[k], k))
        forced = False

    assignment = _assignment(dm.client_ids, dendrogram.cut(k_star), k_star, dbi_by_k, forced)
    logger.info(
        f"Bubble assignment: k*={k_star}{' (override)' if forced else ''}, "
        f"singletons={assignment.singletons()}"
    )
    return assignment


def assign_bubbles(
    distributions: Sequence[ImportanceDistribution],
    options: Optional[ClusteringOptions] = None,
    k_override: Optional[int] = None,
) -> Tuple[BubbleAssignment, Optional[DistanceMatrix]]:
    """
    Group released importance distributions into bubbles

    One client forms a lone (singleton) bubble; two clients form one bubble
    unless an override of 2 splits them.

    Returns:
        Tuple of the assignment and the distance matrix (None for a single client)
    """
    options = options or ClusteringOptions()
    client_ids = [dist.client_id for dist in distributions]
    n = len(client_ids)

    if n == 0:
        raise ClusteringError("No clients to assign", "CLUSTER_004")
    if n == 1:
        return BubbleAssignment(tuple(client_ids), {client_ids[0]: 0}, 1), None

    dm = pairwise_distances(distributions, options.metric)
    if n == 2 and k_override is None:
        logger.info("Two clients: forming a single bubble")
        return BubbleAssignment(tuple(client_ids), {client: 0 for client in client_ids}, 1), dm

    low, high = options.k_range(n)
    return select_k(dm, (low, high), options.dbi_mode, options.fast_linkage, k_override), dm
