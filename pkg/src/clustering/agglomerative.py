"""
Average-linkage agglomerative clustering over a distance matrix
"""

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from ..core.exceptions import ClusteringError
from .distance import DistanceMatrix

Partition = List[List[int]]

# Linkages within this of the minimum (scaled by max(1, |minimum|)) count as tied
TIE_TOLERANCE = 1e-9


@dataclass
class Merge:
    """One merge step; ids below n are leaves, merge i creates id n + i"""
    left: int
    right: int
    distance: float
    size: int


@dataclass
class Dendrogram:
    """Full merge history from n singletons down to one cluster"""
    n: int
    merges: List[Merge] = field(default_factory=list)

    def leaf_order(self) -> List[int]:
        if self.n == 1:
            return [0]
        children: Dict[int, Tuple[int, int]] = {
            self.n + i: (merge.left, merge.right) for i, merge in enumerate(self.merges)
        }
        order: List[int] = []
        stack = [self.n + len(self.merges) - 1]
        while stack:
            node = stack.pop()
            if node < self.n:
                order.append(node)
            else:
                left, right = children[node]
                stack.extend([right, left])
        return order

    def cut(self, k: int) -> Partition:
        """Clusters present after the first n - k merges, ordered by smallest member"""
        if not 1 <= k <= self.n:
            raise ClusteringError(f"k must be in [1, {self.n}], got {k}", "CLUSTER_002")

        members: Dict[int, List[int]] = {i: [i] for i in range(self.n)}
        for i, merge in enumerate(self.merges[: self.n - k]):
            members[self.n + i] = sorted(members.pop(merge.left) + members.pop(merge.right))
        return sorted(members.values(), key=lambda cluster: cluster[0])


def average_linkage(dm: DistanceMatrix, a: List[int], b: List[int]) -> float:
    """Mean of all cross-cluster point distances"""
    return float(dm.d[np.ix_(a, b)].mean())


def build_dendrogram(dm: DistanceMatrix, fast: bool = False) -> Dendrogram:
    """
    Merge clusters greedily by minimal average linkage

    Linkages within a relative ``TIE_TOLERANCE`` of the minimum are ties;
    they go to the pair whose (smallest member, smallest member) is
    lexicographically smallest. ``fast`` maintains linkages with the
    Lance-Williams update instead of recomputing them from point distances.
    """
    n = dm.n
    members: Dict[int, List[int]] = {i: [i] for i in range(n)}
    dendrogram = Dendrogram(n=n)

    linkage: Dict[Tuple[int, int], float] = {}
    if fast:
        for i in range(n):
            for j in range(i + 1, n):
                linkage[(i, j)] = float(dm.d[i, j])

    def link(a: int, b: int) -> float:
        if fast:
            return linkage[(min(a, b), max(a, b))]
        return average_linkage(dm, members[a], members[b])

    next_id = n
    while len(members) > 1:
        active = sorted(members, key=lambda cid: members[cid][0])
        candidates = [
            (link(active[x], active[y]), active[x], active[y])
            for x in range(len(active))
            for y in range(x + 1, len(active))
        ]
        lowest = min(value for value, _, _ in candidates)
        cutoff = lowest + TIE_TOLERANCE * max(1.0, abs(lowest))
        # candidates are already in (smallest member, smallest member) order
        distance, a, b = next(c for c in candidates if c[0] <= cutoff)
        merged = sorted(members[a] + members[b])

        if fast:
            size_a, size_b = len(members[a]), len(members[b])
            for other in members:
                if other in (a, b):
                    continue
                updated = (size_a * link(other, a) + size_b * link(other, b)) / (size_a + size_b)
                linkage[(min(other, next_id), max(other, next_id))] = updated

        dendrogram.merges.append(Merge(left=a, right=b, distance=distance, size=len(merged)))
        del members[a], members[b]
        members[next_id] = merged
        next_id += 1

    return dendrogram


def agglomerate(dm: DistanceMatrix, k: int, fast: bool = False) -> Tuple[Partition, Dendrogram]:
    """
    Partition clients into k clusters by average linkage

    Args:
        dm: Client distance matrix
        k: Number of clusters, 1 <= k <= n
        fast: Use the Lance-Williams update

    Returns:
        Tuple of the partition (member lists ordered by smallest member) and the full dendrogram
    """
    if not 1 <= k <= dm.n:
        raise ClusteringError(f"k must be in [1, {dm.n}], got {k}", "CLUSTER_002")
    dendrogram = build_dendrogram(dm, fast=fast)
    return dendrogram.cut(k), dendrogram


def labels_from_partition(partition: Partition, n: int) -> np.ndarray:
    """Cluster label per point, numbered in partition order"""
    labels = np.full(n, -1, dtype=np.int64)
    for label, cluster in enumerate(partition):
        labels[cluster] = label
    return labels
