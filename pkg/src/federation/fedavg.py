"""
Federated averaging of flat weight vectors
"""

from typing import Dict, Mapping, Sequence

import numpy as np

from ..core.exceptions import FederationError
from ..models.weights import ModelWeights


def fedavg(weights: Sequence[ModelWeights]) -> ModelWeights:
    """
    Element-wise arithmetic mean, unweighted by sample counts

    Args:
        weights: One vector per participating client, all with one layout

    Returns:
        ModelWeights: The averaged vector
    """
    if not weights:
        raise FederationError("Nothing to average", "FED_001")

    layout = weights[0].layout
    if any(w.layout != layout for w in weights[1:]):
        raise FederationError("Cannot average weights with different layouts", "FED_001")

    stacked = np.stack([w.values for w in weights])
    # Identical inputs come back unchanged
    if all(np.array_equal(stacked[0], row) for row in stacked[1:]):
        return ModelWeights(stacked[0].copy(), layout)
    return ModelWeights(stacked.mean(axis=0), layout)


def aggregate_global(bubble_weights: Mapping[int, ModelWeights], bubble_sizes: Mapping[int, int]) -> ModelWeights:
    """
    Size-weighted average across multi-client bubbles

    W = sum(|B_i| W_i) / sum(|B_i|) over bubbles with more than one client.

    Args:
        bubble_weights: Bubble id -> final bubble weights
        bubble_sizes: Bubble id -> member count

    Returns:
        ModelWeights: The cross-bubble model
    """
    eligible: Dict[int, int] = {
        bubble: size for bubble, size in bubble_sizes.items()
        if size > 1 and bubble in bubble_weights
    }
    if not eligible:
        raise FederationError("No multi-client bubble to aggregate", "FED_002")

    bubbles = sorted(eligible)
    layout = bubble_weights[bubbles[0]].layout
    if any(bubble_weights[b].layout != layout for b in bubbles):
        raise FederationError("Cannot aggregate bubbles with different layouts", "FED_001")
    if len(bubbles) == 1:
        return bubble_weights[bubbles[0]].copy()

    total = sum(eligible[b] for b in bubbles)
    combined = sum(eligible[b] * bubble_weights[b].values for b in bubbles) / total
    return ModelWeights(combined, layout)
