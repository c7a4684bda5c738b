"""
CSV to client datasets in one call
"""

from pathlib import Path
from typing import List, Optional, Union

from loguru import logger

from .encoding import encode_features
from .ingest import Schema, ingest_csv, load_schema
from .partition import MIN_CLIENT_SAMPLES, ClientDataset, partition_by_region
from .selection import (
    DEFAULT_CORRELATION_THRESHOLD,
    DEFAULT_P_THRESHOLD,
    DEFAULT_TOP_K,
    select_features,
)


def build_clients_from_csv(
    path: Union[str, Path],
    schema: Union[Schema, str, Path],
    region_column: str,
    target_column: str = "Sales",
    test_fraction: float = 0.2,
    seed: int = 0,
    min_samples: int = MIN_CLIENT_SAMPLES,
    cardinality_threshold: int = 16,
    corr_threshold: float = DEFAULT_CORRELATION_THRESHOLD,
    p_threshold: float = DEFAULT_P_THRESHOLD,
    top_k: Optional[int] = DEFAULT_TOP_K,
    selection_scope: str = "global",
) -> List[ClientDataset]:
    """
    Ingest, encode, partition by region and select a shared feature set

    Args:
        path: Demand CSV
        schema: Column-type map or a path to its JSON file
        region_column: Categorical column naming each row's region
        target_column: Numeric sales column
        test_fraction: Held-out share per client
        seed: Global seed
        min_samples: Smallest region kept as a client
        cardinality_threshold: Largest one-hot encoded category count
        corr_threshold: Pearson pruning cutoff
        p_threshold: ANOVA p-value cutoff
        top_k: Features kept per ranking
        selection_scope: "global" or "per_client"

    Returns:
        List[ClientDataset]: Clients in sorted region order
    """
    if not isinstance(schema, dict):
        schema = load_schema(schema)

    table = ingest_csv(path, schema, region_column, target_column)
    encoded, names = encode_features(table, cardinality_threshold)
    clients = partition_by_region(table, encoded, names, test_fraction, seed, min_samples)
    if not clients:
        return clients

    clients = select_features(clients, corr_threshold, p_threshold, top_k, selection_scope)
    logger.info(f"Built {len(clients)} clients with {clients[0].n_features} features from {path}")
    return clients
