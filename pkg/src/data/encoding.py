"""
Feature encoding: one-hot / label encoding, timestamp expansion, imputation
"""

from typing import List, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from ..core.exceptions import DatasetError
from .ingest import ColumnType, RawTable

MISSING_CATEGORY = "MISSING"
TIMESTAMP_PARTS = ("year", "month", "week", "day", "hour")


def encode_features(table: RawTable, cardinality_threshold: int = 16) -> Tuple[np.ndarray, List[str]]:
    """
    Encode every non-key column of the table into a numeric matrix

    Categoricals with at most ``cardinality_threshold`` distinct values become
    one-hot blocks, others integer label codes (sorted-value order). Timestamps
    expand to year, month, ISO week, day and hour. Missing numerics take the
    column median; missing categoricals take the "MISSING" category.

    Args:
        table: Ingested table
        cardinality_threshold: Largest category count that is one-hot encoded

    Returns:
        Tuple of the float64 matrix (rows aligned with ``table.frame``) and column names
    """
    if table.n_rows == 0:
        raise DatasetError("Cannot encode an empty table", "DATA_003")

    blocks: List[pd.DataFrame] = []
    for column, kind in table.column_types.items():
        if column in (table.region_column, table.target_column):
            continue

        values = table.frame[column]
        if values.isna().all():
            raise DatasetError(f"Column '{column}' has no usable values", "DATA_004", {"column": column})

        if kind is ColumnType.NUMERIC:
            blocks.append(_encode_numeric(column, values))
        elif kind is ColumnType.TIMESTAMP:
            blocks.append(_encode_timestamp(column, values))
        else:
            blocks.append(_encode_categorical(column, values, cardinality_threshold))

    if not blocks:
        raise DatasetError("Table has no feature columns besides region and target", "DATA_004")

    encoded = pd.concat(blocks, axis=1)
    logger.info(f"Encoded {len(table.column_types) - 2} columns into {encoded.shape[1]} features")
    return encoded.to_numpy(dtype=np.float64), list(encoded.columns)


def _encode_numeric(column: str, values: pd.Series) -> pd.DataFrame:
    return pd.DataFrame({column: values.fillna(values.median()).astype(float)})


def _encode_timestamp(column: str, values: pd.Series) -> pd.DataFrame:
    parts = pd.DataFrame({
        f"{column}_year": values.dt.year,
        f"{column}_month": values.dt.month,
        f"{column}_week": values.dt.isocalendar().week,
        f"{column}_day": values.dt.day,
        f"{column}_hour": values.dt.hour,
    }).astype(float)
    return parts.fillna(parts.median())


def _encode_categorical(column: str, values: pd.Series, cardinality_threshold: int) -> pd.DataFrame:
    filled = values.fillna(MISSING_CATEGORY).astype(str)
    categories = sorted(filled.unique())

    if len(categories) <= cardinality_threshold:
        return pd.DataFrame(
            {f"{column}={category}": (filled == category).astype(float) for category in categories}
        )

    codes = {category: float(code) for code, category in enumerate(categories)}
    logger.debug(f"Label-encoding '{column}' with {len(categories)} categories")
    return pd.DataFrame({column: filled.map(codes)})
