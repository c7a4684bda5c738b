"""
CSV ingestion for regional demand tables
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Union

import numpy as np
import pandas as pd
from loguru import logger

from ..core.exceptions import DatasetError


class ColumnType(Enum):
    """Column type enumeration"""
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"
    TIMESTAMP = "timestamp"


Schema = Dict[str, ColumnType]


@dataclass
class RawTable:
    """Typed table with the region partition key and the sales target"""
    frame: pd.DataFrame
    column_types: Schema
    region_column: str
    target_column: str
    dropped_rows: int = 0
    dropped_by_column: Dict[str, int] = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return len(self.frame)

    @property
    def timestamp_columns(self):
        return [name for name, kind in self.column_types.items() if kind is ColumnType.TIMESTAMP]

    def regions(self):
        """Distinct region values in sorted order"""
        return sorted(self.frame[self.region_column].dropna().unique().tolist())


def load_schema(path: Union[str, Path]) -> Schema:
    """
    Load a column-type schema

    Args:
        path: JSON file mapping column name to "numeric", "categorical" or "timestamp"

    Returns:
        Schema: Ordered column-type map
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"Schema file not found: {path}", "DATA_001")

    with open(path, "r", encoding="utf-8") as file:
        raw = json.load(file)

    return parse_schema(raw)


def parse_schema(raw: Dict[str, str]) -> Schema:
    """Convert a plain mapping into a Schema, rejecting unknown type names"""
    schema: Schema = {}
    for column, kind in raw.items():
        try:
            schema[column] = ColumnType(str(kind).lower())
        except ValueError:
            raise DatasetError(
                f"Unknown column type '{kind}' for column '{column}'", "DATA_002",
                {"column": column, "type": kind},
            )
    return schema


def ingest_csv(
    path: Union[str, Path],
    schema: Schema,
    region_column: str,
    target_column: str = "Sales",
) -> RawTable:
    """
    Read a demand CSV into a typed table

    Rows with a missing or unparseable region or target are dropped and counted.
    Other unparseable cells become missing values and are imputed at encoding time.
    Columns present in the file but absent from the schema are ignored.

    Args:
        path: CSV file (UTF-8, header row, RFC-4180 quoting)
        schema: Column-type map
        region_column: Name of the client-partition column
        target_column: Name of the sales column

    Returns:
        RawTable: Typed table
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"CSV file not found: {path}", "DATA_001", {"path": str(path)})

    if region_column not in schema or schema[region_column] is not ColumnType.CATEGORICAL:
        raise DatasetError(
            f"Region column '{region_column}' must be declared categorical in the schema", "DATA_002",
        )
    if target_column not in schema or schema[target_column] is not ColumnType.NUMERIC:
        raise DatasetError(
            f"Target column '{target_column}' must be declared numeric in the schema", "DATA_002",
        )

    logger.info(f"Ingesting {path}")
    frame = pd.read_csv(
        path, dtype=str, keep_default_na=False, na_values=[""], encoding="utf-8",
    )

    missing = [column for column in schema if column not in frame.columns]
    if missing:
        raise DatasetError(
            f"CSV header is missing schema columns: {missing}", "DATA_002", {"missing": missing},
        )

    ignored = [column for column in frame.columns if column not in schema]
    if ignored:
        logger.debug(f"Ignoring {len(ignored)} columns not in schema: {ignored}")

    frame = frame[list(schema)].copy()
    for column, kind in schema.items():
        frame[column] = _coerce(frame[column], kind)

    required = [region_column, target_column]
    dropped_by_column = {column: int(frame[column].isna().sum()) for column in required}
    keep = frame[required].notna().all(axis=1)
    dropped = int((~keep).sum())
    frame = frame.loc[keep].reset_index(drop=True)

    if dropped:
        logger.warning(f"Dropped {dropped} rows with missing or unparseable required values")

    if frame.empty:
        raise DatasetError("No rows survived ingestion", "DATA_003", {"dropped": dropped})

    logger.info(f"Ingested {len(frame)} rows across {frame[region_column].nunique()} regions")
    return RawTable(
        frame=frame,
        column_types=dict(schema),
        region_column=region_column,
        target_column=target_column,
        dropped_rows=dropped,
        dropped_by_column=dropped_by_column,
    )


def _coerce(values: pd.Series, kind: ColumnType) -> pd.Series:
    """Parse a string column according to its declared type; failures become missing"""
    if kind is ColumnType.NUMERIC:
        numeric = pd.to_numeric(values, errors="coerce").astype(float)
        return numeric.where(np.isfinite(numeric))
    if kind is ColumnType.TIMESTAMP:
        return pd.to_datetime(values, errors="coerce", format="ISO8601")
    return values.where(values.isna(), values.astype(str).str.strip())
