"""
Tests for ingestion, encoding, feature selection, partitioning and synthetic clients
"""

import json

import numpy as np
import pandas as pd
import pytest

from src.boosting.gbt import GbtConfig
from src.boosting.sensitivity import importance_distribution
from src.core.exceptions import DatasetError
from src.data.encoding import encode_features
from src.data.ingest import ColumnType, RawTable, ingest_csv, load_schema, parse_schema
from src.data.loader import build_clients_from_csv
from src.data.partition import ClientDataset, partition_by_region, split_indices
from src.data.regions import REGION_REFERENCE, reference_sensitivity
from src.data.selection import prune_correlated, rank_features_anova, select_features
from src.data.synthetic import SyntheticSpec, generate_synthetic

SCHEMA = {"region": "categorical", "price": "numeric", "sales": "numeric"}


def _write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestIngest:
    """Test CSV ingestion against a schema"""

    def setup_method(self):
        self.schema = parse_schema(SCHEMA)

    def test_three_rows(self, tmp_path):
        """Test a clean file keeps every row"""
        path = _write_csv(tmp_path / "d.csv", "region,price,sales\nA,1.5,10\nB,2,20\nA,3,30\n")
        table = ingest_csv(path, self.schema, "region", "sales")
        assert table.n_rows == 3
        assert table.dropped_rows == 0
        assert table.regions() == ["A", "B"]

    def test_missing_target_dropped(self, tmp_path):
        """Test a row with an empty sales cell is dropped and counted"""
        path = _write_csv(tmp_path / "d.csv", "region,price,sales\nA,1,10\nB,2,\nA,3,30\n")
        table = ingest_csv(path, self.schema, "region", "sales")
        assert table.n_rows == 2
        assert table.dropped_rows == 1
        assert table.dropped_by_column["sales"] == 1

    def test_unparseable_numeric_becomes_missing(self, tmp_path):
        """Test a bad feature cell survives as a missing value"""
        path = _write_csv(tmp_path / "d.csv", "region,price,sales\nA,abc,10\nB,2,20\n")
        table = ingest_csv(path, self.schema, "region", "sales")
        assert table.n_rows == 2
        assert np.isnan(table.frame["price"].iloc[0])

    def test_extra_columns_ignored(self, tmp_path):
        """Test columns outside the schema are dropped"""
        path = _write_csv(tmp_path / "d.csv", "region,price,sales,note\nA,1,10,x\nB,2,20,y\n")
        table = ingest_csv(path, self.schema, "region", "sales")
        assert list(table.frame.columns) == ["region", "price", "sales"]

    def test_missing_file(self, tmp_path):
        """Test a missing file raises DATA_001"""
        with pytest.raises(DatasetError) as info:
            ingest_csv(tmp_path / "nope.csv", self.schema, "region", "sales")
        assert info.value.error_code == "DATA_001"

    def test_header_mismatch(self, tmp_path):
        """Test a schema column absent from the header raises DATA_002"""
        path = _write_csv(tmp_path / "d.csv", "region,sales\nA,10\n")
        with pytest.raises(DatasetError) as info:
            ingest_csv(path, self.schema, "region", "sales")
        assert info.value.error_code == "DATA_002"

    def test_no_surviving_rows(self, tmp_path):
        """Test a file whose every target is missing raises DATA_003"""
        path = _write_csv(tmp_path / "d.csv", "region,price,sales\nA,1,\nB,2,n/a\n")
        with pytest.raises(DatasetError) as info:
            ingest_csv(path, self.schema, "region", "sales")
        assert info.value.error_code == "DATA_003"

    def test_load_schema_rejects_unknown_type(self, tmp_path):
        """Test unknown column types are rejected"""
        path = tmp_path / "schema.json"
        path.write_text(json.dumps({"region": "categorical", "x": "text"}), encoding="utf-8")
        with pytest.raises(DatasetError):
            load_schema(path)

    def test_load_schema_keeps_order(self, tmp_path):
        """Test the schema file order is preserved"""
        path = tmp_path / "schema.json"
        path.write_text(json.dumps(SCHEMA), encoding="utf-8")
        schema = load_schema(path)
        assert list(schema) == ["region", "price", "sales"]
        assert schema["price"] is ColumnType.NUMERIC


def _table(frame, types, region="region", target="sales"):
    return RawTable(frame=frame, column_types=types, region_column=region, target_column=target,
                    dropped_rows=0, dropped_by_column={})


class TestEncoding:
    """Test feature encoding"""

    def test_one_hot(self):
        """Test a low-cardinality categorical becomes one-hot columns"""
        frame = pd.DataFrame({"region": ["r", "r", "r"], "c": ["A", "B", "A"], "sales": [1.0, 2.0, 3.0]})
        types = {"region": ColumnType.CATEGORICAL, "c": ColumnType.CATEGORICAL, "sales": ColumnType.NUMERIC}
        X, names = encode_features(_table(frame, types), cardinality_threshold=10)
        assert names == ["c=A", "c=B"]
        np.testing.assert_array_equal(X, [[1, 0], [0, 1], [1, 0]])

    def test_label_encoding_above_threshold(self):
        """Test a high-cardinality categorical becomes sorted label codes"""
        frame = pd.DataFrame({"region": ["r"] * 3, "c": ["z", "a", "m"], "sales": [1.0, 2.0, 3.0]})
        types = {"region": ColumnType.CATEGORICAL, "c": ColumnType.CATEGORICAL, "sales": ColumnType.NUMERIC}
        X, names = encode_features(_table(frame, types), cardinality_threshold=2)
        assert names == ["c"]
        np.testing.assert_array_equal(X[:, 0], [2.0, 0.0, 1.0])

    def test_timestamp_expansion(self):
        """Test a timestamp expands to year, month, ISO week, day and hour"""
        frame = pd.DataFrame({
            "region": ["r"],
            "t": pd.to_datetime(["2017-03-05T14:00"]),
            "sales": [1.0],
        })
        types = {"region": ColumnType.CATEGORICAL, "t": ColumnType.TIMESTAMP, "sales": ColumnType.NUMERIC}
        X, names = encode_features(_table(frame, types))
        assert names == ["t_year", "t_month", "t_week", "t_day", "t_hour"]
        np.testing.assert_array_equal(X[0], [2017, 3, 9, 5, 14])

    def test_numeric_passthrough_and_median_fill(self):
        """Test numerics pass through with missing values set to the median"""
        frame = pd.DataFrame({"region": ["r"] * 3, "p": [1.0, np.nan, 5.0], "sales": [1.0, 2.0, 3.0]})
        types = {"region": ColumnType.CATEGORICAL, "p": ColumnType.NUMERIC, "sales": ColumnType.NUMERIC}
        X, names = encode_features(_table(frame, types))
        assert names == ["p"]
        np.testing.assert_array_equal(X[:, 0], [1.0, 3.0, 5.0])

    def test_all_missing_column(self):
        """Test an all-missing column raises DATA_004"""
        frame = pd.DataFrame({"region": ["r"] * 2, "p": [np.nan, np.nan], "sales": [1.0, 2.0]})
        types = {"region": ColumnType.CATEGORICAL, "p": ColumnType.NUMERIC, "sales": ColumnType.NUMERIC}
        with pytest.raises(DatasetError) as info:
            encode_features(_table(frame, types))
        assert info.value.error_code == "DATA_004"


class TestSelection:
    """Test correlation pruning and ANOVA ranking"""

    def test_identical_columns(self):
        """Test the second of two identical columns is removed"""
        X = np.array([[1.0, 1.0], [2.0, 2.0], [4.0, 4.0]])
        _, names = prune_correlated(X, ["a", "b"], 0.95)
        assert names == ["a"]

    def test_anticorrelated_columns(self):
        """Test |r| = 1 with negative sign also prunes"""
        X = np.array([[1.0, 3.0], [2.0, 2.0], [3.0, 1.0]])
        _, names = prune_correlated(X, ["a", "b"], 0.95)
        assert names == ["a"]

    def test_independent_columns_kept(self):
        """Test independent random columns survive pruning"""
        rng = np.random.default_rng(0)
        X = rng.standard_normal((500, 5))
        _, names = prune_correlated(X, list("abcde"), 0.95)
        assert names == list("abcde")

    def test_constant_column_kept(self, caplog):
        """Test zero-variance columns are kept and reported"""
        X = np.array([[1.0, 7.0], [2.0, 7.0], [3.0, 7.0]])
        _, names = prune_correlated(X, ["a", "c"], 0.95)
        assert names == ["a", "c"]
        assert "Zero-variance" in caplog.text

    def test_feature_equal_to_target_ranks_first(self):
        """Test a feature identical to y is ranked first"""
        rng = np.random.default_rng(1)
        X = rng.standard_normal((100, 3))
        y = X[:, 2].copy()
        ranking = rank_features_anova(X, y, 0.06, ["a", "b", "c"])
        assert ranking[0].feature == "c"
        assert ranking[0].p_value < 1e-10

    def test_noise_feature_mostly_excluded(self):
        """Test pure noise passes the p threshold rarely"""
        excluded = 0
        for seed in range(200):
            rng = np.random.default_rng(seed)
            X = rng.standard_normal((200, 1))
            y = rng.standard_normal(200)
            if not rank_features_anova(X, y, 0.06):
                excluded += 1
        assert excluded >= 170

    def test_too_few_samples(self):
        """Test ranking needs three samples"""
        with pytest.raises(DatasetError):
            rank_features_anova(np.ones((2, 1)), np.ones(2))

    def test_select_features_shared_columns(self, two_regime_clients):
        """Test selection keeps one column set, in original order, for every client"""
        clients, _ = two_regime_clients
        selected = select_features(clients, top_k=3)
        names = selected[0].feature_names
        assert all(client.feature_names == names for client in selected)
        assert list(names) == sorted(names, key=lambda name: clients[0].feature_names.index(name))
        assert len(names) <= 3

    def test_select_features_per_client_scope(self, two_regime_clients):
        """Test per-client ranking unions each client's top features"""
        clients, _ = two_regime_clients
        selected = select_features(clients, top_k=1, scope="per_client")
        assert 1 <= selected[0].n_features <= len(clients)


class TestPartition:
    """Test region partitioning and splits"""

    def setup_method(self):
        rows = 100
        self.frame = pd.DataFrame({
            "region": ["A"] * rows + ["B"] * rows,
            "sales": np.arange(2 * rows, dtype=float),
        })
        self.types = {"region": ColumnType.CATEGORICAL, "sales": ColumnType.NUMERIC}
        self.encoded = np.arange(2 * rows, dtype=float).reshape(-1, 1)

    def test_two_regions(self):
        """Test two regions of 100 rows give two 80/20 clients"""
        clients = partition_by_region(_table(self.frame, self.types), self.encoded, ["f"], 0.2, seed=5)
        assert [c.client_id for c in clients] == ["A", "B"]
        assert all(len(c.train_idx) == 80 and len(c.test_idx) == 20 for c in clients)

    def test_same_seed_same_split(self):
        """Test partitioning is deterministic"""
        first = partition_by_region(_table(self.frame, self.types), self.encoded, ["f"], 0.2, seed=5)
        second = partition_by_region(_table(self.frame, self.types), self.encoded, ["f"], 0.2, seed=5)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.test_idx, b.test_idx)

    def test_small_region_excluded(self, caplog):
        """Test regions below the minimum are excluded with a warning"""
        frame = pd.concat([self.frame, pd.DataFrame({"region": ["C"] * 3, "sales": [1.0, 2.0, 3.0]})],
                          ignore_index=True)
        encoded = np.vstack([self.encoded, np.ones((3, 1))])
        clients = partition_by_region(_table(frame, self.types), encoded, ["f"], 0.2, min_samples=10)
        assert [c.client_id for c in clients] == ["A", "B"]
        assert "Excluding region 'C'" in caplog.text

    def test_chronological_split(self):
        """Test the split without a generator holds out the last rows"""
        train, test = split_indices(10, 0.2)
        np.testing.assert_array_equal(test, [8, 9])
        np.testing.assert_array_equal(train, np.arange(8))

    def test_split_never_empty(self):
        """Test tiny clients still get one row on each side"""
        train, test = split_indices(2, 0.01)
        assert len(train) == 1 and len(test) == 1

    def test_client_rejects_overlapping_split(self):
        """Test a split that is not a partition is rejected"""
        with pytest.raises(DatasetError):
            ClientDataset("x", np.zeros((3, 1)), np.zeros(3), ("f",), [0, 1], [1, 2], seed=0)


class TestSynthetic:
    """Test regime-structured synthetic clients"""

    def test_labels(self):
        """Test 2 regimes x 3 clients gives six clients labelled by regime"""
        clients, labels = generate_synthetic(SyntheticSpec(n_regimes=2, clients_per_regime=3, seed=0))
        assert len(clients) == 6
        np.testing.assert_array_equal(labels, [0, 0, 0, 1, 1, 1])

    def test_noise_free_target(self):
        """Test noise 0 gives y = X beta exactly"""
        spec = SyntheticSpec(n_regimes=2, clients_per_regime=1, noise=0.0, seed=4)
        clients, labels = generate_synthetic(spec)
        betas = spec.regime_coefficients()
        for client, regime in zip(clients, labels):
            np.testing.assert_array_equal(client.y, client.X @ betas[regime])

    def test_overlapping_regimes_rejected(self):
        """Test overlapping dominant features are rejected"""
        spec = SyntheticSpec(n_regimes=2, dominant_features=[[0, 1], [1, 2]])
        with pytest.raises(DatasetError) as info:
            generate_synthetic(spec)
        assert info.value.error_code == "DATA_006"

    def test_single_client_regime(self):
        """Test per-regime counts allow a lone outlier client"""
        clients, labels = generate_synthetic(SyntheticSpec(n_regimes=3, clients_per_regime=[2, 2, 1], seed=1))
        assert len(clients) == 5
        assert list(labels).count(2) == 1

    def test_importance_concentrates_on_regime(self):
        """Test a regime-0 client puts most importance on regime-0 features"""
        spec = SyntheticSpec(n_regimes=2, clients_per_regime=1, samples_per_client=200, seed=2)
        clients, _ = generate_synthetic(spec)
        importance = importance_distribution(clients[0].X_train, clients[0].y_train, GbtConfig(seed=2))
        assert importance[spec.regime_features()[0]].sum() >= 0.8


class TestRegionsAndLoader:
    """Test reference data and the CSV pipeline"""

    def test_fourteen_regions(self):
        """Test the reference table lists fourteen regions"""
        assert len(REGION_REFERENCE) == 14
        assert reference_sensitivity("Central America") == pytest.approx(0.0185)
        assert reference_sensitivity("Atlantis") is None

    def test_build_clients_from_csv(self, tmp_path):
        """Test the CSV pipeline yields one client per region with shared features"""
        rng = np.random.default_rng(0)
        rows = []
        for region in ("North", "South"):
            for _ in range(40):
                price = rng.uniform(1, 10)
                rows.append({"region": region, "price": price, "noise": rng.normal(),
                             "sales": 3 * price + rng.normal(scale=0.1)})
        path = tmp_path / "demand.csv"
        pd.DataFrame(rows).to_csv(path, index=False)
        schema = {"region": "categorical", "price": "numeric", "noise": "numeric", "sales": "numeric"}
        schema_path = tmp_path / "schema.json"
        schema_path.write_text(json.dumps(schema), encoding="utf-8")

        clients = build_clients_from_csv(path, schema_path, "region", "sales", seed=1)
        assert [c.client_id for c in clients] == ["North", "South"]
        assert "price" in clients[0].feature_names
        assert clients[0].feature_names == clients[1].feature_names
