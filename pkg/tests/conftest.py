"""
Shared fixtures for BubbleFed tests
"""

import logging

import pytest
from loguru import logger

from src.data.synthetic import SyntheticSpec, generate_synthetic
from src.models.forecaster import ForecasterConfig


@pytest.fixture
def caplog(caplog):
    """Route loguru records into pytest's caplog"""
    class PropagateHandler(logging.Handler):
        def emit(self, record):
            logging.getLogger(record.name).handle(record)

    handler_id = logger.add(PropagateHandler(), format="{message}", level="DEBUG")
    yield caplog
    logger.remove(handler_id)


@pytest.fixture
def tiny_config():
    """Small deterministic forecaster for fast tests"""
    return ForecasterConfig(
        n_layers=1, n_heads=2, model_dim=8, dropout_rate=0.0, sequence_length=1,
        learning_rate=0.01, batch_size=16, epochs=5, seed=3, input_dim=4,
    )


@pytest.fixture
def two_regime_clients():
    """Four clients from two disjoint regimes, two per regime"""
    spec = SyntheticSpec(n_regimes=2, clients_per_regime=2, samples_per_client=60,
                         features_per_regime=2, noise=0.1, seed=11)
    clients, labels = generate_synthetic(spec)
    return clients, labels
