"""
Custom exceptions for BubbleFed
"""

from typing import Optional, Dict, Any


class BubbleFedException(Exception):
    """Base exception class for BubbleFed"""

    def __init__(self, message: str, error_code: Optional[str] = None, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.error_code = error_code
        self.details = details or {}


class ConfigurationError(BubbleFedException):
    """Exception raised for configuration errors"""
    pass


class DatasetError(BubbleFedException):
    """Raised when ingestion, encoding or partitioning fails"""
    pass


class BoostingError(BubbleFedException):
    """Raised when tree-ensemble training or sensitivity estimation fails"""
    pass


class PrivacyError(BubbleFedException):
    """Exception raised for privacy-related errors"""
    pass


class ClusteringError(BubbleFedException):
    """Raised when distance computation or bubble assignment fails"""
    pass


class ModelError(BubbleFedException):
    """Exception raised for forecaster errors"""
    pass


class DivergenceError(ModelError):
    """Raised when training loss becomes non-finite

    ``last_weights`` holds the last weights whose loss was finite.
    """

    def __init__(self, message: str, last_weights: Any = None, error_code: str = "MODEL_004",
                 details: Optional[Dict[str, Any]] = None):
        super().__init__(message, error_code, details)
        self.last_weights = last_weights


class FederationError(BubbleFedException):
    """Raised when federated rounds or aggregation fail"""
    pass


class EvaluationError(BubbleFedException):
    """Raised when metrics or reports cannot be built"""
    pass


class StageError(BubbleFedException):
    """Raised by the experiment runner when a pipeline stage fails"""

    def __init__(self, stage: str, message: str, error_code: str = "STAGE_001",
                 details: Optional[Dict[str, Any]] = None):
        super().__init__(f"[{stage}] {message}", error_code, details)
        self.stage = stage


# Error code mappings
ERROR_CODES = {
    'CONFIG_001': 'Configuration file not found',
    'CONFIG_002': 'Invalid configuration format',
    'CONFIG_003': 'Invalid configuration value',
    'DATA_001': 'Input file not found',
    'DATA_002': 'Header does not match schema',
    'DATA_003': 'No rows survived ingestion',
    'DATA_004': 'Column has no usable values',
    'DATA_005': 'Invalid dataset argument',
    'DATA_006': 'Overlapping regime features',
    'GBT_001': 'Too few samples for tree ensemble',
    'GBT_002': 'Too few samples for sensitivity estimation',
    'GBT_003': 'Importance vector is not a distribution',
    'PRIVACY_001': 'Privacy budget must be positive',
    'PRIVACY_002': 'Noise scale must be non-negative',
    'CLUSTER_001': 'Importance vectors have different lengths',
    'CLUSTER_002': 'Cluster count out of range',
    'CLUSTER_003': 'Empty cluster count range',
    'CLUSTER_004': 'Too few clients for clustering',
    'MODEL_001': 'Invalid forecaster configuration',
    'MODEL_002': 'Input shape does not match model',
    'MODEL_003': 'Non-finite activation',
    'MODEL_004': 'Training diverged',
    'MODEL_005': 'Weight layout mismatch',
    'FED_001': 'Weight layouts differ',
    'FED_002': 'No multi-client bubble',
    'FED_003': 'Invalid bubble membership',
    'EVAL_001': 'Prediction length mismatch',
    'EVAL_002': 'Test split mismatch between methods',
    'STAGE_001': 'Pipeline stage failed',
}


def get_error_message(error_code: str) -> str:
    """Get error message for error code"""
    return ERROR_CODES.get(error_code, 'Unknown error')


def create_exception(error_code: str, message: Optional[str] = None, details: Optional[Dict[str, Any]] = None) -> BubbleFedException:
    """Create exception instance from error code"""
    if not message:
        message = get_error_message(error_code)

    # Map error codes to exception classes
    if error_code.startswith('CONFIG_'):
        return ConfigurationError(message, error_code, details)
    elif error_code.startswith('DATA_'):
        return DatasetError(message, error_code, details)
    elif error_code.startswith('GBT_'):
        return BoostingError(message, error_code, details)
    elif error_code.startswith('PRIVACY_'):
        return PrivacyError(message, error_code, details)
    elif error_code.startswith('CLUSTER_'):
        return ClusteringError(message, error_code, details)
    elif error_code == 'MODEL_004':
        return DivergenceError(message, None, error_code, details)
    elif error_code.startswith('MODEL_'):
        return ModelError(message, error_code, details)
    elif error_code.startswith('FED_'):
        return FederationError(message, error_code, details)
    elif error_code.startswith('EVAL_'):
        return EvaluationError(message, error_code, details)
    elif error_code.startswith('STAGE_'):
        return StageError('unknown', message, error_code, details)
    else:
        return BubbleFedException(message, error_code, details)
