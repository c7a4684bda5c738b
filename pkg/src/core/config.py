"""
Configuration management module for BubbleFed
Loads experiment documents (YAML or JSON), validates them and builds domain configs
"""

import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import yaml
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..boosting.gbt import GbtConfig
from ..clustering.bubbles import ClusteringOptions
from ..data.synthetic import SyntheticSpec
from ..federation.orchestrator import RoundPlan
from ..models.forecaster import ForecasterConfig
from ..security.privacy import PrivacyBudget
from .exceptions import BubbleFedException, ConfigurationError

DEFAULT_CONFIG_PATH = Path(__file__).parent.parent.parent / "config" / "config.yaml"
MethodName = Literal["local", "pooled", "pa_cfl"]
ALL_METHODS = ["local", "pooled", "pa_cfl"]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())


class SyntheticSection(StrictModel):
    """Synthetic heterogeneous clients"""
    n_regimes: int = 2
    clients_per_regime: Union[int, List[int]] = 4
    samples_per_client: int = 200
    features_per_regime: int = 4
    n_features: Optional[int] = None
    dominant_features: Optional[List[List[int]]] = None
    coefficients: Optional[List[List[float]]] = None
    noise: float = 0.1
    test_fraction: float = 0.2


class CsvSection(StrictModel):
    """Regional demand CSV"""
    path: str
    schema_path: str
    region_column: str = "Order Region"
    target_column: str = "Sales"
    test_fraction: float = 0.2
    min_samples: int = 10
    cardinality_threshold: int = 16
    corr_threshold: float = 0.95
    p_threshold: float = 0.06
    top_k: Optional[int] = 25
    selection_scope: Literal["global", "per_client"] = "global"


class GbtSection(StrictModel):
    n_trees: int = 50
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 5


class PrivacySection(StrictModel):
    sensitivity_subsample: Optional[int] = Field(default=None, ge=1)


class ClusteringSection(StrictModel):
    metric: Literal["emd", "cosine"] = "emd"
    dbi_mode: Literal["as_written", "standard"] = "standard"
    k_min: int = 2
    k_max: Optional[int] = None
    fast_linkage: bool = False


class ForecasterSection(StrictModel):
    n_layers: int = 3
    n_heads: int = 8
    model_dim: int = 64
    dropout_rate: float = 0.5
    sequence_length: int = 1
    learning_rate: float = 0.001
    batch_size: int = 64
    epochs: int = 50
    ffn_dim: Optional[int] = None


class FederationSection(StrictModel):
    rounds: int = 10
    local_epochs: int = 10
    tolerance: float = 1e-4
    cross_bubble_aggregation: bool = False


class MonitoringSection(StrictModel):
    log_level: Literal["TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"] = "INFO"
    log_file: Optional[str] = None
    serialize: bool = False


class ExperimentConfig(StrictModel):
    """A fully validated experiment document"""
    synthetic: Optional[SyntheticSection] = None
    csv: Optional[CsvSection] = None
    epsilon: float = 10.0
    k_override: Optional[int] = Field(default=None, ge=1)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    output_dir: str = "outputs/run"
    methods: List[MethodName] = Field(default_factory=lambda: list(ALL_METHODS))
    repeats: int = Field(default=1, ge=1)
    workers: int = Field(default=1, ge=1)
    export_clean_importance: bool = False
    gbt: GbtSection = Field(default_factory=GbtSection)
    privacy: PrivacySection = Field(default_factory=PrivacySection)
    clustering: ClusteringSection = Field(default_factory=ClusteringSection)
    forecaster: ForecasterSection = Field(default_factory=ForecasterSection)
    federation: FederationSection = Field(default_factory=FederationSection)
    monitoring: MonitoringSection = Field(default_factory=MonitoringSection)

    @field_validator("epsilon", mode="before")
    @classmethod
    def _resolve_epsilon(cls, value: Any) -> float:
        try:
            return PrivacyBudget.resolve(value).epsilon
        except BubbleFedException as e:
            raise ValueError(e.message)

    @field_validator("methods")
    @classmethod
    def _unique_methods(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("at least one method is required")
        return [method for method in ALL_METHODS if method in value]

    @model_validator(mode="after")
    def _one_source(self) -> "ExperimentConfig":
        if (self.synthetic is None) == (self.csv is None):
            raise ValueError("exactly one data source ('synthetic' or 'csv') is required")
        return self

    def echo(self) -> Dict[str, Any]:
        """JSON-ready copy for manifests and reports"""
        return self.model_dump(mode="json")

    def with_overrides(self, **updates: Any) -> "ExperimentConfig":
        """Revalidated copy with top-level fields replaced (None values are ignored)"""
        data = self.model_dump()
        data.update({key: value for key, value in updates.items() if value is not None})
        return _validate(data)

    def gbt_config(self) -> GbtConfig:
        return GbtConfig(seed=self.seed, **self.gbt.model_dump())

    def forecaster_config(self, input_dim: Optional[int] = None) -> ForecasterConfig:
        return ForecasterConfig(seed=self.seed, input_dim=input_dim, **self.forecaster.model_dump())

    def round_plan(self) -> RoundPlan:
        return RoundPlan(local_only_epochs=self.forecaster.epochs, **self.federation.model_dump())

    def clustering_options(self) -> ClusteringOptions:
        return ClusteringOptions(**self.clustering.model_dump())

    def synthetic_spec(self) -> SyntheticSpec:
        if self.synthetic is None:
            raise ConfigurationError("No synthetic data source configured", "CONFIG_003")
        return SyntheticSpec(seed=self.seed, **self.synthetic.model_dump())


def _validate(data: Any) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or "<root>"
        message = f"Invalid configuration field '{field}': {first['msg']}"
        logger.error(message)
        raise ConfigurationError(message, "CONFIG_003", {"field": field, "errors": len(e.errors())})


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """
    Parse and validate an experiment document

    Args:
        text: YAML or JSON text
        source: Name used in error messages

    Returns:
        ExperimentConfig: Validated config with defaults filled
    """
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        logger.error(f"Error parsing configuration {source}{where}")
        raise ConfigurationError(
            f"Cannot parse {source}{where}: {getattr(e, 'problem', e)}", "CONFIG_002",
            {"line": mark.line + 1 if mark else None, "column": mark.column + 1 if mark else None},
        )

    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{source} must hold a mapping at the top level", "CONFIG_002")
    return _validate(data)


def load_config(config_path: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    """
    Load configuration from a YAML/JSON file

    Relative data paths are resolved against the file's directory and must
    exist. Environment overrides are applied on top.

    Args:
        config_path: Path to the document (``config/config.yaml`` when omitted)

    Returns:
        ExperimentConfig: Loaded configuration
    """
    path = Path(config_path) if config_path is not None else DEFAULT_CONFIG_PATH
    logger.info(f"Loading configuration from {path}")

    if not path.exists():
        logger.error(f"Configuration file not found: {path}")
        raise ConfigurationError(f"Configuration file not found: {path}", "CONFIG_001")

    config = parse_config(path.read_text(encoding="utf-8"), str(path))

    if config.csv is not None:
        resolved = {}
        for key in ("path", "schema_path"):
            value = Path(getattr(config.csv, key))
            if not value.is_absolute():
                value = path.parent / value
            if not value.exists():
                raise ConfigurationError(f"csv.{key} does not exist: {value}", "CONFIG_003", {"field": f"csv.{key}"})
            resolved[key] = str(value)
        config = config.model_copy(update={"csv": config.csv.model_copy(update=resolved)})

    config = apply_environment(config)
    logger.info("Configuration loaded successfully")
    return config


def get_environment_config() -> Dict[str, Any]:
    """
    Get configuration overrides from environment variables

    Returns:
        Dict[str, Any]: Environment configuration
    """
    env_config: Dict[str, Any] = {}

    if os.getenv("BUBBLEFED_SEED"):
        try:
            env_config["seed"] = int(os.getenv("BUBBLEFED_SEED"))
        except ValueError:
            raise ConfigurationError("BUBBLEFED_SEED must be an integer", "CONFIG_003")

    if os.getenv("BUBBLEFED_OUTPUT_DIR"):
        env_config["output_dir"] = os.getenv("BUBBLEFED_OUTPUT_DIR")

    if os.getenv("BUBBLEFED_LOG_LEVEL"):
        env_config["log_level"] = os.getenv("BUBBLEFED_LOG_LEVEL").upper()

    return env_config


def apply_environment(config: ExperimentConfig) -> ExperimentConfig:
    env = get_environment_config()
    if not env:
        return config

    logger.debug(f"Environment overrides: {sorted(env)}")
    log_level = env.pop("log_level", None)
    if log_level is not None:
        data = config.model_dump()
        data["monitoring"]["log_level"] = log_level
        config = _validate(data)
    return config.with_overrides(**env)
