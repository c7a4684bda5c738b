"""
Transformer encoder regressor for per-client sales forecasting
Embedding, multi-head self-attention blocks and a linear head, in float64
"""

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple, Union

import numpy as np
import torch
from torch import nn
from torch.nn.utils import parameters_to_vector, vector_to_parameters

from ..core.exceptions import ConfigurationError, ModelError
from ..core.seeding import derive_seed, make_torch_generator
from .weights import Layout, ModelWeights

DTYPE = torch.float64
LAYER_NORM_EPS = 1e-5


@dataclass
class ForecasterConfig:
    """Transformer forecaster hyperparameters"""
    n_layers: int = 3
    n_heads: int = 8
    model_dim: int = 64
    dropout_rate: float = 0.5
    sequence_length: int = 1
    learning_rate: float = 0.001
    batch_size: int = 64
    epochs: int = 50
    seed: int = 0
    input_dim: Optional[int] = None
    ffn_dim: Optional[int] = None

    def __post_init__(self):
        if self.n_layers < 1 or self.n_heads < 1 or self.model_dim < 1:
            raise ConfigurationError("Layers, heads and model_dim must be positive", "CONFIG_003")
        if self.model_dim % self.n_heads != 0:
            raise ConfigurationError(
                f"model_dim {self.model_dim} is not divisible by n_heads {self.n_heads}", "CONFIG_003",
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}", "CONFIG_003")
        if self.sequence_length < 1:
            raise ConfigurationError("sequence_length must be at least 1", "CONFIG_003")
        if self.learning_rate < 0 or self.batch_size < 1 or self.epochs < 0:
            raise ConfigurationError("Invalid optimisation settings", "CONFIG_003")
        if self.input_dim is not None and self.input_dim < 1:
            raise ConfigurationError("input_dim must be positive", "CONFIG_003")
        if self.ffn_dim is None:
            self.ffn_dim = 2 * self.model_dim

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.n_heads

    @property
    def lookback(self) -> bool:
        return self.sequence_length > 1

    @property
    def token_dim(self) -> int:
        """Width of one input token: the features, plus a sales slot in lookback mode"""
        if self.input_dim is None:
            raise ModelError("Forecaster input_dim is not set", "MODEL_001")
        return self.input_dim + (1 if self.lookback else 0)

    def with_input_dim(self, input_dim: int) -> "ForecasterConfig":
        return replace(self, input_dim=input_dim)


@dataclass
class AttentionTrace:
    """Attention weights per layer, each shaped (batch, heads, T, T)"""
    layers: List[np.ndarray] = field(default_factory=list)

    def head(self, layer: int, head: int) -> np.ndarray:
        return self.layers[layer][:, head]

    def is_stochastic(self, atol: float = 1e-6) -> bool:
        """Every row non-negative and summing to one"""
        return all(
            (alpha >= 0).all() and np.allclose(alpha.sum(axis=-1), 1.0, atol=atol)
            for alpha in self.layers
        )


def attention(
    Q: Union[torch.Tensor, np.ndarray],
    K: Union[torch.Tensor, np.ndarray],
    V: Union[torch.Tensor, np.ndarray],
    trace: Optional[List[torch.Tensor]] = None,
) -> torch.Tensor:
    """
    Scaled dot-product attention

    alpha = softmax(Q K^T / sqrt(d)) row-wise, output = alpha V. Leading
    batch/head dimensions are broadcast.

    Args:
        Q: Queries (..., T, d)
        K: Keys (..., T, d)
        V: Values (..., T, d_v)
        trace: List receiving alpha when given

    Returns:
        torch.Tensor: Attention output (..., T, d_v)
    """
    Q, K, V = (torch.as_tensor(m, dtype=DTYPE) for m in (Q, K, V))
    scores = Q @ K.transpose(-2, -1) / math.sqrt(Q.shape[-1])
    alpha = torch.softmax(scores, dim=-1)
    if trace is not None:
        trace.append(alpha.detach())
    return alpha @ V


def sinusoidal_encoding(length: int, dim: int) -> torch.Tensor:
    """Classic sin/cos position table of shape (length, dim)"""
    position = torch.arange(length, dtype=DTYPE).unsqueeze(1)
    div_term = torch.exp(torch.arange(0, dim, 2, dtype=DTYPE) * (-math.log(10000.0) / dim))
    table = torch.zeros(length, dim, dtype=DTYPE)
    table[:, 0::2] = torch.sin(position * div_term)
    table[:, 1::2] = torch.cos(position * div_term[: dim // 2])
    return table


def _dropout(x: torch.Tensor, rate: float, generator: Optional[torch.Generator]) -> torch.Tensor:
    if generator is None or rate == 0.0:
        return x
    keep = torch.rand(x.shape, generator=generator, dtype=x.dtype) >= rate
    return x * keep / (1.0 - rate)


def _check_finite(x: torch.Tensor, layer: Union[int, str]) -> None:
    if not torch.isfinite(x).all():
        raise ModelError(f"Non-finite activation in layer {layer}", "MODEL_003", {"layer": layer})


class EncoderBlock(nn.Module):
    """Multi-head self-attention and a position-wise feed-forward, each with residual + layer norm"""

    def __init__(self, config: ForecasterConfig):
        super().__init__()
        dim = config.model_dim
        self.n_heads = config.n_heads
        self.head_dim = config.head_dim
        self.query = nn.Linear(dim, dim)
        self.key = nn.Linear(dim, dim)
        self.value = nn.Linear(dim, dim)
        self.output = nn.Linear(dim, dim)
        self.attention_norm = nn.LayerNorm(dim, eps=LAYER_NORM_EPS)
        self.ffn_in = nn.Linear(dim, config.ffn_dim)
        self.ffn_out = nn.Linear(config.ffn_dim, dim)
        self.ffn_norm = nn.LayerNorm(dim, eps=LAYER_NORM_EPS)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        batch, length, _ = x.shape
        return x.view(batch, length, self.n_heads, self.head_dim).transpose(1, 2)

    def forward(self, x, dropout_rate=0.0, generator=None, trace=None):
        batch, length, dim = x.shape
        heads = attention(self._split(self.query(x)), self._split(self.key(x)), self._split(self.value(x)), trace)
        mixed = self.output(heads.transpose(1, 2).reshape(batch, length, dim))
        x = self.attention_norm(x + _dropout(mixed, dropout_rate, generator))

        hidden = torch.relu(self.ffn_in(x))
        return self.ffn_norm(x + _dropout(self.ffn_out(hidden), dropout_rate, generator))


class TransformerRegressor(nn.Module):
    """Token embedding, encoder blocks, and a scalar head on the last token"""

    def __init__(self, config: ForecasterConfig):
        super().__init__()
        self.config = config
        self.embedding = nn.Linear(config.token_dim, config.model_dim)
        self.blocks = nn.ModuleList([EncoderBlock(config) for _ in range(config.n_layers)])
        self.head = nn.Linear(config.model_dim, 1)
        if config.lookback:
            self.register_buffer("positions", sinusoidal_encoding(config.sequence_length, config.model_dim))
        else:
            self.positions = None

    def forward(self, tokens: torch.Tensor, generator: Optional[torch.Generator] = None,
                trace: Optional[List[torch.Tensor]] = None) -> torch.Tensor:
        """
        Predict one value per sequence

        Args:
            tokens: (batch, T, token_dim)
            generator: Dropout randomness; no dropout when None
            trace: List receiving every head's attention weights

        Returns:
            torch.Tensor: (batch,) predictions
        """
        x = self.embedding(tokens)
        if self.positions is not None:
            x = x + self.positions[: x.shape[1]]
        _check_finite(x, "embedding")

        for index, block in enumerate(self.blocks):
            x = block(x, self.config.dropout_rate, generator, trace)
            _check_finite(x, index)

        out = self.head(x[:, -1, :]).squeeze(-1)
        _check_finite(out, "head")
        return out


def build_module(config: ForecasterConfig) -> TransformerRegressor:
    return TransformerRegressor(config).to(DTYPE)


def module_layout(module: nn.Module) -> Layout:
    return tuple((name, tuple(param.shape)) for name, param in module.named_parameters())


def init_weights(config: ForecasterConfig) -> ModelWeights:
    """
    Deterministic initial weights for a config

    Linear maps draw from U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases start at
    zero and layer norms at unit scale, zero shift. Clients sharing the seed
    start from identical weights.
    """
    module = build_module(config)
    generator = make_torch_generator(derive_seed(config.seed, "init"))
    with torch.no_grad():
        for sub in module.modules():
            if isinstance(sub, nn.Linear):
                bound = 1.0 / math.sqrt(sub.in_features)
                sub.weight.uniform_(-bound, bound, generator=generator)
                sub.bias.zero_()
            elif isinstance(sub, nn.LayerNorm):
                sub.weight.fill_(1.0)
                sub.bias.zero_()
    return extract_weights(module)


def extract_weights(module: nn.Module) -> ModelWeights:
    values = parameters_to_vector(module.parameters()).detach().cpu().numpy().copy()
    return ModelWeights(values, module_layout(module))


def load_into(module: nn.Module, weights: ModelWeights) -> nn.Module:
    """Copy a flat weight vector into the module's parameters"""
    if module_layout(module) != weights.layout:
        raise ModelError("Weights do not match the model layout", "MODEL_005")
    with torch.no_grad():
        vector_to_parameters(torch.from_numpy(weights.values.copy()), module.parameters())
    return module


def as_tokens(X: Union[np.ndarray, torch.Tensor], config: ForecasterConfig) -> torch.Tensor:
    """Shape a batch into (batch, T, token_dim), validating widths"""
    tokens = torch.as_tensor(X, dtype=DTYPE)
    if tokens.ndim == 2:
        tokens = tokens.unsqueeze(1)
    if tokens.ndim != 3 or tokens.shape[2] != config.token_dim or tokens.shape[1] != config.sequence_length:
        raise ModelError(
            f"Input of shape {tuple(tokens.shape)} does not match "
            f"(batch, {config.sequence_length}, {config.token_dim})",
            "MODEL_002",
        )
    return tokens


def forward(
    weights: ModelWeights,
    X: Union[np.ndarray, torch.Tensor],
    config: ForecasterConfig,
    mode: str = "eval",
    generator: Optional[torch.Generator] = None,
    return_trace: bool = False,
) -> Union[np.ndarray, Tuple[np.ndarray, AttentionTrace]]:
    """
    Run the forecaster on a batch

    Args:
        weights: Flat weights for this config
        X: (batch, token_dim) when T = 1, else (batch, T, token_dim)
        config: Forecaster configuration
        mode: "train" applies seeded dropout, "eval" does not
        generator: Dropout randomness for train mode (seeded from config when omitted)
        return_trace: Also return the attention weights

    Returns:
        Predictions, and the AttentionTrace when requested
    """
    if mode not in ("train", "eval"):
        raise ModelError(f"Unknown forward mode '{mode}'", "MODEL_002")

    module = load_into(build_module(config), weights)
    tokens = as_tokens(X, config)
    if mode == "train" and generator is None:
        generator = make_torch_generator(derive_seed(config.seed, "dropout"))

    alphas: List[torch.Tensor] = []
    with torch.no_grad():
        out = module(tokens, generator if mode == "train" else None, alphas if return_trace else None)

    predictions = out.numpy().copy()
    if not return_trace:
        return predictions

    # Blocks append one (batch, heads, T, T) tensor each
    return predictions, AttentionTrace([alpha.numpy().copy() for alpha in alphas])
