"""
Flat model weight vectors with a named layout
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np

from ..core.exceptions import ModelError

Layout = Tuple[Tuple[str, Tuple[int, ...]], ...]


@dataclass
class ModelWeights:
    """
    Every trainable parameter concatenated in canonical order

    ``layout`` lists (parameter name, shape) pairs in the order the values
    are laid out, which is the module's ``named_parameters`` order.
    """
    values: np.ndarray
    layout: Layout

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        self.layout = tuple((str(name), tuple(int(s) for s in shape)) for name, shape in self.layout)
        expected = sum(int(np.prod(shape)) for _, shape in self.layout)
        if self.values.size != expected:
            raise ModelError(
                f"Weight vector has {self.values.size} entries, layout needs {expected}", "MODEL_005",
            )
        if not np.isfinite(self.values).all():
            raise ModelError("Weight vector contains non-finite entries", "MODEL_005")

    @property
    def size(self) -> int:
        return self.values.size

    def same_layout(self, other: "ModelWeights") -> bool:
        return self.layout == other.layout

    def copy(self) -> "ModelWeights":
        return ModelWeights(self.values.copy(), self.layout)

    def with_values(self, values: np.ndarray) -> "ModelWeights":
        return ModelWeights(values, self.layout)

    def distance(self, other: "ModelWeights") -> float:
        """L2 norm of the difference"""
        if not self.same_layout(other):
            raise ModelError("Cannot compare weights with different layouts", "MODEL_005")
        return float(np.linalg.norm(self.values - other.values))

    def unflatten(self) -> Dict[str, np.ndarray]:
        """Parameter name -> array view"""
        tensors = {}
        offset = 0
        for name, shape in self.layout:
            count = int(np.prod(shape))
            tensors[name] = self.values[offset:offset + count].reshape(shape)
            offset += count
        return tensors

    @classmethod
    def flatten(cls, tensors: Dict[str, np.ndarray], layout: Layout) -> "ModelWeights":
        """Inverse of ``unflatten``"""
        parts = []
        for name, shape in layout:
            array = np.asarray(tensors[name], dtype=np.float64)
            if array.shape != tuple(shape):
                raise ModelError(f"Parameter {name} has shape {array.shape}, expected {shape}", "MODEL_005")
            parts.append(array.reshape(-1))
        return cls(np.concatenate(parts) if parts else np.zeros(0), layout)

    def layout_dict(self) -> Dict[str, Any]:
        return {
            "dtype": "<f8",
            "size": self.size,
            "parameters": [{"name": name, "shape": list(shape)} for name, shape in self.layout],
        }


def save_weights(weights: ModelWeights, path: Union[str, Path]) -> Tuple[Path, Path]:
    """
    Write weights as little-endian float64 plus a JSON layout sidecar

    Returns:
        Tuple of the binary path and the sidecar path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sidecar = path.with_suffix(".json")
    binary, layout = encode_weights(weights)
    path.write_bytes(binary)
    sidecar.write_bytes(layout)
    return path, sidecar


def encode_weights(weights: ModelWeights) -> Tuple[bytes, bytes]:
    """The on-disk form: little-endian float64 values and the UTF-8 JSON layout sidecar"""
    layout = json.dumps(weights.layout_dict(), indent=2, sort_keys=True) + "\n"
    return weights.values.astype("<f8").tobytes(), layout.encode("utf-8")


def load_weights(path: Union[str, Path]) -> ModelWeights:
    """Read weights written by ``save_weights``"""
    path = Path(path)
    sidecar = path.with_suffix(".json")
    if not path.exists() or not sidecar.exists():
        raise ModelError(f"Weight file or layout sidecar missing for {path}", "MODEL_005")

    meta = json.loads(sidecar.read_text(encoding="utf-8"))
    layout = tuple((p["name"], tuple(p["shape"])) for p in meta["parameters"])
    values = np.frombuffer(path.read_bytes(), dtype="<f8").astype(np.float64)
    return ModelWeights(values, layout)
