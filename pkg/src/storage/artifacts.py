"""
Artifact writer for experiment outputs
Every file of a run goes through one writer that hashes it for the manifest
"""

import hashlib
import json
import platform
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from loguru import logger

from ..boosting.importance import ImportanceDistribution
from ..models.weights import ModelWeights, encode_weights


def _package_versions() -> Dict[str, str]:
    import sklearn
    import scipy
    import torch

    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
        "torch": torch.__version__,
    }


def _json_bytes(payload: Any) -> bytes:
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")


class ArtifactWriter:
    """Serialized writer for one run's output directory"""

    MANIFEST = "manifest.json"

    def __init__(self, out_dir: Union[str, Path]):
        """
        Initialize the writer

        Args:
            out_dir: Run output directory (created if missing)
        """
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.files: Dict[str, Dict[str, Any]] = {}
        self._lock = threading.Lock()
        logger.info(f"Writing artifacts to {self.out_dir}")

    def write_bytes(self, name: str, data: bytes) -> Path:
        """Write a file relative to the output directory and record its hash"""
        path = self.out_dir / name
        with self._lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
            self.files[name] = {"sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)}
        logger.debug(f"Wrote {name} ({len(data)} bytes)")
        return path

    def write_text(self, name: str, text: str) -> Path:
        return self.write_bytes(name, text.encode("utf-8"))

    def write_json(self, name: str, payload: Any) -> Path:
        return self.write_bytes(name, _json_bytes(payload))

    def write_jsonl(self, name: str, records: Iterable[Dict[str, Any]]) -> Path:
        lines = [json.dumps(record, sort_keys=True) for record in records]
        return self.write_text(name, "".join(line + "\n" for line in lines))

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        return self.write_text(name, frame.to_csv(index=False, lineterminator="\n"))

    def write_weights(self, name: str, weights: ModelWeights) -> Path:
        """Little-endian float64 binary plus a ``.json`` layout sidecar"""
        binary, layout = encode_weights(weights)
        path = self.write_bytes(name, binary)
        self.write_bytes(str(Path(name).with_suffix(".json")), layout)
        return path

    def write_loss_curve(self, name: str, losses: Sequence[float]) -> Path:
        frame = pd.DataFrame({"epoch": np.arange(1, len(losses) + 1), "loss": list(losses)})
        return self.write_frame(name, frame)

    def write_importances(self, name: str, distributions: Sequence[ImportanceDistribution]) -> Path:
        return self.write_json(name, [dist.to_dict() for dist in distributions])

    def listed(self) -> List[str]:
        return sorted(self.files)

    def write_manifest(
        self,
        config: Dict[str, Any],
        seed: int,
        status: str = "complete",
        failed_stage: Optional[str] = None,
        error: Optional[str] = None,
    ) -> Path:
        """
        Write manifest.json listing every file written so far with its hash

        A failed run still writes a (partial) manifest naming the failed stage.
        """
        with self._lock:
            files = {name: dict(entry) for name, entry in sorted(self.files.items())}
        manifest = {
            "status": status,
            "failed_stage": failed_stage,
            "error": error,
            "seed": seed,
            "config": config,
            "versions": _package_versions(),
            "files": files,
            "created_at": datetime.now(timezone.utc).isoformat(),
        }
        path = self.out_dir / self.MANIFEST
        path.write_bytes(_json_bytes(manifest))
        logger.info(f"Manifest written ({status}, {len(files)} files)")
        return path
