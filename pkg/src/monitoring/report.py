"""
Comparison reports across training methods
"""

import json
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger

from ..clustering.bubbles import BubbleAssignment
from ..core.exceptions import EvaluationError
from .evaluation import ClientEvaluation, MetricTriple

METHOD_ORDER = ("local", "pooled", "pa_cfl")
EXCLUDED_MARK = "-"
CSV_COLUMNS = ["client", "bubble", "method", "rmse", "mae", "r2"]


def _method_rank(method: str) -> int:
    return METHOD_ORDER.index(method) if method in METHOD_ORDER else len(METHOD_ORDER)


def format_r2(r2: Optional[float]) -> str:
    """R² as a percentage string, "nan" when undefined"""
    return "nan" if r2 is None else f"{r2 * 100:.2f}%"


@dataclass
class ExperimentReport:
    """
    Per-client metrics for every method

    ``results[client][method]`` is None for a client excluded from that
    method (a singleton bubble under pa_cfl).
    """
    methods: List[str]
    clients: List[str]
    results: Dict[str, Dict[str, Optional[MetricTriple]]]
    bubbles: Dict[str, Optional[int]] = field(default_factory=dict)
    excluded: List[str] = field(default_factory=list)
    deltas: Dict[str, Dict[str, Optional[float]]] = field(default_factory=dict)
    seed: int = 0
    config: Dict[str, Any] = field(default_factory=dict)
    assignment: Optional[Dict[str, Any]] = None
    wall_clock: float = 0.0

    def metric(self, client: str, method: str) -> Optional[MetricTriple]:
        return self.results[client].get(method)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "methods": list(self.methods),
            "clients": [
                {
                    "client": client,
                    "bubble": self.bubbles.get(client),
                    "excluded": client in self.excluded,
                    "metrics": {
                        method: (None if self.results[client].get(method) is None
                                 else self.results[client][method].to_dict())
                        for method in self.methods
                    },
                }
                for client in self.clients
            ],
            "deltas_vs_local": self.deltas,
            "assignment": self.assignment,
            "config": self.config,
            "wall_clock_seconds": self.wall_clock,
        }

    def to_frame(self) -> pd.DataFrame:
        """One row per client and method, formatted like the published comparison tables"""
        rows = []
        for client in self.clients:
            bubble = self.bubbles.get(client)
            for method in self.methods:
                triple = self.results[client].get(method)
                if triple is None:
                    rmse = mae = r2 = EXCLUDED_MARK
                else:
                    rmse, mae, r2 = f"{triple.rmse:.6f}", f"{triple.mae:.6f}", format_r2(triple.r2)
                rows.append({
                    "client": client,
                    "bubble": "" if bubble is None else str(bubble),
                    "method": method,
                    "rmse": rmse,
                    "mae": mae,
                    "r2": r2,
                })
        return pd.DataFrame(rows, columns=CSV_COLUMNS)

    def to_csv(self) -> str:
        return self.to_frame().to_csv(index=False, lineterminator="\n")

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _mean_or_none(values: Iterable[float]) -> Optional[float]:
    values = list(values)
    return float(np.mean(values)) if values else None


def compute_deltas(
    results: Mapping[str, Mapping[str, Optional[MetricTriple]]],
    methods: Sequence[str],
    baseline: str = "local",
) -> Dict[str, Dict[str, Optional[float]]]:
    """
    Mean change of each method against the baseline, over clients scored by both

    r2_improvement is in percentage points; rmse/mae reductions are mean
    percentages of the baseline error.
    """
    if baseline not in methods:
        return {}

    deltas: Dict[str, Dict[str, Optional[float]]] = {}
    for method in methods:
        if method == baseline:
            continue
        r2_gain, rmse_cut, mae_cut = [], [], []
        for per_method in results.values():
            base, other = per_method.get(baseline), per_method.get(method)
            if base is None or other is None:
                continue
            if base.r2 is not None and other.r2 is not None:
                r2_gain.append((other.r2 - base.r2) * 100.0)
            if base.rmse > 0:
                rmse_cut.append((base.rmse - other.rmse) / base.rmse * 100.0)
            if base.mae > 0:
                mae_cut.append((base.mae - other.mae) / base.mae * 100.0)
        deltas[method] = {
            "r2_improvement": _mean_or_none(r2_gain),
            "rmse_reduction_pct": _mean_or_none(rmse_cut),
            "mae_reduction_pct": _mean_or_none(mae_cut),
        }
    return deltas


def build_report(
    evaluations: Mapping[str, Sequence[ClientEvaluation]],
    assignment: Optional[BubbleAssignment] = None,
    excluded: Sequence[str] = (),
    seed: int = 0,
    config: Optional[Dict[str, Any]] = None,
    wall_clock: float = 0.0,
) -> ExperimentReport:
    """
    Assemble the comparison table

    Args:
        evaluations: Method -> per-client evaluations
        assignment: Bubble assignment behind pa_cfl, if it ran
        excluded: Clients excluded from pa_cfl
        seed: Global seed
        config: Config echo
        wall_clock: Run duration in seconds

    Returns:
        ExperimentReport: The report
    """
    methods = sorted(evaluations, key=lambda m: (_method_rank(m), m))
    clients: List[str] = []
    results: Dict[str, Dict[str, Optional[MetricTriple]]] = {}
    splits: Dict[str, str] = {}

    for method in methods:
        for evaluation in evaluations[method]:
            client = evaluation.client_id
            if client not in results:
                clients.append(client)
                results[client] = {}
            known = splits.setdefault(client, evaluation.split)
            if known != evaluation.split:
                raise EvaluationError(
                    f"Client '{client}' was evaluated on different test splits", "EVAL_002",
                    {"method": method},
                )
            results[client][method] = evaluation.metrics

    if assignment is not None:
        for client in assignment.client_ids:
            if client not in results:
                clients.append(client)
                results[client] = {}

    flagged = set(excluded)
    excluded = [client for client in clients if client in flagged]
    for client in excluded:
        results[client]["pa_cfl"] = None

    report = ExperimentReport(
        methods=methods,
        clients=clients,
        results=results,
        bubbles={c: assignment.labels.get(c) for c in clients} if assignment is not None else {},
        excluded=excluded,
        deltas=compute_deltas(results, methods),
        seed=seed,
        config=dict(config or {}),
        assignment=assignment.to_dict() if assignment is not None else None,
        wall_clock=wall_clock,
    )
    logger.info(f"Report: {len(clients)} clients x {len(methods)} methods, {len(excluded)} excluded")
    return report


def summarize_repeats(reports: Sequence[ExperimentReport]) -> pd.DataFrame:
    """
    Mean metrics over repeated runs, per client and method

    Runs where the client was excluded are counted but not averaged.
    """
    if not reports:
        raise EvaluationError("No reports to summarize", "EVAL_001")

    keys: List[tuple] = []
    collected: Dict[tuple, Dict[str, list]] = {}
    for report in reports:
        for client in report.clients:
            for method in report.methods:
                key = (client, method)
                if key not in collected:
                    keys.append(key)
                    collected[key] = {"rmse": [], "mae": [], "r2": [], "excluded": []}
                triple = report.results[client].get(method)
                if triple is None:
                    collected[key]["excluded"].append(report.seed)
                    continue
                collected[key]["rmse"].append(triple.rmse)
                collected[key]["mae"].append(triple.mae)
                if triple.r2 is not None:
                    collected[key]["r2"].append(triple.r2)

    rows = []
    for client, method in keys:
        bucket = collected[(client, method)]
        r2 = _mean_or_none(bucket["r2"])
        rmse = _mean_or_none(bucket["rmse"])
        mae = _mean_or_none(bucket["mae"])
        rows.append({
            "client": client,
            "method": method,
            "rmse": EXCLUDED_MARK if rmse is None else f"{rmse:.6f}",
            "mae": EXCLUDED_MARK if mae is None else f"{mae:.6f}",
            "r2": EXCLUDED_MARK if rmse is None else format_r2(r2),
            "runs": len(bucket["rmse"]),
            "excluded_runs": len(bucket["excluded"]),
        })
    return pd.DataFrame(rows)
