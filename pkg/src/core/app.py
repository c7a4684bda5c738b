"""
Experiment runner for BubbleFed
Wires ingestion, private importance release, bubble clustering, federated
training and evaluation, and writes every artifact of a run
"""

import re
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar, Union

import pandas as pd
from loguru import logger

from ..clustering.bubbles import BubbleAssignment, assign_bubbles
from ..data.loader import build_clients_from_csv
from ..data.partition import ClientDataset
from ..data.synthetic import generate_synthetic
from ..federation.orchestrator import (
    FederationState,
    run_baseline_local,
    run_baseline_pooled,
    run_pa_cfl,
)
from ..models.forecaster import ForecasterConfig
from ..models.training import PreparedClient, prepare_client
from ..monitoring.evaluation import ClientEvaluation, evaluate_client
from ..monitoring.report import ExperimentReport, build_report, summarize_repeats
from ..security.privacy import ClientRelease, PrivacyBudget, client_importance_release
from ..storage.artifacts import ArtifactWriter
from .config import ExperimentConfig
from .exceptions import BubbleFedException, DatasetError, StageError
from .seeding import make_rng

T = TypeVar("T")


def _safe_name(client_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", client_id)


class ExperimentRunner:
    """Runs one experiment (one seed) into one output directory"""

    def __init__(self, config: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None):
        """
        Initialize the runner

        Args:
            config: Validated experiment configuration
            out_dir: Output directory, ``config.output_dir`` when omitted
        """
        self.config = config
        self.seed = config.seed
        self.writer = ArtifactWriter(out_dir if out_dir is not None else config.output_dir)
        self.plan = config.round_plan()
        self.clients: List[ClientDataset] = []
        self.releases: List[ClientRelease] = []
        self.assignment: Optional[BubbleAssignment] = None
        self.states: Dict[str, FederationState] = {}

    def _map(self, fn: Callable[[Any], T], items: Sequence[Any]) -> List[T]:
        if self.config.workers > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                return list(pool.map(fn, items))
        return [fn(item) for item in items]

    def _stage(self, name: str, fn: Callable[[], T]) -> T:
        logger.info(f"Stage '{name}' started")
        try:
            result = fn()
        except Exception as e:
            message = e.message if isinstance(e, BubbleFedException) else f"{type(e).__name__}: {e}"
            logger.error(f"Stage '{name}' failed: {message}")
            self.writer.write_manifest(self.config.echo(), self.seed, status="failed",
                                       failed_stage=name, error=message)
            details = {"cause": getattr(e, "error_code", None)}
            raise StageError(name, message, details=details) from e
        logger.info(f"Stage '{name}' finished")
        return result

    def load_clients(self) -> List[ClientDataset]:
        if self.config.synthetic is not None:
            clients, _ = generate_synthetic(self.config.synthetic_spec())
            return clients

        csv = self.config.csv
        clients = build_clients_from_csv(
            csv.path, csv.schema_path, csv.region_column, csv.target_column,
            test_fraction=csv.test_fraction, seed=self.seed, min_samples=csv.min_samples,
            cardinality_threshold=csv.cardinality_threshold, corr_threshold=csv.corr_threshold,
            p_threshold=csv.p_threshold, top_k=csv.top_k, selection_scope=csv.selection_scope,
        )
        if not clients:
            raise DatasetError("No region has enough rows to form a client", "DATA_003")
        return clients

    def release_importance(self) -> List[ClientRelease]:
        """Client-side: noisy importance per client; only noisy vectors are written by default"""
        budget = PrivacyBudget(self.config.epsilon)
        gbt_config = self.config.gbt_config()
        subsample = self.config.privacy.sensitivity_subsample

        def release(client: ClientDataset) -> ClientRelease:
            return client_importance_release(
                client.client_id, client.X_train, client.y_train, gbt_config, budget,
                make_rng(self.seed, "privacy", client.client_id), sensitivity_subsample=subsample,
            )

        releases = self._map(release, self.clients)
        self.writer.write_importances("importance_noisy.json", [r.noisy for r in releases])
        if self.config.export_clean_importance:
            logger.warning("Exporting clean importance vectors (debug flag set)")
            self.writer.write_importances("importance_clean.json", [r.clean for r in releases])
        return releases

    def cluster(self) -> BubbleAssignment:
        assignment, dm = assign_bubbles(
            [r.noisy for r in self.releases], self.config.clustering_options(), self.config.k_override,
        )
        payload = assignment.to_dict()
        if dm is not None:
            payload["distances"] = dm.d.tolist()
        self.writer.write_json("assignment.json", payload)

        trace = pd.DataFrame(
            [{"k": k, "dbi": value} for k, value in sorted(assignment.dbi_by_k.items())],
            columns=["k", "dbi"],
        )
        self.writer.write_frame("dbi_trace.csv", trace)
        return assignment

    def train(self, prepared: List[PreparedClient], config: ForecasterConfig) -> Dict[str, FederationState]:
        states: Dict[str, FederationState] = {}
        workers = self.config.workers
        for method in self.config.methods:
            if method == "local":
                states[method] = self._stage("local", lambda: run_baseline_local(
                    prepared, config, epochs=self.plan.local_only_epochs, seed=self.seed, workers=workers))
            elif method == "pooled":
                states[method] = self._stage("pooled", lambda: run_baseline_pooled(
                    prepared, self.plan, config, seed=self.seed, workers=workers))
            else:
                states[method] = self._stage("pa_cfl", lambda: run_pa_cfl(
                    prepared, self.assignment, self.plan, config, seed=self.seed, workers=workers))
        return states

    def write_training_artifacts(self) -> None:
        records = []
        for method, state in self.states.items():
            records.extend({"method": method, **record.to_dict()} for record in state.rounds)
            for client, weights in state.weights.items():
                self.writer.write_weights(f"weights/{method}/{_safe_name(client)}.bin", weights)
            for client, losses in state.loss_curves.items():
                self.writer.write_loss_curve(f"curves/{method}/{_safe_name(client)}.csv", losses)
        self.writer.write_jsonl("rounds.jsonl", records)

    def evaluate(self, prepared: List[PreparedClient], config: ForecasterConfig) -> Dict[str, List[ClientEvaluation]]:
        evaluations: Dict[str, List[ClientEvaluation]] = {}
        for method, state in self.states.items():
            evaluations[method] = [
                evaluate_client(state.weights[p.client_id], p, config, method)
                for p in prepared if p.client_id in state.weights
            ]
        return evaluations

    def run(self) -> ExperimentReport:
        """
        Execute the full pipeline

        Returns:
            ExperimentReport: Per-client comparison of the requested methods
        """
        started = time.perf_counter()
        logger.info(f"Experiment seed={self.seed} epsilon={self.config.epsilon} methods={self.config.methods}")

        self.clients = self._stage("data", self.load_clients)
        config = self.config.forecaster_config(input_dim=self.clients[0].n_features)

        if "pa_cfl" in self.config.methods:
            self.releases = self._stage("importance", self.release_importance)
            self.assignment = self._stage("clustering", self.cluster)

        prepared = self._stage("prepare", lambda: self._map(lambda c: prepare_client(c, config), self.clients))
        self.states = self.train(prepared, config)
        self._stage("artifacts", self.write_training_artifacts)
        evaluations = self._stage("evaluation", lambda: self.evaluate(prepared, config))

        excluded = self.states["pa_cfl"].excluded if "pa_cfl" in self.states else []
        report = self._stage("report", lambda: build_report(
            evaluations, self.assignment, excluded, seed=self.seed, config=self.config.echo(),
            wall_clock=time.perf_counter() - started,
        ))
        self.writer.write_text("report.json", report.to_json())
        self.writer.write_text("report.csv", report.to_csv())
        self.writer.write_manifest(self.config.echo(), self.seed)

        logger.info(f"Experiment finished in {report.wall_clock:.1f}s")
        return report


def run_experiment(config: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None) -> ExperimentReport:
    """Run one experiment and write its artifacts"""
    return ExperimentRunner(config, out_dir).run()


def run_repeated(
    config: ExperimentConfig,
    repeats: Optional[int] = None,
    out_dir: Optional[Union[str, Path]] = None,
) -> Tuple[List[ExperimentReport], pd.DataFrame]:
    """
    Run seeds ``seed .. seed + repeats - 1`` and average the metrics

    With more than one repeat each seed writes into ``<out>/seed-<n>`` and
    ``<out>/summary.csv`` holds the per-client means.

    Returns:
        Tuple of the per-seed reports and the summary table
    """
    repeats = repeats or config.repeats
    root = Path(out_dir if out_dir is not None else config.output_dir)

    if repeats == 1:
        report = run_experiment(config, root)
        return [report], summarize_repeats([report])

    reports = []
    for offset in range(repeats):
        seed = config.seed + offset
        logger.info(f"Repeat {offset + 1}/{repeats} (seed {seed})")
        reports.append(run_experiment(config.with_overrides(seed=seed), root / f"seed-{seed}"))

    summary = summarize_repeats(reports)
    writer = ArtifactWriter(root)
    writer.write_frame("summary.csv", summary)
    writer.write_manifest(config.echo(), config.seed)
    return reports, summary


def run_sweep(
    config: ExperimentConfig,
    epsilons: Sequence[Union[float, str]],
    k_overrides: Sequence[Optional[int]] = (None,),
    out_dir: Optional[Union[str, Path]] = None,
) -> pd.DataFrame:
    """
    Privacy-level by cluster-count grid

    Every cell is a full run (with the configured repeats) in its own
    sub-directory; ``sweep.csv`` lists k*, exclusions and mean metrics per cell.

    Returns:
        pd.DataFrame: One row per (epsilon, k override, method)
    """
    root = Path(out_dir if out_dir is not None else config.output_dir)
    rows = []
    for epsilon in epsilons:
        for k_override in k_overrides:
            cell = config.with_overrides(epsilon=epsilon).model_copy(update={"k_override": k_override})
            label = f"eps-{cell.epsilon:g}_k-{'auto' if k_override is None else k_override}"
            logger.info(f"Sweep cell {label}")
            reports, _ = run_repeated(cell, out_dir=root / label)

            for method in reports[0].methods:
                triples = [
                    r.results[c][method] for r in reports for c in r.clients
                    if r.results[c].get(method) is not None
                ]
                r2_values = [t.r2 for t in triples if t.r2 is not None]
                rows.append({
                    "epsilon": cell.epsilon,
                    "k_override": "" if k_override is None else k_override,
                    "method": method,
                    "k_star": ";".join(str(r.assignment["k_star"]) for r in reports if r.assignment),
                    "excluded": sum(len(r.excluded) for r in reports),
                    "rmse": sum(t.rmse for t in triples) / len(triples) if triples else None,
                    "mae": sum(t.mae for t in triples) / len(triples) if triples else None,
                    "r2": sum(r2_values) / len(r2_values) if r2_values else None,
                })

    frame = pd.DataFrame(rows)
    writer = ArtifactWriter(root)
    writer.write_frame("sweep.csv", frame)
    writer.write_manifest(config.echo(), config.seed)
    return frame
