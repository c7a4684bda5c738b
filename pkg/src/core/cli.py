"""
Command-line interface for BubbleFed
"""

import sys
from typing import Optional

import click
from loguru import logger

from ..monitoring.logger import setup_logging
from .app import run_repeated, run_sweep
from .config import ALL_METHODS, ExperimentConfig, load_config
from .exceptions import BubbleFedException, StageError


def _methods(value: Optional[str]):
    if value is None:
        return None
    methods = [part.strip() for part in value.split(",") if part.strip()]
    unknown = sorted(set(methods) - set(ALL_METHODS))
    if unknown:
        raise click.BadParameter(f"unknown method(s) {unknown}; choose from {ALL_METHODS}")
    return methods


def _epsilon(value: Optional[str]):
    if value is None:
        return None
    try:
        return float(value)
    except ValueError:
        return value


def _prepare(config_path, epsilon, k_override, seed, out, methods, repeats, workers,
             export_clean_importance) -> ExperimentConfig:
    config = load_config(config_path)
    config = config.with_overrides(
        epsilon=_epsilon(epsilon),
        seed=seed,
        output_dir=out,
        methods=_methods(methods),
        repeats=repeats,
        workers=workers,
        export_clean_importance=True if export_clean_importance else None,
    )
    if k_override is not None:
        config = config.with_overrides(k_override=k_override)
    setup_logging(config.monitoring.log_level, config.monitoring.log_file, config.monitoring.serialize)
    return config


def _fail(error: BubbleFedException) -> None:
    stage = f" in stage '{error.stage}'" if isinstance(error, StageError) else ""
    click.echo(f"error{stage} [{error.error_code}]: {error.message}", err=True)
    sys.exit(2 if isinstance(error, StageError) else 1)


run_options = [
    click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                 help="Experiment document (YAML or JSON)"),
    click.option("--epsilon", default=None, help="Privacy budget or preset (high, moderate, low)"),
    click.option("--seed", type=click.IntRange(min=0), default=None, help="Global seed"),
    click.option("--out", default=None, help="Output directory"),
    click.option("--methods", default=None, help="Comma-separated subset of local,pooled,pa_cfl"),
    click.option("--repeats", type=click.IntRange(min=1), default=None, help="Number of consecutive seeds"),
    click.option("--workers", type=click.IntRange(min=1), default=None, help="Threads for per-client stages"),
    click.option("--export-clean-importance", is_flag=True, default=False,
                 help="Also write pre-noise importance vectors (debug only)"),
]


def with_run_options(fn):
    for option in reversed(run_options):
        fn = option(fn)
    return fn


@click.group()
@click.version_option("1.0.0", prog_name="bubblefed")
def cli():
    """BubbleFed: privacy-adaptive clustered federated demand forecasting"""


@cli.command()
@with_run_options
@click.option("--k-override", type=click.IntRange(min=1), default=None, help="Force the number of bubbles")
def run(config_path, epsilon, seed, out, methods, repeats, workers, export_clean_importance, k_override):
    """Run one experiment (or several seeds with --repeats)"""
    try:
        config = _prepare(config_path, epsilon, k_override, seed, out, methods, repeats, workers,
                          export_clean_importance)
        reports, summary = run_repeated(config)
    except BubbleFedException as e:
        _fail(e)
        return

    if len(reports) == 1:
        click.echo(reports[0].to_csv(), nl=False)
    else:
        click.echo(summary.to_csv(index=False), nl=False)
    logger.info(f"Artifacts in {config.output_dir}")


@cli.command()
@with_run_options
@click.option("--epsilons", default="high,moderate,low", help="Comma-separated budgets or presets")
@click.option("--k-values", default="", help="Comma-separated bubble counts; empty for automatic selection")
def sweep(config_path, epsilon, seed, out, methods, repeats, workers, export_clean_importance, epsilons, k_values):
    """Grid over privacy levels and bubble counts"""
    try:
        config = _prepare(config_path, epsilon, None, seed, out, methods, repeats, workers,
                          export_clean_importance)
        budgets = [_epsilon(part.strip()) for part in epsilons.split(",") if part.strip()]
        ks = [int(part) for part in k_values.split(",") if part.strip()] or [None]
        frame = run_sweep(config, budgets, ks)
    except BubbleFedException as e:
        _fail(e)
        return
    except ValueError as e:
        raise click.BadParameter(str(e))

    click.echo(frame.to_csv(index=False), nl=False)


def main():
    cli(prog_name="bubblefed")
