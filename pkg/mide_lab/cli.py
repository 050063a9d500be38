"""Command line entry point: `mide-lab run | validate | list-experiments`."""

import sys
from pathlib import Path

import click
import structlog

from mide_lab.artifacts import ArtifactWriter, exit_status
from mide_lab.config import config_hash, load_experiment_config
from mide_lab.errors import ConfigError
from mide_lab.experiments import EXPERIMENTS, RunContext, prepare, run_experiment
from mide_lab.logs import log

CONFIG_ERROR_EXIT = 2


def _load(path: Path):
    try:
        config = load_experiment_config(path)
        prepare(config)
    except ConfigError as error:
        log.error("Invalid experiment config", config=str(path), error=str(error))
        click.echo(f"error: {error}", err=True)
        sys.exit(CONFIG_ERROR_EXIT)
    return config


@click.group()
def main():
    """Numerical experiments on mixed local/nonlocal integro-differential equations."""


@main.command()
@click.argument("config_path", type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=None, help="Override the config's master seed.")
@click.option(
    "--out-dir",
    type=click.Path(file_okay=False, path_type=Path),
    envvar="MIDE_LAB_OUT_DIR",
    default=None,
    help="Parent directory for run artifacts.",
)
@click.option("--jobs", type=click.IntRange(min=1), default=None, help="Worker threads for randomized trials.")
@click.option("--tol-scale", type=click.FloatRange(min=0.0, min_open=True), default=None)
def run(config_path: Path, seed, out_dir, jobs, tol_scale):
    """Run the experiment described by CONFIG_PATH.

    Exits 0 when every assertion row passes, 1 when one fails and 2 when the
    config is unusable.
    """
    config = _load(config_path)
    overrides = {
        key: value
        for key, value in {"seed": seed, "jobs": jobs, "tol_scale": tol_scale}.items()
        if value is not None
    }
    config = config.model_copy(update=overrides)
    parent = out_dir or config.out_dir or Path("runs")
    target = parent / config.name
    target.mkdir(parents=True, exist_ok=True)

    structlog.contextvars.bind_contextvars(experiment=config.name, kind=config.kind, seed=config.seed)
    try:
        log.info("Starting experiment", out_dir=str(target))
        writer = ArtifactWriter(target)
        ctx = RunContext(config, writer, config.seed, config.jobs, config.tol_scale)
        run_experiment(ctx)
        writer.manifest(config.name, config.kind, config.seed, config_hash(config))
        status = exit_status(target)
        log.info("Finished experiment", status=status, tables=len(writer.tables))
    finally:
        structlog.contextvars.clear_contextvars()
    sys.exit(status)


@main.command()
@click.argument("config_path", type=click.Path(path_type=Path))
def validate(config_path: Path):
    """Check CONFIG_PATH without running anything."""
    config = _load(config_path)
    click.echo(f"{config_path}: {config.kind} experiment {config.name!r} is valid")


@main.command("list-experiments")
def list_experiments():
    """Show the experiment kinds a config may name."""
    for kind, experiment in sorted(EXPERIMENTS.items()):
        click.echo(f"{kind:<12} {experiment.description}")
