"""Command-line entry points.

Exit codes: 0 success, 2 config error, 3 data error, 4 missing upstream
artifact.
"""

from __future__ import annotations

import logging
import sys

import click

from .config import load_config
from .errors import ConfigError, MissingArtifactError, TrendmeterError
from .pipeline import (
    cmd_chart,
    cmd_evaluate,
    cmd_ingest,
    cmd_run_all,
    cmd_screen,
    cmd_train,
    run_lock,
)

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_MISSING = 4

_CONFIG_OPTIONS = [
    click.option("--config", "config_path", required=True,
                 type=click.Path(), help="Pipeline config file (YAML)."),
    click.option("--mode", type=click.Choice(["baseline", "proposed", "both"]),
                 default=None, help="Override run.mode."),
    click.option("--group-by", type=click.Choice(["none", "category"]),
                 default=None, help="Override run.group_by."),
    click.option("--seed", type=int, default=None, help="Override model.seed."),
    click.option("--out", "out_dir", type=click.Path(), default=None,
                 help="Override run.out_dir."),
]


def _with_config_options(func):
    for option in reversed(_CONFIG_OPTIONS):
        func = option(func)
    return func


def _run(stage, config_path, **overrides):
    try:
        cfg = load_config(config_path, **overrides)
        with run_lock(cfg.out_dir):
            result = stage(cfg)
        click.echo(f"done: {result}")
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except MissingArtifactError as exc:
        click.echo(f"missing artifact: {exc}", err=True)
        sys.exit(EXIT_MISSING)
    except TrendmeterError as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(EXIT_DATA)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose):
    """Search-trend occupancy proxies for building energy forecasting."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@_with_config_options
def ingest(config_path, mode, group_by, seed, out_dir):
    """Load, clean, and cache the raw datasets."""
    _run(cmd_ingest, config_path, mode=mode, group_by=group_by, seed=seed,
         out_dir=out_dir)


@main.command()
@_with_config_options
def screen(config_path, mode, group_by, seed, out_dir):
    """Extract calendar signals and screen topics per meter."""
    _run(cmd_screen, config_path, mode=mode, group_by=group_by, seed=seed,
         out_dir=out_dir)


@main.command()
@_with_config_options
def train(config_path, mode, group_by, seed, out_dir):
    """Train the boosted-tree bundles."""
    _run(cmd_train, config_path, mode=mode, group_by=group_by, seed=seed,
         out_dir=out_dir)


@main.command()
@_with_config_options
def evaluate(config_path, mode, group_by, seed, out_dir):
    """Compare baseline and proposed predictions; write report tables."""
    _run(cmd_evaluate, config_path, mode=mode, group_by=group_by, seed=seed,
         out_dir=out_dir)


@main.command("run-all")
@_with_config_options
def run_all(config_path, mode, group_by, seed, out_dir):
    """Run the whole pipeline: ingest, screen, train, evaluate."""
    _run(cmd_run_all, config_path, mode=mode, group_by=group_by, seed=seed,
         out_dir=out_dir)


@main.command()
@_with_config_options
def chart(config_path, mode, group_by, seed, out_dir):
    """Emit static charts from cached artifacts."""
    _run(cmd_chart, config_path, mode=mode, group_by=group_by, seed=seed,
         out_dir=out_dir)


@main.command("make-synthetic")
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Directory to write the synthetic corpus into.")
@click.option("--seed", type=int, default=42, show_default=True)
def make_synthetic(out_dir, seed):
    """Generate the synthetic 10-meter corpus and a ready-to-run config."""
    from .synthetic import generate_corpus

    paths = generate_corpus(out_dir, seed=seed)
    click.echo(f"synthetic corpus written; config at {paths['config']}")


if __name__ == "__main__":
    main()
