"""Shared plumbing of the subcommands: options, execution and reporting."""

from collections.abc import Callable
from pathlib import Path
from typing import Annotated, Any

import typer
from rich.console import Console
from rich.table import Table

from desitter_kg.src.core.exceptions.exceptions import AppException
from desitter_kg.src.core.runner import RunOutcome, run_experiment
from desitter_kg.src.schema import ExperimentConfig, RunKind, load_config
from desitter_kg.src.settings import settings
from desitter_kg.utils.pylogger import get_python_logger

logger = get_python_logger(settings.PYTHON_LOG_LEVEL)

console = Console()
err_console = Console(stderr=True)

ConfigOption = Annotated[
    Path,
    typer.Option("--config", "-c", help="JSON experiment configuration."),
]
OptionalConfigOption = Annotated[
    Path | None,
    typer.Option("--config", "-c", help="JSON experiment configuration."),
]
OutputDirOption = Annotated[
    str | None,
    typer.Option("--output-dir", "-o", help="Override the configured output directory."),
]
SeedOption = Annotated[
    int | None,
    typer.Option("--seed", help="Override the configured seed."),
]


def _format(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, dict):
        return ", ".join(f"{k}={_format(v)}" for k, v in value.items() if not isinstance(v, (dict, list)))
    return str(value)


def report(outcome: RunOutcome) -> None:
    """Print the pass/fail summary of a run."""
    summary = outcome.summary
    table = Table(title=f"{summary['run']} ({'PASS' if outcome.passed else 'FAIL'})")
    table.add_column("key")
    table.add_column("value", overflow="fold")
    table.add_row("config_hash", summary["config_hash"][:16])
    for key, value in summary["tolerances"].items():
        table.add_row(f"tol.{key}", _format(value))
    for key, value in summary["results"].items():
        if isinstance(value, list):
            table.add_row(key, f"{len(value)} entries")
        else:
            table.add_row(key, _format(value))
    console.print(table)
    console.print(f"artifacts: {len(outcome.artifacts)} written", markup=False)


def fail(error: AppException) -> typer.Exit:
    """Log an application error and build the matching exit."""
    logger.error("Experiment failed", error_code=error.error_code, detail=error.detail_message)
    err_console.print(f"{error.message}: {error.detail_message}", markup=False)
    return typer.Exit(code=error.exit_code)


def execute(cfg: ExperimentConfig) -> None:
    """Run an experiment and exit with its status."""
    try:
        outcome = run_experiment(cfg)
    except AppException as e:
        raise fail(e) from e
    report(outcome)
    raise typer.Exit(code=outcome.exit_code)


def execute_config(
    path: Path,
    run: RunKind,
    output_dir: str | None,
    seed: int | None,
    adjust: Callable[[ExperimentConfig], ExperimentConfig] | None = None,
) -> None:
    """Load a configuration, force its run kind, apply overrides and execute it."""
    try:
        cfg = load_config(path).with_overrides(output_dir=output_dir, seed=seed, run=run)
        if adjust is not None:
            cfg = adjust(cfg)
    except AppException as e:
        raise fail(e) from e
    execute(cfg)
