"""``verify`` subcommands."""

import typer

from desitter_kg.src.commands.common import ConfigOption, OutputDirOption, SeedOption, execute_config
from desitter_kg.src.schema import RunKind

app = typer.Typer(help="Check decay rates, kernel-integral bounds and hypergeometric limits.", no_args_is_help=True)


@app.command("decay")
def decay(config: ConfigOption, output_dir: OutputDirOption = None, seed: SeedOption = None) -> None:
    """Fit decay rates of linear solutions and compare with the predicted rates."""
    execute_config(config, RunKind.VERIFY_DECAY, output_dir, seed)


@app.command("bounds")
def bounds(config: ConfigOption, output_dir: OutputDirOption = None, seed: SeedOption = None) -> None:
    """Ratios of kernel integrals to their bounds under quadrature refinement."""
    execute_config(config, RunKind.VERIFY_BOUNDS, output_dir, seed)


@app.command("appendix")
def appendix(config: ConfigOption, output_dir: OutputDirOption = None, seed: SeedOption = None) -> None:
    """Hypergeometric limits and the auxiliary power-integral bounds."""
    execute_config(config, RunKind.VERIFY_APPENDIX, output_dir, seed)
