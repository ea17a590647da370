"""``lifespan`` subcommands."""

import typer

from desitter_kg.src.commands.common import ConfigOption, OutputDirOption, SeedOption, execute_config
from desitter_kg.src.schema import RunKind

app = typer.Typer(help="Measure blow-up times against the data size.", no_args_is_help=True)


@app.command("sweep")
def sweep(config: ConfigOption, output_dir: OutputDirOption = None, seed: SeedOption = None) -> None:
    """Blow-up time per eps, least-squares fit against ln(1/eps) and the ODE control case."""
    execute_config(config, RunKind.LIFESPAN_SWEEP, output_dir, seed)
