"""``solve`` subcommands."""

from enum import Enum
from typing import Annotated

import typer

from desitter_kg.src.commands.common import ConfigOption, OutputDirOption, SeedOption, execute_config
from desitter_kg.src.schema import ExperimentConfig, RunKind

app = typer.Typer(help="Solve the linear, direct or semilinear problem.", no_args_is_help=True)


class SolveMethod(str, Enum):
    """Solution path of ``solve linear``."""

    TRANSFORM = "transform"
    DIRECT = "direct"
    BOTH = "both"


@app.command("linear")
def solve_linear(
    config: ConfigOption,
    method: Annotated[
        SolveMethod | None,
        typer.Option("--method", help="Override solve.method."),
    ] = None,
    output_dir: OutputDirOption = None,
    seed: SeedOption = None,
) -> None:
    """Linear solution by the transform, the direct solver, or both with a discrepancy table."""

    def adjust(cfg: ExperimentConfig) -> ExperimentConfig:
        if method is None:
            return cfg
        return cfg.model_copy(update={"solve": cfg.solve.model_copy(update={"method": method.value})})

    execute_config(config, RunKind.SOLVE_LINEAR, output_dir, seed, adjust)


@app.command("direct")
def solve_direct(config: ConfigOption, output_dir: OutputDirOption = None, seed: SeedOption = None) -> None:
    """Pseudo-spectral method-of-lines solve with blow-up detection."""
    execute_config(config, RunKind.SOLVE_DIRECT, output_dir, seed)


@app.command("semilinear")
def solve_semilinear(config: ConfigOption, output_dir: OutputDirOption = None, seed: SeedOption = None) -> None:
    """Picard iteration of the integral equation, cross-checked by the direct solver."""
    execute_config(config, RunKind.SOLVE_SEMILINEAR, output_dir, seed)
