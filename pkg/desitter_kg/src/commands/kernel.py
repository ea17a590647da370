"""``kernel`` subcommands."""

from pathlib import Path
from typing import Annotated

import typer

from desitter_kg.src.commands.common import (
    OptionalConfigOption,
    OutputDirOption,
    SeedOption,
    console,
    execute,
    fail,
)
from desitter_kg.src.core.exceptions.exceptions import AppException, ConfigurationException
from desitter_kg.src.core.kernels import as_complex
from desitter_kg.src.schema import ExperimentConfig, KernelEvalConfig, ModelConfig, RunKind, load_config

app = typer.Typer(help="Evaluate the transform kernels.", no_args_is_help=True)


def _build_config(
    config: Path | None,
    kind: str | None,
    M: str | None,
    n: int | None,
    t: float | None,
    t0: float | None,
    r: float | None,
    output_dir: str | None,
    seed: int | None,
) -> ExperimentConfig:
    if config is not None:
        cfg = load_config(config)
    else:
        if M is None:
            raise ConfigurationException("kernel eval needs --M or --config")
        cfg = ExperimentConfig(model=ModelConfig(n=n or 3, M=as_complex(M)))
    if M is not None and config is not None:
        cfg = cfg.model_copy(update={"model": ModelConfig(n=n or cfg.model.n, M=as_complex(M), s=cfg.model.s)})
    overrides = {
        key: value
        for key, value in {"kind": kind, "t": t, "t0": t0, "r": r}.items()
        if value is not None
    }
    kernel = KernelEvalConfig.model_validate({**cfg.kernel.model_dump(), **overrides})
    return cfg.model_copy(update={"kernel": kernel}).with_overrides(
        output_dir=output_dir, seed=seed, run=RunKind.KERNEL_EVAL
    )


@app.command("eval")
def eval_kernel(
    config: OptionalConfigOption = None,
    kind: Annotated[str | None, typer.Option("--kind", help="E, K0, K1 or dEdt.")] = None,
    M: Annotated[str | None, typer.Option("--M", help="Curved-mass root as 're,im' or a number.")] = None,
    n: Annotated[int | None, typer.Option("--n", help="Damping coefficient n.")] = None,
    t: Annotated[float | None, typer.Option("--t", help="Time t.")] = None,
    t0: Annotated[float | None, typer.Option("--t0", help="Second time (b for dEdt).")] = None,
    r: Annotated[float | None, typer.Option("--r", help="Offset r (z for K0/K1).")] = None,
    output_dir: OutputDirOption = None,
    seed: SeedOption = None,
) -> None:
    """Print a kernel value with its hypergeometric branch diagnostics."""
    try:
        cfg = _build_config(config, kind, M, n, t, t0, r, output_dir, seed)
    except AppException as e:
        raise fail(e) from e
    except ValueError as e:
        raise fail(ConfigurationException(str(e))) from e
    k = cfg.kernel
    console.print(f"kernel {k.kind} at r={k.r:g} t={k.t:g} t0={k.t0:g} M={cfg.model.M}", markup=False)
    execute(cfg)
