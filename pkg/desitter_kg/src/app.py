"""Typer application for the de Sitter Klein-Gordon toolkit.

This module builds the ``dskg`` command line and registers every subcommand
group. Each group lives in ``desitter_kg.src.commands``.
"""

import typer

from desitter_kg.src.commands.kernel import app as kernel_app
from desitter_kg.src.commands.lifespan import app as lifespan_app
from desitter_kg.src.commands.solve import app as solve_app
from desitter_kg.src.commands.verify import app as verify_app

app = typer.Typer(
    name="dskg",
    help="Klein-Gordon fields in de Sitter spacetime: kernels, solvers and verification runs.",
    no_args_is_help=True,
    add_completion=False,
    pretty_exceptions_enable=False,
)

# Register all command groups
app.add_typer(kernel_app, name="kernel")
app.add_typer(solve_app, name="solve")
app.add_typer(lifespan_app, name="lifespan")
app.add_typer(verify_app, name="verify")
