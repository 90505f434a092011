"""Shared click options and the helper that hands collected options to the experiment service."""

# License: MIT

import click

from app.experiments.commands.schemas import GRID_FUNCTION_NAMES
from app.services.experiment_service import run_experiment
from app.utils.storage_utils import canonical_json


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def execute(command: str, **options) -> None:
    """Drops unset options, runs the experiment and prints its summary JSON on stdout."""
    ctx = click.get_current_context()
    params = {name: _plain(value) for name, value in options.items() if value is not None and value != ()}
    summary = run_experiment(command, params, output_dir=(ctx.obj or {}).get("output_dir"))
    click.echo(canonical_json(summary), nl=False)


def grid_options(f):
    f = click.option("--half-width", type=float, help="Half-width of the box [-w, w]^3.")(f)
    f = click.option("--resolution", nargs=3, type=int, default=None,
                     help="Voxels along a, b, c. Defaults to HEISENCUT_GRID_RESOLUTION.")(f)
    return f


def set_options(f):
    f = click.option("--half-space-angle", type=float, help="Use the vertical half-space with this normal angle.")(f)
    f = click.option("--level", type=float, help="Slice level of --function.")(f)
    f = click.option("--function", type=click.Choice(GRID_FUNCTION_NAMES), help="Slice a built-in grid function.")(f)
    f = click.option("--set-file", type=str, help="Binary GridSet file.")(f)
    return grid_options(f)


def sigma_options(f):
    f = click.option("--seed", type=int, help="Seed for sampled quantities.")(f)
    f = click.option("--phase", type=float, help="Level phase in units of --step.")(f)
    f = click.option("--step", type=float, help="Level spacing when slicing --function; one c-cell by default.")(f)
    f = click.option("--half-space-family", type=int, help="Use n angles of the half-space family.")(f)
    f = click.option("--function", type=click.Choice(GRID_FUNCTION_NAMES), help="Slice a built-in grid function.")(f)
    f = click.option("--cut-measure-file", type=str, help="CutMeasure JSON over the grid's voxels.")(f)
    return grid_options(f)


def basepoint_option(f):
    return click.option("--x", "basepoint", nargs=3, type=float, default=None, help="Basepoint a b c.")(f)
