"""Command to run an experiment from a JSON config file."""

# License: MIT

import click

from app.services.experiment_service import run_config
from app.utils.storage_utils import canonical_json


@click.command("run")
@click.option("--config", "config_path", required=True, help="Experiment config JSON.")
@click.pass_context
def run(ctx, config_path):
    """
    Run the experiment a config file describes.

    The config holds command, params, seed, output_dir and format_version; unknown fields are rejected.
    """
    summary = run_config(config_path, (ctx.obj or {}).get("output_dir"))
    click.echo(canonical_json(summary), nl=False)
