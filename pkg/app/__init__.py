"""Builds the command group, registers the experiment commands and installs the error handler."""

# License: MIT

import logging

import click

from app.experiments.commands import COMMANDS
from app.services.experiment_service import LIBRARY_VERSION
from app.services.logging_service import setup_logging
from app.utils.config import InvalidExperimentUsage, get_config
from app.utils.storage_utils import canonical_json

__version__ = LIBRARY_VERSION

logger = logging.getLogger(__name__)


class ExperimentGroup(click.Group):
    """Reports InvalidExperimentUsage as error JSON on stderr and exits with its code; anything else exits 1."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (click.exceptions.Exit, click.ClickException, click.Abort):
            raise
        except InvalidExperimentUsage as e:
            click.echo(canonical_json(e.to_dict()), err=True, nl=False)
            ctx.exit(e.exit_code)
        except Exception as e:
            logger.exception("Experiment failed")
            click.echo(canonical_json({"error": "internal", "message": str(e), "exit_code": 1}), err=True, nl=False)
            ctx.exit(1)


def create_cli() -> click.Group:
    """
    Creates the command group.

    :return: The group with every experiment command registered.
    """

    @click.group(cls=ExperimentGroup)
    @click.version_option(__version__, prog_name="heisencut")
    @click.option("--output-dir", type=str, help="Directory for results. Defaults to HEISENCUT_OUTPUT_DIR.")
    @click.option("--log-level", type=str, help="Logging level. Defaults to HEISENCUT_LOG_LEVEL.")
    @click.pass_context
    def cli(ctx, output_dir, log_level):
        """Cut metrics, distortion and BV experiments on the Heisenberg group."""
        setup_logging(log_level or get_config().LOG_LEVEL)
        ctx.ensure_object(dict)
        ctx.obj["output_dir"] = output_dir

    for command in COMMANDS:
        cli.add_command(command)
    return cli
