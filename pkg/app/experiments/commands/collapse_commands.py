"""Commands for the center collapse, scale comparison and moving characteristic function experiments."""

# License: MIT

import click

from app.experiments.commands.options import basepoint_option, execute, sigma_options


@click.command("collapse")
@sigma_options
@basepoint_option
@click.option("--t", type=float, multiple=True, help="Displacement; repeat for several.")
@click.option("--direction", type=click.Choice(["center", "horizontal", "both"]))
def collapse(**options):
    """Displacement ratios along the centre and, as a control, along a horizontal direction."""
    execute("collapse", **options)


@click.command("scale-compare")
@sigma_options
@click.option("--x", "basepoints", nargs=3, type=float, multiple=True, help="Basepoint; repeat for several.")
@click.option("--basepoint-count", type=int, help="Random interior basepoints when no --x is given.")
@click.option("--r", type=float, multiple=True, help="Decreasing radii.")
@click.option("--delta", "deltas", type=float, multiple=True)
@click.option("--eps", "epss", type=float, multiple=True)
@click.option("--R0-factor", "R0_factor", type=float)
@click.option("--pairs-log2", type=int)
def scale_compare(**options):
    """Normalised L1 distance between the blown-up cut metric and its straightened half-space metric."""
    execute("scale-compare", **options)


@click.command("moving-char")
@click.option("--n", type=int)
@click.option("--t", type=float)
@click.option("--h", type=float, multiple=True)
def moving_char(**options):
    """Isometry check and difference quotients of t -> chi_[0, t]."""
    execute("moving-char", **options)
