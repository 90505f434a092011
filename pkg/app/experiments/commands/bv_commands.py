"""Commands for perimeters, half-space closeness, bad mass and straightening."""

# License: MIT

import click

from app.experiments.commands.options import basepoint_option, execute, grid_options, set_options, sigma_options


@click.command("perimeter")
@set_options
@basepoint_option
@click.option("--mollifier", type=int, help="Box filter width of the mollified estimate.")
def perimeter(**options):
    """
    Perimeter of a voxel set: per line family, total, and the mollified estimate.

    Writes the set in binary form and the perimeter density as CSV next to the result.
    """
    execute("perimeter", **options)


@click.command("alpha")
@set_options
@basepoint_option
@click.option("--r", "radii", type=float, multiple=True, help="Ball radius; repeat for several.")
@click.option("--refine/--no-refine", default=None)
def alpha(**options):
    """Distance from a voxel set to the best vertical half-space through x at each radius."""
    execute("alpha", **options)


@click.command("bad-mass")
@sigma_options
@click.option("--eps", type=float)
@click.option("--R", "R", type=float, multiple=True, help="Decreasing radii; repeat for several.")
@click.option("--site-budget", type=int, help="Crossing sites evaluated per atom.")
def bad_mass(**options):
    """Mass of the bad perimeter measure for each R."""
    execute("bad-mass", **options)


@click.command("straighten")
@sigma_options
@basepoint_option
@click.option("--delta", type=float)
@click.option("--eps", type=float)
@click.option("--r", type=float)
@click.option("--R0", "R0", type=float)
@click.option("--max-candidates", type=int)
def straighten(**options):
    """Good and bad cuts at (x, r) and the straightened half-space measure."""
    execute("straighten", **options)


@click.command("half-space-constant")
@grid_options
@click.option("--r", "radii", type=float, multiple=True)
@click.option("--angles", type=int)
@click.option("--x", "basepoints", nargs=3, type=float, multiple=True, help="Basepoint; repeat for several.")
def half_space_constant(**options):
    """Measured r Per(H)(B_r(x)) / mu(B_2r(x)) over radii, angles and basepoints."""
    execute("half-space-constant", **options)
