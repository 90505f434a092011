"""Commands for Cayley balls, distortion and the cut-metric identities."""

# License: MIT

import click

from app.experiments.commands.options import execute, grid_options


@click.command("cayley-ball")
@click.option("--k", type=int, required=True, help="Word-length radius.")
def cayley_ball(k):
    """
    Generate the ball W_k of the integer Heisenberg group with its restricted word metric.

    Writes the space as JSON and as an edge list next to the result.
    """
    execute("cayley-ball", k=k)


@click.command("distortion")
@click.option("--graph", type=str, help="Named test metric, e.g. path4, cycle6, k23, tree10.")
@click.option("--space-file", type=str, help="FiniteMetricSpace JSON, e.g. written by cayley-ball.")
@click.option("--cayley", type=int, help="Use W_k.")
@click.option("--cayley-sequence", type=int, help="Distortion of W_1 .. W_k, made nondecreasing.")
@click.option("--exact/--colgen", "exact", default=None, help="Full cut enumeration or column generation.")
@click.option("--budget", type=int, help="Master LP solves allowed to column generation.")
@click.option("--seed", type=int)
def distortion(graph, space_file, cayley, cayley_sequence, exact, budget, seed):
    """Least distortion of an L1 embedding of a finite metric space."""
    method = None if exact is None else ("exact" if exact else "colgen")
    execute("distortion", graph=graph, space_file=space_file, cayley=cayley, cayley_sequence=cayley_sequence,
            method=method, budget=budget, seed=seed)


@click.command("slice")
@click.option("--map-file", type=str, help="L1Map JSON; a random map is drawn otherwise.")
@click.option("--points", type=int)
@click.option("--coords", type=int)
@click.option("--seed", type=int)
def slice_command(map_file, points, coords, seed):
    """Cut measure of an L1 map, with its metric and mass errors."""
    execute("slice", map_file=map_file, points=points, coords=coords, seed=seed)


@click.command("coarea")
@grid_options
@click.option("--trials", type=int)
@click.option("--levels", type=int)
@click.option("--seed", type=int)
def coarea(resolution, half_width, trials, levels, seed):
    """Discrete coarea formula on random integer grid functions."""
    execute("coarea", resolution=resolution, half_width=half_width, trials=trials, levels=levels, seed=seed)


@click.command("tv-identity")
@grid_options
@click.option("--trials", type=int)
@click.option("--levels", type=int)
@click.option("--coords", type=int)
@click.option("--seed", type=int)
def tv_identity(resolution, half_width, trials, levels, coords, seed):
    """Total perimeter of the cut measure against the total variation of random grid maps into L1."""
    execute("tv-identity", resolution=resolution, half_width=half_width, trials=trials, levels=levels,
            coords=coords, seed=seed)
