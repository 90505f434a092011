"""Perimeter measures of voxel sets and of grid cut measures."""

# License: MIT

import logging

import numpy as np
from scipy import ndimage

from app.bv.grid import GridGeometry, GridSet, PerimeterField, ball_voxels
from app.geometry.heisenberg import GroupElement
from app.metrics.cuts import CutMeasure, LineFamily, slice_set
from app.utils.config import InvalidExperimentUsage

logger = logging.getLogger(__name__)


def _deposit(geometry: GridGeometry, lines: LineFamily, jumps: np.ndarray) -> np.ndarray:
    # Half of every crossing goes to each endpoint voxel.
    density = np.bincount(lines.tail, weights=jumps / 2, minlength=geometry.size)
    density += np.bincount(lines.head, weights=jumps / 2, minlength=geometry.size)
    return density


def perimeter(E: GridSet, region=None, lines: LineFamily | None = None) -> PerimeterField:
    """
    Crossing-count perimeter measure of E.

    Every jump of the indicator along a P-line or a Q-line carries the line's transverse weight;
    the weight is split evenly between the two voxels of the step. Sums over both families, so
    this is the l1 horizontal perimeter.

    :param E: The voxel set.
    :param region: Optional voxel mask; density outside it is zeroed.
    :param lines: Line family to count on; defaults to all P- and Q-lines of the grid.
    :return: The perimeter field.
    """
    geometry = E.geometry
    lines = geometry.lines if lines is None else lines
    field = PerimeterField(geometry, _deposit(geometry, lines, lines.jumps(E.indicator())))
    return field if region is None else field.restrict(region)


def crossing_sites(E: GridSet, lines: LineFamily | None = None) -> tuple[np.ndarray, np.ndarray]:
    """
    Midpoints of the steps where the indicator of E jumps, with the crossing weights.

    The weights sum to the total perimeter of E.

    :return: (points of shape (M, 3) in matrix coordinates, weights of shape (M,)).
    """
    geometry = E.geometry
    lines = geometry.lines if lines is None else lines
    jumps = lines.jumps(E.indicator())
    active = jumps > 0
    centers = geometry.centers
    points = (centers[lines.tail[active]] + centers[lines.head[active]]) / 2
    return points, jumps[active]


def mollified_perimeter(E: GridSet, size: int = 3) -> dict:
    """
    Independent estimate of the horizontal perimeter: box-filter the indicator, then integrate the
    horizontal gradient (Ph, Qh) = (dh/da, dh/db + a dh/dc).

    :return: {"l1": integral of |Ph| + |Qh|, "l2": integral of |(Ph, Qh)|}.
    """
    geometry = E.geometry
    h = ndimage.uniform_filter(E.indicator().reshape(geometry.shape), size=size, mode="nearest")
    da, db, dc = geometry.spacing
    grad_a, grad_b, grad_c = np.gradient(h, da, db, dc)
    a = geometry.axis_centers(0)[:, None, None]
    p = grad_a
    q = grad_b + a * grad_c
    volume = geometry.voxel_volume
    return {
        "l1": float((np.abs(p) + np.abs(q)).sum() * volume),
        "l2": float(np.hypot(p, q).sum() * volume),
    }


def _check_geometry(sigma: CutMeasure, geometry: GridGeometry) -> None:
    if sigma.n != geometry.size:
        raise InvalidExperimentUsage(
            f"Cut measure over {sigma.n} points does not live on a grid of {geometry.size} voxels",
            payload={"cut_points": sigma.n, "voxels": geometry.size},
        )


def total_perimeter_measure(sigma: CutMeasure, geometry: GridGeometry, region=None) -> PerimeterField:
    """lambda_Sigma = sum_k w_k Per(E_k), accumulated in atom order."""
    _check_geometry(sigma, geometry)
    density = np.zeros(geometry.size)
    for cut, weight in sigma.atoms:
        density += weight * perimeter(GridSet(geometry, cut.membership)).density
    field = PerimeterField(geometry, density)
    return field if region is None else field.restrict(region)


def slice_grid_function(values, levels=None, step: float | None = None, phase: float = 0.5) -> CutMeasure:
    """
    Cut measure of a grid function sliced at finitely many levels.

    Each level t contributes slice_set(values, t) with the weight of the threshold interval it
    stands for. Without explicit levels, the levels step * (j + phase) covering the range of the
    values are used; the default phase gives the midpoint rule for the slicing integral. Pick a
    phase off the values' own lattice when they sit on multiples of step plus one half.

    :param values: Function values, one per voxel.
    :param levels: Explicit levels, each standing for an interval of length step.
    :param step: Level spacing; defaults to 1/32 of the value range.
    :param phase: Offset of the generated levels in units of step, in (0, 1).
    """
    values = np.asarray(values, dtype=float).ravel()
    lo, hi = float(values.min()), float(values.max())
    if step is None:
        span = max(hi - lo, abs(hi), abs(lo))
        step = span / 32 if span > 0 else 1.0
    if not step > 0 or not 0 < phase < 1:
        raise InvalidExperimentUsage(f"Level step must be positive and phase in (0, 1), got {step}, {phase}")
    if levels is None:
        first = int(np.floor(min(lo, 0.0) / step))
        last = int(np.ceil(max(hi, 0.0) / step))
        levels = step * (np.arange(first, last) + phase)
    atoms = []
    for t in np.asarray(levels, dtype=float):
        cut = slice_set(values, t)
        if len(cut):
            atoms.append((cut, step))
    return CutMeasure(values.size, atoms)


def ball_perimeter_ratio(field: PerimeterField, x: GroupElement, r: float) -> float:
    """lambda(B_r(x)) / mu(B_r(x)) with both sides voxel-summed."""
    voxels = ball_voxels(field.geometry, x, r)
    if voxels.size == 0:
        raise InvalidExperimentUsage(f"Ball of radius {r} contains no voxel centre")
    return float(field.density[voxels].sum() / (voxels.size * field.geometry.voxel_volume))


def lipschitz_diagnostic(sigma: CutMeasure, geometry: GridGeometry, sweep) -> dict:
    """
    Largest ratio lambda_Sigma(B_r(x)) / mu(B_r(x)) over a sweep of balls.

    A finite supremum as the radii shrink is the Lipschitz scale C L of the represented map.

    :param sweep: Iterable of (GroupElement, radius).
    :return: {"sup_ratio", "argmax": [x, r], "ratios": [...]}.
    """
    field = total_perimeter_measure(sigma, geometry)
    ratios = []
    for x, r in sweep:
        ratios.append({"center": list(x.as_tuple()), "radius": r, "ratio": ball_perimeter_ratio(field, x, r)})
    if not ratios:
        return {"sup_ratio": 0.0, "argmax": None, "ratios": []}
    best = max(ratios, key=lambda item: item["ratio"])
    return {"sup_ratio": best["ratio"], "argmax": [best["center"], best["radius"]], "ratios": ratios}


def grid_function_variation(values, geometry: GridGeometry) -> float:
    """Line-based variation of a grid function over all P- and Q-lines."""
    return geometry.lines.variation(values)


def as_grid_sets(sigma: CutMeasure, geometry: GridGeometry) -> list[tuple[GridSet, float]]:
    _check_geometry(sigma, geometry)
    return [(GridSet.from_cut(geometry, cut), w) for cut, w in sigma.atoms]
