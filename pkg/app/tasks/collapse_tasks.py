"""Center collapse and scale comparison experiments on grid cut measures."""

# License: MIT

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from app.bv.cut_families import HalfSpaceMeasure, straighten
from app.bv.grid import GridGeometry
from app.geometry.balls import Gauge, _symmetric_box
from app.geometry.geodesics import cc_distance, cc_norm
from app.geometry.heisenberg import (
    Dilation,
    GroupElement,
    center_element,
    from_symmetric,
    koranyi_ball_volume,
    koranyi_gauge_array,
    multiply_arrays,
)
from app.metrics.cuts import CutMeasure, L1Map, cut_measure_from_map, cut_metric
from app.utils.config import InvalidExperimentUsage, NumericalError, OutsideGridError, get_config

logger = logging.getLogger(__name__)

# Collapse ratios below this many c-cells of displacement are aliasing-dominated.
FLOOR_CELLS = 2


@dataclass
class CollapseReport:
    basepoint: list
    direction: str
    t: list
    ratios: list
    numerators: list
    denominators: list
    slope: float | None
    resolution_floor: float
    left_invariance_error: float = 0.0

    def to_dict(self) -> dict:
        return {
            "basepoint": self.basepoint,
            "direction": self.direction,
            "t": self.t,
            "ratios": self.ratios,
            "numerators": self.numerators,
            "denominators": self.denominators,
            "slope": self.slope,
            "resolution_floor": self.resolution_floor,
            "left_invariance_error": self.left_invariance_error,
        }

    def rows(self) -> list[dict]:
        return [
            {"direction": self.direction, "t": t, "ratio": ratio, "numerator": num, "denominator": den,
             "fitted": t >= self.resolution_floor}
            for t, ratio, num, den in zip(self.t, self.ratios, self.numerators, self.denominators)
        ]


def _neighborhood(geometry: GridGeometry, x: GroupElement, offsets) -> np.ndarray:
    """Stratified points of the voxel-sized box around x."""
    axes = [((np.arange(n) + 0.5) / n - 0.5) * h for n, h in zip(offsets, geometry.spacing)]
    da, db, dc = np.meshgrid(*axes, indexing="ij")
    return x.as_array() + np.stack([da.ravel(), db.ravel(), dc.ravel()], axis=-1)


def _indicators(sigma, geometry: GridGeometry, points: np.ndarray) -> np.ndarray:
    index, inside = geometry.locate(points)
    if not inside.all():
        raise OutsideGridError(
            "Translated points leave the grid box",
            payload={"clipped_fraction": float(1 - inside.mean())},
        )
    if isinstance(sigma, HalfSpaceMeasure):
        return sigma.indicators(points)
    if not sigma.atoms:
        return np.zeros((0, len(points)), dtype=bool)
    return np.stack([cut.membership[index] for cut in sigma.cuts])


def _weights(sigma) -> np.ndarray:
    return sigma.weights if len(sigma) else np.zeros(0)


def _displacement(sigma, geometry: GridGeometry, base: np.ndarray, moved: np.ndarray) -> float:
    """Mean over the neighbourhood of sum_k w_k |chi_k(moved) - chi_k(base)|."""
    differs = _indicators(sigma, geometry, base) != _indicators(sigma, geometry, moved)
    return float((_weights(sigma) @ differs).mean()) if differs.size else 0.0


def _fit_slope(t: np.ndarray, ratios: np.ndarray, floor: float) -> float | None:
    keep = (t >= floor) & (ratios > 0)
    if keep.sum() < 2:
        return None
    slope, _ = np.polyfit(np.log(t[keep]), np.log(ratios[keep]), 1)
    return float(slope)


def _collapse(sigma, geometry: GridGeometry, x: GroupElement, t_list, offsets, direction: str,
              tol: float | None) -> CollapseReport:
    t = np.asarray(t_list, dtype=float)
    if t.size == 0 or (t <= 0).any():
        raise InvalidExperimentUsage("Displacements must be positive", payload={"t": t.tolist()})
    base = _neighborhood(geometry, x, offsets)
    numerators, denominators, invariance = [], [], 0.0
    for step in t:
        g = center_element(step) if direction == "center" else GroupElement(step, 0.0, 0.0)
        moved = multiply_arrays(base, g.as_array())
        numerators.append(_displacement(sigma, geometry, base, moved))
        if direction == "center":
            # exp(tZ) is central, so left and right translates agree.
            moved_x = GroupElement.from_array(multiply_arrays(x.as_array(), g.as_array()))
            denominator = cc_distance(moved_x, x, tol)
            invariance = max(invariance, abs(denominator - cc_norm(g, tol)))
        else:
            denominator = cc_norm(g, tol)
        denominators.append(denominator)
    tol = get_config().CC_TOL if tol is None else tol
    if invariance > max(2 * tol, 1e-9):
        raise NumericalError(f"Center displacement depends on the basepoint by {invariance:.3g}",
                             payload={"left_invariance_error": invariance})
    ratios = np.array(numerators) / np.array(denominators)
    spacing = geometry.spacing[2] if direction == "center" else geometry.spacing[0]
    floor = FLOOR_CELLS * float(spacing)
    slope = _fit_slope(t, ratios, floor)
    logger.info(f"{direction.capitalize()} collapse at {x.as_tuple()}: ratios {ratios.round(6).tolist()}, slope {slope}")
    return CollapseReport(
        basepoint=list(x.as_tuple()),
        direction=direction,
        t=t.tolist(),
        ratios=ratios.tolist(),
        numerators=numerators,
        denominators=denominators,
        slope=slope,
        resolution_floor=floor,
        left_invariance_error=invariance,
    )


def center_collapse(sigma, geometry: GridGeometry, x: GroupElement, t_list, offsets=(1, 1, 16),
                    tol: float | None = None) -> CollapseReport:
    """
    Ratios ||f(x exp(tZ)) - f(x)|| / d(x exp(tZ), x) of the L1 map represented by sigma.

    The numerator is averaged over stratified points of the voxel around x to suppress aliasing.

    :param sigma: Cut measure on the grid, or a HalfSpaceMeasure evaluated analytically.
    :param offsets: Number of stratified samples per axis inside one voxel.
    :raises OutsideGridError: If a translated point leaves the box.
    """
    return _collapse(sigma, geometry, x, t_list, offsets, "center", tol)


def horizontal_control(sigma, geometry: GridGeometry, x: GroupElement, t_list, offsets=(16, 1, 1),
                       tol: float | None = None) -> CollapseReport:
    """
    The same ratios along the horizontal direction x (t, 0, 0), where d(x g_t, x) = t.
    """
    return _collapse(sigma, geometry, x, t_list, offsets, "horizontal", tol)


@dataclass
class ScaleReport:
    basepoint: list
    radii: list
    discrepancies: list
    good_parts: list
    bad_parts: list
    parameters: list
    triangle_holds: list
    pairs: int
    skipped: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "basepoint": self.basepoint,
            "r": self.radii,
            "D": self.discrepancies,
            "good_part": self.good_parts,
            "bad_part": self.bad_parts,
            "parameters": self.parameters,
            "triangle_holds": self.triangle_holds,
            "pairs": self.pairs,
            "skipped": self.skipped,
            "diagnostics": self.diagnostics,
        }

    def rows(self) -> list[dict]:
        return [
            {"r": r, "D": d, "good_part": g, "bad_part": b, **params}
            for r, d, g, b, params in zip(self.radii, self.discrepancies, self.good_parts, self.bad_parts,
                                           self.parameters)
        ]


def unit_ball_pairs(log2_points: int = 15, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """
    Quasi-random pairs of the Korányi unit ball at the identity, from a scrambled 6-dimensional
    Sobol sequence; pairs with a point outside the ball are dropped.
    """
    half = _symmetric_box(1.0, Gauge.KORANYI)
    sobol = qmc.Sobol(d=6, scramble=True, seed=seed)
    unit = sobol.random_base2(log2_points)
    p = from_symmetric(qmc.scale(unit[:, :3], -half, half))
    q = from_symmetric(qmc.scale(unit[:, 3:], -half, half))
    keep = (koranyi_gauge_array(p) <= 1.0) & (koranyi_gauge_array(q) <= 1.0)
    return p[keep], q[keep]


def _grid_distance(sigma: CutMeasure, geometry: GridGeometry, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    if not sigma.atoms:
        return np.zeros(len(p))
    return _weights(sigma) @ (_indicators(sigma, geometry, p) != _indicators(sigma, geometry, q))


def compare_at_scale(sigma: CutMeasure, geometry: GridGeometry, x: GroupElement, r: float, delta: float,
                     eps: float, R0: float, pairs: tuple[np.ndarray, np.ndarray], max_candidates: int = 16) -> dict:
    """
    One cell of the scale comparison: straighten at (x, r), pull both metrics back by S_{x,r} and
    integrate (1/r) |d_Sigma - d_hat| over the pairs, times mu(B_1)^2.

    The good and bad parts bound the total pair by pair since d_Sigma = d_good + d_bad.
    """
    result = straighten(sigma, geometry, x, delta, eps, r, R0, max_candidates)
    S = Dilation(r, x)
    p, q = S.apply(pairs[0]), S.apply(pairs[1])
    d_good = _grid_distance(result.good_part(sigma), geometry, p, q)
    d_bad = _grid_distance(result.bad_part(sigma), geometry, p, q)
    d_hat = result.measure.distance(p, q)
    normalisation = koranyi_ball_volume(1.0) ** 2 / r
    total = normalisation * float(np.abs(d_good + d_bad - d_hat).mean())
    good = normalisation * float(np.abs(d_good - d_hat).mean())
    bad = normalisation * float(d_bad.mean())
    return {
        "D": total,
        "good_part": good,
        "bad_part": bad,
        "triangle_holds": bool(total <= good + bad + 1e-12 * max(1.0, good + bad)),
        "good": len(result.good_bad.good),
        "bad": len(result.good_bad.bad),
        "demoted": result.demoted,
        "diagnostics": result.good_bad.diagnostics,
    }


def scale_comparison(sigma: CutMeasure, geometry: GridGeometry, x: GroupElement, r_list, delta: float,
                     eps: float, R0_factor: float = 2.5, pairs_log2: int = 15, seed: int = 0,
                     max_candidates: int = 16, workers: int | None = None) -> ScaleReport:
    """
    Normalised L1 discrepancy on B_1(e) x B_1(e) between the blown-up cut metric and its
    straightened half-space metric, for each scale.

    A scale whose straightening fails is skipped and listed with the reason; its entries are None.

    :param r_list: Decreasing radii.
    :param R0_factor: Scale of the bad set relative to r; must exceed 2.
    :param pairs_log2: log2 of the Sobol sample size before rejection.
    """
    radii = [float(r) for r in r_list]
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise InvalidExperimentUsage("Radii must be strictly decreasing", payload={"r": radii})
    if not R0_factor > 2:
        raise InvalidExperimentUsage(f"R0 factor must exceed 2, got {R0_factor}")
    workers = get_config().WORKERS if workers is None else workers
    pairs = unit_ball_pairs(pairs_log2, seed)

    def cell(r):
        try:
            return compare_at_scale(sigma, geometry, x, r, delta, eps, R0_factor * r, pairs, max_candidates)
        except InvalidExperimentUsage as e:
            logger.warning(f"Skipping scale r = {r}: {e.message}")
            return e

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        cells = list(executor.map(cell, radii))

    report = ScaleReport(list(x.as_tuple()), radii, [], [], [], [], [], len(pairs[0]))
    for r, outcome in zip(radii, cells):
        report.parameters.append({"delta": delta, "eps": eps, "R0": R0_factor * r})
        if isinstance(outcome, InvalidExperimentUsage):
            report.skipped.append({"r": r, **outcome.to_dict()})
            for column in (report.discrepancies, report.good_parts, report.bad_parts, report.triangle_holds,
                           report.diagnostics):
                column.append(None)
            continue
        report.discrepancies.append(outcome["D"])
        report.good_parts.append(outcome["good_part"])
        report.bad_parts.append(outcome["bad_part"])
        report.triangle_holds.append(outcome["triangle_holds"])
        report.diagnostics.append({k: outcome[k] for k in ("good", "bad", "demoted", "diagnostics")})
    logger.info(f"Scale comparison at {x.as_tuple()} (delta {delta}, eps {eps}): D = {report.discrepancies}")
    return report


def scale_comparison_sweep(sigma: CutMeasure, geometry: GridGeometry, x: GroupElement, r_list,
                           deltas=(0.2, 0.1, 0.05), epss=(0.2, 0.1), **kwargs) -> list[ScaleReport]:
    """One ScaleReport per (delta, eps) cell, in row-major order of the two grids."""
    return [scale_comparison(sigma, geometry, x, r_list, delta, eps, **kwargs) for delta in deltas for eps in epss]


def moving_characteristic_map(n: int) -> L1Map:
    """
    f(t) = chi_[0, t] sampled at t_i = i / (n - 1) against the n - 1 cells of [0, 1], each of
    weight 1 / (n - 1).
    """
    if n < 2:
        raise InvalidExperimentUsage(f"The moving characteristic function needs n >= 2, got {n}")
    values = np.tri(n, n - 1, -1)
    return L1Map(values, np.full(n - 1, 1 / (n - 1)))


def moving_char_check(n: int) -> float:
    """Largest |d_f(t_i, t_j) - |t_i - t_j|| over the map and over its cut measure."""
    f = moving_characteristic_map(n)
    t = np.arange(n) / (n - 1)
    target = np.abs(t[:, None] - t[None, :])
    direct = np.abs(f.distance_matrix() - target).max()
    via_cuts = np.abs(cut_metric(cut_measure_from_map(f)) - target).max()
    return float(max(direct, via_cuts))


def difference_quotient_profile(n: int, t: float, h_list) -> list[dict]:
    """
    Support and mass of |f(t + h) - f(t)| for the moving characteristic function.

    The difference lives on [t, t + h] with mass h, so the quotients converge weakly to a point mass at t.
    """
    f = moving_characteristic_map(n)
    cells = 1 / (n - 1)
    i = int(round(t * (n - 1)))
    rows = []
    for h in h_list:
        k = int(round(h * (n - 1)))
        if k < 1 or i + k > n - 1:
            raise InvalidExperimentUsage(f"Step h = {h} is below one cell or leaves [0, 1] from t = {t}")
        differs = np.flatnonzero(f.values[i + k] != f.values[i])
        rows.append({
            "h": k * cells,
            "mass": float(differs.size * cells),
            "support_lo": float(differs.min() * cells),
            "support_hi": float((differs.max() + 1) * cells),
            "quotient_mass": float(differs.size * cells / (k * cells)),
        })
    return rows


def check_center_saturation(family: HalfSpaceMeasure, points, t: float) -> bool:
    """Half-space membership does not change along cosets of the centre."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    moved = multiply_arrays(points, center_element(t).as_array())
    return bool((family.indicators(points) == family.indicators(moved)).all())
