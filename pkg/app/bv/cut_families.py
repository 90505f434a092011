"""Bad perimeter, good and bad cut families, and the straightened half-space cut measure of a grid cut measure."""

# License: MIT

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from app.bv.grid import GridGeometry, GridSet
from app.bv.halfspaces import (
    MIN_BALL_VOXELS,
    AlphaCache,
    HalfSpace,
    alpha,
    bad_points,
    dyadic_scales,
    half_space_perimeter_constant,
    scale_floor,
)
from app.bv.perimeter import as_grid_sets, crossing_sites, total_perimeter_measure
from app.geometry.heisenberg import IDENTITY, GroupElement, koranyi_ball_volume, koranyi_distance_array
from app.metrics.cuts import CutMeasure
from app.utils.config import InvalidExperimentUsage, OutsideGridError, get_config

logger = logging.getLogger(__name__)


@dataclass
class HalfSpaceMeasure:
    """A finite cut measure whose atoms are vertical half-spaces, evaluated analytically."""

    atoms: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms], dtype=float)

    def mass(self) -> float:
        return float(self.weights.sum()) if self.atoms else 0.0

    def indicators(self, points) -> np.ndarray:
        """Membership of every point in every atom, shape (atoms, points)."""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        if not self.atoms:
            return np.zeros((0, len(points)), dtype=bool)
        return np.stack([H.contains(points) for H, _ in self.atoms])

    def distance(self, p, q) -> np.ndarray:
        """d(p, q) = sum_k w_k |chi_Hk(p) - chi_Hk(q)| for arrays of points."""
        if not self.atoms:
            return np.zeros(np.asarray(p, dtype=float).reshape(-1, 3).shape[0])
        return self.weights @ (self.indicators(p) != self.indicators(q))

    def to_cut_measure(self, geometry: GridGeometry) -> CutMeasure:
        return CutMeasure(geometry.size, [(H.to_grid_set(geometry).as_cut(), w) for H, w in self.atoms])

    def to_dict(self) -> dict:
        return {"atoms": [{"half_space": H.to_dict(), "weight": w} for H, w in self.atoms]}


def half_space_family(n: int = 64, center: GroupElement = IDENTITY, spacing: float = 0.02, extent: float = 0.5,
                      seed: int = 0) -> HalfSpaceMeasure:
    """
    Half-spaces with n equispaced normal angles in [0, 2 pi) and, per angle, parallel boundary
    planes every spacing across [-extent, extent] around the projection of center. Each angle's
    planes are shifted by a random phase, so the basepoints scatter.

    Every atom weighs pi spacing / (2 n): the induced distance then approximates the Euclidean
    distance between the (a, b)-projections of points within extent of the centre.
    """
    if n < 1 or not spacing > 0 or not extent > 0:
        raise InvalidExperimentUsage("Half-space family needs n >= 1 and positive spacing and extent",
                                     payload={"n": n, "spacing": spacing, "extent": extent})
    rng = np.random.default_rng(seed)
    weight = math.pi * spacing / (2 * n)
    count = int(math.floor(2 * extent / spacing))
    atoms = []
    for theta in np.arange(n) * (2 * math.pi / n):
        normal = np.array([math.cos(theta), math.sin(theta)])
        offsets = -extent + spacing * (np.arange(count) + rng.uniform())
        for s in offsets:
            a, b = np.array([center.a, center.b]) + s * normal
            atoms.append((HalfSpace(GroupElement(float(a), float(b), 0.0), theta), weight))
    return HalfSpaceMeasure(atoms)


@dataclass
class BadMassReport:
    eps: float
    R_list: list
    masses: list
    total_mass: float
    scales: dict
    resolution_floor: float
    sites_evaluated: int
    sites_total: int

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "R": self.R_list,
            "bad_mass": self.masses,
            "total_mass": self.total_mass,
            "scales": {repr(R): s for R, s in self.scales.items()},
            "resolution_floor": self.resolution_floor,
            "sites_evaluated": self.sites_evaluated,
            "sites_total": self.sites_total,
            "caveat": "alpha is sampled on dyadic scales above the resolution floor, not on all r <= R",
        }


def _sample_sites(weights: np.ndarray, budget: int, seed_sequence) -> np.ndarray:
    if weights.size <= budget:
        return np.arange(weights.size)
    rng = np.random.default_rng(seed_sequence)
    return np.sort(rng.choice(weights.size, size=budget, replace=False))


def bad_mass_decay(sigma: CutMeasure, geometry: GridGeometry, eps: float, R_list, site_budget: int = 64,
                   seed: int = 0, min_ball_voxels: int = MIN_BALL_VOXELS, workers: int | None = None) -> BadMassReport:
    """
    Mass of the bad perimeter measure sum_k w_k Per(E_k) restricted to Bad_{eps,R}(E_k), for each R.

    Bad membership is evaluated at crossing sites. Atoms with more sites than site_budget use a
    fixed random subsample, scaled up by the ratio of total to sampled crossing weight. The same
    sample serves every R, so with nested dyadic R values the sequence is nonincreasing.

    :param R_list: Decreasing radii.
    :return: The report, one mass per R.
    """
    R_list = [float(R) for R in R_list]
    if any(b >= a for a, b in zip(R_list, R_list[1:])):
        raise InvalidExperimentUsage("R values must be strictly decreasing", payload={"R": R_list})
    workers = get_config().WORKERS if workers is None else workers
    scales = {R: dyadic_scales(R, geometry, min_ball_voxels)[0] for R in R_list}
    sequences = np.random.SeedSequence(seed).spawn(len(sigma))

    def atom_masses(item):
        (E, _), seed_sequence = item
        sites, weights = crossing_sites(E)
        chosen = _sample_sites(weights, site_budget, seed_sequence)
        if chosen.size == 0:
            return np.zeros(len(R_list)), 0, 0
        factor = weights.sum() / weights[chosen].sum()
        cache = AlphaCache(E)
        masses = [factor * weights[chosen][bad_points(E, sites[chosen], eps, R, scales[R], cache)].sum()
                  for R in R_list]
        return np.array(masses), chosen.size, weights.size

    atoms = as_grid_sets(sigma, geometry)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        per_atom = list(executor.map(atom_masses, zip(atoms, sequences)))

    masses = np.zeros(len(R_list))
    for (_, w), (atom_mass, _, _) in zip(atoms, per_atom):
        masses += w * atom_mass
    total = total_perimeter_measure(sigma, geometry).total()
    logger.info(f"Bad mass for eps = {eps}: {dict(zip(R_list, masses.round(6)))} of total {total:.6f}")
    return BadMassReport(
        eps=eps,
        R_list=R_list,
        masses=masses.tolist(),
        total_mass=total,
        scales=scales,
        resolution_floor=scale_floor(geometry, min_ball_voxels),
        sites_evaluated=int(sum(item[1] for item in per_atom)),
        sites_total=int(sum(item[2] for item in per_atom)),
    )


@dataclass
class GoodBadReport:
    good: list
    bad: list
    witnesses: dict
    diagnostics: dict

    def to_dict(self) -> dict:
        return {
            "good": self.good,
            "bad": self.bad,
            "witnesses": {str(k): v for k, v in self.witnesses.items()},
            "diagnostics": self.diagnostics,
        }


def _candidates(E: GridSet, x: GroupElement, r: float, max_candidates: int) -> tuple[np.ndarray, np.ndarray]:
    """Crossing sites of E in the closed ball of radius r at x, thinned evenly by distance to x."""
    sites, weights = crossing_sites(E)
    if not len(sites):
        return sites, weights
    distance = koranyi_distance_array(sites, x.as_array())
    inside = np.flatnonzero(distance <= r)
    inside = inside[np.argsort(distance[inside], kind="stable")]
    if inside.size > max_candidates:
        inside = inside[np.unique(np.linspace(0, inside.size - 1, max_candidates).round().astype(int))]
    return sites[inside], weights[inside]


def _ball_perimeter(E: GridSet, x: GroupElement, r: float) -> float:
    sites, weights = crossing_sites(E)
    if not len(sites):
        return 0.0
    return float(weights[koranyi_distance_array(sites, x.as_array()) <= r].sum())


def good_bad_cuts(sigma: CutMeasure, geometry: GridGeometry, x: GroupElement, delta: float, eps: float,
                  r: float, R0: float, max_candidates: int = 16, min_ball_voxels: int = MIN_BALL_VOXELS,
                  half_space_angles: int = 4) -> GoodBadReport:
    """
    Splits the atoms: E is good when some point of the closed ball B_r(x) is in Good_{eps,R0}(E).

    Candidate points are crossing sites of E in the ball. The diagnostics carry the bad-perimeter
    ratio against max(eps, delta), the good mass with its empirical constant Sigma(G) delta / r,
    and the measured half-space perimeter constant at (x, r).

    :raises InvalidExperimentUsage: If r >= R0 / 2.
    """
    if not r < R0 / 2:
        raise InvalidExperimentUsage(f"Need r < R0 / 2, got r = {r}, R0 = {R0}", payload={"r": r, "R0": R0})
    scales = dyadic_scales(R0, geometry, min_ball_voxels)[0]
    good, bad, witnesses = [], [], {}
    bad_perimeter = 0.0
    for index, (E, weight) in enumerate(as_grid_sets(sigma, geometry)):
        points, _ = _candidates(E, x, r, max_candidates)
        cache = AlphaCache(E)
        witness = None
        for point in points:
            if not bad_points(E, point[None, :], eps, R0, scales, cache)[0]:
                witness = point
                break
        if witness is None:
            bad.append(index)
            bad_perimeter += weight * _ball_perimeter(E, x, r)
        else:
            good.append(index)
            witnesses[index] = [float(v) for v in witness]

    ball_volume = koranyi_ball_volume(r)
    good_mass = float(sum(sigma.atoms[k][1] for k in good))
    bound = max(eps, delta)
    try:
        half_space_constant = half_space_perimeter_constant(geometry, [r], half_space_angles, [x])["min"]
    except InvalidExperimentUsage:
        half_space_constant = None
    diagnostics = {
        "bad_perimeter_ratio": bad_perimeter / ball_volume,
        "bad_perimeter_bound": bound,
        "bad_perimeter_bound_holds": bad_perimeter / ball_volume <= bound,
        "bound_note": "checked against max(eps, delta); the bound is stated with eps but derived with delta",
        "good_mass": good_mass,
        "good_mass_constant": good_mass * delta / r,
        "half_space_constant": half_space_constant,
        "scales": scales,
    }
    return GoodBadReport(good, bad, witnesses, diagnostics)


@dataclass
class StraightenResult:
    measure: HalfSpaceMeasure
    good_bad: GoodBadReport
    closeness: dict
    demoted: list

    def good_part(self, sigma: CutMeasure) -> CutMeasure:
        return sigma.restrict(self.good_bad.good)

    def bad_part(self, sigma: CutMeasure) -> CutMeasure:
        return sigma.restrict(self.good_bad.bad)

    def to_dict(self) -> dict:
        return {
            "half_spaces": self.measure.to_dict(),
            "good_bad": self.good_bad.to_dict(),
            "closeness": {str(k): v for k, v in self.closeness.items()},
            "demoted": self.demoted,
        }


def straighten(sigma: CutMeasure, geometry: GridGeometry, x: GroupElement, delta: float, eps: float,
               r: float, R0: float, max_candidates: int = 16,
               min_ball_voxels: int = MIN_BALL_VOXELS) -> StraightenResult:
    """
    Replaces every good atom by a half-space with the same weight and drops the bad atoms.

    gamma(E) is the half-space minimising alpha(E, x', 2r) over candidate points x' in the closed
    ball B_r(x). The closeness alpha < 2 eps is checked per atom; atoms that miss it are demoted to
    the bad family with a warning.
    """
    report = good_bad_cuts(sigma, geometry, x, delta, eps, r, R0, max_candidates, min_ball_voxels)
    grid_sets = as_grid_sets(sigma, geometry)
    atoms, closeness, demoted = [], {}, []
    for index in list(report.good):
        E, weight = grid_sets[index]
        points, _ = _candidates(E, x, r, max_candidates)
        best = None
        for point in points:
            try:
                value, H = alpha(E, GroupElement.from_array(point), 2 * r)
            except OutsideGridError:
                continue
            if best is None or value < best[0]:
                best = (value, H)
        if best is None or not best[0] < 2 * eps:
            logger.warning(f"Atom {index} has no half-space within 2 eps at scale 2r = {2 * r}; demoting it")
            demoted.append(index)
            continue
        closeness[index] = best[0]
        atoms.append((best[1], weight))

    if demoted:
        report.good = [k for k in report.good if k not in demoted]
        report.bad = sorted(report.bad + demoted)
    return StraightenResult(HalfSpaceMeasure(atoms), report, closeness, demoted)
