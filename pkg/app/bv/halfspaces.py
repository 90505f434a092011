"""Vertical half-spaces and the half-space closeness alpha of a voxel set.

A vertical half-space through x with normal angle theta is the preimage of a half-plane under
the projection to (a, b); it is saturated along cosets of the centre.
"""

# License: MIT

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from app.bv.grid import GridGeometry, GridSet, ball_clipped_fraction, ball_voxels
from app.bv.perimeter import crossing_sites
from app.geometry.heisenberg import IDENTITY, Dilation, GroupElement, koranyi_ball_volume, koranyi_distance_array
from app.utils.config import InvalidExperimentUsage

logger = logging.getLogger(__name__)

SCAN_ANGLES = 180
REFINE_XATOL = 1e-4
MIN_BALL_VOXELS = 64


@dataclass(frozen=True)
class HalfSpace:
    basepoint: GroupElement
    normal_angle: float

    def __post_init__(self):
        object.__setattr__(self, "normal_angle", float(self.normal_angle) % (2 * math.pi))

    @property
    def normal(self) -> np.ndarray:
        return np.array([math.cos(self.normal_angle), math.sin(self.normal_angle)])

    def signed_offset(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return (math.cos(self.normal_angle) * (points[..., 0] - self.basepoint.a)
                + math.sin(self.normal_angle) * (points[..., 1] - self.basepoint.b))

    def contains(self, points) -> np.ndarray:
        return self.signed_offset(points) >= 0

    def to_grid_set(self, geometry: GridGeometry) -> GridSet:
        return GridSet.from_predicate(geometry, self.contains)

    def to_dict(self) -> dict:
        return {"basepoint": list(self.basepoint.as_tuple()), "normal_angle": self.normal_angle}

    @classmethod
    def from_dict(cls, data: dict) -> "HalfSpace":
        return cls(GroupElement.from_array(data["basepoint"]), data["normal_angle"])


def _doubled_discrepancy(members: np.ndarray, u: np.ndarray, v: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """
    Twice the voxel count of E symmetric-difference H_theta for each angle, as integers.

    Voxels on the boundary plane count 1/2 on either side.
    """
    offsets = np.outer(np.cos(angles), u) + np.outer(np.sin(angles), v)
    doubled_h = 2 * (offsets > 0).astype(np.int64) + (offsets == 0)
    return np.abs(2 * members.astype(np.int64)[None, :] - doubled_h).sum(axis=1)


def _middle_of_best_run(values: np.ndarray) -> int:
    """Index at the middle of the longest cyclic run of minimal values (first run on ties)."""
    ties = values == values.min()
    if ties.all():
        return 0
    start = int(np.argmin(ties))
    order = (start + np.arange(values.size)) % values.size
    rotated = ties[order]
    best_run, run_start = (0, 0), None
    for position, tied in enumerate(np.append(rotated, False)):
        if tied and run_start is None:
            run_start = position
        elif not tied and run_start is not None:
            if position - run_start > best_run[1] - best_run[0]:
                best_run = (run_start, position)
            run_start = None
    return int(order[(best_run[0] + best_run[1] - 1) // 2])


def alpha(E: GridSet, x: GroupElement, r: float, refine: bool = True) -> tuple[float, HalfSpace]:
    """
    Normalised L1 distance in B_r(x) between E and the closest vertical half-space through x.

    The normal angle is scanned at 360 directions (each angle in [0, pi) with its opposite), then
    the best direction is refined by a bounded scalar minimisation to 1e-4 rad. The ball is the
    Korányi ball, voxel-summed, and normalised by its voxel count.

    :param E: The voxel set.
    :param x: Centre of the ball and basepoint of the half-spaces.
    :param r: Ball radius.
    :param refine: Whether to refine the scanned angle.
    :return: (alpha in [0, 1], the minimising half-space).
    :raises OutsideGridError: If the ball leaves the box, with the clipped fraction.
    """
    voxels = ball_voxels(E.geometry, x, r)
    if voxels.size == 0:
        raise InvalidExperimentUsage(f"Ball of radius {r} contains no voxel centre",
                                     payload={"radius": r, "voxel_volume": E.geometry.voxel_volume})
    centers = E.geometry.centers[voxels]
    members = E.membership[voxels]
    u = centers[:, 0] - x.a
    v = centers[:, 1] - x.b
    total = 2 * voxels.size

    angles = np.arange(SCAN_ANGLES) * (math.pi / SCAN_ANGLES)
    doubled = _doubled_discrepancy(members, u, v, angles)
    # Orientation-free objective: invariant under E -> complement and theta -> theta + pi.
    folded = np.minimum(doubled, total - doubled)
    best = _middle_of_best_run(folded)
    best_angle, best_value = float(angles[best]), folded[best] / total

    def objective(theta):
        count = _doubled_discrepancy(members, u, v, np.array([theta]))[0]
        return min(count, total - count) / total

    if refine and best_value > 0:
        half_step = math.pi / SCAN_ANGLES
        result = minimize_scalar(objective, bounds=(best_angle - half_step, best_angle + half_step),
                                 method="bounded", options={"xatol": REFINE_XATOL})
        if result.fun < best_value:
            best_angle, best_value = float(result.x), float(result.fun)

    count = _doubled_discrepancy(members, u, v, np.array([best_angle]))[0]
    if 2 * count > total:
        best_angle += math.pi
    return float(best_value), HalfSpace(x, best_angle)


def blow_up(E: GridSet, x: GroupElement, r: float, out_geometry: GridGeometry) -> GridSet:
    """
    S_{x,r}^{-1}(E) resampled onto out_geometry: voxel v belongs to the result iff x dilate(v, r) is in E.

    :raises OutsideGridError: If a mapped voxel centre leaves the source box.
    """
    mapped = Dilation(r, x).apply(out_geometry.centers)
    return GridSet(out_geometry, E.lookup(mapped))


def scale_floor(geometry: GridGeometry, min_ball_voxels: int = MIN_BALL_VOXELS) -> float:
    """Smallest radius whose Korányi ball holds about min_ball_voxels voxels."""
    return (min_ball_voxels * geometry.voxel_volume / koranyi_ball_volume(1.0)) ** 0.25


def dyadic_scales(R: float, geometry: GridGeometry, min_ball_voxels: int = MIN_BALL_VOXELS) -> tuple[list, list]:
    """
    The scales R, R/2, R/4, ... down to the resolution floor.

    :return: (kept scales, [first scale below the floor]).
    """
    floor = scale_floor(geometry, min_ball_voxels)
    kept = []
    r = float(R)
    while r >= floor:
        kept.append(r)
        r /= 2
    return kept, [r]


class AlphaCache:
    """Memoises alpha values of one set by (point, radius)."""

    def __init__(self, E: GridSet):
        self.E = E
        self._values: dict = {}

    def __call__(self, x: GroupElement, r: float) -> float:
        key = (x.as_tuple(), r)
        if key not in self._values:
            self._values[key] = alpha(self.E, x, r)[0]
        return self._values[key]


def bad_points(E: GridSet, points, eps: float, R: float, scales=None, cache: AlphaCache | None = None,
               min_ball_voxels: int = MIN_BALL_VOXELS) -> np.ndarray:
    """
    Bad_{eps,R}(E) membership of arbitrary points: the ball B_R(x) leaves the box, or alpha(E, x, r) > eps
    for some sampled scale r <= R.
    """
    if scales is None:
        scales, _ = dyadic_scales(R, E.geometry, min_ball_voxels)
    if not len(scales) and R > 0:
        logger.debug(f"No scale at or below R = {R} clears the resolution floor; only the boundary clause applies")
    cache = AlphaCache(E) if cache is None else cache
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    bad = np.zeros(len(points), dtype=bool)
    for index, point in enumerate(points):
        x = GroupElement.from_array(point)
        if ball_clipped_fraction(E.geometry, x, R) > 0:
            bad[index] = True
            continue
        bad[index] = any(cache(x, r) > eps for r in scales)
    return bad


def bad_set(E: GridSet, eps: float, R: float, scales=None, sites=None,
            min_ball_voxels: int = MIN_BALL_VOXELS) -> np.ndarray:
    """
    Voxel mask of Bad_{eps,R}(E), evaluated at voxel centres.

    :param scales: Radii to test; defaults to the dyadic ladder from R down to the resolution floor.
    :param sites: Voxel indices to evaluate; defaults to every voxel. Voxels not evaluated stay False.
    :return: Boolean mask over the voxels; Good is its complement on the evaluated sites.
    """
    if not R > 0:
        raise InvalidExperimentUsage(f"Bad set needs a positive R, got {R}")
    if scales is None:
        scales, skipped = dyadic_scales(R, E.geometry, min_ball_voxels)
        logger.info(f"Bad set scales for R = {R}: {scales}; below the resolution floor from {skipped[0]:.4g}")
    sites = np.arange(E.geometry.size) if sites is None else np.asarray(sites, dtype=int)
    mask = np.zeros(E.geometry.size, dtype=bool)
    mask[sites] = bad_points(E, E.geometry.centers[sites], eps, R, scales)
    return mask


def _plane_area_factor() -> float:
    # Area of a vertical plane through the centre of the Korányi unit ball: int sqrt(1 - s^4) / 2 ds.
    value, _ = quad(lambda s: math.sqrt(max(1 - s ** 4, 0.0)) / 2, -1, 1)
    return value


def half_space_constant_reference(theta: float) -> float:
    """
    Continuum value of r Per(H)(B_r(x)) / mu(B_{2r}(x)) for H through x with normal angle theta.

    The l1 perimeter of a vertical plane is (|cos| + |sin|) times its area, and both sides scale
    as r^3, so the value depends on theta only.
    """
    return (abs(math.cos(theta)) + abs(math.sin(theta))) * _plane_area_factor() / (16 * koranyi_ball_volume(1.0))


def half_space_perimeter_constant(geometry: GridGeometry, radii, angles: int = 16, basepoints=None) -> dict:
    """
    Measures c = r Per(H)(B_r(x)) / mu(B_{2r}(x)) on the grid for half-spaces H through x.

    Perimeter inside the ball is the crossing weight whose crossing site lies in B_r(x), which
    keeps the ball resolution-independent along the plane.

    :return: {"min", "max", "rows": [{"center", "radius", "theta", "measured", "reference"}]}.
    """
    basepoints = [IDENTITY] if basepoints is None else list(basepoints)
    rows = []
    for x in basepoints:
        for theta in np.arange(angles) * (2 * math.pi / angles):
            H = HalfSpace(x, theta)
            sites, weights = crossing_sites(H.to_grid_set(geometry))
            for r in radii:
                clipped = ball_clipped_fraction(geometry, x, r)
                if clipped > 0:
                    logger.warning(f"Skipping r = {r} at {x.as_tuple()}: ball clipped by {clipped:.3f}")
                    continue
                inside = koranyi_distance_array(sites, x.as_array()) <= r
                per = float(weights[inside].sum())
                rows.append({
                    "center": list(x.as_tuple()),
                    "radius": float(r),
                    "theta": float(theta),
                    "measured": r * per / koranyi_ball_volume(2 * r),
                    "reference": half_space_constant_reference(theta),
                })
    if not rows:
        raise InvalidExperimentUsage("No ball of the sweep fits inside the grid")
    measured = [row["measured"] for row in rows]
    return {"min": min(measured), "max": max(measured), "rows": rows}
