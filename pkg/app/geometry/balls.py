"""Balls of the Heisenberg group for either gauge: membership, extents, sampling and volume."""

# License: MIT

import enum
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import qmc

from app.geometry.geodesics import cc_distance_array
from app.geometry.heisenberg import (
    IDENTITY,
    GroupElement,
    from_symmetric,
    koranyi_ball_volume,
    koranyi_distance_array,
    koranyi_gauge_array,
    multiply_arrays,
)
from app.utils.config import InvalidExperimentUsage

logger = logging.getLogger(__name__)


class Gauge(str, enum.Enum):
    KORANYI = "koranyi"
    CC = "cc"


# Half-height of the unit ball in the symmetrised centre coordinate. A horizontal curve of
# length 1 encloses area at most 1/(4 pi); the Korányi bound is read off its gauge.
_CENTER_HALF_HEIGHT = {Gauge.KORANYI: 0.25, Gauge.CC: 1 / (4 * math.pi)}


@dataclass(frozen=True)
class BallSpec:
    center: GroupElement
    radius: float
    gauge: Gauge = Gauge.KORANYI

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidExperimentUsage(f"Ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "gauge", Gauge(self.gauge))

    def distances(self, points, tol: float | None = None) -> np.ndarray:
        if self.gauge is Gauge.KORANYI:
            return koranyi_distance_array(points, self.center.as_array())
        return cc_distance_array(points, self.center.as_array(), tol)

    def contains(self, points, tol: float | None = None) -> np.ndarray:
        return self.distances(points, tol) <= self.radius

    def extent(self) -> tuple[np.ndarray, np.ndarray]:
        """
        Axis-aligned box in matrix coordinates containing the ball.

        With x the centre and g in the unit-scale ball, x g has c-coordinate
        x_c + g_c' + g_a g_b / 2 + x_a g_b, each term bounded separately.
        """
        r = self.radius
        x = self.center
        c_half = _CENTER_HALF_HEIGHT[self.gauge] * r * r + r * r / 4 + abs(x.a) * r
        lo = np.array([x.a - r, x.b - r, x.c - c_half])
        hi = np.array([x.a + r, x.b + r, x.c + c_half])
        return lo, hi

    def volume(self, samples: int = 200_000, seed: int = 0) -> float:
        if self.gauge is Gauge.KORANYI:
            return koranyi_ball_volume(self.radius)
        return ball_volume(self, samples, seed)[0]


def _symmetric_box(radius: float, gauge: Gauge) -> np.ndarray:
    h = _CENTER_HALF_HEIGHT[gauge] * radius * radius
    return np.array([radius, radius, h])


def ball_volume(spec: BallSpec, samples: int = 20_000, seed: int = 0) -> tuple[float, float]:
    """
    Monte-Carlo Lebesgue measure of a ball.

    :param spec: The ball. Left invariance means only radius and gauge matter.
    :param samples: Number of uniform samples in the bounding box.
    :param seed: Seed of the numpy generator.
    :return: (volume estimate, standard error).
    """
    half = _symmetric_box(spec.radius, spec.gauge)
    rng = np.random.default_rng(seed)
    points_sym = rng.uniform(-half, half, size=(samples, 3))
    inside = BallSpec(IDENTITY, spec.radius, spec.gauge).contains(from_symmetric(points_sym))
    box_volume = float(np.prod(2 * half))
    p = float(inside.mean())
    return box_volume * p, box_volume * math.sqrt(p * (1 - p) / samples)


def sample_ball(spec: BallSpec, n: int, seed: int = 0, tol: float | None = None) -> np.ndarray:
    """
    Draws n points uniformly from a ball by rejection from its symmetrised bounding box.

    Haar measure is Lebesgue measure in both coordinate systems, so uniform stays uniform
    after converting and translating.
    """
    half = _symmetric_box(spec.radius, spec.gauge)
    rng = np.random.default_rng(seed)
    accepted = []
    count = 0
    while count < n:
        batch = from_symmetric(rng.uniform(-half, half, size=(max(2 * n, 64), 3)))
        batch = batch[BallSpec(IDENTITY, spec.radius, spec.gauge).contains(batch, tol)]
        accepted.append(batch)
        count += len(batch)
    points = np.concatenate(accepted)[:n]
    return multiply_arrays(spec.center.as_array(), points)


@lru_cache(maxsize=8)
def reference_ball_cloud(log2_points: int = 12, seed: int = 0) -> np.ndarray:
    """
    Quasi-uniform points of the Korányi unit ball at the identity, from a scrambled Sobol sequence.

    Used wherever a ball has to be integrated independently of the grid resolution.
    """
    half = _symmetric_box(1.0, Gauge.KORANYI)
    sobol = qmc.Sobol(d=3, scramble=True, seed=seed)
    unit = sobol.random_base2(log2_points)
    points = from_symmetric(qmc.scale(unit, -half, half))
    points = points[koranyi_gauge_array(points) <= 1.0]
    points.flags.writeable = False
    return points


def gauge_equivalence_band(n_pairs: int = 10_000, seed: int = 0, radius: float = 1.0,
                           tol: float | None = None) -> tuple[float, float]:
    """
    Empirical band [m, M] of cc_distance / koranyi_distance over random pairs of a Korányi ball.

    :return: The minimum and maximum ratio observed.
    """
    points = sample_ball(BallSpec(IDENTITY, radius), 2 * n_pairs, seed)
    p, q = points[:n_pairs], points[n_pairs:]
    kor = koranyi_distance_array(p, q)
    keep = kor > 0
    ratio = cc_distance_array(p[keep], q[keep], tol) / kor[keep]
    logger.info(f"Gauge band over {int(keep.sum())} pairs: [{ratio.min():.6f}, {ratio.max():.6f}]")
    return float(ratio.min()), float(ratio.max())
