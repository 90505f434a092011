"""Group law, dilations and the Korányi gauge of the first Heisenberg group.

Points are written in the coordinates (a, b, c) of the upper triangular matrix

    [[1, a, c],
     [0, 1, b],
     [0, 0, 1]]

so the product is (a, b, c)(a', b', c') = (a + a', b + b', c + c' + ab'). The centre is
the c-axis. Gauges are evaluated after the change c' = c - ab/2 to the symmetrised
centre coordinate, in which inversion is (a, b, c') -> (-a, -b, -c').
"""

# License: MIT

import math
from dataclasses import dataclass

import numpy as np

from app.utils.config import InvalidExperimentUsage


@dataclass(frozen=True)
class GroupElement:
    a: float
    b: float
    c: float

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return multiply(self, other)

    def as_tuple(self) -> tuple:
        return (self.a, self.b, self.c)

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c], dtype=float)

    @classmethod
    def from_array(cls, values) -> "GroupElement":
        a, b, c = values
        return cls(float(a), float(b), float(c))


IDENTITY = GroupElement(0, 0, 0)


def multiply(g: GroupElement, h: GroupElement) -> GroupElement:
    return GroupElement(g.a + h.a, g.b + h.b, g.c + h.c + g.a * h.b)


def inverse(g: GroupElement) -> GroupElement:
    return GroupElement(-g.a, -g.b, g.a * g.b - g.c)


def commutator(g: GroupElement, h: GroupElement) -> GroupElement:
    """The commutator g h g^-1 h^-1; central for every pair."""
    return g * h * inverse(g) * inverse(h)


def center_element(t: float) -> GroupElement:
    """exp(tZ), the centre element at height t."""
    return GroupElement(0, 0, t)


def symmetrized_center(g: GroupElement) -> float:
    return g.c - g.a * g.b / 2


def _check_scale(r: float) -> None:
    if not r > 0:
        raise InvalidExperimentUsage(f"Dilation factor must be positive, got {r}", payload={"r": r})


def dilate(g: GroupElement, r: float) -> GroupElement:
    """
    Applies the group automorphism (a, b, c) -> (ra, rb, r^2 c).

    :param g: The element to dilate.
    :param r: The scale factor.
    :return: The dilated element.
    :raises InvalidExperimentUsage: If r is not positive.
    """
    _check_scale(r)
    return GroupElement(r * g.a, r * g.b, r * r * g.c)


@dataclass(frozen=True)
class Dilation:
    """The dilation S_r, optionally followed by left translation (S_{x,r} = l_x o S_r)."""

    r: float
    basepoint: GroupElement = IDENTITY

    def __post_init__(self):
        _check_scale(self.r)

    def __call__(self, g: GroupElement) -> GroupElement:
        return multiply(self.basepoint, dilate(g, self.r))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return multiply_arrays(self.basepoint.as_array(), dilate_arrays(points, self.r))

    def preimage(self, points: np.ndarray) -> np.ndarray:
        """S_{x,r}^{-1}: left-translate by x^{-1}, then dilate by 1/r."""
        return dilate_arrays(multiply_arrays(inverse(self.basepoint).as_array(), points), 1 / self.r)

    def compose(self, other: "Dilation") -> "Dilation":
        """self o other, which is again a translated dilation."""
        return Dilation(self.r * other.r, self(other.basepoint))

    @property
    def jacobian(self) -> float:
        """Factor by which Lebesgue (Haar) measure scales; the homogeneous dimension is 4."""
        return self.r ** 4


def multiply_arrays(p, q) -> np.ndarray:
    """Broadcasting group product of arrays of shape (..., 3)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return np.stack(
        [p[..., 0] + q[..., 0], p[..., 1] + q[..., 1], p[..., 2] + q[..., 2] + p[..., 0] * q[..., 1]],
        axis=-1,
    )


def inverse_arrays(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.stack([-p[..., 0], -p[..., 1], p[..., 0] * p[..., 1] - p[..., 2]], axis=-1)


def dilate_arrays(p, r: float) -> np.ndarray:
    _check_scale(r)
    p = np.asarray(p, dtype=float)
    return np.stack([r * p[..., 0], r * p[..., 1], r * r * p[..., 2]], axis=-1)


def to_symmetric(p) -> np.ndarray:
    """Matrix coordinates to (a, b, c - ab/2)."""
    p = np.asarray(p, dtype=float)
    return np.stack([p[..., 0], p[..., 1], p[..., 2] - p[..., 0] * p[..., 1] / 2], axis=-1)


def from_symmetric(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.stack([p[..., 0], p[..., 1], p[..., 2] + p[..., 0] * p[..., 1] / 2], axis=-1)


def koranyi_gauge(g: GroupElement) -> float:
    c_sym = symmetrized_center(g)
    return ((g.a ** 2 + g.b ** 2) ** 2 + 16 * c_sym ** 2) ** 0.25


def koranyi_distance(g: GroupElement, h: GroupElement) -> float:
    """Left-invariant Korányi distance, the gauge of h^{-1} g."""
    return koranyi_gauge(multiply(inverse(h), g))


def koranyi_gauge_array(p) -> np.ndarray:
    s = to_symmetric(p)
    return ((s[..., 0] ** 2 + s[..., 1] ** 2) ** 2 + 16 * s[..., 2] ** 2) ** 0.25


def koranyi_distance_array(p, q) -> np.ndarray:
    return koranyi_gauge_array(multiply_arrays(inverse_arrays(q), p))


KORANYI_UNIT_VOLUME = math.pi ** 2 / 8


def koranyi_ball_volume(r: float) -> float:
    """Lebesgue measure of a Korányi ball of radius r, pi^2 r^4 / 8."""
    return KORANYI_UNIT_VOLUME * r ** 4
