"""Carnot-Carathéodory distance of the Heisenberg group with P, Q orthonormal.

Geodesics from the identity project to circular arcs in the (a, b)-plane; the symmetrised
centre coordinate of the endpoint is the signed area between the arc and its chord. For an
arc of turning angle phi and chord length r the area is r^2 (phi - sin phi) / (8 sin^2(phi/2)),
which is increasing on (0, 2 pi), and the length is r (phi/2) / sin(phi/2). The distance is
found by bisection on phi.
"""

# License: MIT

import logging
import math

import numpy as np
from scipy.integrate import cumulative_trapezoid

from app.geometry.heisenberg import (
    GroupElement,
    from_symmetric,
    inverse,
    inverse_arrays,
    multiply,
    multiply_arrays,
    to_symmetric,
)
from app.utils.config import InvalidExperimentUsage, NumericalError, get_config

logger = logging.getLogger(__name__)

BRACKET_STEPS = 50
MAX_BISECTIONS = 200


def area_ratio(phi) -> np.ndarray:
    """(phi - sin phi) / (8 sin^2(phi/2)): enclosed area over squared chord for turning angle phi."""
    phi = np.asarray(phi, dtype=float)
    small = phi < 1e-3
    # Series avoids cancellation in phi - sin(phi).
    numerator = np.where(
        small,
        phi ** 3 / 6 * (1 - phi ** 2 / 20 + phi ** 4 / 840),
        phi - np.sin(phi),
    )
    half_sin = np.sin(phi / 2)
    denominator = 8 * np.where(small, (phi / 2) ** 2 * np.sinc(phi / (2 * np.pi)) ** 2, half_sin ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(phi == 0, 0.0, numerator / denominator)


def arc_factor(phi) -> np.ndarray:
    """Arc length over chord length, (phi/2) / sin(phi/2)."""
    return 1.0 / np.sinc(np.asarray(phi, dtype=float) / (2 * np.pi))


def _turning_angles(target: np.ndarray, radial: np.ndarray, tol: float) -> np.ndarray:
    """Solves area_ratio(phi) = target on (0, 2 pi) to relative length accuracy tol."""
    lo = np.zeros_like(target)
    hi = np.full_like(target, math.pi)
    for step in range(2, BRACKET_STEPS + 1):
        open_bracket = area_ratio(hi) < target
        if not open_bracket.any():
            break
        hi[open_bracket] = 2 * math.pi * (1 - 2.0 ** -step)
    else:
        open_bracket = area_ratio(hi) < target
        if open_bracket.any():
            worst = int(np.argmax(np.where(open_bracket, target, -np.inf)))
            raise NumericalError(
                "Could not bracket the geodesic turning angle",
                payload={
                    "area_ratio_target": float(target[worst]),
                    "horizontal_norm": float(radial[worst]),
                    "bracket": [float(lo[worst]), float(hi[worst])],
                    "bracket_steps": BRACKET_STEPS,
                },
            )

    for _ in range(MAX_BISECTIONS):
        length_lo = arc_factor(lo)
        length_hi = arc_factor(hi)
        mid = (lo + hi) / 2
        converged = (length_hi - length_lo <= tol * length_lo) | (mid <= lo) | (mid >= hi)
        if converged.all():
            return (lo + hi) / 2
        below = area_ratio(mid) < target
        lo = np.where(~converged & below, mid, lo)
        hi = np.where(~converged & ~below, mid, hi)

    raise NumericalError(
        "Bisection on the geodesic turning angle hit its iteration cap",
        payload={"max_bisections": MAX_BISECTIONS, "tol": tol},
    )


def cc_norm_array(points, tol: float | None = None) -> np.ndarray:
    """
    Carnot-Carathéodory distance from the identity for an array of points in matrix coordinates.

    :param points: Array of shape (..., 3).
    :param tol: Relative accuracy of each distance. Defaults to the configured HEISENCUT_CC_TOL.
    :return: Array of shape (...) of distances.
    :raises NumericalError: If the turning angle cannot be bracketed.
    """
    if tol is None:
        tol = get_config().CC_TOL
    if not tol > 0:
        raise InvalidExperimentUsage(f"CC tolerance must be positive, got {tol}")

    sym = to_symmetric(points)
    shape = sym.shape[:-1]
    sym = sym.reshape(-1, 3)
    radial = np.hypot(sym[:, 0], sym[:, 1])
    area = np.abs(sym[:, 2])

    out = radial.copy()
    vertical = (radial == 0) & (area > 0)
    out[vertical] = 2 * np.sqrt(math.pi * area[vertical])

    general = (radial > 0) & (area > 0)
    if general.any():
        target = area[general] / radial[general] ** 2
        phi = _turning_angles(target, radial[general], tol)
        out[general] = radial[general] * arc_factor(phi)

    return out.reshape(shape)


def cc_norm(g: GroupElement, tol: float | None = None) -> float:
    return float(cc_norm_array(g.as_array(), tol))


def cc_distance(g: GroupElement, h: GroupElement, tol: float | None = None) -> float:
    """Left-invariant CC distance, the CC norm of h^{-1} g."""
    return cc_norm(multiply(inverse(h), g), tol)


def cc_distance_array(p, q, tol: float | None = None) -> np.ndarray:
    return cc_norm_array(multiply_arrays(inverse_arrays(q), p), tol)


def cc_geodesic(g: GroupElement, h: GroupElement, samples: int = 257, tol: float | None = None) -> np.ndarray:
    """
    Samples a length-minimising horizontal path from h to g.

    The projection is the circular arc found by cc_distance; the centre coordinate is recovered by
    integrating the horizontal constraint dc' = (a db - b da)/2 along the path, so the endpoint is a
    check on the closed-form solution rather than an input to it.

    :param g: End point.
    :param h: Start point.
    :param samples: Number of points along the path, endpoints included.
    :return: Array of shape (samples, 3) in matrix coordinates.
    """
    w = to_symmetric(multiply(inverse(h), g).as_array())
    x, y, area = float(w[0]), float(w[1]), float(w[2])
    length = cc_norm(multiply(inverse(h), g), tol)
    s = np.linspace(0.0, length, samples)

    radial = math.hypot(x, y)
    if area == 0 or length == 0:
        direction = math.atan2(y, x)
        path_x, path_y = s * math.cos(direction), s * math.sin(direction)
        dx, dy = np.full_like(s, math.cos(direction)), np.full_like(s, math.sin(direction))
    else:
        if radial == 0:
            phi = 2 * math.pi
        else:
            target = np.array([abs(area) / radial ** 2])
            phi = float(_turning_angles(target, np.array([radial]), tol or get_config().CC_TOL)[0])
        sign = 1.0 if area > 0 else -1.0
        chord_direction = math.atan2(y, x) if radial > 0 else 0.0
        theta0 = chord_direction - sign * phi / 2
        curvature = sign * phi / length
        theta = theta0 + curvature * s
        path_x = (np.sin(theta) - math.sin(theta0)) / curvature
        path_y = (math.cos(theta0) - np.cos(theta)) / curvature
        dx, dy = np.cos(theta), np.sin(theta)

    swept = cumulative_trapezoid((path_x * dy - path_y * dx) / 2, s, initial=0.0)
    path = from_symmetric(np.stack([path_x, path_y, swept], axis=-1))
    return multiply_arrays(h.as_array(), path)
