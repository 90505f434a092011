"""Voxel grids over a box of the Heisenberg group, their horizontal line structure, and voxel sets.

Voxels are indexed in C order over the (a, b, c) resolution. P-lines run along the a-axis.
Q-lines follow the integral curves b -> (a, b, c0 + a b) of Q = d/db + a d/dc: at fixed a_i,
voxel row j sits at c-layer k0 + s_j with s_j = round(a_i b_j / dc), so every voxel lies on
exactly one Q-line and the snap error is at most half a c-cell.
"""

# License: MIT

import csv
import io
import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from app.geometry.balls import BallSpec, reference_ball_cloud
from app.geometry.heisenberg import Dilation, GroupElement, from_symmetric
from app.metrics.cuts import Cut, LineFamily
from app.utils.config import InvalidExperimentUsage, MissingInputError, OutsideGridError, get_config

logger = logging.getLogger(__name__)

GRIDSET_MAGIC = b"HCGS"
GRIDSET_VERSION = 1
_HEADER = np.dtype([
    ("magic", "S4"), ("version", "<u2"), ("bounds", "<f8", (6,)), ("resolution", "<u4", (3,)),
])


@dataclass(frozen=True)
class GridGeometry:
    bounds: tuple = ((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0))
    resolution: tuple = (96, 96, 192)

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        resolution = tuple(int(n) for n in self.resolution)
        if len(bounds) != 3 or len(resolution) != 3:
            raise InvalidExperimentUsage("A grid needs bounds and a resolution for each of a, b, c")
        if any(hi <= lo for lo, hi in bounds) or any(n < 2 for n in resolution):
            raise InvalidExperimentUsage(
                "Grid bounds must be increasing and every axis needs at least 2 voxels",
                payload={"bounds": [list(b) for b in bounds], "resolution": list(resolution)},
            )
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "resolution", resolution)

    @classmethod
    def default(cls, half_width: float = 1.0) -> "GridGeometry":
        return cls(((-half_width, half_width),) * 3, get_config().GRID_RESOLUTION)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.resolution

    @property
    def size(self) -> int:
        return int(np.prod(self.resolution))

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.bounds])

    @property
    def spacing(self) -> np.ndarray:
        return (self.upper - self.lower) / np.array(self.resolution)

    @property
    def voxel_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_centers(self, axis: int) -> np.ndarray:
        lo = self.bounds[axis][0]
        return lo + (np.arange(self.resolution[axis]) + 0.5) * self.spacing[axis]

    @cached_property
    def centers(self) -> np.ndarray:
        """Voxel centres in matrix coordinates, shape (size, 3)."""
        a, b, c = np.meshgrid(*(self.axis_centers(k) for k in range(3)), indexing="ij")
        return np.stack([a.ravel(), b.ravel(), c.ravel()], axis=-1)

    def locate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """
        Nearest voxel of each point.

        :return: (flat voxel indices, inside mask); indices of outside points are clipped.
        """
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        cell = np.floor((points - self.lower) / self.spacing).astype(np.int64)
        res = np.array(self.resolution)
        inside = ((cell >= 0) & (cell < res)).all(axis=1)
        cell = np.clip(cell, 0, res - 1)
        return np.ravel_multi_index(cell.T, self.resolution), inside

    @cached_property
    def q_shifts(self) -> np.ndarray:
        """s[i, j] = round(a_i b_j / dc), the c-layer offset of Q-line row j at a_i."""
        a = self.axis_centers(0)
        b = self.axis_centers(1)
        return np.rint(np.outer(a, b) / self.spacing[2]).astype(np.int64)

    @property
    def q_snap_error(self) -> float:
        a = self.axis_centers(0)
        b = self.axis_centers(1)
        return float(np.abs(np.outer(a, b) - self.q_shifts * self.spacing[2]).max())

    @cached_property
    def p_lines(self) -> LineFamily:
        idx = np.arange(self.size).reshape(self.shape)
        da, db, dc = self.spacing
        tail = idx[:-1, :, :].ravel()
        head = idx[1:, :, :].ravel()
        return LineFamily(tail, head, np.full(tail.size, db * dc))

    @cached_property
    def q_lines(self) -> LineFamily:
        na, nb, nc = self.shape
        da, db, dc = self.spacing
        step = np.diff(self.q_shifts, axis=1)
        i, j, k = np.meshgrid(np.arange(na), np.arange(nb - 1), np.arange(nc), indexing="ij")
        k_next = k + step[i, j]
        valid = (k_next >= 0) & (k_next < nc)
        tail = np.ravel_multi_index((i[valid], j[valid], k[valid]), self.shape)
        head = np.ravel_multi_index((i[valid], j[valid] + 1, k_next[valid]), self.shape)
        return LineFamily(tail, head, np.full(tail.size, da * dc))

    @cached_property
    def lines(self) -> LineFamily:
        return LineFamily.concat(self.p_lines, self.q_lines)

    def to_dict(self) -> dict:
        return {"bounds": [list(b) for b in self.bounds], "resolution": list(self.resolution)}


@dataclass
class GridSet:
    """A voxel subset of a grid."""

    geometry: GridGeometry
    membership: np.ndarray

    def __post_init__(self):
        self.membership = np.asarray(self.membership, dtype=bool).ravel()
        if self.membership.size != self.geometry.size:
            raise InvalidExperimentUsage(
                f"Membership has {self.membership.size} entries for a grid of {self.geometry.size} voxels"
            )

    @classmethod
    def from_predicate(cls, geometry: GridGeometry, predicate) -> "GridSet":
        """Voxels whose centre satisfies predicate(points) -> bool array."""
        return cls(geometry, predicate(geometry.centers))

    @classmethod
    def from_cut(cls, geometry: GridGeometry, cut: Cut) -> "GridSet":
        return cls(geometry, cut.membership)

    def as_cut(self) -> Cut:
        return Cut(self.membership)

    def complement(self) -> "GridSet":
        return GridSet(self.geometry, ~self.membership)

    @property
    def volume(self) -> float:
        return self.geometry.voxel_volume * int(self.membership.sum())

    def indicator(self) -> np.ndarray:
        return self.membership.astype(float)

    def lookup(self, points, allow_outside: bool = False) -> np.ndarray:
        """
        Membership of arbitrary points by nearest voxel.

        :raises OutsideGridError: If points leave the box and allow_outside is False; outside points
            read as non-members otherwise.
        """
        index, inside = self.geometry.locate(points)
        if not allow_outside and not inside.all():
            raise OutsideGridError(
                "Lookup points leave the grid box",
                payload={"clipped_fraction": float(1 - inside.mean())},
            )
        return self.membership[index] & inside

    def to_bytes(self) -> bytes:
        header = np.zeros(1, dtype=_HEADER)
        header["magic"] = GRIDSET_MAGIC
        header["version"] = GRIDSET_VERSION
        header["bounds"] = np.ravel(self.geometry.bounds)
        header["resolution"] = self.geometry.resolution
        return header.tobytes() + np.packbits(self.membership).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "GridSet":
        if len(data) < _HEADER.itemsize:
            raise MissingInputError("GridSet data is shorter than its header")
        header = np.frombuffer(data[:_HEADER.itemsize], dtype=_HEADER)[0]
        if header["magic"] != GRIDSET_MAGIC:
            raise MissingInputError("Not a GridSet file", payload={"magic": repr(bytes(header["magic"]))})
        if int(header["version"]) != GRIDSET_VERSION:
            raise MissingInputError(f"Unsupported GridSet version {int(header['version'])}")
        bounds = np.asarray(header["bounds"], dtype=float).reshape(3, 2)
        geometry = GridGeometry(tuple(map(tuple, bounds)), tuple(int(n) for n in header["resolution"]))
        bits = np.unpackbits(np.frombuffer(data[_HEADER.itemsize:], dtype=np.uint8))
        if bits.size < geometry.size:
            raise MissingInputError("GridSet data is truncated")
        return cls(geometry, bits[:geometry.size].astype(bool))


@dataclass
class PerimeterField:
    """Nonnegative per-voxel density: the discrete perimeter measure of a set, or a weighted sum of them."""

    geometry: GridGeometry
    density: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.density = np.asarray(self.density, dtype=float).ravel()
        if self.density.size != self.geometry.size:
            raise InvalidExperimentUsage("Perimeter density does not match the grid")

    @classmethod
    def zeros(cls, geometry: GridGeometry) -> "PerimeterField":
        return cls(geometry, np.zeros(geometry.size))

    def total(self, region=None) -> float:
        if region is None:
            return float(self.density.sum())
        return float(self.density[np.asarray(region, dtype=bool).ravel()].sum())

    def restrict(self, region) -> "PerimeterField":
        return PerimeterField(self.geometry, np.where(np.asarray(region, dtype=bool).ravel(), self.density, 0.0),
                              dict(self.metadata))

    def scaled(self, factor: float) -> "PerimeterField":
        return PerimeterField(self.geometry, self.density * factor, dict(self.metadata))

    def __add__(self, other: "PerimeterField") -> "PerimeterField":
        if other.geometry != self.geometry:
            raise InvalidExperimentUsage("Cannot add perimeter fields over different grids")
        return PerimeterField(self.geometry, self.density + other.density, dict(self.metadata))

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["voxel", "density"])
        for index in np.flatnonzero(self.density):
            writer.writerow([int(index), repr(float(self.density[index]))])
        return buffer.getvalue()

    @classmethod
    def from_csv(cls, geometry: GridGeometry, text: str) -> "PerimeterField":
        density = np.zeros(geometry.size)
        for row in csv.DictReader(io.StringIO(text)):
            density[int(row["voxel"])] = float(row["density"])
        return cls(geometry, density)


@lru_cache(maxsize=1)
def _sphere_mesh(angles: int = 16, levels: int = 9) -> np.ndarray:
    # Korányi unit sphere in symmetric coordinates: |z|^4 + 16 c'^2 = 1, poles at c' = +-1/4.
    theta = np.arange(angles) * (2 * np.pi / angles)
    psi = np.linspace(-np.pi / 2, np.pi / 2, levels)
    rho = np.sqrt(np.cos(psi))
    a = np.outer(rho, np.cos(theta)).ravel()
    b = np.outer(rho, np.sin(theta)).ravel()
    c = np.repeat(np.sin(psi) / 4, angles)
    points = from_symmetric(np.column_stack([a, b, c]))
    points.flags.writeable = False
    return points


def ball_clipped_fraction(geometry: GridGeometry, x: GroupElement, r: float) -> float:
    """
    Fraction of the Korányi ball B_r(x) outside the box, from a fixed quasi-uniform cloud.

    When the cloud fits but the boundary mesh, tips along each axis included, leaves the box,
    the share of mesh points outside is reported scaled below one cloud point.
    """
    dilation = Dilation(r, x)
    _, inside = geometry.locate(dilation.apply(reference_ball_cloud(10)))
    clipped = float(1 - inside.mean())
    if clipped > 0:
        return clipped
    _, on_sphere = geometry.locate(dilation.apply(_sphere_mesh()))
    return float(1 - on_sphere.mean()) / len(inside)


def ball_voxels(geometry: GridGeometry, x: GroupElement, r: float) -> np.ndarray:
    """
    Flat indices of the voxels whose centre lies in the Korányi ball B_r(x).

    :raises OutsideGridError: If the ball leaves the box.
    """
    spec = BallSpec(x, r)
    clipped = ball_clipped_fraction(geometry, x, r)
    if clipped > 0:
        raise OutsideGridError(
            f"Ball of radius {r} at {x.as_tuple()} leaves the grid box",
            payload={"clipped_fraction": clipped, "radius": r, "center": list(x.as_tuple())},
        )
    lo, hi = spec.extent()
    res = np.array(geometry.resolution)
    first = np.clip(np.floor((lo - geometry.lower) / geometry.spacing).astype(int), 0, res - 1)
    last = np.clip(np.ceil((hi - geometry.lower) / geometry.spacing).astype(int), 0, res - 1)
    axes = [np.arange(first[k], last[k] + 1) for k in range(3)]
    i, j, k = np.meshgrid(*axes, indexing="ij")
    candidates = np.ravel_multi_index((i.ravel(), j.ravel(), k.ravel()), geometry.shape)
    return candidates[spec.contains(geometry.centers[candidates])]
