"""Finite metric spaces: word-metric balls of the integer Heisenberg group, sampled CC metrics and graph metrics."""

# License: MIT

import logging
import math
import re
from dataclasses import dataclass, field
from typing import Iterator

import networkx as nx
import numpy as np

from app.geometry.balls import BallSpec, Gauge, sample_ball
from app.geometry.geodesics import cc_distance_array
from app.geometry.heisenberg import IDENTITY
from app.utils.config import InvalidExperimentUsage, OverCapError, get_config

logger = logging.getLogger(__name__)

DEFAULT_GENERATORS = ((1, 0, 0), (0, 1, 0), (-1, 0, 0), (0, -1, 0))


def _mul(g: tuple, h: tuple) -> tuple:
    return (g[0] + h[0], g[1] + h[1], g[2] + h[2] + g[0] * h[1])


def _inv(g: tuple) -> tuple:
    return (-g[0], -g[1], g[0] * g[1] - g[2])


@dataclass(frozen=True)
class CayleySpec:
    radius: int
    generators: tuple = DEFAULT_GENERATORS

    def __post_init__(self):
        if int(self.radius) != self.radius or self.radius < 0:
            raise InvalidExperimentUsage(f"Cayley radius must be a nonnegative integer, got {self.radius}")
        generators = tuple(tuple(int(x) for x in g) for g in self.generators)
        if (0, 0, 0) in generators:
            raise InvalidExperimentUsage("The generating set must not contain the identity")
        missing = [g for g in generators if _inv(g) not in generators]
        if missing:
            raise InvalidExperimentUsage(
                "The generating set must be closed under inverses",
                payload={"missing_inverses_of": [list(g) for g in missing]},
            )
        object.__setattr__(self, "radius", int(self.radius))
        object.__setattr__(self, "generators", generators)


@dataclass
class FiniteMetricSpace:
    """Weighted points with a symmetric distance matrix."""

    dist: np.ndarray
    weights: np.ndarray | None = None
    labels: list | None = None
    coordinates: np.ndarray | None = None
    name: str = "space"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.dist = np.atleast_2d(np.asarray(self.dist, dtype=float))
        n = self.dist.shape[0]
        if self.dist.shape != (n, n):
            raise InvalidExperimentUsage(f"Distance matrix must be square, got shape {self.dist.shape}")
        if self.weights is None:
            self.weights = np.ones(n)
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.weights.size != n or (self.weights <= 0).any():
            raise InvalidExperimentUsage("Point weights must be positive, one per point")
        if self.labels is None:
            self.labels = list(range(n))
        if self.coordinates is not None:
            self.coordinates = np.asarray(self.coordinates, dtype=float)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def validate(self, tol: float = 1e-9) -> None:
        """
        Checks the metric axioms.

        :param tol: Absolute slack allowed on symmetry and the triangle inequality.
        :raises InvalidExperimentUsage: On the first violated axiom, with the offending indices.
        """
        d = self.dist
        if not np.isfinite(d).all() or (d < 0).any():
            raise InvalidExperimentUsage("Distances must be finite and nonnegative")
        if np.abs(np.diag(d)).max(initial=0.0) > 0:
            raise InvalidExperimentUsage("Distance matrix must have a zero diagonal")
        asym = np.abs(d - d.T)
        if asym.max(initial=0.0) > tol:
            i, j = np.unravel_index(np.argmax(asym), asym.shape)
            raise InvalidExperimentUsage("Distance matrix is not symmetric", payload={"pair": [int(i), int(j)]})
        off_diagonal = ~np.eye(self.n, dtype=bool)
        if (d[off_diagonal] <= 0).any():
            i, j = np.argwhere((d <= 0) & off_diagonal)[0]
            raise InvalidExperimentUsage("Distinct points at distance zero", payload={"pair": [int(i), int(j)]})
        for k in range(self.n):
            excess = d - (d[:, k][:, None] + d[k, :][None, :])
            if excess.max() > tol:
                i, j = np.unravel_index(np.argmax(excess), excess.shape)
                raise InvalidExperimentUsage(
                    "Triangle inequality violated",
                    payload={"triple": [int(i), int(k), int(j)], "excess": float(excess[i, j])},
                )

    def subspace(self, indices) -> "FiniteMetricSpace":
        indices = np.asarray(indices, dtype=int)
        return FiniteMetricSpace(
            self.dist[np.ix_(indices, indices)].copy(),
            self.weights[indices].copy(),
            [self.labels[i] for i in indices],
            None if self.coordinates is None else self.coordinates[indices].copy(),
            name=f"{self.name}[{len(indices)}]",
        )

    def edges(self, max_distance: float = 1.0) -> list[tuple[int, int, float]]:
        """Pairs i < j with dist <= max_distance; distance-1 pairs of a word metric are the Cayley edges."""
        i, j = np.nonzero(np.triu(self.dist <= max_distance, k=1))
        return [(int(a), int(b), float(self.dist[a, b])) for a, b in zip(i, j)]

    def to_dict(self) -> dict:
        rv = {
            "name": self.name,
            "n": self.n,
            "points": [list(label) if isinstance(label, tuple) else label for label in self.labels],
            "weights": self.weights.tolist(),
            "dist": self.dist.ravel().tolist(),
        }
        if self.coordinates is not None:
            rv["coordinates"] = self.coordinates.tolist()
        if self.metadata:
            rv["metadata"] = self.metadata
        return rv

    @classmethod
    def from_dict(cls, data: dict) -> "FiniteMetricSpace":
        n = int(data["n"])
        dist = np.asarray(data["dist"], dtype=float)
        if dist.size != n * n:
            raise InvalidExperimentUsage(f"Expected {n * n} distances, got {dist.size}")
        labels = [tuple(p) if isinstance(p, list) else p for p in data.get("points", range(n))]
        return cls(
            dist.reshape(n, n),
            data.get("weights"),
            labels,
            data.get("coordinates"),
            name=data.get("name", "space"),
            metadata=data.get("metadata", {}),
        )

    def to_edge_list(self, max_distance: float = 1.0) -> str:
        return "".join(f"{i} {j} {d:.17g}\n" for i, j, d in self.edges(max_distance))


def _bfs_layers(generators) -> Iterator[tuple[int, list]]:
    seen = {(0, 0, 0)}
    frontier = [(0, 0, 0)]
    length = 0
    yield length, frontier
    while True:
        length += 1
        nxt = []
        for g in frontier:
            for s in generators:
                h = _mul(g, s)
                if h not in seen:
                    seen.add(h)
                    nxt.append(h)
        frontier = nxt
        yield length, frontier


def word_lengths(radius: int, generators=DEFAULT_GENERATORS) -> dict[tuple, int]:
    """Word length of every element within the given radius, by breadth-first search from the identity."""
    lengths = {}
    for length, layer in _bfs_layers(generators):
        if length > radius:
            break
        for g in layer:
            lengths[g] = length
    return lengths


def word_length(element, generators=DEFAULT_GENERATORS, max_length: int = 32) -> int:
    target = tuple(int(x) for x in element)
    for length, layer in _bfs_layers(generators):
        if target in layer:
            return length
        if length >= max_length:
            break
    raise OverCapError(
        f"Word length of {target} exceeds {max_length}",
        payload={"element": list(target), "max_length": max_length},
    )


def _estimate_ball_size(k: int) -> int:
    # Quartic growth calibrated on |W_2| = 17.
    return int(math.ceil(17 * (k / 2) ** 4))


def generate_ball(spec: CayleySpec, max_radius: int | None = None) -> FiniteMetricSpace:
    """
    The ball W_k of the Cayley graph with the word metric of the whole group restricted to it.

    Lengths are computed out to 2k, so d(g, h) = |g^-1 h| is exact for every pair in the ball and
    W_{k-1} sits inside W_k isometrically. Points are ordered by (word length, a, b, c).

    :param spec: Generators and radius k.
    :param max_radius: Largest admissible k. Defaults to HEISENCUT_MAX_CAYLEY_RADIUS.
    :return: The ball with unit weights and integer coordinate labels.
    :raises OverCapError: If k exceeds the cap.
    """
    if max_radius is None:
        max_radius = get_config().MAX_CAYLEY_RADIUS
    k = spec.radius
    if k > max_radius:
        raise OverCapError(
            f"Cayley radius {k} is above the cap {max_radius}",
            payload={"radius": k, "max_radius": max_radius, "estimated_points": _estimate_ball_size(k)},
        )

    lengths = word_lengths(2 * k, spec.generators)
    points = sorted((g for g, length in lengths.items() if length <= k), key=lambda g: (lengths[g], *g))
    n = len(points)
    dist = np.zeros((n, n))
    for i, g in enumerate(points):
        g_inv = _inv(g)
        for j in range(i + 1, n):
            dist[i, j] = dist[j, i] = lengths[_mul(g_inv, points[j])]

    logger.info(f"Generated W_{k}: {n} points, BFS to radius {2 * k} visited {len(lengths)} elements")
    return FiniteMetricSpace(
        dist,
        labels=points,
        coordinates=np.asarray(points, dtype=float).reshape(n, 3),
        name=f"W_{k}",
        metadata={"generators": [list(g) for g in spec.generators], "radius": k},
    )


def sample_cc_metric(n: int, radius: float = 1.0, seed: int = 0, tol: float | None = None) -> FiniteMetricSpace:
    """
    n random points of the CC ball of the given radius at the identity with their pairwise CC distances.

    :raises InvalidExperimentUsage: If n < 2.
    """
    if n < 2:
        raise InvalidExperimentUsage(f"Need at least 2 points, got {n}")
    points = sample_ball(BallSpec(IDENTITY, radius, Gauge.CC), n, seed, tol)
    dist = cc_distance_array(points[:, None, :], points[None, :, :], tol)
    upper = np.triu(dist, k=1)
    dist = upper + upper.T
    return FiniteMetricSpace(dist, coordinates=points, name=f"cc_sample_{n}",
                             metadata={"radius": radius, "seed": seed})


def graph_metric(graph: nx.Graph, name: str = "graph") -> FiniteMetricSpace:
    """Shortest-path metric of a connected graph, honouring an optional 'weight' edge attribute."""
    if graph.number_of_nodes() == 0 or not nx.is_connected(graph):
        raise InvalidExperimentUsage(f"Graph {name} must be nonempty and connected")
    nodes = sorted(graph.nodes)
    dist = nx.floyd_warshall_numpy(graph, nodelist=nodes, weight="weight")
    return FiniteMetricSpace(np.asarray(dist), labels=nodes, name=name)


_NAMED_GRAPH = re.compile(r"^(path|cycle|star|complete|tree)(\d+)$|^k(\d)(\d)$")


def named_graph(name: str, seed: int = 0) -> FiniteMetricSpace:
    """
    Small test metrics by name: pathN, cycleN, starN (N leaves), completeN, treeN (random, from a Prüfer
    sequence drawn with the seed) and kMN (complete bipartite, single-digit sides, e.g. k23).
    """
    match = _NAMED_GRAPH.match(name)
    if not match:
        raise InvalidExperimentUsage(f"Unknown graph name: {name}")
    family, size, left, right = match.groups()
    if left is not None:
        graph = nx.complete_bipartite_graph(int(left), int(right))
    else:
        size = int(size)
        if size < 2:
            raise InvalidExperimentUsage(f"Graph {name} needs at least 2 vertices")
        if family == "path":
            graph = nx.path_graph(size)
        elif family == "cycle":
            graph = nx.cycle_graph(size)
        elif family == "star":
            graph = nx.star_graph(size)
        elif family == "complete":
            graph = nx.complete_graph(size)
        else:
            rng = np.random.default_rng(seed)
            if size == 2:
                graph = nx.path_graph(2)
            else:
                graph = nx.from_prufer_sequence(rng.integers(0, size, size=size - 2).tolist())
    return graph_metric(graph, name)
