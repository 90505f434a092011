"""Cuts, finite cut measures and the cut-metric representation of L1-valued maps.

A cut is a subset of a finite measured index set (points of a metric space or voxels of a
grid), stored as a boolean membership vector. A cut measure is a finite list of cuts with
positive weights; its cut metric is the weighted sum of the elementary metrics |chi_E(i) - chi_E(j)|.
"""

# License: MIT

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from app.utils.config import InvalidExperimentUsage

logger = logging.getLogger(__name__)


class Cut:
    """A subset of {0, ..., n-1}. Immutable; hashes on its exact membership."""

    __slots__ = ("_membership", "_key")

    def __init__(self, membership):
        members = np.array(membership, dtype=bool).ravel()
        members.flags.writeable = False
        self._membership = members
        self._key = np.packbits(members).tobytes()

    @classmethod
    def from_indices(cls, n: int, indices: Iterable[int]) -> "Cut":
        members = np.zeros(n, dtype=bool)
        members[list(indices)] = True
        return cls(members)

    @property
    def membership(self) -> np.ndarray:
        return self._membership

    @property
    def n(self) -> int:
        return self._membership.size

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self._membership)

    @property
    def key(self) -> bytes:
        return self._key

    def __len__(self) -> int:
        return int(self._membership.sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, Cut) and self.n == other.n and self._key == other._key

    def __hash__(self) -> int:
        return hash((self.n, self._key))

    def __repr__(self) -> str:
        return f"Cut(n={self.n}, size={len(self)})"

    def complement(self) -> "Cut":
        return Cut(~self._membership)

    def canonical_form(self) -> tuple["Cut", bool]:
        """
        The lexicographically smaller of E and its complement, reading index 0 first.

        :return: (canonical cut, flipped) where flipped says the complement was taken.
        """
        if self.n and self._membership[0]:
            return self.complement(), True
        return self, False

    def is_trivial(self) -> bool:
        return not self._membership.any() or self._membership.all()

    def measure(self, weights=None) -> float:
        if weights is None:
            return float(len(self))
        return float(np.asarray(weights, dtype=float)[self._membership].sum())

    def to_hex(self) -> str:
        return self._key.hex()

    @classmethod
    def from_hex(cls, n: int, encoded: str) -> "Cut":
        bits = np.unpackbits(np.frombuffer(bytes.fromhex(encoded), dtype=np.uint8))
        if bits.size < n:
            raise InvalidExperimentUsage(f"Cut encoding has {bits.size} bits, expected at least {n}")
        return cls(bits[:n].astype(bool))


def elementary_cut_metric(cut: Cut, i: int, j: int) -> int:
    """d_E(i, j) = |chi_E(i) - chi_E(j)|."""
    return int(cut.membership[i] != cut.membership[j])


@dataclass
class CutMeasure:
    """
    Weighted finite list of cuts over n points.

    Atoms with identical membership are merged (weights added) in first-seen order; zero-weight
    atoms are dropped. Complement pairs are kept apart because they carry different mass; use
    canonicalized() when only the metric matters.
    """

    n: int
    atoms: list = field(default_factory=list)

    def __post_init__(self):
        merged: dict[Cut, float] = {}
        for cut, weight in self.atoms:
            weight = float(weight)
            if not np.isfinite(weight) or weight < 0:
                raise InvalidExperimentUsage(f"Cut weights must be finite and nonnegative, got {weight}")
            if cut.n != self.n:
                raise InvalidExperimentUsage(f"Cut over {cut.n} points in a measure over {self.n}")
            if weight == 0:
                continue
            merged[cut] = merged.get(cut, 0.0) + weight
        self.atoms = list(merged.items())

    def __len__(self) -> int:
        return len(self.atoms)

    def __iter__(self):
        return iter(self.atoms)

    @property
    def cuts(self) -> list[Cut]:
        return [cut for cut, _ in self.atoms]

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms], dtype=float)

    def membership_matrix(self) -> np.ndarray:
        if not self.atoms:
            return np.zeros((0, self.n), dtype=bool)
        return np.stack([cut.membership for cut, _ in self.atoms])

    def mass(self, point_weights=None) -> float:
        """Sum of w_k mu(E_k)."""
        return float(sum(w * cut.measure(point_weights) for cut, w in self.atoms))

    def canonicalized(self) -> "CutMeasure":
        return CutMeasure(self.n, [(cut.canonical_form()[0], w) for cut, w in self.atoms])

    def restrict(self, indices: Sequence[int]) -> "CutMeasure":
        """The sub-measure made of the atoms at the given positions."""
        return CutMeasure(self.n, [self.atoms[k] for k in indices])

    def scaled(self, factor: float) -> "CutMeasure":
        return CutMeasure(self.n, [(cut, w * factor) for cut, w in self.atoms])

    def __add__(self, other: "CutMeasure") -> "CutMeasure":
        if other.n != self.n:
            raise InvalidExperimentUsage("Cannot add cut measures over different point sets")
        return CutMeasure(self.n, self.atoms + other.atoms)

    def to_dict(self) -> dict:
        return {"n": self.n, "atoms": [{"cut": cut.to_hex(), "weight": w} for cut, w in self.atoms]}

    @classmethod
    def from_dict(cls, data: dict) -> "CutMeasure":
        n = int(data["n"])
        return cls(n, [(Cut.from_hex(n, atom["cut"]), float(atom["weight"])) for atom in data["atoms"]])


@dataclass
class L1Map:
    """
    A map from n weighted points into L1 of m weighted coordinates.

    values[i, j] is the j-th coordinate of the image of point i; source_weights are the point
    masses mu_i and target_weights the coordinate masses nu_j.
    """

    values: np.ndarray
    target_weights: np.ndarray
    source_weights: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        n, m = self.values.shape
        self.target_weights = np.asarray(self.target_weights, dtype=float).ravel()
        if self.source_weights is None:
            self.source_weights = np.ones(n)
        self.source_weights = np.asarray(self.source_weights, dtype=float).ravel()
        if self.target_weights.size != m or self.source_weights.size != n:
            raise InvalidExperimentUsage(
                f"Weights do not match a {n}x{m} value matrix",
                payload={"source_weights": int(self.source_weights.size),
                         "target_weights": int(self.target_weights.size)},
            )
        if not np.isfinite(self.values).all():
            raise InvalidExperimentUsage("L1Map values must be finite")
        if (self.target_weights <= 0).any() or (self.source_weights <= 0).any():
            raise InvalidExperimentUsage("L1Map weights must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def norm(self) -> float:
        """||f|| = sum_i mu_i sum_j nu_j |f_ij|."""
        return float(self.source_weights @ (np.abs(self.values) @ self.target_weights))

    def distance_matrix(self) -> np.ndarray:
        return pairwise_l1(self.values, self.target_weights)

    def to_dict(self) -> dict:
        return {
            "values": self.values.tolist(),
            "target_weights": self.target_weights.tolist(),
            "source_weights": self.source_weights.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "L1Map":
        try:
            return cls(data["values"], data["target_weights"], data.get("source_weights"))
        except KeyError as e:
            raise InvalidExperimentUsage(f"L1Map data is missing {e.args[0]}") from e


def pairwise_l1(values, target_weights) -> np.ndarray:
    """Weighted L1 distances between the rows of values."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    n = values.shape[0]
    dist = np.zeros((n, n))
    for column, weight in zip(values.T, np.asarray(target_weights, dtype=float)):
        dist += weight * np.abs(column[:, None] - column[None, :])
    return dist


def cut_metric(sigma: CutMeasure) -> np.ndarray:
    """
    Superposition of elementary cut metrics, d(i, j) = sum_k w_k |chi_k(i) - chi_k(j)|.

    :param sigma: The cut measure.
    :return: Symmetric n x n pseudometric matrix with zero diagonal.
    """
    dist = np.zeros((sigma.n, sigma.n))
    for cut, weight in sigma.atoms:
        members = cut.membership
        dist += weight * (members[:, None] != members[None, :])
    return dist


def realize_embedding(sigma: CutMeasure) -> L1Map:
    """
    The tautological map: coordinate k carries weight w_k and value chi_{E_k}.

    Row distances of the result equal cut_metric(sigma).
    """
    if not sigma.atoms:
        return L1Map(np.zeros((sigma.n, 1)), np.ones(1))
    return L1Map(sigma.membership_matrix().T.astype(float), sigma.weights)


def slice_set(u, t: float) -> Cut:
    """Superlevel set {u >= t} for t > 0, the empty set for t = 0, sublevel set {u <= t} for t < 0."""
    u = np.asarray(u, dtype=float)
    if t > 0:
        return Cut(u >= t)
    if t < 0:
        return Cut(u <= t)
    return Cut(np.zeros(u.size, dtype=bool))


def _column_slices(u: np.ndarray, weight: float) -> list[tuple[Cut, float]]:
    # Breakpoints include 0 so every interval lies on one side of it.
    levels = np.unique(np.concatenate([u, [0.0]]))
    atoms = []
    for lo, hi in zip(levels[:-1], levels[1:]):
        members = u >= hi if lo >= 0 else u <= lo
        if members.any():
            atoms.append((Cut(members), weight * (hi - lo)))
    return atoms


def cut_measure_from_map(f: L1Map) -> CutMeasure:
    """
    The cut measure of f: slices of every coordinate, weighted by nu_j times the length of the
    threshold interval on which the slice is constant.

    cut_metric of the result equals f.distance_matrix(), and its mass with respect to the source
    weights equals f.norm(). A nonzero constant coordinate yields a full-set atom, which carries
    mass but no distance.
    """
    n, _ = f.shape
    atoms = []
    for column, weight in zip(f.values.T, f.target_weights):
        atoms.extend(_column_slices(column, weight))
    return CutMeasure(n, atoms)


def dual_map(f: L1Map) -> L1Map:
    """Swaps the roles of points and coordinates; an involution preserving the norm."""
    return L1Map(f.values.T.copy(), target_weights=f.source_weights.copy(), source_weights=f.target_weights.copy())


@dataclass(frozen=True)
class LineFamily:
    """
    Ordered lines through an index set, stored step by step.

    Step s joins tail[s] to head[s], consecutive indices of one line, and carries the line's
    transverse weight.
    """

    tail: np.ndarray
    head: np.ndarray
    weight: np.ndarray

    @classmethod
    def from_lines(cls, lines: Iterable[Sequence[int]], weights) -> "LineFamily":
        lines = list(lines)
        weights = np.broadcast_to(np.asarray(weights, dtype=float), (len(lines),))
        tails, heads, step_weights = [], [], []
        for line, weight in zip(lines, weights):
            line = np.asarray(line, dtype=np.int64)
            if line.size < 2:
                continue
            tails.append(line[:-1])
            heads.append(line[1:])
            step_weights.append(np.full(line.size - 1, float(weight)))
        if not tails:
            empty = np.zeros(0, dtype=np.int64)
            return cls(empty, empty, np.zeros(0))
        return cls(np.concatenate(tails), np.concatenate(heads), np.concatenate(step_weights))

    @classmethod
    def concat(cls, *families: "LineFamily") -> "LineFamily":
        return cls(
            np.concatenate([f.tail for f in families]),
            np.concatenate([f.head for f in families]),
            np.concatenate([f.weight for f in families]),
        )

    def __len__(self) -> int:
        return self.tail.size

    def jumps(self, h) -> np.ndarray:
        """Weighted absolute increment of h on every step."""
        h = np.asarray(h, dtype=float)
        return self.weight * np.abs(h[self.head] - h[self.tail])

    def variation(self, h) -> float:
        return float(self.jumps(h).sum())


def line_variation(h, lines: LineFamily) -> float:
    """Discrete VAR: transverse-weighted sum of |h(s+1) - h(s)| along every line."""
    return lines.variation(h)


def coarea_check(h, lines: LineFamily, thresholds=None) -> tuple[float, float]:
    """
    Both sides of the discrete coarea formula.

    :param h: Values over the index set.
    :param lines: Line decomposition of the index set.
    :param thresholds: Sorted distinct values of h; computed when omitted.
    :return: (line variation of h, sum over threshold gaps of gap * variation of {h >= t}).
    """
    h = np.asarray(h, dtype=float)
    if thresholds is None:
        thresholds = np.unique(h)
    thresholds = np.asarray(thresholds, dtype=float)
    lhs = line_variation(h, lines)
    rhs = 0.0
    for lo, hi in zip(thresholds[:-1], thresholds[1:]):
        rhs += (hi - lo) * line_variation((h >= hi).astype(float), lines)
    return lhs, rhs


def total_variation_identity(f: L1Map, lines: LineFamily) -> tuple[float, float]:
    """
    Total perimeter of the cut measure of f against the total variation of f.

    :return: (sum_k w_k VAR(chi_{E_k}), sum_j nu_j VAR(f(., j))).
    """
    sigma = cut_measure_from_map(f)
    total_perimeter = sum(w * line_variation(cut.membership.astype(float), lines) for cut, w in sigma.atoms)
    total_variation = sum(nu * line_variation(column, lines) for column, nu in zip(f.values.T, f.target_weights))
    return float(total_perimeter), float(total_variation)
