"""Optimal L1 distortion of a finite metric space through linear programs over the cut cone.

The LP has one variable per cut and the scale s:

    maximise s  subject to  sum_E w_E d_E(p) <= d(p),  s d(p) - sum_E w_E d_E(p) <= 0  for every pair p.

The optimal cut measure is non-expansive and contracts no pair by more than s, so the
distortion is 1/s. The exact solver enumerates all cuts; column generation prices cuts
against the master duals, which is a signed max-cut problem.
"""

# License: MIT

import enum
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from app.metrics.cayley import CayleySpec, FiniteMetricSpace, generate_ball
from app.metrics.cuts import Cut, CutMeasure, cut_metric
from app.metrics.simplex import LPStatus, maximize, maximize_highs
from app.utils.config import InvalidExperimentUsage, NumericalError, OverCapError, get_config

logger = logging.getLogger(__name__)

WEIGHT_TOL = 1e-12
PRICING_TOL = 1e-9
RESTARTS = 32
CUTS_PER_ROUND = 16
STALL_ROUNDS = 8
STALL_TOL = 1e-6
DEFAULT_BUDGET = 100


class DistortionStatus(str, enum.Enum):
    EXACT_CERTIFIED = "ExactCertified"
    HEURISTIC_UPPER_EMBEDDING = "HeuristicUpperEmbedding"
    HEURISTIC_LOWER_BOUND = "HeuristicLowerBound"


@dataclass
class DistortionResult:
    distortion: float
    witness: CutMeasure
    status: DistortionStatus
    lp_stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "distortion": self.distortion,
            "status": self.status.value,
            "n_cuts": len(self.witness),
            "lp_stats": self.lp_stats,
            "normalization": "non-expansive witness, distortion = 1 / min contraction ratio",
        }


def _cut_matrix(n: int) -> np.ndarray:
    masks = np.arange(1, 2 ** (n - 1), dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(n - 1)) & 1).astype(bool)
    return np.hstack([np.zeros((masks.size, 1), dtype=bool), bits])


def enumerate_cuts(n: int, max_points: int | None = None) -> list[Cut]:
    """
    Every nontrivial cut of n points up to complement, as the canonical representative
    that excludes point 0, ordered by the binary number read from point n-1 down to point 1.

    :raises OverCapError: If n exceeds max_points (default HEISENCUT_MAX_ENUM_POINTS).
    """
    if max_points is None:
        max_points = get_config().MAX_ENUM_POINTS
    if n > max_points:
        raise OverCapError(
            f"Cannot enumerate cuts of {n} points (cap {max_points})",
            payload={"n": n, "max_points": max_points, "estimated_cuts": 2 ** (n - 1) - 1},
        )
    if n < 2:
        return []
    return [Cut(row) for row in _cut_matrix(n)]


def _pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, k=1)


def _check_space(space: FiniteMetricSpace) -> None:
    if space.n < 2:
        raise InvalidExperimentUsage("Distortion needs at least two points")
    off_diagonal = space.dist[~np.eye(space.n, dtype=bool)]
    if (off_diagonal <= 0).any():
        raise InvalidExperimentUsage("Degenerate space: distinct points at distance zero")


def _solve_master(separated: np.ndarray, d: np.ndarray, dense_rows: int, time_limit: float | None = None):
    """
    :param separated: Boolean P x K matrix, True where a working cut separates a pair.
    :param d: Pair distances, length P.
    :param time_limit: Seconds allowed to HiGHS; the dense simplex ignores it.
    :return: (LPSolution, weights, s, expansion duals u, contraction duals v).
    """
    n_pairs, n_cuts = separated.shape
    b = np.concatenate([d, np.zeros(n_pairs)])
    c = np.zeros(n_cuts + 1)
    c[-1] = 1.0
    if 2 * n_pairs <= dense_rows:
        separations = separated.astype(float)
        A = np.block([
            [separations, np.zeros((n_pairs, 1))],
            [-separations, d[:, None]],
        ])
        solution = maximize(c, A, b)
    else:
        separations = sparse.csr_matrix(separated, dtype=float)
        A = sparse.bmat([[separations, None], [-separations, sparse.csr_matrix(d[:, None])]], format="csr")
        solution = maximize_highs(c, A, b, time_limit)
    if solution.status is not LPStatus.OPTIMAL:
        raise NumericalError("Distortion master LP is unbounded", payload={"pairs": int(n_pairs)})
    return solution, solution.x[:-1], solution.x[-1], solution.duals[:n_pairs], solution.duals[n_pairs:]


def _finish(space: FiniteMetricSpace, cuts: list[Cut], weights: np.ndarray, scale: float,
            status: DistortionStatus, stats: dict) -> DistortionResult:
    keep = weights > WEIGHT_TOL
    witness = CutMeasure(space.n, [(cut, w * scale) for cut, w, k in zip(cuts, weights, keep) if k])
    ratios = _ratios(space, witness)
    if ratios.min() <= 0:
        return DistortionResult(math.inf, witness, status, stats)
    # Rescale so the witness is non-expansive exactly, then read the distortion off the ratio spread.
    if ratios.max() > 1:
        witness = witness.scaled(1 / ratios.max())
        ratios = ratios / ratios.max()
    distortion = float(ratios.max() / ratios.min())
    stats["min_ratio"] = float(ratios.min())
    return DistortionResult(distortion, witness, status, stats)


def _ratios(space: FiniteMetricSpace, witness: CutMeasure) -> np.ndarray:
    i, j = _pairs(space.n)
    return cut_metric(witness)[i, j] / space.dist[i, j]


def min_distortion_exact(space: FiniteMetricSpace, max_points: int | None = None,
                         dense_rows: int | None = None) -> DistortionResult:
    """
    Optimal distortion over the full cut cone.

    :param space: The metric space; distinct points must be at positive distance.
    :param max_points: Enumeration cap, default HEISENCUT_MAX_ENUM_POINTS.
    :param dense_rows: Largest master solved by the in-house simplex, default HEISENCUT_DENSE_LP_ROWS.
    :return: Certified result with the optimal witness.
    """
    _check_space(space)
    cuts = enumerate_cuts(space.n, max_points)
    if dense_rows is None:
        dense_rows = get_config().DENSE_LP_ROWS
    i, j = _pairs(space.n)
    scale = float(space.dist[i, j].max())
    d = space.dist[i, j] / scale
    members = _cut_matrix(space.n)

    solution, weights, s, _, _ = _solve_master((members[:, i] != members[:, j]).T, d, dense_rows)
    logger.info(f"Exact distortion LP on {space.name}: {len(cuts)} cuts, s* = {s:.9f}, {solution.pivots} pivots")
    stats = {"pivots": solution.pivots, "columns": len(cuts), "rows": 2 * len(d),
             "backend": solution.backend, "lp_scale": float(s)}
    return _finish(space, cuts, weights, scale, DistortionStatus.EXACT_CERTIFIED, stats)


def _cut_values(signs: np.ndarray, pricing: np.ndarray) -> np.ndarray:
    # For sign vectors s, sum_{i<j} W_ij [s_i != s_j] = (sum_{i<j} W_ij - s.W.s / 2) / 2.
    total = pricing.sum() / 2
    return (total - np.einsum("ki,ki->k", signs @ pricing, signs) / 2) / 2


def _exhaustive_separation(pricing: np.ndarray, top: int) -> list[tuple[float, np.ndarray]]:
    """Best cuts under the signed pricing weights over all 2^(n-1) - 1 canonical cuts, best first."""
    n = pricing.shape[0]
    chunk = 1 << 13
    best_values = np.empty(0)
    best_rows = np.empty((0, n), dtype=bool)
    masks = np.arange(1, 2 ** (n - 1), dtype=np.int64)
    for start in range(0, masks.size, chunk):
        block = masks[start:start + chunk]
        bits = ((block[:, None] >> np.arange(n - 1)) & 1).astype(bool)
        members = np.hstack([np.zeros((block.size, 1), dtype=bool), bits])
        values = _cut_values(np.where(members, 1.0, -1.0), pricing)
        best_values = np.concatenate([best_values, values])
        best_rows = np.vstack([best_rows, members])
        order = np.argsort(-best_values, kind="stable")[:top]
        best_values, best_rows = best_values[order], best_rows[order]
    return [(float(value), row) for value, row in zip(best_values, best_rows)]


def _hill_climb(pricing: np.ndarray, seed_sequence: np.random.SeedSequence) -> tuple[float, np.ndarray]:
    """Single bit-flip ascent from a random cut."""
    rng = np.random.default_rng(seed_sequence)
    n = pricing.shape[0]
    signs = rng.choice([-1.0, 1.0], size=n)
    field_ = pricing @ signs
    while True:
        gains = signs * field_
        i = int(np.argmax(gains))
        if gains[i] <= PRICING_TOL:
            break
        field_ -= 2 * signs[i] * pricing[:, i]
        signs[i] = -signs[i]
    value = float(_cut_values(signs[None, :], pricing)[0])
    return value, signs > 0


def _heuristic_separation(pricing: np.ndarray, seed: int, restarts: int,
                          workers: int) -> list[tuple[float, np.ndarray]]:
    sequences = np.random.SeedSequence(seed).spawn(restarts)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        results = list(executor.map(lambda sq: _hill_climb(pricing, sq), sequences))
    results.sort(key=lambda item: -item[0])
    return results


def _seed_cuts(space: FiniteMetricSpace) -> list[Cut]:
    n = space.n
    seeds = [Cut.from_indices(n, [i]) for i in range(n)]
    for i in range(n):
        for radius in np.unique(space.dist[i]):
            seeds.append(Cut(space.dist[i] <= radius))
    if space.coordinates is not None:
        for axis in range(space.coordinates.shape[1]):
            column = space.coordinates[:, axis]
            for threshold in np.unique(column)[1:]:
                seeds.append(Cut(column >= threshold))
    return seeds


def _add_columns(candidates, cuts: list[Cut], known: set) -> int:
    added = 0
    for members in candidates:
        cut, _ = Cut(members).canonical_form()
        if cut.is_trivial() or cut in known:
            continue
        known.add(cut)
        cuts.append(cut)
        added += 1
    return added


def _stalled(history: list[float], rounds: int = STALL_ROUNDS, tol: float = STALL_TOL) -> bool:
    if len(history) <= rounds:
        return False
    return history[-1] - history[-1 - rounds] <= tol * max(abs(history[-1]), 1e-12)


def min_distortion_colgen(space: FiniteMetricSpace, budget: int = DEFAULT_BUDGET, seed: int = 0,
                          exhaustive_points: int | None = None, dense_rows: int | None = None,
                          workers: int | None = None, initial_cuts: list[Cut] | None = None,
                          time_limit: float | None = None) -> DistortionResult:
    """
    Column generation over a working cut family.

    Pricing is exhaustive when n is at most exhaustive_points, which certifies the optimum;
    otherwise bit-flip hill climbing with random restarts, and every distinct improving cut
    joins the master. The run stops early, flagged as a lower bound, when the budget of master
    solves is used, when heuristic rounds stop raising s, or when time_limit seconds pass.

    :param space: The metric space.
    :param budget: Maximum number of master LP solves.
    :param seed: Seed of the restart generator.
    :param initial_cuts: Extra seed cuts, e.g. a witness found on a subspace.
    :param time_limit: Wall-clock seconds, default HEISENCUT_COLGEN_TIME_LIMIT; 0 disables.
    :return: The best result found; lp_stats["stop_reason"] says why the loop ended.
    """
    _check_space(space)
    if budget < 1:
        raise InvalidExperimentUsage(f"Column generation budget must be positive, got {budget}")
    config = get_config()
    exhaustive_points = config.EXHAUSTIVE_SEPARATION_POINTS if exhaustive_points is None else exhaustive_points
    dense_rows = config.DENSE_LP_ROWS if dense_rows is None else dense_rows
    workers = config.WORKERS if workers is None else workers
    time_limit = config.COLGEN_TIME_LIMIT if time_limit is None else time_limit

    n = space.n
    i, j = _pairs(n)
    scale = float(space.dist[i, j].max())
    d = space.dist[i, j] / scale
    exhaustive = n <= exhaustive_points

    cuts: list[Cut] = []
    known: set = set()
    _add_columns([c.membership for c in _seed_cuts(space) + list(initial_cuts or [])], cuts, known)

    stats = {"pivots": 0, "master_solves": 0, "separation": "exhaustive" if exhaustive else "heuristic"}
    status = DistortionStatus.HEURISTIC_LOWER_BOUND
    stop_reason = "budget"
    weights = np.zeros(len(cuts))
    s = 0.0
    history: list[float] = []
    started = time.monotonic()
    for iteration in range(budget):
        members = np.stack([c.membership for c in cuts])
        remaining = None
        if time_limit > 0 and iteration > 0:
            remaining = max(time_limit - (time.monotonic() - started), 1.0)
        try:
            solution, weights, s, u, v = _solve_master((members[:, i] != members[:, j]).T, d, dense_rows, remaining)
        except NumericalError as e:
            # Out of time on a later round: keep the previous master solution.
            if remaining is None or (e.payload or {}).get("highs_status") != 1:
                raise
            stop_reason = "time_limit"
            break
        stats["pivots"] += solution.pivots
        stats["master_solves"] += 1
        stats["backend"] = solution.backend
        history.append(float(s))

        pricing = np.zeros((n, n))
        pricing[i, j] = v - u
        pricing += pricing.T
        if exhaustive:
            candidates = _exhaustive_separation(pricing, CUTS_PER_ROUND)
        else:
            candidates = _heuristic_separation(pricing, seed + iteration, RESTARTS, workers)
        best = candidates[0][0]
        logger.debug(f"Column generation round {iteration}: s = {s:.9f}, best reduced cost {best:.3e}")

        improving = [row for value, row in candidates if value > PRICING_TOL]
        if not improving or _add_columns(improving, cuts, known) == 0:
            status = DistortionStatus.EXACT_CERTIFIED if exhaustive else DistortionStatus.HEURISTIC_UPPER_EMBEDDING
            stop_reason = "priced_out"
            break
        if not exhaustive and _stalled(history):
            stop_reason = "stalled"
            break
        if time_limit > 0 and time.monotonic() - started > time_limit:
            stop_reason = "time_limit"
            break

    if status is DistortionStatus.HEURISTIC_LOWER_BOUND:
        logger.warning(f"Column generation on {space.name} stopped early ({stop_reason}) "
                       f"after {stats['master_solves']} master solves")

    stats.update({"columns": len(cuts), "rows": 2 * len(d), "lp_scale": float(s), "stop_reason": stop_reason,
                  "budget_exhausted": stop_reason == "budget"})
    logger.info(f"Column generation on {space.name}: {len(cuts)} cuts, status {status.value}")
    return _finish(space, cuts[:len(weights)], weights, scale, status, stats)


def verify_witness(space: FiniteMetricSpace, result: DistortionResult) -> dict:
    """
    Recomputes the witness cut metric and checks both LP constraint families.

    :return: Maximum expansion (d_Sigma - d)+, maximum contraction (d / distortion - d_Sigma)+,
        the achieved distortion and whether the witness is degenerate.
    """
    i, j = _pairs(space.n)
    d = space.dist[i, j]
    d_sigma = cut_metric(result.witness)[i, j]
    ratios = d_sigma / d
    degenerate = bool((ratios <= 0).any())
    achieved = math.inf if degenerate else float(ratios.max() / ratios.min())
    contraction = 0.0
    if math.isfinite(result.distortion):
        contraction = float(np.maximum(d / result.distortion - d_sigma, 0.0).max())
    return {
        "max_expansion_violation": float(np.maximum(d_sigma - d, 0.0).max()),
        "max_contraction_violation": contraction,
        "achieved_distortion": achieved,
        "degenerate": degenerate,
    }


def _extend(cut: Cut, n: int) -> Cut:
    members = np.zeros(n, dtype=bool)
    members[:cut.n] = cut.membership
    return Cut(members)


def cayley_distortion_sequence(k_max: int, budget: int = DEFAULT_BUDGET, seed: int = 0,
                               generators=None) -> list[tuple[FiniteMetricSpace, DistortionResult]]:
    """
    Distortion of W_1, ..., W_k_max.

    W_{k-1} is the prefix of W_k, so the witness of W_{k-1}, extended by zeros, seeds W_k, and
    the witness of W_k restricted back can only improve the estimate for W_{k-1}. The backward
    pass makes the reported sequence nondecreasing.
    """
    kwargs = {} if generators is None else {"generators": generators}
    results = []
    previous: list[Cut] = []
    for k in range(1, k_max + 1):
        space = generate_ball(CayleySpec(k, **kwargs))
        seeds = [_extend(cut, space.n) for cut in previous]
        result = min_distortion_colgen(space, budget=budget, seed=seed, initial_cuts=seeds)
        results.append((space, result))
        previous = result.witness.cuts

    for index in range(len(results) - 2, -1, -1):
        space, result = results[index]
        larger_space, larger = results[index + 1]
        restricted = CutMeasure(space.n, [(Cut(cut.membership[:space.n]), w) for cut, w in larger.witness])
        candidate = _finish(space, [c for c, _ in restricted], restricted.weights, 1.0, result.status, dict(result.lp_stats))
        if candidate.distortion < result.distortion - 1e-12:
            candidate.lp_stats["restricted_from"] = larger_space.name
            results[index] = (space, candidate)
    return results
