"""Dense tableau simplex for max c.x subject to A x <= b, x >= 0 with b >= 0."""

# License: MIT

import enum
import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from app.utils.config import InvalidExperimentUsage, NumericalError

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9


class LPStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    UNBOUNDED = "unbounded"


@dataclass
class LPSolution:
    x: np.ndarray
    objective: float
    duals: np.ndarray
    status: LPStatus
    pivots: int
    backend: str


def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    factor = tableau[:, col].copy()
    factor[row] = 0.0
    tableau -= np.outer(factor, tableau[row])


def maximize(c, A, b, tol: float = FEASIBILITY_TOL, max_pivots: int | None = None) -> LPSolution:
    """
    Solves the LP from the slack basis, which is feasible because b >= 0, using Bland's rule.

    :param c: Objective, length n.
    :param A: Constraint matrix, m x n.
    :param b: Right-hand side, length m, nonnegative.
    :param tol: Pivoting and feasibility tolerance.
    :param max_pivots: Pivot cap; defaults to 50 (m + n).
    :return: Primal solution, objective and the row duals y >= 0 read off the slack reduced costs.
    :raises NumericalError: If the pivot cap is reached.
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if (b < -tol).any():
        raise InvalidExperimentUsage("The slack basis needs a nonnegative right-hand side")
    if max_pivots is None:
        max_pivots = 50 * (m + n)

    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = A
    tableau[:m, n:n + m] = np.eye(m)
    tableau[:m, -1] = np.maximum(b, 0.0)
    tableau[m, :n] = -c
    basis = np.arange(n, n + m)

    pivots = 0
    status = LPStatus.OPTIMAL
    while True:
        entering = np.flatnonzero(tableau[m, :-1] < -tol)
        if entering.size == 0:
            break
        col = int(entering[0])
        column = tableau[:m, col]
        positive = column > tol
        if not positive.any():
            status = LPStatus.UNBOUNDED
            break
        ratios = np.full(m, np.inf)
        ratios[positive] = tableau[:m, -1][positive] / column[positive]
        best = ratios.min()
        tied = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        row = int(tied[np.argmin(basis[tied])])
        _pivot(tableau, row, col)
        basis[row] = col
        pivots += 1
        if pivots >= max_pivots:
            raise NumericalError(
                "Simplex reached its pivot cap",
                payload={"max_pivots": max_pivots, "rows": m, "columns": n},
            )

    values = np.zeros(n + m)
    values[basis] = tableau[:m, -1]
    return LPSolution(
        x=values[:n],
        objective=float(tableau[m, -1]),
        duals=np.maximum(tableau[m, n:n + m], 0.0),
        status=status,
        pivots=pivots,
        backend="dense",
    )


def maximize_highs(c, A, b, time_limit: float | None = None) -> LPSolution:
    """
    Same problem through scipy's HiGHS, solved as its dual min b.y subject to A^T y >= c, y >= 0.

    The dual has one row per primal column, which keeps the simplex basis small for the tall
    masters of the distortion LP. The primal x is read off the dual's marginals.

    :param A: Dense array or scipy sparse matrix.
    :param time_limit: Seconds allowed to HiGHS; no limit when None.
    :raises NumericalError: If HiGHS fails or runs out of time.
    """
    c = np.asarray(c, dtype=float)
    b = np.asarray(b, dtype=float)
    A = sparse.csr_matrix(A, dtype=float)
    options = {} if time_limit is None else {"time_limit": float(time_limit)}
    result = linprog(b, A_ub=-A.T.tocsr(), b_ub=-c, bounds=(0, None), method="highs", options=options)
    if result.status == 2:
        return LPSolution(np.zeros(c.size), np.inf, np.zeros(b.size), LPStatus.UNBOUNDED, int(result.nit), "highs")
    if result.status != 0:
        raise NumericalError(f"HiGHS failed: {result.message}", payload={"highs_status": int(result.status)})
    return LPSolution(
        x=np.maximum(-np.asarray(result.ineqlin.marginals), 0.0),
        objective=float(result.fun),
        duals=np.asarray(result.x),
        status=LPStatus.OPTIMAL,
        pivots=int(result.nit),
        backend="highs",
    )
