"""
Dense two-phase simplex for small feasibility and optimization problems.

Problems are stated with explicit constraint lists and per-variable bounds:

    maximize    c^T x
    subject to  a_i^T x  = r_i      (equalities)
                a_j^T x <= r_j      (inequalities)
                lo_k <= x_k <= hi_k (bounds, either side may be infinite)

They are brought to standard form A y = b, y >= 0 by shifting bounded
variables, splitting free ones and adding slack columns; phase I minimizes
the sum of one artificial per row. Bland's rule prevents cycling.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from ..errors import NumericalFailure

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-10
DEFAULT_MAX_PIVOTS = 5000
# phase I residual, relative to the largest user right-hand side
INFEASIBILITY_TOL = 1e-9
# accepted relative violation of a returned point
RESIDUAL_TOL = 1e-7

Row = tuple[Sequence[float], float]


@dataclass(frozen=True)
class Bound:
    """Bounds lo <= x <= hi of one variable."""
    lo: float = 0.0
    hi: float = math.inf

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"Empty bound [{self.lo}, {self.hi}]")

    @classmethod
    def free(cls) -> "Bound":
        return cls(-math.inf, math.inf)

    @classmethod
    def nonneg(cls) -> "Bound":
        return cls(0.0, math.inf)

    @classmethod
    def fixed(cls, value: float) -> "Bound":
        return cls(value, value)


class LPStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LPResult:
    """
    Outcome of a simplex run.

    x and objective are set when status is OPTIMAL. For INFEASIBLE, farkas
    holds multipliers y (equalities first, then inequalities) with
    y_ineq <= 0, A_eq^T y_eq + A_in^T y_in >= 0 on nonnegative variables,
    and r^T y < 0; see farkas_check for the exact statement used.
    """
    status: LPStatus
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    farkas: Optional[np.ndarray] = None
    pivots: int = 0

    @property
    def feasible(self) -> bool:
        return self.status is not LPStatus.INFEASIBLE


class TwoPhaseSimplex:
    """Tableau simplex with Bland's entering and leaving rules."""

    def __init__(self, max_pivots: int = DEFAULT_MAX_PIVOTS, tol: float = PIVOT_TOL):
        self.max_pivots = max_pivots
        self.tol = tol
        self._pivots = 0

    def solve(
        self,
        objective: Optional[Sequence[float]],
        equalities: Sequence[Row],
        inequalities: Sequence[Row],
        bounds: Sequence[Bound],
    ) -> LPResult:
        nvar = len(bounds)
        self._pivots = 0
        offset, transform, ub_rows = self._variable_map(bounds)

        rows: list[np.ndarray] = []
        rhs: list[float] = []
        kinds: list[str] = []
        for coeffs, value in equalities:
            a = self._coeffs(coeffs, nvar)
            rows.append(a @ transform)
            rhs.append(float(value) - float(a @ offset))
            kinds.append("eq")
        for coeffs, value in inequalities:
            a = self._coeffs(coeffs, nvar)
            rows.append(a @ transform)
            rhs.append(float(value) - float(a @ offset))
            kinds.append("le")
        ny = transform.shape[1]
        n_user = len(rows)
        for entries, width in ub_rows:
            a = np.zeros(ny)
            for col, coeff in entries:
                a[col] = coeff
            rows.append(a)
            rhs.append(width)
            kinds.append("le")

        m = len(rows)
        num_slack = kinds.count("le")
        A = np.zeros((m, ny + num_slack))
        slack_col = ny
        for i, (row, kind) in enumerate(zip(rows, kinds)):
            A[i, :ny] = row
            if kind == "le":
                A[i, slack_col] = 1.0
                slack_col += 1
        b = np.asarray(rhs, dtype=float)
        signs = np.where(b < 0, -1.0, 1.0)
        A *= signs[:, None]
        b = b * signs

        ncols = A.shape[1]
        tableau = np.zeros((m + 1, ncols + m + 1))
        tableau[:m, :ncols] = A
        tableau[:m, ncols:ncols + m] = np.eye(m)
        tableau[:m, -1] = b
        # phase I costs: 1 on artificials, reduced by the artificial basis
        tableau[m, :ncols] = -A.sum(axis=0)
        tableau[m, -1] = -b.sum()
        basis = list(range(ncols, ncols + m))

        self._run(tableau, basis, allowed=ncols + m)
        # bound rows carry widths like 1e9 and stay out of the scale
        infeasibility = sum(tableau[r, -1] for r, j in enumerate(basis) if j >= ncols)
        scale = max(1.0, float(np.max(b[:n_user], initial=0.0)))
        if infeasibility > INFEASIBILITY_TOL * scale:
            # duals of phase I: y = 1 - reduced cost of the artificial column
            y = (1.0 - tableau[m, ncols:ncols + m]) * signs
            log.debug(f"LP infeasible (phase I value {infeasibility:.3g}, {self._pivots} pivots)")
            return LPResult(LPStatus.INFEASIBLE, farkas=-y[:n_user], pivots=self._pivots)

        self._drive_out_artificials(tableau, basis, ncols)

        if objective is None:
            y_ext = self._basic_solution(tableau, basis, ncols)
            x = offset + transform @ y_ext[:ny]
            return self._confirmed(x, 0.0, equalities, inequalities, bounds)

        c = self._coeffs(objective, nvar)
        cost = np.zeros(ncols + m)
        cost[:ny] = -(c @ transform)
        tableau[m, :] = 0.0
        tableau[m, :ncols + m] = cost
        for r, j in enumerate(basis):
            if cost[j] != 0.0:
                tableau[m, :] -= cost[j] * tableau[r, :]
        if not self._run(tableau, basis, allowed=ncols):
            log.debug("LP unbounded in phase II")
            return LPResult(LPStatus.UNBOUNDED, pivots=self._pivots)

        y_ext = self._basic_solution(tableau, basis, ncols)
        x = offset + transform @ y_ext[:ny]
        return self._confirmed(x, float(c @ x), equalities, inequalities, bounds)

    def _confirmed(
        self,
        x: np.ndarray,
        objective: float,
        equalities: Sequence[Row],
        inequalities: Sequence[Row],
        bounds: Sequence[Bound],
    ) -> LPResult:
        """OPTIMAL only when x satisfies the original rows and bounds; INFEASIBLE without a ray otherwise."""
        violation = constraint_violation(x, equalities, inequalities, bounds)
        if violation > RESIDUAL_TOL:
            log.warning(
                f"simplex point violates its constraints by {violation:.3g} (relative) after "
                f"{self._pivots} pivots; treating the system as infeasible"
            )
            return LPResult(LPStatus.INFEASIBLE, pivots=self._pivots)
        return LPResult(LPStatus.OPTIMAL, x=x, objective=objective, pivots=self._pivots)

    @staticmethod
    def _coeffs(coeffs: Sequence[float], nvar: int) -> np.ndarray:
        a = np.asarray(coeffs, dtype=float).reshape(-1)
        if a.shape != (nvar,):
            raise ValueError(f"constraint has {a.shape[0]} coefficients, expected {nvar}")
        return a

    @staticmethod
    def _variable_map(bounds: Sequence[Bound]):
        """
        x = offset + transform @ y with y >= 0.

        Only finite lower bounds are shifted into the rows. Upper bounds become
        extra rows (entries, width) meaning sum coeff * y_col <= width, so a
        loose cap such as x <= 1e9 never enters the user rows.
        """
        offset = np.zeros(len(bounds))
        columns: list[tuple[int, float]] = []
        ub_rows: list[tuple[list[tuple[int, float]], float]] = []
        for k, bound in enumerate(bounds):
            if math.isfinite(bound.lo):
                offset[k] = bound.lo
                columns.append((k, 1.0))
                if math.isfinite(bound.hi):
                    ub_rows.append(([(len(columns) - 1, 1.0)], bound.hi - bound.lo))
            else:
                columns.append((k, 1.0))
                columns.append((k, -1.0))
                if math.isfinite(bound.hi):
                    ub_rows.append(([(len(columns) - 2, 1.0), (len(columns) - 1, -1.0)], bound.hi))
        transform = np.zeros((len(bounds), len(columns)))
        for j, (k, sign) in enumerate(columns):
            transform[k, j] = sign
        return offset, transform, ub_rows

    def _pivot(self, tableau: np.ndarray, row: int, col: int) -> None:
        self._pivots += 1
        if self._pivots > self.max_pivots:
            raise NumericalFailure(f"simplex exceeded {self.max_pivots} pivots")
        tableau[row, :] /= tableau[row, col]
        for r in range(tableau.shape[0]):
            if r != row and tableau[r, col] != 0.0:
                tableau[r, :] -= tableau[r, col] * tableau[row, :]

    def _run(self, tableau: np.ndarray, basis: list[int], allowed: int) -> bool:
        """Minimize the tableau objective; False when unbounded."""
        m = tableau.shape[0] - 1
        while True:
            reduced = tableau[m, :allowed]
            candidates = np.flatnonzero(reduced < -self.tol)
            if candidates.size == 0:
                return True
            col = int(candidates[0])
            best_row, best_ratio = -1, math.inf
            for r in range(m):
                a = tableau[r, col]
                if a > self.tol:
                    ratio = tableau[r, -1] / a
                    if ratio < best_ratio - 1e-12 or (
                        abs(ratio - best_ratio) <= 1e-12 and basis[r] < basis[best_row]
                    ):
                        best_row, best_ratio = r, ratio
            if best_row < 0:
                return False
            self._pivot(tableau, best_row, col)
            basis[best_row] = col

    def _drive_out_artificials(self, tableau: np.ndarray, basis: list[int], ncols: int) -> None:
        for r, j in enumerate(basis):
            if j < ncols:
                continue
            row = tableau[r, :ncols]
            nonzero = np.flatnonzero(np.abs(row) > self.tol)
            if nonzero.size:
                col = int(nonzero[0])
                self._pivot(tableau, r, col)
                basis[r] = col
            # otherwise the row is redundant; its artificial stays basic at zero

    @staticmethod
    def _basic_solution(tableau: np.ndarray, basis: list[int], ncols: int) -> np.ndarray:
        y = np.zeros(ncols)
        for r, j in enumerate(basis):
            if j < ncols:
                y[j] = max(tableau[r, -1], 0.0)
        return y


def constraint_violation(
    x: np.ndarray,
    equalities: Sequence[Row],
    inequalities: Sequence[Row],
    bounds: Sequence[Bound],
) -> float:
    """Largest violation of the system at x, each row scaled by 1 + |r| + |a|.|x|."""
    x = np.asarray(x, dtype=float)
    worst = 0.0
    for rows, two_sided in ((equalities, True), (inequalities, False)):
        for coeffs, value in rows:
            a = np.asarray(coeffs, dtype=float).reshape(-1)
            excess = float(a @ x) - float(value)
            if two_sided:
                excess = abs(excess)
            scale = 1.0 + abs(float(value)) + float(np.abs(a) @ np.abs(x))
            worst = max(worst, excess / scale)
    for xk, bound in zip(x, bounds):
        if math.isfinite(bound.lo):
            worst = max(worst, (bound.lo - xk) / (1.0 + abs(bound.lo)))
        if math.isfinite(bound.hi):
            worst = max(worst, (xk - bound.hi) / (1.0 + abs(bound.hi)))
    return worst


def lp_solve(
    objective: Sequence[float],
    equalities: Sequence[Row],
    inequalities: Sequence[Row],
    bounds: Sequence[Bound],
    max_pivots: int = DEFAULT_MAX_PIVOTS,
) -> LPResult:
    """Maximize objective^T x over the constraint system."""
    return TwoPhaseSimplex(max_pivots=max_pivots).solve(objective, equalities, inequalities, bounds)


def lp_feasible(
    equalities: Sequence[Row],
    inequalities: Sequence[Row],
    bounds: Sequence[Bound],
    max_pivots: int = DEFAULT_MAX_PIVOTS,
) -> LPResult:
    """Find any feasible point; result.x is None and result.farkas is set when infeasible."""
    return TwoPhaseSimplex(max_pivots=max_pivots).solve(None, equalities, inequalities, bounds)


def farkas_check(
    equalities: Sequence[Row],
    inequalities: Sequence[Row],
    farkas: np.ndarray,
    tol: float = 1e-8,
) -> bool:
    """
    Confirm an infeasibility certificate for nonnegative variables.

    With u = farkas: u_ineq >= 0, A_eq^T u_eq + A_in^T u_in >= 0 and
    r^T u < 0 together show that no x >= 0 satisfies the system.
    """
    rows = [np.asarray(a, dtype=float) for a, _ in (*equalities, *inequalities)]
    rhs = np.array([float(r) for _, r in (*equalities, *inequalities)])
    u = np.asarray(farkas, dtype=float)
    if not rows:
        return False
    n_eq = len(equalities)
    combo = np.vstack(rows).T @ u
    return bool(
        np.all(u[n_eq:] >= -tol)
        and np.all(combo >= -tol)
        and float(rhs @ u) < -tol
    )
