"""
Grid oracle - Brute-force weak Pareto test on a box around a candidate point.

A point x̂ is weakly Pareto when no feasible x has F_j(x) < F_j(x̂) for every j.
The oracle scans a regular grid; with equality constraints each grid point is
first projected onto {H = 0}.
"""

import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from ..analysis.raycalc import project_to_zero_set
from ..core.funcdsl import evaluate_batch
from ..core.problem import ProblemInstance
from ..errors import PreconditionFailed

log = logging.getLogger(__name__)

MAX_GRID_DIM = 3
ZERO_SET_TOL = 1e-10
DOMINANCE_TOL = 1e-6

DEFAULT_RESOLUTION = {1: 100001, 2: 301, 3: 41}
# Every grid point is projected onto {H = 0} one at a time.
PROJECTED_RESOLUTION = {1: 2001, 2: 61, 3: 15}


class Truth(Enum):
    WEAK_PARETO = "WEAK_PARETO"
    NOT_WEAK_PARETO = "NOT_WEAK_PARETO"


@dataclass
class OracleResult:
    """
    Outcome of a grid scan.

    Attributes:
        truth: WEAK_PARETO unless a dominating feasible point was found
        witness: Dominating point with the largest gain, if any
        gain: min_j (F_j(x̂) - F_j(witness)) for the witness
        points_checked: Grid size
        feasible_points: Grid points (after projection) that were feasible
    """
    truth: Truth
    witness: Optional[np.ndarray]
    gain: float
    points_checked: int
    feasible_points: int

    def to_dict(self) -> dict:
        return {
            "truth": self.truth.value,
            "witness": None if self.witness is None else self.witness.tolist(),
            "gain": self.gain,
            "points_checked": self.points_checked,
            "feasible_points": self.feasible_points,
        }


def _grid(box: np.ndarray, resolution: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, resolution) for lo, hi in box]
    return np.array(list(itertools.product(*axes))) if len(axes) > 1 else axes[0].reshape(-1, 1)


def _as_box(x: np.ndarray, box: Union[None, float, Sequence[Sequence[float]]]) -> np.ndarray:
    if box is None:
        box = 1.0
    if np.isscalar(box):
        return np.stack([x - float(box), x + float(box)], axis=1)
    arr = np.asarray(box, dtype=float)
    if arr.shape == (2,) and x.shape[0] == 1:
        arr = arr.reshape(1, 2)
    if arr.shape != (x.shape[0], 2):
        raise PreconditionFailed(f"box must be a half-width or {x.shape[0]} (lo, hi) pairs")
    return arr


def grid_pareto_oracle(
    problem: ProblemInstance,
    base: Sequence[float],
    box: Union[None, float, Sequence[Sequence[float]]] = None,
    resolution: Optional[int] = None,
    tau_feas: float = 1e-8,
) -> OracleResult:
    """
    Scan a grid for a feasible point strictly dominating base in every objective.

    Args:
        problem: Problem instance (n <= 3)
        base: Candidate point
        box: Half-width around base, or one (lo, hi) pair per coordinate
        resolution: Grid points per axis
        tau_feas: Tolerance of the Q membership test

    Raises:
        PreconditionFailed: n > 3 or malformed box
    """
    if problem.n > MAX_GRID_DIM:
        raise PreconditionFailed(f"grid oracle needs n <= {MAX_GRID_DIM}, got n={problem.n}")
    x = np.asarray(base, dtype=float).reshape(-1)
    defaults = PROJECTED_RESOLUTION if problem.p else DEFAULT_RESOLUTION
    resolution = resolution or defaults[problem.n]
    points = _grid(_as_box(x, box), resolution)
    total = points.shape[0]

    if problem.p:
        projected = np.array([project_to_zero_set(problem.equalities, y) for y in points])
        residual = np.max(
            np.abs(np.column_stack([evaluate_batch(h, projected) for h in problem.equalities])), axis=1
        )
        points = projected[residual <= ZERO_SET_TOL]

    if problem.k and points.size:
        Z = np.column_stack([evaluate_batch(g, points) for g in problem.qmap])
        slack = problem.qset.b[None, :] - Z @ problem.qset.A.T
        points = points[np.all(slack >= -tau_feas, axis=1)] if slack.size else points

    feasible = points.shape[0]
    log.debug(f"{problem.name}: grid oracle kept {feasible}/{total} feasible points")
    if feasible == 0:
        return OracleResult(Truth.WEAK_PARETO, None, 0.0, total, 0)

    F0 = problem.F(x)
    values = np.column_stack([evaluate_batch(f, points) for f in problem.objectives])
    gains = np.min(F0[None, :] - values, axis=1)
    best = int(np.argmax(gains))
    if gains[best] > DOMINANCE_TOL:
        log.info(f"{problem.name}: {points[best].tolist()} dominates by {gains[best]:.3g}")
        return OracleResult(Truth.NOT_WEAK_PARETO, points[best], float(gains[best]), total, feasible)
    return OracleResult(Truth.WEAK_PARETO, None, float(gains[best]), total, feasible)
