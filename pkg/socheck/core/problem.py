"""
Problem model - Constrained multiobjective programs.

    minimize (f_1(x), ..., f_m(x))   subject to   H(x) = 0,  G(x) in Q

with F: R^n -> R^m, H: R^n -> R^p, G: R^n -> R^k and Q a polyhedron
{z : A z <= b} (or the nonpositive orthant) with nonempty interior.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import ArityMismatch, NotInQ
from .funcdsl import FunctionDef, evaluate, gradient

log = logging.getLogger(__name__)


def interior_point_of(A: np.ndarray, b: np.ndarray) -> Optional[np.ndarray]:
    """A point with A z < b componentwise, or None when {A z <= b} has empty interior."""
    from ..certify.lp import lp_solve, Bound

    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    rows = A.shape[0]
    k = A.shape[1] if A.ndim == 2 else 0
    if rows == 0:
        return np.zeros(k)
    # maximize t subject to A z + t*1 <= b, t <= 1
    inequalities = [(np.append(A[i], 1.0), float(b[i])) for i in range(rows)]
    bounds = [Bound.free()] * k + [Bound(-np.inf, 1.0)]
    objective = np.append(np.zeros(k), 1.0)
    solution = lp_solve(objective, [], inequalities, bounds)
    if solution.x is None or solution.objective <= 1e-12:
        return None
    return solution.x[:k]


@dataclass(eq=False)
class PolyhedronSpec:
    """
    Polyhedral set Q = {z in R^k : A z <= b}.

    The nonpositive orthant of dimension k is stored as A = I, b = 0 and
    remembers its orthant form for serialization.

    Raises:
        ValueError: A and b disagree in length, or Q has empty interior
    """
    A: np.ndarray
    b: np.ndarray
    orthant_dim: Optional[int] = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim < 2:
            A = np.zeros((0, 0)) if A.size == 0 else A.reshape(1, -1)
        self.A = A
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError(f"A has {self.A.shape[0]} rows but b has {self.b.shape[0]} entries")
        if self.orthant_dim is None and self.num_rows and interior_point_of(self.A, self.b) is None:
            raise ValueError(f"Q = {{A z <= b}} with {self.num_rows} row(s) has empty interior")

    @classmethod
    def orthant(cls, k: int) -> "PolyhedronSpec":
        """Nonpositive orthant -R^k_+."""
        return cls(A=np.eye(k), b=np.zeros(k), orthant_dim=k)

    @classmethod
    def halfspaces(cls, A: Sequence[Sequence[float]], b: Sequence[float]) -> "PolyhedronSpec":
        return cls(A=np.asarray(A, dtype=float), b=np.asarray(b, dtype=float))

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    def slack(self, z: Sequence[float]) -> np.ndarray:
        """b - A z; nonnegative exactly on Q."""
        return self.b - self.A @ np.asarray(z, dtype=float).reshape(-1)

    def contains(self, z: Sequence[float], tol: float = 1e-8) -> bool:
        return bool(np.all(self.slack(z) >= -tol))

    def active_rows(self, z: Sequence[float], tol: float = 1e-8) -> list[int]:
        """Rows with A_i z = b_i within tol. Raises NotInQ when z is outside Q."""
        slack = self.slack(z)
        if np.any(slack < -tol):
            worst = int(np.argmin(slack))
            raise NotInQ(f"row {worst} violated by {-slack[worst]:.3g}")
        return [i for i in range(self.num_rows) if abs(slack[i]) <= tol]

    def interior_point(self) -> Optional[np.ndarray]:
        """A point with A z < b componentwise."""
        return interior_point_of(self.A, self.b)

    def to_dict(self) -> dict:
        if self.orthant_dim is not None:
            return {"orthant": self.orthant_dim}
        return {"A": self.A.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "PolyhedronSpec":
        if "orthant" in data:
            return cls.orthant(int(data["orthant"]))
        return cls.halfspaces(data["A"], data["b"])


@dataclass
class FeasibilityReport:
    """Feasibility of a candidate point."""
    feasible: bool
    equality_residual: float
    q_violation: float
    active_rows: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "equality_residual": self.equality_residual,
            "q_violation": self.q_violation,
            "active_rows": list(self.active_rows),
        }


@dataclass(eq=False)
class ProblemInstance:
    """
    A multiobjective program over R^n.

    Attributes:
        n: Dimension
        objectives: f_1..f_m (m >= 1)
        equalities: h_1..h_p (components of H)
        qmap: g_1..g_k (components of G)
        qset: Polyhedron over R^k
        name: Display name
        point: Optional candidate point shipped with the problem file
        directions: Optional user-supplied directions
        c11_declared: User assertion that every map has locally Lipschitz gradient
    """
    n: int
    objectives: list[FunctionDef]
    equalities: list[FunctionDef] = field(default_factory=list)
    qmap: list[FunctionDef] = field(default_factory=list)
    qset: Optional[PolyhedronSpec] = None
    name: str = "problem"
    point: Optional[np.ndarray] = None
    directions: list[np.ndarray] = field(default_factory=list)
    c11_declared: bool = True

    def __post_init__(self):
        if not self.objectives:
            raise ValueError("A problem needs at least one objective")
        for f in (*self.objectives, *self.equalities, *self.qmap):
            if f.arity != self.n:
                raise ArityMismatch(f"{f.name} has arity {f.arity}, problem dimension is {self.n}")
        if self.qset is None:
            self.qset = PolyhedronSpec.orthant(len(self.qmap))
        if self.qset.dim != len(self.qmap):
            raise ArityMismatch(
                f"qset has dimension {self.qset.dim} but qmap has {len(self.qmap)} components"
            )
        if self.point is not None:
            self.point = np.asarray(self.point, dtype=float).reshape(-1)
        self.directions = [np.asarray(d, dtype=float).reshape(-1) for d in self.directions]

    @property
    def m(self) -> int:
        return len(self.objectives)

    @property
    def p(self) -> int:
        return len(self.equalities)

    @property
    def k(self) -> int:
        return len(self.qmap)

    def F(self, x) -> np.ndarray:
        return np.array([evaluate(f, x) for f in self.objectives])

    def H(self, x) -> np.ndarray:
        return np.array([evaluate(h, x) for h in self.equalities])

    def G(self, x) -> np.ndarray:
        return np.array([evaluate(g, x) for g in self.qmap])

    def jacobian_F(self, x) -> np.ndarray:
        return _jacobian(self.objectives, x, self.n)

    def jacobian_H(self, x) -> np.ndarray:
        return _jacobian(self.equalities, x, self.n)

    def jacobian_G(self, x) -> np.ndarray:
        return _jacobian(self.qmap, x, self.n)

    def feasibility(self, x, tau_feas: float = 1e-8) -> FeasibilityReport:
        """Check H(x) = 0 and G(x) in Q within tau_feas."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.n,):
            raise ArityMismatch(f"expected a {self.n}-vector, got shape {x.shape}")
        h = self.H(x)
        eq_res = float(np.max(np.abs(h))) if self.p else 0.0
        if self.k:
            slack = self.qset.slack(self.G(x))
            violation = float(max(0.0, -np.min(slack))) if slack.size else 0.0
        else:
            slack = np.zeros(0)
            violation = 0.0
        feasible = eq_res <= tau_feas and violation <= tau_feas
        active = [i for i in range(slack.size) if abs(slack[i]) <= tau_feas] if feasible else []
        log.debug(f"{self.name}: feasibility at {x.tolist()}: eq={eq_res:.3g} q={violation:.3g}")
        return FeasibilityReport(feasible, eq_res, violation, active)


def _jacobian(funcs: list[FunctionDef], x, n: int) -> np.ndarray:
    if not funcs:
        return np.zeros((0, n))
    return np.vstack([gradient(f, x) for f in funcs])
