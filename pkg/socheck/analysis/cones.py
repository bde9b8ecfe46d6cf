"""
Polyhedral cones - Normal cones, critical directions and the Q° support test.

All cone tests against Q = {z : A z <= b} work on the active rows at a point
z, so every cone involved is finitely generated and closed.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..certify.lp import Bound, lp_feasible
from ..core.problem import PolyhedronSpec, ProblemInstance
from ..core.settings import CheckConfig
from ..errors import InfeasiblePoint, PreconditionFailed
from .raycalc import ClusterSet, weak_dir2

log = logging.getLogger(__name__)

ZERO_ROW_TOL = 1e-12


@dataclass(eq=False)
class CriticalDirection:
    """
    A direction d satisfying the critical-direction conditions at x̂.

    Attributes:
        d: The direction
        objective_slacks: <grad f_j(x̂), d> for every objective
        equality_residual: ||J_H(x̂) d||
        active_rows: Rows of Q active at G(x̂)
        tight_rows: Active rows with A_i J_G(x̂) d = 0
        regular: Cluster sets nonempty and J_G d in the feasible cone
        source: Where the candidate came from (zero, user, ray, random)
    """
    d: np.ndarray
    objective_slacks: np.ndarray
    equality_residual: float
    active_rows: list[int] = field(default_factory=list)
    tight_rows: list[int] = field(default_factory=list)
    regular: bool = True
    source: str = "user"

    @property
    def is_zero(self) -> bool:
        return not np.any(self.d)

    def to_dict(self) -> dict:
        return {
            "d": self.d.tolist(),
            "objective_slacks": self.objective_slacks.tolist(),
            "equality_residual": self.equality_residual,
            "active_rows": list(self.active_rows),
            "tight_rows": list(self.tight_rows),
            "regular": self.regular,
            "source": self.source,
        }


def normal_cone_rep(Q: PolyhedronSpec, z: Sequence[float], tol: float = 1e-8) -> list[np.ndarray]:
    """Generators of N(Q; z): the active rows A_i."""
    return [Q.A[i].copy() for i in Q.active_rows(z, tol)]


def feasible_cone_membership(
    Q: PolyhedronSpec,
    z: Sequence[float],
    v: Sequence[float],
    tol: float = 1e-7,
    feas_tol: float = 1e-8,
) -> bool:
    """v in cone(Q - z), i.e. A_i v <= tol on every active row."""
    v = np.asarray(v, dtype=float).reshape(-1)
    return all(float(Q.A[i] @ v) <= tol for i in Q.active_rows(z, feas_tol))


def tight_rows(
    Q: PolyhedronSpec,
    z: Sequence[float],
    v: Sequence[float],
    tol: float = 1e-7,
    feas_tol: float = 1e-8,
) -> list[int]:
    """Active rows at z along which v does not leave the face: |A_i v| <= tol."""
    v = np.asarray(v, dtype=float).reshape(-1)
    return [i for i in Q.active_rows(z, feas_tol) if abs(float(Q.A[i] @ v)) <= tol]


def _in_row_cone(rows: np.ndarray, target: np.ndarray, tol: float = 1e-9) -> bool:
    """target in cone{rows_i} (LP feasibility in the row weights)."""
    if not np.any(np.abs(target) > tol):
        return True
    if rows.shape[0] == 0:
        return False
    equalities = [(rows[:, j], float(target[j])) for j in range(rows.shape[1])]
    result = lp_feasible(equalities, [], [Bound.nonneg()] * rows.shape[0])
    return result.feasible


def normal_cone_contains(
    Q: PolyhedronSpec,
    z: Sequence[float],
    zstar: Sequence[float],
    feas_tol: float = 1e-8,
) -> bool:
    """z* in N(Q; z)."""
    active = Q.active_rows(z, feas_tol)
    return _in_row_cone(Q.A[active], np.asarray(zstar, dtype=float).reshape(-1))


def qcirc_support(
    Q: PolyhedronSpec,
    zhat: Sequence[float],
    dz: Sequence[float],
    zstar: Sequence[float],
    tol: float = 1e-7,
    feas_tol: float = 1e-8,
) -> float:
    """
    Support function of the second-order variation set Q°(ẑ, dz) at z*.

    For polyhedral Q the set is the open cone {y : A_i y < 0 for active rows
    with A_i dz = 0}, so the support is 0 when z* lies in the cone spanned by
    those rows and +inf otherwise.

    Raises:
        PreconditionFailed: dz is not in cone(Q - ẑ)
    """
    if not feasible_cone_membership(Q, zhat, dz, tol, feas_tol):
        raise PreconditionFailed(f"dz={list(dz)} is not a feasible direction of Q at {list(zhat)}")
    rows = tight_rows(Q, zhat, dz, tol, feas_tol)
    inside = _in_row_cone(Q.A[rows], np.asarray(zstar, dtype=float).reshape(-1))
    return 0.0 if inside else np.inf


def _crit_tol(problem: ProblemInstance, x: np.ndarray, cfg: CheckConfig) -> float:
    return cfg.tau_crit * (1.0 + float(np.linalg.norm(problem.jacobian_F(x))))


def _require_feasible(problem: ProblemInstance, x: np.ndarray, cfg: CheckConfig) -> list[int]:
    report = problem.feasibility(x, cfg.tau_feas)
    if not report.feasible:
        raise InfeasiblePoint(
            f"{problem.name}: point {x.tolist()} is infeasible "
            f"(equality residual {report.equality_residual:.3g}, Q violation {report.q_violation:.3g})"
        )
    return report.active_rows


def direction_clusters(
    problem: ProblemInstance,
    base: Sequence[float],
    direction: Sequence[float],
    cfg: Optional[CheckConfig] = None,
) -> tuple[ClusterSet, ClusterSet]:
    """Cluster sets K of H'' and M of G'' along direction."""
    cfg = cfg or CheckConfig()
    K = weak_dir2(problem.equalities, base, direction, cfg.eps_sequence, cfg)
    M = weak_dir2(problem.qmap, base, direction, cfg.eps_sequence, cfg)
    return K, M


def is_regular(
    problem: ProblemInstance,
    base: Sequence[float],
    direction: Sequence[float],
    cfg: Optional[CheckConfig] = None,
    clusters: Optional[tuple[ClusterSet, ClusterSet]] = None,
) -> bool:
    """Nonempty cluster sets for H and G, and J_G d in cone(Q - G(x̂))."""
    cfg = cfg or CheckConfig()
    if problem.p == 0 and problem.k == 0:
        return True
    x = np.asarray(base, dtype=float).reshape(-1)
    d = np.asarray(direction, dtype=float).reshape(-1)
    K, M = clusters or direction_clusters(problem, x, d, cfg)
    if K.is_empty or M.is_empty:
        return False
    if problem.k == 0:
        return True
    return feasible_cone_membership(
        problem.qset, problem.G(x), problem.jacobian_G(x) @ d,
        _crit_tol(problem, x, cfg), cfg.tau_feas,
    )


def is_critical(
    problem: ProblemInstance,
    base: Sequence[float],
    direction: Sequence[float],
    cfg: Optional[CheckConfig] = None,
    source: str = "user",
) -> Optional[CriticalDirection]:
    """
    Test the critical-direction conditions at a feasible point.

    Raises:
        InfeasiblePoint: base violates H = 0 or G in Q
    """
    cfg = cfg or CheckConfig()
    x = np.asarray(base, dtype=float).reshape(-1)
    d = np.asarray(direction, dtype=float).reshape(-1)
    active = _require_feasible(problem, x, cfg)
    tol = _crit_tol(problem, x, cfg)

    slacks = problem.jacobian_F(x) @ d
    if np.any(slacks > tol):
        return None
    eq_res = float(np.linalg.norm(problem.jacobian_H(x) @ d)) if problem.p else 0.0
    if eq_res > tol:
        return None
    tight: list[int] = []
    if problem.k:
        gd = problem.jacobian_G(x) @ d
        row_values = problem.qset.A[active] @ gd if active else np.zeros(0)
        if np.any(row_values > tol):
            return None
        tight = [i for i, value in zip(active, row_values) if abs(value) <= tol]

    regular = is_regular(problem, x, d, cfg)
    if not regular:
        log.warning(f"{problem.name}: direction {d.tolist()} is critical but not regular")
    return CriticalDirection(d, slacks, eq_res, list(active), tight, regular, source)


def _null_space(M: np.ndarray, n: int, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (rows) of {v : M v = 0}."""
    if M.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    return vt[rank:]


def critical_cone_rays(
    problem: ProblemInstance,
    base: Sequence[float],
    cfg: Optional[CheckConfig] = None,
) -> list[np.ndarray]:
    """
    Unit generators of the polyhedral critical cone
    {d : J_F d <= 0, J_H d = 0, A_active J_G d <= 0}.

    Lineality directions contribute plus and minus each basis vector; the
    pointed part is enumerated over subsets of inequality rows whose
    stacked system leaves a one-dimensional null space.
    """
    cfg = cfg or CheckConfig()
    x = np.asarray(base, dtype=float).reshape(-1)
    n = problem.n
    active = _require_feasible(problem, x, cfg)
    tol = _crit_tol(problem, x, cfg)

    E = problem.jacobian_H(x)
    B = problem.jacobian_F(x)
    if problem.k and active:
        B = np.vstack([B, problem.qset.A[active] @ problem.jacobian_G(x)])
    E = E[np.linalg.norm(E, axis=1) > ZERO_ROW_TOL] if E.size else np.zeros((0, n))
    B = B[np.linalg.norm(B, axis=1) > ZERO_ROW_TOL] if B.size else np.zeros((0, n))

    rays: list[np.ndarray] = []
    lineality = _null_space(np.vstack([E, B]), n)
    for v in lineality:
        rays.extend([v.copy(), -v])

    fixed = np.vstack([E, lineality]) if lineality.size else E
    for size in range(0, min(B.shape[0], n - 1) + 1):
        for subset in itertools.combinations(range(B.shape[0]), size):
            M = np.vstack([fixed, B[list(subset)]]) if subset else fixed
            null = _null_space(M, n)
            if null.shape[0] != 1:
                continue
            r = null[0]
            for candidate in (r, -r):
                if np.all(B @ candidate <= tol):
                    rays.append(candidate.copy())

    unique = _dedupe([r / np.linalg.norm(r) for r in rays])
    log.debug(f"{problem.name}: critical cone has {len(unique)} generator(s)")
    return unique


def _dedupe(vectors: list[np.ndarray], tol: float = 1e-9) -> list[np.ndarray]:
    kept: list[np.ndarray] = []
    for v in vectors:
        if not any(np.linalg.norm(v - k) <= tol for k in kept):
            kept.append(v)
    return kept


def enumerate_directions(
    problem: ProblemInstance,
    base: Sequence[float],
    cfg: Optional[CheckConfig] = None,
    user: Optional[Sequence[Sequence[float]]] = None,
) -> list[CriticalDirection]:
    """
    Critical directions to test: d = 0, critical user directions, critical
    random unit vectors and (for small n) the critical cone generators.

    Raises:
        InfeasiblePoint: base is infeasible
    """
    cfg = cfg or CheckConfig()
    x = np.asarray(base, dtype=float).reshape(-1)
    _require_feasible(problem, x, cfg)

    candidates: list[tuple[np.ndarray, str]] = [(np.zeros(problem.n), "zero")]
    for d in user or []:
        d = np.asarray(d, dtype=float).reshape(-1)
        norm = float(np.linalg.norm(d))
        if norm > 0:
            candidates.append((d / norm, "user"))
    if cfg.random_dirs:
        rng = np.random.default_rng(cfg.seed)
        for v in rng.normal(size=(cfg.random_dirs, problem.n)):
            candidates.append((v / np.linalg.norm(v), "random"))
    if cfg.rays:
        if problem.n <= cfg.ray_cap_dim:
            candidates.extend((r, "ray") for r in critical_cone_rays(problem, x, cfg))
        else:
            log.info(f"{problem.name}: n={problem.n} exceeds ray cap {cfg.ray_cap_dim}, skipping rays")

    directions: list[CriticalDirection] = []
    seen: list[np.ndarray] = []
    for d, source in candidates:
        if any(np.linalg.norm(d - s) <= 1e-9 for s in seen):
            continue
        seen.append(d)
        critical = is_critical(problem, x, d, cfg, source)
        if critical is not None:
            directions.append(critical)
    log.info(f"{problem.name}: {len(directions)} critical direction(s) to check")
    return directions
