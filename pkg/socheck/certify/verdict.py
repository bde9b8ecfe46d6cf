"""
Verdict assembly - First- and second-order checks at a candidate point.

Overall outcome:
- DEGENERATE when J_H(x̂) is rank deficient (multipliers exist trivially)
- REJECTED when no first-order multiplier exists or some critical
  direction admits no second-order certificate
- CONSISTENT otherwise: no refutation among the enumerated directions
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from ..analysis.cones import CriticalDirection, direction_clusters, enumerate_directions, is_critical
from ..analysis.raycalc import ClusterSet
from ..analysis.subgrad2 import Interval, support_along
from ..core.funcdsl import ContinuityReport, gradient_continuity_probe
from ..core.problem import FeasibilityReport, ProblemInstance
from ..core.settings import CertificateMode, CheckConfig
from ..errors import InfeasiblePoint
from .certificates import (
    MultiplierCertificate,
    first_order_certificate,
    second_order_search,
)

log = logging.getLogger(__name__)

ZERO_GRADIENT_TOL = 1e-12


class Overall(Enum):
    REJECTED = "REJECTED"
    CONSISTENT = "CONSISTENT"
    DEGENERATE = "DEGENERATE"


@dataclass(eq=False)
class DirectionVerdict:
    """
    Result for one direction.

    Attributes:
        d: The (unit or zero) direction
        critical: Whether d is a critical direction
        direction: Criticality diagnostics when critical
        mode: Second-order row construction
        certificate: Certificate when the direction is not refuted
        refuted: True when no multiplier meets the second-order condition
        margin: Best normalized second-order margin
        support: Support intervals S_j of the objectives along d
        exact: S_j came from the exact oracle
        K, M: Cluster sets of H'' and G'' used in the rows
        shortcut: Certificate issued because some objective has zero gradient and s_j^hi >= 0
    """
    d: np.ndarray
    critical: bool
    direction: Optional[CriticalDirection] = None
    mode: CertificateMode = CertificateMode.THEOREM
    certificate: Optional[MultiplierCertificate] = None
    refuted: bool = False
    margin: Optional[float] = None
    support: list[Interval] = field(default_factory=list)
    exact: bool = False
    K: Optional[ClusterSet] = None
    M: Optional[ClusterSet] = None
    shortcut: bool = False

    @property
    def regular(self) -> Optional[bool]:
        return self.direction.regular if self.direction is not None else None


@dataclass
class ContinuityCheck:
    """Gradient continuity probe of one kinked map near the candidate point."""
    function: str
    declared_c11: bool
    report: ContinuityReport

    @property
    def suspicious(self) -> bool:
        """Declared C^{1,1} but the gradient quotients blow up."""
        return self.declared_c11 and not self.report.c11_consistent

    def to_dict(self) -> dict:
        return {"function": self.function, "declared_c11": self.declared_c11, **self.report.to_dict()}


def check_continuity(
    problem: ProblemInstance,
    base: Sequence[float],
    cfg: Optional[CheckConfig] = None,
) -> list[ContinuityCheck]:
    """
    Probe every kinked f_j, h_l and g_i on the box x̂ ± eps_max.

    Smooth maps are C² and skipped. Nothing is probed when continuity_samples is 0.
    """
    cfg = cfg or CheckConfig()
    if cfg.continuity_samples == 0:
        return []
    x = np.asarray(base, dtype=float).reshape(-1)
    region = (x - cfg.eps_max, x + cfg.eps_max)
    checks = []
    for f in (*problem.objectives, *problem.equalities, *problem.qmap):
        if f.is_smooth:
            continue
        report = gradient_continuity_probe(
            f, region, samples=cfg.continuity_samples, step=max(cfg.radii), seed=cfg.seed
        )
        check = ContinuityCheck(f.name, f.declared_c11, report)
        if check.suspicious:
            log.warning(
                f"{problem.name}: {f.name} is declared C^{{1,1}} but its gradient jumps near "
                f"{x.tolist()}; the necessary conditions may not apply"
            )
        checks.append(check)
    return checks


@dataclass(eq=False)
class VerificationReport:
    """Everything the verifier established at a point."""
    problem_name: str
    point: np.ndarray
    feasibility: FeasibilityReport
    rank_H: int
    first_order: Optional[MultiplierCertificate]
    verdicts: list[DirectionVerdict]
    overall: Overall
    mode: CertificateMode = CertificateMode.THEOREM
    continuity: list["ContinuityCheck"] = field(default_factory=list)

    @property
    def refuting(self) -> list[DirectionVerdict]:
        return [v for v in self.verdicts if v.refuted]


def _shortcut(
    problem: ProblemInstance,
    x: np.ndarray,
    direction: CriticalDirection,
    support: list[Interval],
) -> Optional[MultiplierCertificate]:
    """mu_j = 1 for an objective with zero gradient and nonnegative s_j^hi."""
    grads = problem.jacobian_F(x)
    for j, interval in enumerate(support):
        if np.linalg.norm(grads[j]) <= ZERO_GRADIENT_TOL and interval.hi >= 0:
            mu = np.zeros(problem.m)
            mu[j] = 1.0
            num_rows = problem.qset.num_rows if problem.k else 0
            return MultiplierCertificate(
                mu, np.zeros(num_rows), np.zeros(problem.p), interval.hi,
                allowed_rows=list(direction.tight_rows),
            )
    return None


def _direction_verdict(
    problem: ProblemInstance,
    x: np.ndarray,
    direction: CriticalDirection,
    cfg: CheckConfig,
) -> DirectionVerdict:
    d = direction.d
    outcome = DirectionVerdict(d=d, critical=True, direction=direction, mode=cfg.mode)
    if not direction.regular:
        search = second_order_search(problem, x, direction, [Interval.point(0.0)] * problem.m,
                                     ClusterSet(problem.p, []), ClusterSet(problem.k, []), cfg.mode, cfg)
        outcome.certificate = search.certificate
        return outcome

    results = [support_along(f, x, d, d, cfg) for f in problem.objectives]
    outcome.support = [r.interval for r in results]
    outcome.exact = all(r.exact for r in results)
    K, M = direction_clusters(problem, x, d, cfg)
    outcome.K, outcome.M = K, M

    shortcut = _shortcut(problem, x, direction, outcome.support)
    if shortcut is not None:
        outcome.certificate = shortcut
        outcome.margin = shortcut.second_order_margin
        outcome.shortcut = True
        return outcome

    search = second_order_search(
        problem, x, direction, outcome.support, K, M, cfg.mode, cfg, outcome.exact
    )
    outcome.certificate = search.certificate
    outcome.margin = search.margin
    outcome.refuted = search.refuted
    return outcome


def verdict(
    problem: ProblemInstance,
    base: Sequence[float],
    cfg: Optional[CheckConfig] = None,
    user_directions: Optional[Sequence[Sequence[float]]] = None,
) -> VerificationReport:
    """
    Run the full check at base.

    Raises:
        InfeasiblePoint: base is infeasible
    """
    cfg = cfg or CheckConfig()
    x = np.asarray(base, dtype=float).reshape(-1)
    feasibility = problem.feasibility(x, cfg.tau_feas)
    if not feasibility.feasible:
        raise InfeasiblePoint(
            f"{problem.name}: point {x.tolist()} is infeasible "
            f"(equality residual {feasibility.equality_residual:.3g}, "
            f"Q violation {feasibility.q_violation:.3g})"
        )

    rank_H = int(np.linalg.matrix_rank(problem.jacobian_H(x))) if problem.p else 0
    report = VerificationReport(
        problem_name=problem.name,
        point=x,
        feasibility=feasibility,
        rank_H=rank_H,
        first_order=None,
        verdicts=[],
        overall=Overall.CONSISTENT,
        mode=cfg.mode,
        continuity=check_continuity(problem, x, cfg),
    )

    if rank_H < problem.p:
        report.first_order = first_order_certificate(problem, x, cfg)
        report.overall = Overall.DEGENERATE
        log.info(f"{problem.name}: J_H has rank {rank_H} < {problem.p}; conditions hold vacuously")
        return report

    report.first_order = first_order_certificate(problem, x, cfg)
    if report.first_order is None:
        report.overall = Overall.REJECTED
        log.info(f"{problem.name}: REJECTED at first order")
        return report

    user = list(user_directions) if user_directions is not None else list(problem.directions)
    directions = enumerate_directions(problem, x, cfg, user)

    if cfg.workers > 1 and len(directions) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            report.verdicts = list(pool.map(lambda c: _direction_verdict(problem, x, c, cfg), directions))
    else:
        report.verdicts = [_direction_verdict(problem, x, c, cfg) for c in directions]

    for d in user:
        d = np.asarray(d, dtype=float).reshape(-1)
        norm = float(np.linalg.norm(d))
        if norm > 0 and is_critical(problem, x, d / norm, cfg) is None:
            report.verdicts.append(DirectionVerdict(d=d / norm, critical=False, mode=cfg.mode))

    if any(v.refuted for v in report.verdicts):
        report.overall = Overall.REJECTED
    log.info(
        f"{problem.name}: {report.overall.value} after {len(directions)} critical direction(s)"
    )
    return report
