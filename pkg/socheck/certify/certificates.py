"""
Multiplier certificates - LP search for Fritz John type multipliers.

Variables are laid out as [mu (m), lambda (allowed rows), beta (p), t]:

    sum_j mu_j grad f_j + J_H^T beta + J_G^T A_rows^T lambda = 0
    sum mu + sum lambda = 1,   mu >= 0, lambda >= 0, beta free

With J_H of full row rank, mu = lambda = 0 forces beta = 0, so this
normalization excludes exactly the zero multiplier. Reported certificates
are rescaled to sum mu + sum lambda + sum |beta| = 1.

The second-order search maximizes the margin t of the second-order rows;
a direction is refuted when the best margin is below -eta.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..analysis.cones import CriticalDirection
from ..analysis.raycalc import ClusterSet
from ..analysis.subgrad2 import Interval, support_along
from ..core.problem import ProblemInstance
from ..core.settings import CertificateMode, CheckConfig
from ..core.validators import ValidationResult
from ..errors import InfeasiblePoint, NumericalFailure, PreconditionFailed
from .lp import Bound, LPStatus, lp_feasible, lp_solve

log = logging.getLogger(__name__)

MARGIN_CAP = 1e9


@dataclass(eq=False)
class MultiplierCertificate:
    """
    Multipliers (mu, lambda, beta) for one direction.

    Attributes:
        mu: Objective multipliers, m-vector >= 0
        lam: Row multipliers over all rows of Q, zero off the allowed rows
        beta: Equality multipliers, sign-free p-vector
        second_order_margin: Best value of the second-order rows (None at first order)
        vacuous: Issued for a nonregular direction without solving anything
        allowed_rows: Rows on which lambda may be nonzero
    """
    mu: np.ndarray
    lam: np.ndarray
    beta: np.ndarray
    second_order_margin: Optional[float] = None
    vacuous: bool = False
    allowed_rows: list[int] = field(default_factory=list)

    @property
    def normalization(self) -> float:
        return float(np.sum(self.mu) + np.sum(self.lam) + np.sum(np.abs(self.beta)))

    def zstar(self, problem: ProblemInstance) -> np.ndarray:
        """Functional z* = A^T lambda on R^k."""
        if problem.k == 0:
            return np.zeros(0)
        return problem.qset.A.T @ self.lam

    def to_dict(self) -> dict:
        return {
            "mu": self.mu.tolist(),
            "lambda": self.lam.tolist(),
            "beta": self.beta.tolist(),
            "second_order_margin": self.second_order_margin,
            "vacuous": self.vacuous,
        }


@dataclass
class CertificateSearch:
    """Best multipliers found for a direction and whether they certify it."""
    certificate: Optional[MultiplierCertificate]
    best: Optional[MultiplierCertificate]
    margin: Optional[float]
    eta: float

    @property
    def refuted(self) -> bool:
        return self.certificate is None


class _Layout:
    """Index bookkeeping for the LP variables."""

    def __init__(self, problem: ProblemInstance, rows: Sequence[int], with_margin: bool):
        self.m = problem.m
        self.rows = list(rows)
        self.p = problem.p
        self.num_rows = problem.qset.num_rows if problem.k else 0
        self.with_margin = with_margin
        self.size = self.m + len(self.rows) + self.p + (1 if with_margin else 0)

    @property
    def mu(self) -> slice:
        return slice(0, self.m)

    @property
    def lam(self) -> slice:
        return slice(self.m, self.m + len(self.rows))

    @property
    def beta(self) -> slice:
        start = self.m + len(self.rows)
        return slice(start, start + self.p)

    @property
    def t(self) -> int:
        return self.size - 1

    def bounds(self, beta_signs: Optional[Sequence[int]] = None) -> list[Bound]:
        bounds = [Bound.nonneg()] * (self.m + len(self.rows))
        for l in range(self.p):
            sign = beta_signs[l] if beta_signs is not None else 0
            if sign > 0:
                bounds.append(Bound.nonneg())
            elif sign < 0:
                bounds.append(Bound(-np.inf, 0.0))
            else:
                bounds.append(Bound.free())
        if self.with_margin:
            bounds.append(Bound(-np.inf, MARGIN_CAP))
        return bounds

    def unpack(self, x: np.ndarray, margin: Optional[float]) -> MultiplierCertificate:
        lam = np.zeros(self.num_rows)
        lam[self.rows] = x[self.lam]
        cert = MultiplierCertificate(
            mu=np.maximum(x[self.mu], 0.0),
            lam=np.maximum(lam, 0.0),
            beta=x[self.beta].copy(),
            second_order_margin=margin,
            allowed_rows=list(self.rows),
        )
        scale = cert.normalization
        if scale <= 0:
            raise NumericalFailure("LP returned the zero multiplier")
        cert.mu /= scale
        cert.lam /= scale
        cert.beta /= scale
        if margin is not None:
            cert.second_order_margin = margin / scale
        return cert


def _stationarity_rows(problem: ProblemInstance, x: np.ndarray, layout: _Layout) -> list:
    JF = problem.jacobian_F(x)
    JH = problem.jacobian_H(x)
    rowsG = problem.qset.A[layout.rows] @ problem.jacobian_G(x) if layout.rows else np.zeros((0, problem.n))
    equalities = []
    for c in range(problem.n):
        coeffs = np.zeros(layout.size)
        coeffs[layout.mu] = JF[:, c]
        coeffs[layout.lam] = rowsG[:, c]
        coeffs[layout.beta] = JH[:, c]
        equalities.append((coeffs, 0.0))
    norm = np.zeros(layout.size)
    norm[layout.mu] = 1.0
    norm[layout.lam] = 1.0
    equalities.append((norm, 1.0))
    return equalities


def _require_feasible(problem: ProblemInstance, x: np.ndarray, cfg: CheckConfig) -> list[int]:
    report = problem.feasibility(x, cfg.tau_feas)
    if not report.feasible:
        raise InfeasiblePoint(f"{problem.name}: point {x.tolist()} is infeasible")
    return report.active_rows


def first_order_certificate(
    problem: ProblemInstance,
    base: Sequence[float],
    cfg: Optional[CheckConfig] = None,
) -> Optional[MultiplierCertificate]:
    """
    Multipliers satisfying complementarity and stationarity at base.

    When J_H(base) is rank deficient a beta-only certificate from the null
    space of J_H^T is returned.

    Raises:
        InfeasiblePoint: base is infeasible
    """
    cfg = cfg or CheckConfig()
    x = np.asarray(base, dtype=float).reshape(-1)
    active = _require_feasible(problem, x, cfg)
    num_rows = problem.qset.num_rows if problem.k else 0

    if problem.p:
        JH = problem.jacobian_H(x)
        if np.linalg.matrix_rank(JH) < problem.p:
            _, _, vt = np.linalg.svd(JH.T)
            beta = vt[-1]
            beta = beta / np.sum(np.abs(beta))
            log.info(f"{problem.name}: J_H is rank deficient, beta-only multiplier {beta.tolist()}")
            return MultiplierCertificate(np.zeros(problem.m), np.zeros(num_rows), beta)

    layout = _Layout(problem, active, with_margin=False)
    result = lp_feasible(
        _stationarity_rows(problem, x, layout), [], layout.bounds(), max_pivots=cfg.max_pivots
    )
    if result.x is None:
        log.info(f"{problem.name}: no first-order multiplier at {x.tolist()}")
        return None
    cert = layout.unpack(result.x, None)
    _checked(problem, x, cert, None, cfg)
    log.info(f"{problem.name}: first-order multiplier mu={np.round(cert.mu, 6).tolist()}")
    return cert


def _theorem_rows(
    layout: _Layout,
    problem: ProblemInstance,
    S: Sequence[Interval],
    K: ClusterSet,
    M: ClusterSet,
) -> list:
    """One row per (q, r) in K x M: sum mu s_hi + beta^T q + lambda^T (A r) >= t."""
    s_hi = np.array([s.hi for s in S])
    A_rows = problem.qset.A[layout.rows] if layout.rows else np.zeros((0, problem.k))
    rows = []
    for q in K.points:
        for r in M.points:
            coeffs = np.zeros(layout.size)
            coeffs[layout.mu] = -s_hi
            coeffs[layout.beta] = -np.asarray(q, dtype=float)
            coeffs[layout.lam] = -(A_rows @ np.asarray(r, dtype=float)) if layout.rows else 0.0
            coeffs[layout.t] = 1.0
            rows.append((coeffs, 0.0))
    return rows


def _corollary_row(
    layout: _Layout,
    problem: ProblemInstance,
    S: Sequence[Interval],
    H_intervals: Sequence[Interval],
    G_intervals: Sequence[Interval],
    beta_signs: Sequence[int],
) -> list:
    """sum mu s_hi + sum lambda E_r^hi + sum beta_l (t_l^hi or t_l^lo) >= t."""
    coeffs = np.zeros(layout.size)
    coeffs[layout.mu] = -np.array([s.hi for s in S])
    for pos, row in enumerate(layout.rows):
        combined = Interval.point(0.0)
        for i, a in enumerate(problem.qset.A[row]):
            combined = combined + G_intervals[i].scale(float(a))
        coeffs[layout.lam.start + pos] = -combined.hi
    for l, sign in enumerate(beta_signs):
        endpoint = H_intervals[l].hi if sign > 0 else H_intervals[l].lo
        coeffs[layout.beta.start + l] = -endpoint
    coeffs[layout.t] = 1.0
    return [(coeffs, 0.0)]


def _vacuous(problem: ProblemInstance) -> MultiplierCertificate:
    num_rows = problem.qset.num_rows if problem.k else 0
    return MultiplierCertificate(
        np.zeros(problem.m), np.zeros(num_rows), np.zeros(problem.p), None, vacuous=True
    )


def second_order_search(
    problem: ProblemInstance,
    base: Sequence[float],
    direction: CriticalDirection,
    S: Optional[Sequence[Interval]],
    K: ClusterSet,
    M: ClusterSet,
    mode: CertificateMode = CertificateMode.THEOREM,
    cfg: Optional[CheckConfig] = None,
    exact: bool = False,
    H_intervals: Optional[Sequence[Interval]] = None,
    G_intervals: Optional[Sequence[Interval]] = None,
) -> CertificateSearch:
    """
    Maximize the second-order margin over normalized multipliers.

    Raises:
        PreconditionFailed: S missing or of the wrong length
    """
    cfg = cfg or CheckConfig()
    if S is None or len(S) != problem.m:
        raise PreconditionFailed("second-order search needs one support interval per objective")
    eta = cfg.lp_slack(exact)
    if not direction.regular:
        cert = _vacuous(problem)
        return CertificateSearch(cert, cert, None, eta)

    x = np.asarray(base, dtype=float).reshape(-1)
    layout = _Layout(problem, direction.tight_rows if problem.k else [], with_margin=True)
    equalities = _stationarity_rows(problem, x, layout)
    objective = np.zeros(layout.size)
    objective[layout.t] = 1.0

    if mode is CertificateMode.THEOREM:
        patterns: list[Optional[tuple[int, ...]]] = [None]
    else:
        d = direction.d
        if H_intervals is None:
            H_intervals = [support_along(h, x, d, d, cfg).interval for h in problem.equalities]
        if G_intervals is None:
            G_intervals = [support_along(g, x, d, d, cfg).interval for g in problem.qmap]
        patterns = list(itertools.product((1, -1), repeat=problem.p))

    best_x, best_margin = None, -np.inf
    for signs in patterns:
        if signs is None:
            inequalities = _theorem_rows(layout, problem, S, K, M)
        else:
            inequalities = _corollary_row(layout, problem, S, H_intervals, G_intervals, signs)
        result = lp_solve(objective, equalities, inequalities, layout.bounds(signs), cfg.max_pivots)
        if result.status is LPStatus.OPTIMAL and result.objective > best_margin:
            best_x, best_margin = result.x, result.objective

    if best_x is None:
        log.debug(f"no multiplier satisfies stationarity along d={direction.d.tolist()}")
        return CertificateSearch(None, None, None, eta)

    best = layout.unpack(best_x, best_margin)
    margin = best.second_order_margin
    # re-verified whether or not it refutes
    _checked(problem, x, best, direction, cfg)
    if margin < -eta:
        log.info(
            f"{problem.name}: direction {np.round(direction.d, 6).tolist()} refuted "
            f"(margin {margin:.6g} < -{eta:g})"
        )
        return CertificateSearch(None, best, margin, eta)
    return CertificateSearch(best, best, margin, eta)


def second_order_certificate(
    problem: ProblemInstance,
    base: Sequence[float],
    direction: CriticalDirection,
    S: Optional[Sequence[Interval]],
    K: ClusterSet,
    M: ClusterSet,
    mode: CertificateMode = CertificateMode.THEOREM,
    cfg: Optional[CheckConfig] = None,
    exact: bool = False,
) -> Optional[MultiplierCertificate]:
    """Certificate for the second-order condition along direction, or None when refuted."""
    return second_order_search(problem, base, direction, S, K, M, mode, cfg, exact).certificate


def verify_certificate(
    problem: ProblemInstance,
    base: Sequence[float],
    cert: MultiplierCertificate,
    direction: Optional[CriticalDirection] = None,
    cfg: Optional[CheckConfig] = None,
) -> ValidationResult:
    """Re-check sign, complementarity, stationarity and normalization by direct arithmetic."""
    cfg = cfg or CheckConfig()
    tol = cfg.residual_tol
    result = ValidationResult()
    if cert.vacuous:
        result.add_info("vacuous certificate for a nonregular direction", code="VACUOUS")
        return result

    x = np.asarray(base, dtype=float).reshape(-1)
    if np.any(cert.mu < -tol):
        result.add_error("negative objective multiplier", location="mu", code="SIGN")
    if np.any(cert.lam < -tol):
        result.add_error("negative row multiplier", location="lambda", code="SIGN")

    active = set(problem.feasibility(x, cfg.tau_feas).active_rows)
    allowed = set(direction.tight_rows) if direction is not None else active
    for i, value in enumerate(cert.lam):
        if abs(value) > tol and i not in (active & allowed):
            result.add_error(
                f"lambda[{i}] = {value:.3g} on a row that must carry zero weight",
                location=f"lambda/{i}",
                code="COMPLEMENTARITY"
            )

    stationarity = problem.jacobian_F(x).T @ cert.mu
    if problem.p:
        stationarity = stationarity + problem.jacobian_H(x).T @ cert.beta
    if problem.k:
        stationarity = stationarity + problem.jacobian_G(x).T @ cert.zstar(problem)
    residual = float(np.linalg.norm(stationarity))
    scale = 1.0 + sum(
        float(np.linalg.norm(J))
        for J in (problem.jacobian_F(x), problem.jacobian_H(x), problem.jacobian_G(x))
    )
    if residual > tol * scale:
        result.add_error(f"stationarity residual {residual:.3g}", location="stationarity", code="STATIONARITY")

    if abs(cert.normalization - 1.0) > tol:
        result.add_error(
            f"normalization {cert.normalization:.12g} differs from 1",
            location="normalization",
            code="NORMALIZATION"
        )
    return result


def _checked(
    problem: ProblemInstance,
    x: np.ndarray,
    cert: MultiplierCertificate,
    direction: Optional[CriticalDirection],
    cfg: CheckConfig,
) -> None:
    validation = verify_certificate(problem, x, cert, direction, cfg)
    if not validation.is_valid:
        messages = "; ".join(i.message for i in validation.errors)
        raise NumericalFailure(f"certificate failed re-verification: {messages}")
