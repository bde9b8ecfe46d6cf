"""
Ray calculus - Second-order behaviour of maps along rays and curves.

- weak_dir2: cluster values of 2[H(x̂+εd) - H(x̂) - ε H'(x̂)d] / ε² as ε -> 0+
- mean_value_check: second-order mean value inclusion on a segment
- descent / admissible / tangent variation probes along x̂ + εd + ε²w
- project_to_zero_set: damped Gauss-Newton projection onto {H = 0}

Probes are samples, never proofs: a True answer is strong evidence, a
False answer is inconclusive.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from ..core.funcdsl import FunctionDef, evaluate, gradient
from ..core.problem import ProblemInstance
from ..core.settings import CheckConfig
from ..errors import PreconditionFailed, RankDeficient
from .subgrad2 import Interval, support_along

log = logging.getLogger(__name__)

# Quotients at eps below this are dominated by rounding.
EPS_FLOOR = 1e-5
# Relative size of f(x̂) that a descent step must exceed to survive rounding.
ROUNDING_SCALE = 64 * float(np.finfo(float).eps)


class ClusterStatus(Enum):
    CONVERGED = "converged"
    CLUSTERED = "clustered"
    NOISE_DOMINATED = "noise_dominated"


@dataclass(eq=False)
class ClusterSet:
    """
    Finite approximation of the second-order weak directional derivative.

    Attributes:
        map_dim: Number of components p
        points: Detected cluster values (p-vectors); empty when noise dominated
        eps_sequence: The eps values actually used
        quotients: Quotient vector at each eps
        converged: The last two quotients agree within the cluster tolerance
        status: How the points were obtained
    """
    map_dim: int
    points: list[np.ndarray]
    eps_sequence: list[float] = field(default_factory=list)
    quotients: list[np.ndarray] = field(default_factory=list)
    converged: bool = False
    status: ClusterStatus = ClusterStatus.CONVERGED

    @property
    def is_empty(self) -> bool:
        return not self.points

    def component_interval(self, i: int) -> Interval:
        values = [float(q[i]) for q in self.points]
        return Interval(min(values), max(values))

    def to_dict(self) -> dict:
        return {
            "map_dim": self.map_dim,
            "points": [q.tolist() for q in self.points],
            "eps_sequence": list(self.eps_sequence),
            "quotients": [q.tolist() for q in self.quotients],
            "converged": self.converged,
            "status": self.status.value,
        }


def _values(funcs: Sequence[FunctionDef], x: np.ndarray) -> np.ndarray:
    return np.array([evaluate(f, x) for f in funcs])


def _jacobian(funcs: Sequence[FunctionDef], x: np.ndarray) -> np.ndarray:
    if not funcs:
        return np.zeros((0, x.shape[0]))
    return np.vstack([gradient(f, x) for f in funcs])


def weak_dir2(
    Hcomps: Sequence[FunctionDef],
    base: Sequence[float],
    direction: Sequence[float],
    eps_seq: Optional[Sequence[float]] = None,
    cfg: Optional[CheckConfig] = None,
) -> ClusterSet:
    """
    Cluster the second-order difference quotients of H along direction.

    Raises:
        PreconditionFailed: eps_seq not strictly decreasing or below the float floor
    """
    cfg = cfg or CheckConfig()
    x = np.asarray(base, dtype=float).reshape(-1)
    d = np.asarray(direction, dtype=float).reshape(-1)
    eps_values = [float(e) for e in (cfg.eps_sequence if eps_seq is None else eps_seq)]
    if any(a <= b for a, b in zip(eps_values, eps_values[1:])):
        raise PreconditionFailed("eps sequence must be strictly decreasing")
    if not eps_values or eps_values[-1] <= EPS_FLOOR:
        raise PreconditionFailed(f"eps values must stay above {EPS_FLOOR}")

    p = len(Hcomps)
    if p == 0:
        return ClusterSet(0, [np.zeros(0)], eps_values, [], True, ClusterStatus.CONVERGED)

    h0 = _values(Hcomps, x)
    jd = _jacobian(Hcomps, x) @ d
    noise_floor = 1e-8 * (1.0 + float(np.max(np.abs(h0))))

    used: list[float] = []
    quotients: list[np.ndarray] = []
    for eps in eps_values:
        if eps * eps < noise_floor:
            log.debug(f"stopping quotient refinement at eps={eps:.3g} (noise floor)")
            break
        q = 2.0 * (_values(Hcomps, x + eps * d) - h0 - eps * jd) / (eps * eps)
        used.append(eps)
        quotients.append(q)

    if not quotients:
        return ClusterSet(p, [], used, quotients, False, ClusterStatus.NOISE_DOMINATED)

    last = quotients[-1]
    if len(quotients) >= 2:
        if np.linalg.norm(last - quotients[-2]) <= cfg.cluster_tolerance(np.linalg.norm(last)):
            return ClusterSet(p, [last], used, quotients, True, ClusterStatus.CONVERGED)

    tail = quotients[len(quotients) // 2:]
    if np.linalg.norm(tail[-1]) > 4.0 * (1.0 + np.linalg.norm(tail[0])):
        log.warning(
            f"second-order quotients diverge along d={d.tolist()} "
            f"({np.linalg.norm(tail[0]):.3g} -> {np.linalg.norm(tail[-1]):.3g})"
        )
        return ClusterSet(p, [], used, quotients, False, ClusterStatus.NOISE_DOMINATED)

    representatives: list[np.ndarray] = []
    for q in tail:
        for i, rep in enumerate(representatives):
            if np.linalg.norm(q - rep) <= cfg.cluster_tolerance(np.linalg.norm(rep)):
                representatives[i] = q
                break
        else:
            representatives.append(q)
    log.debug(f"quotients along d={d.tolist()} form {len(representatives)} cluster(s)")
    return ClusterSet(p, representatives, used, quotients, False, ClusterStatus.CLUSTERED)


@dataclass
class MeanValueResult:
    residual: float
    bracket: Interval
    passed: bool
    exact: bool

    def to_dict(self) -> dict:
        return {
            "residual": self.residual,
            "bracket": self.bracket.to_list(),
            "pass": self.passed,
            "exact": self.exact,
        }


def mean_value_check(
    f: FunctionDef,
    a: Sequence[float],
    b: Sequence[float],
    segment_samples: int = 41,
    cfg: Optional[CheckConfig] = None,
    tol: float = 1e-3,
) -> MeanValueResult:
    """
    Check f(b) - f(a) - <f'(a), b-a> against ½<L(b-a), b-a> over the segment.

    The bracket is ½[min, max] of the support intervals along v = b - a at
    segment_samples points a + t v, t in [0, 1].
    """
    cfg = cfg or CheckConfig()
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    v = b - a
    if not np.any(v):
        raise PreconditionFailed("mean value check needs a != b")

    residual = evaluate(f, b) - evaluate(f, a) - float(gradient(f, a) @ v)
    lo, hi = np.inf, -np.inf
    exact = True
    for t in np.linspace(0.0, 1.0, max(segment_samples, 2)):
        result = support_along(f, a + t * v, v, v, cfg)
        lo = min(lo, result.interval.lo)
        hi = max(hi, result.interval.hi)
        exact = exact and result.exact
    bracket = Interval(0.5 * lo, 0.5 * hi)
    passed = bracket.contains(residual, tol)
    if not passed:
        log.warning(f"{f.name}: residual {residual:.6g} outside bracket {bracket.to_list()}")
    return MeanValueResult(residual, bracket, passed, exact)


@dataclass(frozen=True)
class ProbeGrid:
    """
    Sampling grid for variation probes.

    Attributes:
        eps_bars: Candidate neighborhood sizes, tried in order
        eps_count: eps values per candidate, geometric in (ε̄·1e-3, 0.99ε̄)
        perturbations: Random w with ||w|| < ε̄ per candidate (w = 0 is always added)
        seed: PRNG seed
        min_eps_bar: Smallest candidate the decade extension may add
    """
    eps_bars: tuple[float, ...] = (1e-1, 1e-2, 1e-3)
    eps_count: int = 8
    perturbations: int = 16
    seed: int = 0
    min_eps_bar: float = 1e-9

    def candidates(self, scale: Optional[float] = None) -> list[float]:
        """eps_bars, continued by decades down to 1e-2·scale when a scale is known."""
        bars = list(self.eps_bars)
        if scale is None or not 0.0 < scale < math.inf:
            return bars
        target = max(1e-2 * scale, self.min_eps_bar)
        while bars[-1] > target:
            bars.append(max(bars[-1] / 10.0, target))
        return bars

    def points(self, eps_bar: float, dim: int, eps_floor: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        """
        eps values and perturbations for one candidate.

        eps_floor raises the smallest eps (never above ε̄/2) where the change
        of f along the curve would fall below the rounding of f(x̂).
        """
        rng = np.random.default_rng(self.seed)
        eps_lo = max(1e-3 * eps_bar, min(eps_floor, 0.5 * eps_bar))
        eps = np.geomspace(0.99 * eps_bar, eps_lo, self.eps_count)
        directions = rng.normal(size=(self.perturbations, dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radial = 0.99 * eps_bar * rng.uniform(size=self.perturbations) ** (1.0 / dim)
        ws = np.vstack([np.zeros(dim), directions * radial[:, None]])
        return eps, ws


@dataclass
class ProbeResult:
    """
    Outcome of a variation probe.

    Attributes:
        holds: Some candidate ε̄ passed every probe
        eps_bar: The passing candidate, if any
        probes: Number of curve points evaluated
    """
    holds: bool
    eps_bar: Optional[float] = None
    probes: int = 0

    def __bool__(self) -> bool:
        return self.holds

    def to_dict(self) -> dict:
        return {"holds": self.holds, "eps_bar": self.eps_bar, "probes": self.probes}


def _curve_probe(
    predicate,
    base,
    d,
    w_bar,
    grid: ProbeGrid,
    eps_bars: Optional[Sequence[float]] = None,
    eps_floor: float = 0.0,
) -> ProbeResult:
    probes = 0
    for eps_bar in eps_bars or grid.eps_bars:
        eps_values, ws = grid.points(eps_bar, base.shape[0], eps_floor)
        ok = True
        for eps in eps_values:
            for w in ws:
                probes += 1
                if not predicate(base + eps * d + eps * eps * (w_bar + w)):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return ProbeResult(True, float(eps_bar), probes)
    return ProbeResult(False, None, probes)


def descent_variation_probe(
    f: FunctionDef,
    base: Sequence[float],
    direction: Sequence[float],
    w_bar: Sequence[float],
    grid: Optional[ProbeGrid] = None,
    s_hi: Optional[float] = None,
    cfg: Optional[CheckConfig] = None,
) -> ProbeResult:
    """
    Empirical second-order descent test: f(x̂ + εd + ε²(w̄ + w)) < f(x̂) on the grid.

    After the grid's own candidates, ε̄ shrinks by decades towards
    gap / (||f'(x̂)|| + 1) with gap = |<f'(x̂), w̄> + ½ s_hi|, the size below
    which perturbations can no longer flip the sign of the second-order
    term. s_hi defaults to the upper end of the support interval along d.
    """
    cfg = cfg or CheckConfig()
    grid = grid or ProbeGrid(seed=cfg.seed)
    x = np.asarray(base, dtype=float).reshape(-1)
    d = np.asarray(direction, dtype=float).reshape(-1)
    w = np.asarray(w_bar, dtype=float).reshape(-1)
    f0 = evaluate(f, x)
    grad = gradient(f, x)
    if s_hi is None:
        s_hi = support_along(f, x, d, d, cfg).interval.hi if np.any(d) else 0.0
    gap = abs(float(grad @ w) + 0.5 * s_hi)
    if not 0.0 < gap < math.inf:
        return _curve_probe(lambda y: evaluate(f, y) < f0, x, d, w, grid)
    scale = gap / (float(np.linalg.norm(grad)) + 1.0)
    eps_floor = math.sqrt(ROUNDING_SCALE * (1.0 + abs(f0)) / gap)
    return _curve_probe(
        lambda y: evaluate(f, y) < f0, x, d, w, grid, grid.candidates(scale), eps_floor
    )


def wf_membership(
    f: FunctionDef,
    base: Sequence[float],
    direction: Sequence[float],
    w: Sequence[float],
    s_hi: float,
) -> bool:
    """<f'(x̂), w> + ½ s_hi < 0."""
    slope = float(gradient(f, base) @ np.asarray(w, dtype=float).reshape(-1))
    return slope + 0.5 * s_hi < 0.0


def admissible_variation_probe(
    problem: ProblemInstance,
    base: Sequence[float],
    direction: Sequence[float],
    w_bar: Sequence[float],
    grid: Optional[ProbeGrid] = None,
) -> ProbeResult:
    """Empirical second-order admissible test for {x : G(x) in Q}."""
    x = np.asarray(base, dtype=float).reshape(-1)
    d = np.asarray(direction, dtype=float).reshape(-1)
    w = np.asarray(w_bar, dtype=float).reshape(-1)
    if problem.k == 0:
        return ProbeResult(True, (grid or ProbeGrid()).eps_bars[0], 0)
    return _curve_probe(
        lambda y: problem.qset.contains(problem.G(y), tol=0.0), x, d, w, grid or ProbeGrid()
    )


def project_to_zero_set(
    Hcomps: Sequence[FunctionDef],
    start: Sequence[float],
    max_iter: int = 50,
    tol: float = 1e-15,
) -> np.ndarray:
    """Damped Gauss-Newton with minimum-norm steps from start towards {H = 0}."""
    z = np.asarray(start, dtype=float).reshape(-1).copy()
    if not Hcomps:
        return z
    residual = _values(Hcomps, z)
    for _ in range(max_iter):
        norm = float(np.linalg.norm(residual))
        if norm <= tol * (1.0 + float(np.linalg.norm(z))):
            break
        step = np.linalg.pinv(_jacobian(Hcomps, z)) @ residual
        if not np.any(step):
            break
        t = 1.0
        for _ in range(30):
            trial = z - t * step
            trial_residual = _values(Hcomps, trial)
            if np.linalg.norm(trial_residual) < norm:
                z, residual = trial, trial_residual
                break
            t *= 0.5
        else:
            break
    return z


@dataclass
class TangentCheck:
    """
    Tangent variation verdicts for the curve x̂ + εd + ε²w̄ on {H = 0}.

    Attributes:
        lemma_verdict: J d = 0 and J w̄ + ½q = 0 for some cluster value q
        probe_verdict: Smallest tail distance quotient is below tau_probe
        jd_norm: ||J_H(x̂) d||
        lemma_residual: min over clusters of ||J w̄ + ½q|| (inf without clusters)
        distance_quotients: dist(curve(ε), {H=0}) / ε² per eps
    """
    lemma_verdict: bool
    probe_verdict: bool
    jd_norm: float
    lemma_residual: float
    distance_quotients: list[float] = field(default_factory=list)
    clusters: Optional[ClusterSet] = None

    def to_dict(self) -> dict:
        return {
            "lemma_verdict": self.lemma_verdict,
            "probe_verdict": self.probe_verdict,
            "jd_norm": self.jd_norm,
            "lemma_residual": self.lemma_residual,
            "distance_quotients": list(self.distance_quotients),
            "clusters": self.clusters.to_dict() if self.clusters else None,
        }


def tangent_variation_check(
    Hcomps: Sequence[FunctionDef],
    base: Sequence[float],
    direction: Sequence[float],
    w_bar: Sequence[float],
    cfg: Optional[CheckConfig] = None,
) -> TangentCheck:
    """
    Compare the first-order lemma test with a direct distance probe.

    Raises:
        RankDeficient: J_H(x̂) does not have full row rank
    """
    cfg = cfg or CheckConfig()
    x = np.asarray(base, dtype=float).reshape(-1)
    d = np.asarray(direction, dtype=float).reshape(-1)
    w = np.asarray(w_bar, dtype=float).reshape(-1)
    J = _jacobian(Hcomps, x)
    p = len(Hcomps)
    if p and np.linalg.matrix_rank(J) < p:
        raise RankDeficient(f"J_H has rank {np.linalg.matrix_rank(J)} < {p} at {x.tolist()}")

    clusters = weak_dir2(Hcomps, x, d, cfg.eps_sequence, cfg)
    jd_norm = float(np.linalg.norm(J @ d))
    residuals = [float(np.linalg.norm(J @ w + 0.5 * q)) for q in clusters.points]
    lemma_residual = min(residuals, default=np.inf)
    lemma = jd_norm <= cfg.tau_tangent and lemma_residual <= cfg.tau_tangent

    quotients = []
    for eps in clusters.eps_sequence or list(cfg.eps_sequence):
        y = x + eps * d + eps * eps * w
        z = project_to_zero_set(Hcomps, y)
        quotients.append(float(np.linalg.norm(z - y)) / (eps * eps))
    tail = quotients[len(quotients) // 2:]
    probe = bool(tail) and min(tail) <= cfg.tau_probe
    if lemma != probe:
        log.info(f"tangent lemma ({lemma}) and distance probe ({probe}) disagree at d={d.tolist()}")
    return TangentCheck(lemma, probe, jd_norm, lemma_residual, quotients, clusters)


@dataclass
class ContainmentResult:
    """Cluster vectors of H'' checked against the product of component support intervals."""
    holds: bool
    intervals: list[Interval]
    violations: list[tuple[int, int, float]] = field(default_factory=list)
    exact: bool = False


def product_containment_check(
    Hcomps: Sequence[FunctionDef],
    base: Sequence[float],
    direction: Sequence[float],
    cfg: Optional[CheckConfig] = None,
) -> ContainmentResult:
    """Every cluster vector q of H''(x̂; d) satisfies q_i in the support interval of h_i along d."""
    cfg = cfg or CheckConfig()
    clusters = weak_dir2(Hcomps, base, direction, cfg.eps_sequence, cfg)
    supports = [support_along(h, base, direction, direction, cfg) for h in Hcomps]
    intervals = [s.interval for s in supports]
    violations = []
    for c, q in enumerate(clusters.points):
        for i, interval in enumerate(intervals):
            value = float(q[i])
            if not interval.contains(value, cfg.cluster_tolerance(value)):
                violations.append((c, i, value))
    return ContainmentResult(
        holds=not violations,
        intervals=intervals,
        violations=violations,
        exact=all(s.exact for s in supports),
    )


@dataclass
class WitnessResult:
    """
    Empirical test that one w̄ lies in every variation set at once.

    A positive witness means the curve x̂ + εd + ε²w̄ stays feasible while
    strictly decreasing every objective.
    """
    descent: list[bool]
    admissible: bool
    tangent: Optional[bool]
    witness: bool

    def to_dict(self) -> dict:
        return {
            "descent": list(self.descent),
            "admissible": self.admissible,
            "tangent": self.tangent,
            "witness": self.witness,
        }


def intersection_witness(
    problem: ProblemInstance,
    base: Sequence[float],
    direction: Sequence[float],
    w_bar: Sequence[float],
    grid: Optional[ProbeGrid] = None,
    cfg: Optional[CheckConfig] = None,
) -> WitnessResult:
    """Probe whether w̄ is a common second-order descent, admissible and tangent variation."""
    cfg = cfg or CheckConfig()
    grid = grid or ProbeGrid(seed=cfg.seed)
    descent = [
        descent_variation_probe(f, base, direction, w_bar, grid, cfg=cfg).holds
        for f in problem.objectives
    ]
    admissible = admissible_variation_probe(problem, base, direction, w_bar, grid).holds
    tangent: Optional[bool] = True
    if problem.p:
        try:
            tangent = tangent_variation_check(problem.equalities, base, direction, w_bar, cfg).probe_verdict
        except RankDeficient:
            tangent = None
    witness = all(descent) and admissible and bool(tangent)
    if witness:
        log.info(f"{problem.name}: found a second-order descent curve along d={list(direction)}")
    return WitnessResult(descent, admissible, tangent, witness)
