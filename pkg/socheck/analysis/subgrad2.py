"""
Second-order subdifferentials - Sampled and exact.

The second-order subdifferential of a C^{1,1} function f at x̂ along d is
the Clarke subdifferential at x̂ of x -> <f'(x), d>. In finite dimension it
is the convex hull of limits of f''(x_k) d over twice-differentiable points
x_k -> x̂, which is what estimate_subdiff2 samples. The result is an inner
approximation: support intervals computed from it can only be too narrow.

For separable functions sum_i phi_i(x_i) built from c*x|x|, powers, exp,
sin and cos, oracle_subdiff2_separable gives the exact set.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Sequence

import numpy as np

from ..core.funcdsl import (
    Abs,
    Constant,
    Expr,
    FunctionDef,
    IntPower,
    Negate,
    Product,
    SmoothUnary,
    Sum,
    UnaryKind,
    Variable,
    gradient_continuity_probe,
    hessian,
    hessian_vec,
    kink_distance,
)
from ..core.settings import CheckConfig, OracleChoice
from ..errors import AllSamplesDiscarded, EmptyEstimate, NotSeparable

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Interval:
    """Closed real interval [lo, hi]."""
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"Interval lower end {self.lo} exceeds upper end {self.hi}")

    @classmethod
    def point(cls, value: float) -> "Interval":
        return cls(value, value)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= value <= self.hi + tol

    def contains_interval(self, other: "Interval", tol: float = 0.0) -> bool:
        return self.lo - tol <= other.lo and other.hi <= self.hi + tol

    def scale(self, s: float) -> "Interval":
        a, b = s * self.lo, s * self.hi
        return Interval(min(a, b), max(a, b))

    def inflate(self, delta: float) -> "Interval":
        return Interval(self.lo - delta, self.hi + delta)

    def hausdorff(self, other: "Interval") -> float:
        return max(abs(self.lo - other.lo), abs(self.hi - other.hi))

    def __add__(self, other: "Interval") -> "Interval":
        return Interval(self.lo + other.lo, self.hi + other.hi)

    def to_list(self) -> list[float]:
        return [self.lo, self.hi]


@dataclass(eq=False)
class SubdiffEstimate:
    """
    Point cloud whose convex hull approximates the second-order subdifferential from inside.

    Attributes:
        base: Point x̂
        direction: Direction d
        points: K×n array of sampled elements f''(y) d
        radius_schedule: Sampling radii, largest first
        discarded: Number of samples rejected as too close to a kink
        lip_bound: Gradient Lipschitz estimate l near x̂ times ||d||; from the
            continuity probe for kinked f, from ||f''(x̂)|| for smooth f
        bound_violations: Points with ||v|| > lip_bound·(1 + tau_bound)
    """
    base: np.ndarray
    direction: np.ndarray
    points: np.ndarray
    radius_schedule: tuple[float, ...] = ()
    discarded: int = 0
    lip_bound: float = 0.0
    bound_violations: int = 0

    @property
    def diameter(self) -> float:
        if len(self.points) < 2:
            return 0.0
        diffs = self.points[:, None, :] - self.points[None, :, :]
        return float(np.max(np.linalg.norm(diffs, axis=-1)))

    def to_dict(self, h: Optional[Sequence[float]] = None) -> dict:
        data = {
            "base": self.base.tolist(),
            "direction": self.direction.tolist(),
            "points": self.points.tolist(),
            "radius_schedule": list(self.radius_schedule),
            "discarded": self.discarded,
            "lip_bound": self.lip_bound,
            "bound_violations": self.bound_violations,
        }
        if h is not None:
            interval = support_interval(self, h)
            data["support"] = {"h": list(map(float, h)), "lo": interval.lo, "hi": interval.hi}
        return data


def _ball_samples(base: np.ndarray, cfg: CheckConfig) -> Iterator[np.ndarray]:
    """Uniform samples in B(base, r) for every radius, deterministic under cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    n = base.shape[0]
    for radius in cfg.radii:
        directions = rng.normal(size=(cfg.samples, n))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radial = radius * rng.uniform(size=cfg.samples) ** (1.0 / n)
        yield from base + directions * radial[:, None]


def estimate_subdiff2(
    f: FunctionDef,
    base: Sequence[float],
    direction: Sequence[float],
    cfg: Optional[CheckConfig] = None,
) -> SubdiffEstimate:
    """
    Sample the second-order subdifferential of f at base along direction.

    Kink-free expressions are C² everywhere, so the set is the singleton
    {f''(base) d} and no sampling is done.

    Raises:
        AllSamplesDiscarded: every ball sample was within theta_kink of a tie set
    """
    cfg = cfg or CheckConfig()
    x = np.asarray(base, dtype=float).reshape(-1)
    d = np.asarray(direction, dtype=float).reshape(-1)
    d_norm = float(np.linalg.norm(d))

    if f.is_smooth:
        point = hessian_vec(f, x, d, cfg.theta_kink)
        lip = float(np.linalg.norm(hessian(f, x, cfg.theta_kink), 2)) * d_norm
        return SubdiffEstimate(x, d, point[None, :], (), 0, lip)

    points: list[np.ndarray] = []
    discarded = 0
    observed = 0.0
    for y in _ball_samples(x, cfg):
        if kink_distance(f, y) < cfg.theta_kink:
            discarded += 1
            continue
        full = hessian(f, y, cfg.theta_kink)
        points.append(full @ d)
        observed = max(observed, float(np.linalg.norm(full, 2)))

    if not points:
        raise AllSamplesDiscarded(
            f"{f.name}: all {discarded} samples around {x.tolist()} lie on kinks; "
            f"perturb the point or use the separable oracle"
        )
    if discarded:
        log.warning(f"{f.name}: discarded {discarded} near-kink samples around {x.tolist()}")

    lip = lipschitz_estimate(f, x, cfg)
    if lip is None:
        lip = observed
    lip_bound = lip * d_norm
    limit = lip_bound * (1.0 + cfg.tau_bound) + 1e-12
    violations = sum(1 for v in points if np.linalg.norm(v) > limit)
    if violations:
        log.warning(
            f"{f.name}: {violations} sampled element(s) exceed the Lipschitz bound "
            f"{lip_bound:.3g} (largest sampled ||f''|| {observed:.3g}) around {x.tolist()}"
        )
    log.debug(f"{f.name}: kept {len(points)} second-order samples, lip bound {lip_bound:.3g}")
    return SubdiffEstimate(
        x, d, np.vstack(points), tuple(cfg.radii), discarded, lip_bound, violations
    )


def lipschitz_estimate(f: FunctionDef, base: Sequence[float], cfg: CheckConfig) -> Optional[float]:
    """
    Gradient Lipschitz constant of f on the box x̂ ± max(radii), from the continuity probe.

    None when the probe is disabled (continuity_samples = 0).
    """
    if cfg.continuity_samples == 0:
        return None
    x = np.asarray(base, dtype=float).reshape(-1)
    radius = max(cfg.radii)
    report = gradient_continuity_probe(
        f, (x - radius, x + radius), samples=cfg.continuity_samples, step=radius, seed=cfg.seed
    )
    if not report.c11_consistent and f.declared_c11:
        log.warning(f"{f.name} is declared C^{{1,1}} but its gradient jumps near {x.tolist()}")
    return report.lipschitz_estimate


def estimate_hessian_set(
    f: FunctionDef,
    base: Sequence[float],
    cfg: Optional[CheckConfig] = None,
) -> list[np.ndarray]:
    """Sampled generalized Hessians at base; estimate_subdiff2 is their image under L -> L d."""
    cfg = cfg or CheckConfig()
    x = np.asarray(base, dtype=float).reshape(-1)
    if f.is_smooth:
        return [hessian(f, x, cfg.theta_kink)]
    matrices = [
        hessian(f, y, cfg.theta_kink)
        for y in _ball_samples(x, cfg)
        if kink_distance(f, y) >= cfg.theta_kink
    ]
    if not matrices:
        raise AllSamplesDiscarded(f"{f.name}: all samples around {x.tolist()} lie on kinks")
    return matrices


def support_interval(est: SubdiffEstimate, h: Sequence[float]) -> Interval:
    """[min, max] of <v, h> over the estimate's points."""
    if len(est.points) == 0:
        raise EmptyEstimate("support query on an empty estimate")
    values = est.points @ np.asarray(h, dtype=float).reshape(-1)
    return Interval(float(np.min(values)), float(np.max(values)))


# Exact oracle for separable functions

class PieceKind(Enum):
    SIGNED_SQUARE = "signed_square"  # c * x|x|
    POWER = "power"                  # c * x^k
    EXP = "exp"
    SIN = "sin"
    COS = "cos"


@dataclass(frozen=True)
class SeparablePiece:
    """One term coeff * phi(x_index)."""
    index: int
    kind: PieceKind
    coeff: float
    exponent: int = 1

    def second_derivative(self, t: float) -> Interval:
        """Clarke subdifferential of phi' at t."""
        c = self.coeff
        if self.kind is PieceKind.SIGNED_SQUARE:
            if t == 0.0:
                return Interval(-2.0 * abs(c), 2.0 * abs(c))
            return Interval.point(2.0 * c * math.copysign(1.0, t))
        if self.kind is PieceKind.POWER:
            k = self.exponent
            if k < 2:
                return Interval.point(0.0)
            return Interval.point(c * k * (k - 1) * t ** (k - 2))
        if self.kind is PieceKind.EXP:
            return Interval.point(c * math.exp(t))
        if self.kind is PieceKind.SIN:
            return Interval.point(-c * math.sin(t))
        return Interval.point(-c * math.cos(t))


@dataclass(eq=False)
class SeparableOracle:
    """
    Exact set {(c_1 d_1, ..., c_n d_n) : c_i in intervals[i]}.

    Attributes:
        base: Point x̂
        direction: Direction d
        intervals: Per-coordinate ranges [a_i, b_i] of the second derivative
    """
    base: np.ndarray
    direction: np.ndarray
    intervals: list[Interval] = field(default_factory=list)

    def support(self, h: Sequence[float]) -> Interval:
        """Exact support interval of the set along h."""
        h = np.asarray(h, dtype=float).reshape(-1)
        total = Interval.point(0.0)
        for interval, d_i, h_i in zip(self.intervals, self.direction, h):
            total = total + interval.scale(float(d_i * h_i))
        return total

    def to_dict(self) -> dict:
        return {
            "base": self.base.tolist(),
            "direction": self.direction.tolist(),
            "intervals": [i.to_list() for i in self.intervals],
        }


def oracle_subdiff2_separable(
    pieces: Sequence[SeparablePiece],
    base: Sequence[float],
    direction: Sequence[float],
) -> SeparableOracle:
    """Exact second-order subdifferential of sum(pieces) at base along direction."""
    x = np.asarray(base, dtype=float).reshape(-1)
    d = np.asarray(direction, dtype=float).reshape(-1)
    merged: dict[tuple[int, PieceKind, int], float] = {}
    for piece in pieces:
        if piece.index >= x.shape[0]:
            raise NotSeparable(f"piece uses x{piece.index} but the point has {x.shape[0]} entries")
        key = (piece.index, piece.kind, piece.exponent)
        merged[key] = merged.get(key, 0.0) + piece.coeff

    intervals = [Interval.point(0.0) for _ in range(x.shape[0])]
    for (index, kind, exponent), coeff in merged.items():
        piece = SeparablePiece(index, kind, coeff, exponent)
        intervals[index] = intervals[index] + piece.second_derivative(float(x[index]))
    return SeparableOracle(x, d, intervals)


def _flatten_sum(expr: Expr, sign: float, out: list[tuple[float, Expr]]) -> None:
    if isinstance(expr, Sum):
        for term in expr.terms:
            _flatten_sum(term, sign, out)
    elif isinstance(expr, Negate):
        _flatten_sum(expr.child, -sign, out)
    else:
        out.append((sign, expr))


def _flatten_product(expr: Expr, factors: list[Expr]) -> float:
    """Split a product into (constant coefficient, non-constant factors)."""
    if isinstance(expr, Product):
        return _flatten_product(expr.left, factors) * _flatten_product(expr.right, factors)
    if isinstance(expr, Negate):
        return -_flatten_product(expr.child, factors)
    if isinstance(expr, Constant):
        return expr.value_
    factors.append(expr)
    return 1.0


_UNARY_PIECES = {UnaryKind.EXP: PieceKind.EXP, UnaryKind.SIN: PieceKind.SIN, UnaryKind.COS: PieceKind.COS}


def _classify_factors(factors: list[Expr], coeff: float) -> Optional[SeparablePiece]:
    if not factors:
        return None
    if len(factors) == 1 and isinstance(factors[0], SmoothUnary):
        unary = factors[0]
        if isinstance(unary.child, Variable):
            return SeparablePiece(unary.child.index, _UNARY_PIECES[unary.kind], coeff)
        raise NotSeparable(f"{unary.kind.value} of a non-variable argument")

    abs_indices = [
        f.child.index for f in factors if isinstance(f, Abs) and isinstance(f.child, Variable)
    ]
    degree = 0
    indices = set(abs_indices)
    for factor in factors:
        if isinstance(factor, Variable):
            degree += 1
            indices.add(factor.index)
        elif isinstance(factor, IntPower) and isinstance(factor.child, Variable):
            degree += factor.exponent
            indices.add(factor.child.index)
        elif not (isinstance(factor, Abs) and isinstance(factor.child, Variable)):
            raise NotSeparable(f"unsupported factor {type(factor).__name__}")
    if len(indices) != 1:
        raise NotSeparable("term couples several variables")
    index = indices.pop()
    if abs_indices:
        if len(abs_indices) == 1 and degree == 1:
            return SeparablePiece(index, PieceKind.SIGNED_SQUARE, coeff)
        raise NotSeparable("only x|x| is supported among terms with abs")
    return SeparablePiece(index, PieceKind.POWER, coeff, degree)


def separable_pieces(f: FunctionDef) -> list[SeparablePiece]:
    """
    Recognize f as a sum of one-variable pieces.

    Raises:
        NotSeparable: some term falls outside the supported piece shapes
    """
    terms: list[tuple[float, Expr]] = []
    _flatten_sum(f.expr, 1.0, terms)
    pieces = []
    for sign, term in terms:
        factors: list[Expr] = []
        coeff = sign * _flatten_product(term, factors)
        piece = _classify_factors(factors, coeff)
        if piece is not None:
            pieces.append(piece)
    return pieces


@dataclass(frozen=True)
class SupportResult:
    """Support interval along h and whether it came from the exact oracle."""
    interval: Interval
    exact: bool


def support_along(
    f: FunctionDef,
    base: Sequence[float],
    direction: Sequence[float],
    h: Sequence[float],
    cfg: Optional[CheckConfig] = None,
    oracle: Optional[OracleChoice] = None,
) -> SupportResult:
    """Support interval of the second-order subdifferential along h, exact when possible."""
    cfg = cfg or CheckConfig()
    oracle = oracle or cfg.oracle
    if oracle is not OracleChoice.SAMPLING:
        try:
            pieces = separable_pieces(f)
            exact = oracle_subdiff2_separable(pieces, base, direction)
            return SupportResult(exact.support(h), True)
        except NotSeparable:
            if oracle is OracleChoice.SEPARABLE:
                raise
            log.debug(f"{f.name}: not separable, sampling instead")
    estimate = estimate_subdiff2(f, base, direction, cfg)
    return SupportResult(support_interval(estimate, h), False)
