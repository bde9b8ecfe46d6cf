"""
Function DSL - Expression trees for piecewise-C² functions on R^n.

Supported nodes:
- Constant, Variable, Sum, Product, Negate, IntPower
- Abs, Max, Min (the nonsmooth switches)
- SmoothUnary (exp, sin, cos)

Each node evaluates its value, a forward-mode "jet" (value, gradient, and the
second derivative of the active smooth branch applied to a direction d), and the
switching values of its nonsmooth descendants. Gradient selection at ties:
Abs'(0) := 0, Max/Min ties average the two branch derivatives.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, NamedTuple, Sequence, Union

import numpy as np

from ..errors import ArityMismatch, ExpressionError, OnKink

log = logging.getLogger(__name__)

# Relative tolerance below which a point counts as sitting on a kink.
THETA_KINK = 1e-8

Number = Union[int, float]


class UnaryKind(Enum):
    """Smooth unary functions available in the DSL."""
    EXP = "exp"
    SIN = "sin"
    COS = "cos"


class _Jet(NamedTuple):
    value: float
    grad: np.ndarray
    hvp: np.ndarray


class Expr:
    """Base class of all expression nodes. Supports arithmetic operators."""

    def value(self, x: np.ndarray):
        raise NotImplementedError

    def jet(self, x: np.ndarray, d: np.ndarray) -> _Jet:
        raise NotImplementedError

    def children(self) -> tuple["Expr", ...]:
        return ()

    def switches(self, x: np.ndarray) -> Iterator[float]:
        """Switching values of every Abs/Max/Min node, in traversal order."""
        for child in self.children():
            yield from child.switches(x)

    def max_index(self) -> int:
        return max((c.max_index() for c in self.children()), default=-1)

    def is_smooth(self) -> bool:
        return all(c.is_smooth() for c in self.children())

    # Operator overloading for programmatic construction

    def __add__(self, other):
        return Sum((self, _wrap(other)))

    def __radd__(self, other):
        return Sum((_wrap(other), self))

    def __sub__(self, other):
        return Sum((self, Negate(_wrap(other))))

    def __rsub__(self, other):
        return Sum((_wrap(other), Negate(self)))

    def __mul__(self, other):
        return Product(self, _wrap(other))

    def __rmul__(self, other):
        return Product(_wrap(other), self)

    def __neg__(self):
        return Negate(self)

    def __pow__(self, exponent: int):
        return IntPower(self, exponent)


def _wrap(obj) -> Expr:
    if isinstance(obj, Expr):
        return obj
    if isinstance(obj, (int, float, np.floating, np.integer)):
        return Constant(float(obj))
    raise ExpressionError(f"Cannot use {type(obj).__name__} in an expression")


def _zeros_like(x: np.ndarray) -> np.ndarray:
    return np.zeros(x.shape[0])


@dataclass(frozen=True)
class Constant(Expr):
    value_: float

    def value(self, x):
        return self.value_

    def jet(self, x, d):
        z = _zeros_like(x)
        return _Jet(self.value_, z, z.copy())


@dataclass(frozen=True)
class Variable(Expr):
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ExpressionError(f"Variable index must be >= 0, got {self.index}")

    def value(self, x):
        return x[self.index]

    def jet(self, x, d):
        g = _zeros_like(x)
        g[self.index] = 1.0
        return _Jet(float(x[self.index]), g, _zeros_like(x))

    def max_index(self) -> int:
        return self.index


@dataclass(frozen=True)
class Sum(Expr):
    terms: tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ExpressionError("Sum needs at least one term")

    def children(self):
        return self.terms

    def value(self, x):
        total = self.terms[0].value(x)
        for term in self.terms[1:]:
            total = total + term.value(x)
        return total

    def jet(self, x, d):
        jets = [t.jet(x, d) for t in self.terms]
        return _Jet(
            sum(j.value for j in jets),
            np.sum([j.grad for j in jets], axis=0),
            np.sum([j.hvp for j in jets], axis=0),
        )


@dataclass(frozen=True)
class Product(Expr):
    left: Expr
    right: Expr

    def children(self):
        return (self.left, self.right)

    def value(self, x):
        return self.left.value(x) * self.right.value(x)

    def jet(self, x, d):
        a = self.left.jet(x, d)
        b = self.right.jet(x, d)
        grad = a.value * b.grad + b.value * a.grad
        hvp = (
            a.value * b.hvp + b.value * a.hvp
            + a.grad * float(b.grad @ d) + b.grad * float(a.grad @ d)
        )
        return _Jet(a.value * b.value, grad, hvp)


@dataclass(frozen=True)
class Negate(Expr):
    child: Expr

    def children(self):
        return (self.child,)

    def value(self, x):
        return -self.child.value(x)

    def jet(self, x, d):
        j = self.child.jet(x, d)
        return _Jet(-j.value, -j.grad, -j.hvp)


@dataclass(frozen=True)
class IntPower(Expr):
    child: Expr
    exponent: int

    def __post_init__(self):
        if isinstance(self.exponent, bool) or not isinstance(self.exponent, (int, np.integer)):
            raise ExpressionError(f"IntPower exponent must be an integer, got {self.exponent!r}")
        if self.exponent < 1:
            raise ExpressionError(f"IntPower exponent must be >= 1, got {self.exponent}")
        object.__setattr__(self, "exponent", int(self.exponent))

    def children(self):
        return (self.child,)

    def value(self, x):
        return self.child.value(x) ** self.exponent

    def jet(self, x, d):
        u = self.child.jet(x, d)
        k = self.exponent
        if k == 1:
            return u
        first = k * u.value ** (k - 1)
        second = k * (k - 1) * u.value ** (k - 2)
        grad = first * u.grad
        hvp = first * u.hvp + second * float(u.grad @ d) * u.grad
        return _Jet(u.value ** k, grad, hvp)


@dataclass(frozen=True)
class Abs(Expr):
    child: Expr

    def children(self):
        return (self.child,)

    def value(self, x):
        return np.abs(self.child.value(x))

    def jet(self, x, d):
        u = self.child.jet(x, d)
        s = float(np.sign(u.value))
        return _Jet(abs(u.value), s * u.grad, s * u.hvp)

    def switches(self, x):
        yield float(self.child.value(x))
        yield from self.child.switches(x)

    def is_smooth(self) -> bool:
        return False


@dataclass(frozen=True)
class Max(Expr):
    left: Expr
    right: Expr

    def children(self):
        return (self.left, self.right)

    def value(self, x):
        return np.maximum(self.left.value(x), self.right.value(x))

    def jet(self, x, d):
        return _select(self.left.jet(x, d), self.right.jet(x, d), pick_larger=True)

    def switches(self, x):
        yield float(self.left.value(x) - self.right.value(x))
        yield from self.left.switches(x)
        yield from self.right.switches(x)

    def is_smooth(self) -> bool:
        return False


@dataclass(frozen=True)
class Min(Expr):
    left: Expr
    right: Expr

    def children(self):
        return (self.left, self.right)

    def value(self, x):
        return np.minimum(self.left.value(x), self.right.value(x))

    def jet(self, x, d):
        return _select(self.left.jet(x, d), self.right.jet(x, d), pick_larger=False)

    def switches(self, x):
        yield float(self.left.value(x) - self.right.value(x))
        yield from self.left.switches(x)
        yield from self.right.switches(x)

    def is_smooth(self) -> bool:
        return False


def _select(a: _Jet, b: _Jet, pick_larger: bool) -> _Jet:
    if a.value == b.value:
        # tie: average the branch derivatives
        return _Jet(a.value, 0.5 * (a.grad + b.grad), 0.5 * (a.hvp + b.hvp))
    if (a.value > b.value) == pick_larger:
        return a
    return b


_UNARY_NUMPY = {
    UnaryKind.EXP: np.exp,
    UnaryKind.SIN: np.sin,
    UnaryKind.COS: np.cos,
}


@dataclass(frozen=True)
class SmoothUnary(Expr):
    kind: UnaryKind
    child: Expr

    def __post_init__(self):
        if not isinstance(self.kind, UnaryKind):
            try:
                object.__setattr__(self, "kind", UnaryKind(self.kind))
            except ValueError:
                raise ExpressionError(f"Unknown smooth unary function: {self.kind!r}") from None

    def children(self):
        return (self.child,)

    def value(self, x):
        return _UNARY_NUMPY[self.kind](self.child.value(x))

    def jet(self, x, d):
        u = self.child.jet(x, d)
        slope = float(u.grad @ d)
        if self.kind is UnaryKind.EXP:
            v = math.exp(u.value)
            f1, f2 = v, v
        elif self.kind is UnaryKind.SIN:
            v = math.sin(u.value)
            f1, f2 = math.cos(u.value), -v
        else:
            v = math.cos(u.value)
            f1, f2 = -math.sin(u.value), -v
        return _Jet(v, f1 * u.grad, f1 * u.hvp + f2 * slope * u.grad)


# Builders

def var(index: int) -> Variable:
    return Variable(index)


def const(value: Number) -> Constant:
    return Constant(float(value))


def abs_(e) -> Abs:
    return Abs(_wrap(e))


def max_(a, b) -> Max:
    return Max(_wrap(a), _wrap(b))


def min_(a, b) -> Min:
    return Min(_wrap(a), _wrap(b))


def pow_(e, exponent: int) -> IntPower:
    return IntPower(_wrap(e), exponent)


def exp_(e) -> SmoothUnary:
    return SmoothUnary(UnaryKind.EXP, _wrap(e))


def sin_(e) -> SmoothUnary:
    return SmoothUnary(UnaryKind.SIN, _wrap(e))


def cos_(e) -> SmoothUnary:
    return SmoothUnary(UnaryKind.COS, _wrap(e))


@dataclass(frozen=True)
class FunctionDef:
    """
    A named real function on R^n.

    Attributes:
        name: Human-readable name (used in reports)
        arity: Number of variables n
        expr: Expression tree
        declared_c11: User assertion that the gradient is locally Lipschitz
    """
    name: str
    arity: int
    expr: Expr
    declared_c11: bool = True

    def __post_init__(self):
        if self.arity < 1:
            raise ArityMismatch(f"{self.name}: arity must be >= 1, got {self.arity}")
        top = self.expr.max_index()
        if top >= self.arity:
            raise ArityMismatch(
                f"{self.name}: variable v{top} used but arity is {self.arity}"
            )

    @property
    def is_smooth(self) -> bool:
        """True when the tree has no Abs/Max/Min nodes."""
        return self.expr.is_smooth()


def _as_point(f: FunctionDef, x: Sequence[float]) -> np.ndarray:
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.shape != (f.arity,):
        raise ArityMismatch(f"{f.name}: expected a {f.arity}-vector, got shape {arr.shape}")
    return arr


def evaluate(f: FunctionDef, x: Sequence[float]) -> float:
    """Exact recursive evaluation of f at x."""
    return float(f.expr.value(_as_point(f, x)))


def evaluate_batch(f: FunctionDef, points: np.ndarray) -> np.ndarray:
    """Evaluate f at every row of an N×n array."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != f.arity:
        raise ArityMismatch(f"{f.name}: expected an N×{f.arity} array, got shape {pts.shape}")
    values = f.expr.value(pts.T)
    return np.broadcast_to(np.asarray(values, dtype=float), (pts.shape[0],)).copy()


def gradient(f: FunctionDef, x: Sequence[float]) -> np.ndarray:
    """Chain-rule gradient with the tie selections described in the module docstring."""
    point = _as_point(f, x)
    return f.expr.jet(point, np.zeros_like(point)).grad


def kink_distance(f: FunctionDef, x: Sequence[float]) -> float:
    """
    Distance-like measure to the nearest tie set.

    Returns min |switching value| over all Abs/Max/Min nodes, scaled by
    1/(1+||x||), or +inf when the tree has no nonsmooth nodes.
    """
    point = _as_point(f, x)
    values = [abs(v) for v in f.expr.switches(point)]
    if not values:
        return math.inf
    return min(values) / (1.0 + float(np.linalg.norm(point)))


def switch_signs(f: FunctionDef, x: Sequence[float]) -> tuple[int, ...]:
    """Sign pattern of all switching values; changes exactly when a kink is crossed."""
    point = _as_point(f, x)
    return tuple(int(np.sign(v)) for v in f.expr.switches(point))


def hessian_vec(
    f: FunctionDef,
    x: Sequence[float],
    d: Sequence[float],
    theta_kink: float = THETA_KINK,
) -> np.ndarray:
    """
    Second derivative of the active smooth branch of f at x, applied to d.

    Raises:
        OnKink: if kink_distance(f, x) < theta_kink
    """
    point = _as_point(f, x)
    direction = _as_point(f, d)
    dist = kink_distance(f, point)
    if dist < theta_kink:
        raise OnKink(f"{f.name}: point {point.tolist()} lies on a kink (distance {dist:.3g})")
    return f.expr.jet(point, direction).hvp


def hessian(f: FunctionDef, x: Sequence[float], theta_kink: float = THETA_KINK) -> np.ndarray:
    """Full Hessian of the active branch; column i is hessian_vec(f, x, e_i)."""
    point = _as_point(f, x)
    dist = kink_distance(f, point)
    if dist < theta_kink:
        raise OnKink(f"{f.name}: point {point.tolist()} lies on a kink (distance {dist:.3g})")
    eye = np.eye(f.arity)
    return np.column_stack([f.expr.jet(point, eye[i]).hvp for i in range(f.arity)])


@dataclass
class ContinuityReport:
    """
    Result of gradient_continuity_probe.

    Attributes:
        lipschitz_estimate: Largest observed gradient difference quotient
        c11_consistent: False when quotients blow up as the step shrinks
        ratios: Largest quotient observed at each step size
        pairs_checked: Number of difference quotients evaluated
        straddling_pairs: Samples whose pair crossed a kink surface
    """
    lipschitz_estimate: float
    c11_consistent: bool
    ratios: dict[float, float] = field(default_factory=dict)
    pairs_checked: int = 0
    straddling_pairs: int = 0

    def to_dict(self) -> dict:
        return {
            "lipschitz_estimate": self.lipschitz_estimate,
            "c11_consistent": self.c11_consistent,
            "ratios": {repr(k): v for k, v in self.ratios.items()},
            "pairs_checked": self.pairs_checked,
            "straddling_pairs": self.straddling_pairs,
        }


def _locate_crossing(
    f: FunctionDef, u: np.ndarray, w: np.ndarray, tol: float
) -> np.ndarray | None:
    """Bisect the segment [u, w] down to a point where the switch sign pattern changes."""
    start = switch_signs(f, u)
    if start == switch_signs(f, w):
        return None
    length = float(np.linalg.norm(w - u))
    lo, hi = 0.0, 1.0
    while (hi - lo) * length > tol:
        mid = 0.5 * (lo + hi)
        if switch_signs(f, u + mid * (w - u)) == start:
            lo = mid
        else:
            hi = mid
    return u + 0.5 * (lo + hi) * (w - u)


def gradient_continuity_probe(
    f: FunctionDef,
    region: tuple[Sequence[float], Sequence[float]],
    samples: int,
    step: float,
    seed: int = 0,
    refinements: int = 2,
    blowup_factor: float = 4.0,
) -> ContinuityReport:
    """
    Empirical falsification of the declared C^{1,1} property.

    Draws random pairs and kink-straddling pairs inside the box, and measures
    ||grad f(u) - grad f(v)|| / ||u - v|| at the step sizes step, step/10, ...
    Quotients that grow as the step shrinks flag a gradient jump.

    Args:
        f: Function to probe
        region: (lower corner, upper corner) of the box
        samples: Number of base samples (>= 1)
        step: Largest pair distance
        seed: RNG seed
        refinements: How many times the step is divided by 10
        blowup_factor: Allowed growth of the largest quotient across scales
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    lo = _as_point(f, region[0])
    hi = _as_point(f, region[1])
    rng = np.random.default_rng(seed)
    steps = [step / 10 ** k for k in range(refinements + 1)]
    ratios = {h: 0.0 for h in steps}
    pairs = 0
    straddling = 0

    def quotient(a: np.ndarray, b: np.ndarray) -> float:
        return float(np.linalg.norm(gradient(f, a) - gradient(f, b)) / np.linalg.norm(a - b))

    for _ in range(samples):
        u = rng.uniform(lo, hi)
        e = rng.normal(size=f.arity)
        e /= np.linalg.norm(e)
        for h in steps:
            ratios[h] = max(ratios[h], quotient(u, u + h * e))
            pairs += 1

        w = rng.uniform(lo, hi)
        if np.allclose(u, w):
            continue
        crossing = _locate_crossing(f, u, w, tol=steps[-1] * 1e-2)
        if crossing is None:
            continue
        straddling += 1
        along = (w - u) / np.linalg.norm(w - u)
        for h in steps:
            ratios[h] = max(ratios[h], quotient(crossing - 0.5 * h * along, crossing + 0.5 * h * along))
            pairs += 1

    coarse, fine = ratios[steps[0]], ratios[steps[-1]]
    consistent = fine <= blowup_factor * coarse + 1e-12
    estimate = max(ratios.values())
    if not consistent:
        log.warning(
            f"{f.name}: gradient difference quotients grow from {coarse:.3g} to {fine:.3g} "
            f"as the step shrinks; not C^{{1,1}}"
        )
    elif not f.declared_c11:
        log.info(f"{f.name}: not declared C^{{1,1}} but the probe found no gradient jump")
    return ContinuityReport(
        lipschitz_estimate=estimate,
        c11_consistent=consistent,
        ratios=ratios,
        pairs_checked=pairs,
        straddling_pairs=straddling,
    )
