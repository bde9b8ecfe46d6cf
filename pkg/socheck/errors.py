"""
Exception hierarchy for socheck.

Every error raised on purpose by the package derives from SocheckError so the
CLI can map it to exit code 1 with a readable message.
"""

from typing import Any, Optional


class SocheckError(Exception):
    """Base class for all socheck errors."""


class ExpressionError(SocheckError):
    """Malformed expression tree (bad exponent, unknown unary kind, ...)."""


class ArityMismatch(SocheckError):
    """A point or Variable index does not match the declared arity."""


class SexprError(SocheckError):
    """Prefix s-expression could not be parsed."""

    def __init__(self, message: str, position: Optional[int] = None):
        self.position = position
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)


class OnKink(SocheckError):
    """Second derivatives requested at a point where some Abs/Max/Min node is tied."""


class AllSamplesDiscarded(SocheckError):
    """Every sample of the second-order subdifferential estimator sat on a kink."""


class EmptyEstimate(SocheckError):
    """Support query on an estimate that holds no points."""


class NotSeparable(SocheckError):
    """The exact oracle only handles sums of one-variable pieces."""


class RankDeficient(SocheckError):
    """The equality Jacobian is not surjective at the point."""


class NotInQ(SocheckError):
    """The point does not belong to the polyhedral set Q."""


class PreconditionFailed(SocheckError):
    """An operation was called outside its documented precondition."""


class InfeasiblePoint(SocheckError):
    """The candidate point violates the equality map or the Q constraint."""


class NumericalFailure(SocheckError):
    """The LP solver hit its pivot cap or a certificate failed re-verification."""


class ProblemSchemaError(SocheckError):
    """Problem JSON failed validation; carries the issue list."""

    def __init__(self, issues: list[Any]):
        self.issues = issues
        lines = [str(i) for i in issues]
        super().__init__("Invalid problem file:\n  " + "\n  ".join(lines))
