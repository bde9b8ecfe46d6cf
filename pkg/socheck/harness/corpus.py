"""
Corpus - Ground-truth problems with known verdicts.

Each entry pairs a problem and candidate point with the weak Pareto truth (as
found by the grid oracle) and the verdict the verifier is expected to give.
Second-order conditions are necessary only, so a CONSISTENT verdict at a
point that is not weakly Pareto is allowed; a REJECTED verdict at a weakly
Pareto point never is.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..certify.verdict import Overall, VerificationReport, verdict
from ..core.funcdsl import FunctionDef, abs_, var
from ..core.problem import PolyhedronSpec, ProblemInstance
from ..core.settings import CheckConfig
from ..errors import SocheckError
from .oracle import OracleResult, Truth, grid_pareto_oracle

log = logging.getLogger(__name__)


@dataclass(eq=False)
class CorpusEntry:
    """
    A corpus problem with its ground truth.

    Attributes:
        name: Short identifier (P1..P6)
        problem: The problem instance
        point: Candidate point
        truth: Weak Pareto status of point
        expected_overall: Verdict the verifier must give
        notes: What the entry exercises
        refuting: Expected refuting directions (REJECTED entries)
    """
    name: str
    problem: ProblemInstance
    point: np.ndarray
    truth: Truth
    expected_overall: Overall
    notes: str = ""
    refuting: list[np.ndarray] = field(default_factory=list)


@dataclass
class CorpusOutcome:
    entry: CorpusEntry
    report: Optional[VerificationReport]
    oracle: Optional[OracleResult]
    passed: bool
    messages: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.entry.name,
            "expected": self.entry.expected_overall.value,
            "overall": self.report.overall.value if self.report is not None else None,
            "truth": self.entry.truth.value,
            "oracle": self.oracle.truth.value if self.oracle is not None else None,
            "passed": self.passed,
            "messages": list(self.messages),
        }


def _fn(name: str, n: int, expr) -> FunctionDef:
    return FunctionDef(name, n, expr)


def p1_signed_square() -> CorpusEntry:
    x, y = var(0), var(1)
    problem = ProblemInstance(
        n=2,
        objectives=[_fn("f0", 2, 0.5 * x * abs_(x) + y ** 2)],
        name="P1",
        point=[0.0, 0.0],
    )
    return CorpusEntry(
        "P1", problem, np.zeros(2), Truth.NOT_WEAK_PARETO, Overall.CONSISTENT,
        notes="second-order subdifferential [-1, 1] x {2}; conditions hold although x<0 descends",
    )


def p2_quadratic_pair() -> CorpusEntry:
    x = var(0)
    problem = ProblemInstance(
        n=1,
        objectives=[_fn("f0", 1, -(x ** 2)), _fn("f1", 1, x)],
        name="P2",
        point=[0.0],
        directions=[[-1.0], [1.0]],
    )
    return CorpusEntry(
        "P2", problem, np.zeros(1), Truth.NOT_WEAK_PARETO, Overall.REJECTED,
        notes="x=-1 dominates; second-order row -2 along d=-1, d=+1 not critical",
        refuting=[np.array([-1.0])],
    )


def p3_bi_quadratic() -> CorpusEntry:
    x, y = var(0), var(1)
    problem = ProblemInstance(
        n=2,
        objectives=[_fn("f0", 2, x ** 2 + y ** 2), _fn("f1", 2, (x - 1) ** 2 + y ** 2)],
        name="P3",
        point=[0.5, 0.0],
    )
    return CorpusEntry(
        "P3", problem, np.array([0.5, 0.0]), Truth.WEAK_PARETO, Overall.CONSISTENT,
        notes="objectives trade off on the segment [0, 1] x {0}; mu = (1/2, 1/2)",
    )


def p4_constrained_signed_square() -> CorpusEntry:
    x, y = var(0), var(1)
    problem = ProblemInstance(
        n=2,
        objectives=[_fn("f0", 2, x * abs_(x) + y ** 2)],
        qmap=[_fn("g0", 2, -x)],
        qset=PolyhedronSpec.orthant(1),
        name="P4",
        point=[0.0, 0.0],
    )
    return CorpusEntry(
        "P4", problem, np.zeros(2), Truth.WEAK_PARETO, Overall.CONSISTENT,
        notes="0 minimizes f on x1 >= 0; certificate mu = 1, lambda = 0 along (1, 0)",
    )


def p5_signed_square_equality() -> CorpusEntry:
    x, y = var(0), var(1)
    problem = ProblemInstance(
        n=2,
        objectives=[_fn("f0", 2, y)],
        equalities=[_fn("h0", 2, y - x * abs_(x))],
        name="P5",
        point=[0.0, 0.0],
        directions=[[-1.0, 0.0]],
    )
    return CorpusEntry(
        "P5", problem, np.zeros(2), Truth.NOT_WEAK_PARETO, Overall.REJECTED,
        notes="x2 = x1|x1| < 0 for x1 < 0; rejected along (-1, 0) through the cluster value of H",
        refuting=[np.array([-1.0, 0.0])],
    )


def p6_rank_deficient() -> CorpusEntry:
    x = var(0)
    problem = ProblemInstance(
        n=1,
        objectives=[_fn("f0", 1, x)],
        equalities=[_fn("h0", 1, x ** 2)],
        name="P6",
        point=[0.0],
    )
    return CorpusEntry(
        "P6", problem, np.zeros(1), Truth.WEAK_PARETO, Overall.DEGENERATE,
        notes="feasible set is {0}; J_H(0) = 0 so multipliers exist trivially",
    )


CORPUS_BUILDERS: dict[str, Callable[[], CorpusEntry]] = {
    "P1": p1_signed_square,
    "P2": p2_quadratic_pair,
    "P3": p3_bi_quadratic,
    "P4": p4_constrained_signed_square,
    "P5": p5_signed_square_equality,
    "P6": p6_rank_deficient,
}


def default_corpus(names: Optional[Sequence[str]] = None) -> list[CorpusEntry]:
    """Build the named entries (all of them by default)."""
    selected = list(names) if names else list(CORPUS_BUILDERS)
    unknown = [n for n in selected if n.upper() not in CORPUS_BUILDERS]
    if unknown:
        raise KeyError(f"Unknown corpus entries: {', '.join(unknown)}")
    return [CORPUS_BUILDERS[n.upper()]() for n in selected]


def check_entry(entry: CorpusEntry, cfg: CheckConfig, with_oracle: bool = True) -> CorpusOutcome:
    """Run the verifier (and optionally the grid oracle) on one entry."""
    messages: list[str] = []
    try:
        report = verdict(entry.problem, entry.point, cfg)
    except SocheckError as e:
        log.error(f"{entry.name}: {e}")
        return CorpusOutcome(entry, None, None, False, [f"verifier failed: {e}"])

    if report.overall is not entry.expected_overall:
        messages.append(f"expected {entry.expected_overall.value}, got {report.overall.value}")
    for d in entry.refuting:
        hits = [v for v in report.refuting if np.allclose(v.d, d / np.linalg.norm(d), atol=1e-6)]
        if not hits:
            messages.append(f"direction {d.tolist()} was not refuted")

    oracle = None
    if with_oracle:
        oracle = grid_pareto_oracle(entry.problem, entry.point, tau_feas=cfg.tau_feas)
        if oracle.truth is not entry.truth:
            messages.append(f"oracle says {oracle.truth.value}, entry says {entry.truth.value}")
        if report.overall is Overall.REJECTED and oracle.truth is Truth.WEAK_PARETO:
            messages.append("REJECTED a point the oracle finds weakly Pareto")

    passed = not messages
    log.info(f"{entry.name}: {report.overall.value} ({'ok' if passed else 'MISMATCH'})")
    return CorpusOutcome(entry, report, oracle, passed, messages)


def run_corpus(
    entries: Optional[Sequence[CorpusEntry]] = None,
    cfg: Optional[CheckConfig] = None,
    with_oracle: bool = True,
) -> list[CorpusOutcome]:
    """Check every entry independently."""
    cfg = cfg or CheckConfig()
    entries = list(entries) if entries is not None else default_corpus()
    return [check_entry(entry, cfg, with_oracle) for entry in entries]
