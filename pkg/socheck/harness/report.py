"""
Problem and report files.

Stored as:
- problem files: {"n", "objectives", "equalities", "qmap", "qset", "point", "directions", "c11_declared"}
- reports: {"problem", "point", "feasible", "feasibility", "rank_H", "first_order",
  "directions", "overall", "mode", "continuity"}

Reports carry no timestamps and are written with a fixed key order so that
identical inputs and seed give byte-identical files.
"""

import json
import logging
import math
import os
import shutil
import tempfile
from pathlib import Path
from typing import Any, Optional

from ..certify.verdict import DirectionVerdict, VerificationReport
from ..core.funcdsl import FunctionDef
from ..core.problem import PolyhedronSpec, ProblemInstance
from ..core.sexpr import format_sexpr, parse_sexpr
from ..core.validators import ProblemValidator, ValidationSeverity
from ..errors import ProblemSchemaError

log = logging.getLogger(__name__)


def atomic_write(file_path: Path, content: str) -> None:
    """Write content to file atomically (write temp, then rename)."""
    file_path.parent.mkdir(parents=True, exist_ok=True)
    temp_fd, temp_path = tempfile.mkstemp(
        dir=file_path.parent,
        prefix=f".{file_path.name}.",
        suffix=".tmp"
    )
    os.close(temp_fd)
    temp_path = Path(temp_path)
    try:
        temp_path.write_text(content, encoding="utf-8")
        shutil.move(str(temp_path), str(file_path))
    except Exception:
        if temp_path.exists():
            temp_path.unlink()
        raise


def _functions(texts: list[str], prefix: str, n: int, c11: bool) -> list[FunctionDef]:
    return [
        FunctionDef(f"{prefix}{i}", n, parse_sexpr(text), declared_c11=c11)
        for i, text in enumerate(texts)
    ]


def problem_from_dict(data: dict[str, Any], name: str = "problem") -> ProblemInstance:
    """
    Build a ProblemInstance from decoded JSON.

    Raises:
        ProblemSchemaError: data fails validation
    """
    result = ProblemValidator().validate_data(data)
    for issue in result.issues:
        if issue.severity is ValidationSeverity.WARNING:
            log.warning(f"{name}{issue.location}: {issue.message}")
    if result.has_errors:
        raise ProblemSchemaError(result.errors)

    n = data["n"]
    c11 = data.get("c11_declared", True)
    qmap = _functions(data.get("qmap", []), "g", n, c11)
    qset = PolyhedronSpec.from_dict(data["qset"]) if "qset" in data else None
    return ProblemInstance(
        n=n,
        objectives=_functions(data["objectives"], "f", n, c11),
        equalities=_functions(data.get("equalities", []), "h", n, c11),
        qmap=qmap,
        qset=qset,
        name=data.get("name", name),
        point=data.get("point"),
        directions=data.get("directions", []),
        c11_declared=c11,
    )


def problem_to_dict(problem: ProblemInstance) -> dict[str, Any]:
    """Canonical JSON form; expressions are written as canonical s-expressions."""
    data: dict[str, Any] = {
        "name": problem.name,
        "n": problem.n,
        "objectives": [format_sexpr(f.expr) for f in problem.objectives],
        "equalities": [format_sexpr(h.expr) for h in problem.equalities],
        "qmap": [format_sexpr(g.expr) for g in problem.qmap],
        "qset": problem.qset.to_dict(),
        "c11_declared": problem.c11_declared,
    }
    if problem.point is not None:
        data["point"] = problem.point.tolist()
    if problem.directions:
        data["directions"] = [d.tolist() for d in problem.directions]
    return data


def read_problem_data(path: Path) -> dict[str, Any]:
    """
    Read and validate a problem file without building the instance.

    Raises:
        ProblemSchemaError: the file is not a valid problem
    """
    path = Path(path)
    content = path.read_text(encoding="utf-8")
    result = ProblemValidator().validate(content)
    if result.has_errors:
        raise ProblemSchemaError(result.errors)
    return json.loads(content)


def load_problem(path: Path) -> ProblemInstance:
    """Load a problem file; the file stem is the default name."""
    path = Path(path)
    problem = problem_from_dict(read_problem_data(path), name=path.stem)
    log.debug(f"Loaded problem {problem.name} (n={problem.n}, m={problem.m}, p={problem.p}, k={problem.k})")
    return problem


def dump_problem(problem: ProblemInstance, path: Path) -> None:
    atomic_write(Path(path), json.dumps(problem_to_dict(problem), indent=2) + "\n")


def _number(value: Optional[float]) -> Any:
    """JSON has no infinities; render them as strings."""
    if value is None:
        return None
    value = float(value)
    if math.isfinite(value):
        return value
    return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")


def _direction_to_dict(v: DirectionVerdict) -> dict[str, Any]:
    data: dict[str, Any] = {
        "d": v.d.tolist(),
        "critical": v.critical,
        "regular": v.regular,
        "source": v.direction.source if v.direction is not None else "user",
        "mode": v.mode.value,
        "certificate": None,
        "margin": _number(v.margin),
        "refuted": v.refuted,
        "shortcut": v.shortcut,
        "exact": v.exact,
        "support": [[_number(s.lo), _number(s.hi)] for s in v.support],
    }
    if v.certificate is not None:
        cert = v.certificate.to_dict()
        cert["second_order_margin"] = _number(cert["second_order_margin"])
        data["certificate"] = cert
    if v.K is not None:
        data["K"] = [q.tolist() for q in v.K.points]
        data["K_status"] = v.K.status.value
    if v.M is not None:
        data["M"] = [q.tolist() for q in v.M.points]
        data["M_status"] = v.M.status.value
    return data


def report_to_dict(report: VerificationReport) -> dict[str, Any]:
    return {
        "problem": report.problem_name,
        "point": report.point.tolist(),
        "feasible": report.feasibility.feasible,
        "feasibility": report.feasibility.to_dict(),
        "rank_H": report.rank_H,
        "first_order": report.first_order.to_dict() if report.first_order is not None else None,
        "directions": [_direction_to_dict(v) for v in report.verdicts],
        "overall": report.overall.value,
        "mode": report.mode.value,
        "continuity": [c.to_dict() for c in report.continuity],
    }


def report_to_json(report: VerificationReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, allow_nan=False) + "\n"


def write_report(report: VerificationReport, path: Path) -> None:
    atomic_write(Path(path), report_to_json(report))
    log.info(f"Report written to {path}")
