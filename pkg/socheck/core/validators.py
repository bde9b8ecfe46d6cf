"""
Local Validators - Problem file validation.

Checks run before any numerical work, reporting every problem at once with
JSON-pointer locations (e.g. /objectives/1, /qset/A/0).
"""

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .sexpr import try_parse


class ValidationSeverity(Enum):
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


@dataclass(frozen=True)
class ValidationIssue:
    """One finding; location is a JSON pointer for file checks or a multiplier block name."""
    severity: ValidationSeverity
    message: str
    location: str = ""
    code: str = ""

    def __str__(self) -> str:
        suffix = f" [{self.code}]" if self.code else ""
        return f"{self.location or '/'}: {self.message}{suffix}"

    def to_dict(self) -> dict[str, str]:
        return {"severity": self.severity.value, "message": self.message, "location": self.location, "code": self.code}


@dataclass
class ValidationResult:
    """Accumulates issues; any ERROR makes the result invalid."""
    is_valid: bool = True
    issues: list[ValidationIssue] = field(default_factory=list)

    def _add(self, severity: ValidationSeverity, message: str, location: str, code: str) -> None:
        self.issues.append(ValidationIssue(severity, message, location, code))
        if severity is ValidationSeverity.ERROR:
            self.is_valid = False

    def add_error(self, message: str, location: str = "", code: str = "") -> None:
        self._add(ValidationSeverity.ERROR, message, location, code)

    def add_warning(self, message: str, location: str = "", code: str = "") -> None:
        self._add(ValidationSeverity.WARNING, message, location, code)

    def add_info(self, message: str, location: str = "", code: str = "") -> None:
        self._add(ValidationSeverity.INFO, message, location, code)

    @property
    def errors(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity is ValidationSeverity.ERROR]

    @property
    def has_errors(self) -> bool:
        return bool(self.errors)

    @property
    def codes(self) -> set[str]:
        return {i.code for i in self.issues if i.code}

    def to_dict(self) -> dict:
        return {"is_valid": self.is_valid, "issues": [i.to_dict() for i in self.issues]}


def _is_number(value: Any) -> bool:
    return (
        isinstance(value, (int, float))
        and not isinstance(value, bool)
        and math.isfinite(value)
    )


class ProblemValidator:
    """
    Validates problem JSON content.

    Checks:
    - Valid JSON syntax, top-level object
    - Required keys (n, objectives) and their types
    - Every expression parses and uses variables below n
    - qset shape matches qmap and has nonempty interior
    - point / directions are n-vectors
    """

    REQUIRED_KEYS = {"n", "objectives"}
    KNOWN_KEYS = {
        "name", "n", "objectives", "equalities", "qmap", "qset",
        "point", "directions", "c11_declared", "truth", "expected_overall", "notes",
    }

    def validate(self, content: str) -> ValidationResult:
        """Validate raw JSON text."""
        result = ValidationResult()

        if not content.strip():
            result.add_error("Problem content is empty", code="EMPTY")
            return result

        try:
            data = json.loads(content)
        except json.JSONDecodeError as e:
            result.add_error(f"not JSON: {e.msg} at line {e.lineno}, column {e.colno}", code="JSON_PARSE_ERROR")
            return result

        return self.validate_data(data, result)

    def validate_data(self, data: Any, result: ValidationResult | None = None) -> ValidationResult:
        """Validate an already decoded problem object."""
        result = result or ValidationResult()

        if not isinstance(data, dict):
            result.add_error("Problem must be a JSON object", location="", code="NOT_OBJECT")
            return result

        for key in sorted(self.REQUIRED_KEYS):
            if key not in data:
                result.add_error(f"Missing required key: '{key}'", location="", code="MISSING_REQUIRED_KEY")
        for key in sorted(set(data) - self.KNOWN_KEYS):
            result.add_warning(f"Unknown key: '{key}'", location=f"/{key}", code="UNKNOWN_KEY")

        n = data.get("n")
        if "n" in data and (not isinstance(n, int) or isinstance(n, bool) or n < 1):
            result.add_error("'n' must be a positive integer", location="/n", code="BAD_DIMENSION")
            n = None

        if "objectives" in data:
            self._validate_expr_list(data["objectives"], "objectives", n, result, min_len=1)
        k = None
        for key in ("equalities", "qmap"):
            if key in data:
                count = self._validate_expr_list(data[key], key, n, result, min_len=0)
                if key == "qmap":
                    k = count
        if k is None:
            k = 0 if "qmap" not in data else None

        if "qset" in data:
            self._validate_qset(data["qset"], k, result)
        elif k:
            result.add_warning(
                "No 'qset' given; using the nonpositive orthant",
                location="/qset",
                code="DEFAULT_QSET"
            )

        if "point" in data:
            self._validate_vector(data["point"], n, "/point", result)
        if "directions" in data:
            dirs = data["directions"]
            if not isinstance(dirs, list):
                result.add_error("'directions' must be an array", location="/directions", code="NOT_ARRAY")
            else:
                for i, d in enumerate(dirs):
                    self._validate_vector(d, n, f"/directions/{i}", result)
        if "c11_declared" in data and not isinstance(data["c11_declared"], bool):
            result.add_error("'c11_declared' must be a boolean", location="/c11_declared", code="NOT_BOOL")

        return result

    def _validate_expr_list(
        self,
        items: Any,
        key: str,
        n: int | None,
        result: ValidationResult,
        min_len: int,
    ) -> int | None:
        if not isinstance(items, list):
            result.add_error(f"'{key}' must be an array of s-expressions", location=f"/{key}", code="NOT_ARRAY")
            return None
        if len(items) < min_len:
            result.add_error(f"'{key}' needs at least {min_len} entry", location=f"/{key}", code="TOO_SHORT")
        for i, text in enumerate(items):
            location = f"/{key}/{i}"
            if not isinstance(text, str):
                result.add_error("Expression must be a string", location=location, code="NOT_STRING")
                continue
            expr, error = try_parse(text)
            if error is not None:
                result.add_error(str(error), location=location, code="SEXPR_ERROR")
                continue
            top = expr.max_index()
            if n is not None and top >= n:
                result.add_error(
                    f"Variable v{top} out of range for n={n}",
                    location=location,
                    code="ARITY_MISMATCH"
                )
        return len(items)

    def _validate_qset(self, qset: Any, k: int | None, result: ValidationResult) -> None:
        if not isinstance(qset, dict):
            result.add_error("'qset' must be an object", location="/qset", code="NOT_OBJECT")
            return

        if "orthant" in qset:
            dim = qset["orthant"]
            if not isinstance(dim, int) or isinstance(dim, bool) or dim < 0:
                result.add_error("'orthant' must be a nonnegative integer", location="/qset/orthant", code="BAD_ORTHANT")
            elif k is not None and dim != k:
                result.add_error(
                    f"orthant dimension {dim} differs from qmap length {k}",
                    location="/qset/orthant",
                    code="QSET_DIMENSION"
                )
            return

        if "A" not in qset or "b" not in qset:
            result.add_error("'qset' needs either 'orthant' or both 'A' and 'b'", location="/qset", code="BAD_QSET")
            return
        A, b = qset["A"], qset["b"]
        if not isinstance(A, list) or not isinstance(b, list):
            result.add_error("'A' and 'b' must be arrays", location="/qset", code="BAD_QSET")
            return
        if len(A) != len(b):
            result.add_error(f"A has {len(A)} rows but b has {len(b)} entries", location="/qset/b", code="QSET_SHAPE")
        shape_ok = True
        for i, row in enumerate(A):
            if not isinstance(row, list) or not all(_is_number(v) for v in row):
                result.add_error("Row must be an array of finite numbers", location=f"/qset/A/{i}", code="BAD_ROW")
                shape_ok = False
            elif k is not None and len(row) != k:
                result.add_error(
                    f"Row has {len(row)} entries, qmap has {k} components",
                    location=f"/qset/A/{i}",
                    code="QSET_DIMENSION"
                )
                shape_ok = False
        for i, value in enumerate(b):
            if not _is_number(value):
                result.add_error("Entry must be a finite number", location=f"/qset/b/{i}", code="BAD_NUMBER")
                shape_ok = False

        if shape_ok and len(A) == len(b) and A:
            from .problem import interior_point_of
            if interior_point_of(A, b) is None:
                result.add_error("Q has empty interior", location="/qset", code="EMPTY_INTERIOR")

    def _validate_vector(self, value: Any, n: int | None, location: str, result: ValidationResult) -> None:
        if not isinstance(value, list) or not all(_is_number(v) for v in value):
            result.add_error("Must be an array of finite numbers", location=location, code="BAD_VECTOR")
            return
        if n is not None and len(value) != n:
            result.add_error(f"Expected {n} entries, got {len(value)}", location=location, code="ARITY_MISMATCH")
