"""Core functionality: expression DSL, problem model, configuration, validation."""

from .funcdsl import FunctionDef, evaluate, gradient, hessian_vec
from .problem import PolyhedronSpec, ProblemInstance
from .settings import CertificateMode, CheckConfig, ConfigManager, OracleChoice
from .sexpr import format_sexpr, parse_sexpr
from .validators import ProblemValidator, ValidationResult

__all__ = [
    "FunctionDef",
    "evaluate",
    "gradient",
    "hessian_vec",
    "PolyhedronSpec",
    "ProblemInstance",
    "CertificateMode",
    "CheckConfig",
    "ConfigManager",
    "OracleChoice",
    "format_sexpr",
    "parse_sexpr",
    "ProblemValidator",
    "ValidationResult",
]
