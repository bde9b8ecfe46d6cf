"""
S-expression codec - Prefix notation for DSL expression trees.

Grammar:
    expr  := atom | "(" op expr* ")"
    atom  := vN | number
    op    := + * - pow abs max min exp sin cos

Examples:
    (+ (* 0.5 (* v0 (abs v0))) (pow v1 2))
    (- v1 (* v0 (abs v0)))
"""

import re
from typing import Optional

from ..errors import SexprError
from .funcdsl import (
    Abs,
    Constant,
    Expr,
    IntPower,
    Max,
    Min,
    Negate,
    Product,
    SmoothUnary,
    Sum,
    UnaryKind,
    Variable,
)


class SexprParser:
    """
    Parses prefix s-expressions into Expr trees.

    Algorithm:
    1. Tokenize into parentheses and atoms, remembering offsets
    2. Recursive descent: each "(" starts an operator application
    3. Atoms are variables (vN) or decimal numbers
    """

    TOKEN_PATTERN = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")
    VARIABLE_PATTERN = re.compile(r"^v(\d+)$")
    NUMBER_PATTERN = re.compile(r"^[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?$")

    UNARY_SMOOTH = {kind.value: kind for kind in UnaryKind}
    BINARY = {"max": Max, "min": Min}

    def parse(self, text: str) -> Expr:
        """Parse a complete expression; trailing tokens are an error."""
        self._tokens = self._tokenize(text)
        self._pos = 0
        if not self._tokens:
            raise SexprError("Empty expression", 0)
        expr = self._parse_expr()
        if self._pos < len(self._tokens):
            _, offset = self._tokens[self._pos]
            raise SexprError("Unexpected trailing input", offset)
        return expr

    def _tokenize(self, text: str) -> list[tuple[str, int]]:
        tokens: list[tuple[str, int]] = []
        pos = 0
        stripped_end = len(text.rstrip())
        while pos < stripped_end:
            match = self.TOKEN_PATTERN.match(text, pos)
            if not match:
                raise SexprError("Cannot tokenize", pos)
            token = match.group(1) or match.group(2) or match.group(3)
            tokens.append((token, match.start(match.lastindex)))
            pos = match.end()
        return tokens

    def _next(self) -> tuple[str, int]:
        if self._pos >= len(self._tokens):
            end = self._tokens[-1][1] + len(self._tokens[-1][0]) if self._tokens else 0
            raise SexprError("Unexpected end of expression", end)
        token = self._tokens[self._pos]
        self._pos += 1
        return token

    def _parse_expr(self) -> Expr:
        token, offset = self._next()
        if token == ")":
            raise SexprError("Unexpected ')'", offset)
        if token != "(":
            return self._parse_atom(token, offset)

        op, op_offset = self._next()
        if op in ("(", ")"):
            raise SexprError("Expected an operator after '('", op_offset)
        args: list[Expr] = []
        while True:
            if self._pos >= len(self._tokens):
                raise SexprError(f"Unclosed '(' for operator '{op}'", offset)
            if self._tokens[self._pos][0] == ")":
                self._pos += 1
                break
            if op == "pow" and len(args) == 1:
                args.append(self._parse_exponent())
            else:
                args.append(self._parse_expr())
        return self._apply(op, args, op_offset)

    def _parse_atom(self, token: str, offset: int) -> Expr:
        var_match = self.VARIABLE_PATTERN.match(token)
        if var_match:
            return Variable(int(var_match.group(1)))
        if self.NUMBER_PATTERN.match(token):
            return Constant(float(token))
        raise SexprError(f"Unknown atom '{token}'", offset)

    def _parse_exponent(self):
        token, offset = self._next()
        if not re.fullmatch(r"\d+", token) or int(token) < 1:
            raise SexprError(f"pow exponent must be a positive integer, got '{token}'", offset)
        return int(token)

    def _apply(self, op: str, args: list, offset: int) -> Expr:
        def arity(expected: int) -> None:
            if len(args) != expected:
                raise SexprError(f"'{op}' takes {expected} argument(s), got {len(args)}", offset)

        if op == "+":
            if not args:
                raise SexprError("'+' needs at least one argument", offset)
            return Sum(tuple(args))
        if op == "*":
            if len(args) < 2:
                raise SexprError("'*' needs at least two arguments", offset)
            expr = args[0]
            for arg in args[1:]:
                expr = Product(expr, arg)
            return expr
        if op == "-":
            if len(args) == 1:
                return Negate(args[0])
            arity(2)
            return Sum((args[0], Negate(args[1])))
        if op == "pow":
            arity(2)
            return IntPower(args[0], args[1])
        if op == "abs":
            arity(1)
            return Abs(args[0])
        if op in self.BINARY:
            arity(2)
            return self.BINARY[op](args[0], args[1])
        if op in self.UNARY_SMOOTH:
            arity(1)
            return SmoothUnary(self.UNARY_SMOOTH[op], args[0])
        raise SexprError(f"Unknown operator '{op}'", offset)


def parse_sexpr(text: str) -> Expr:
    """Parse one s-expression string."""
    return SexprParser().parse(text)


def format_sexpr(expr: Expr) -> str:
    """Canonical s-expression for an Expr; parse_sexpr(format_sexpr(e)) == e."""
    if isinstance(expr, Constant):
        return repr(float(expr.value_))
    if isinstance(expr, Variable):
        return f"v{expr.index}"
    if isinstance(expr, Sum):
        return "(+ " + " ".join(format_sexpr(t) for t in expr.terms) + ")"
    if isinstance(expr, Product):
        return f"(* {format_sexpr(expr.left)} {format_sexpr(expr.right)})"
    if isinstance(expr, Negate):
        return f"(- {format_sexpr(expr.child)})"
    if isinstance(expr, IntPower):
        return f"(pow {format_sexpr(expr.child)} {expr.exponent})"
    if isinstance(expr, Abs):
        return f"(abs {format_sexpr(expr.child)})"
    if isinstance(expr, Max):
        return f"(max {format_sexpr(expr.left)} {format_sexpr(expr.right)})"
    if isinstance(expr, Min):
        return f"(min {format_sexpr(expr.left)} {format_sexpr(expr.right)})"
    if isinstance(expr, SmoothUnary):
        return f"({expr.kind.value} {format_sexpr(expr.child)})"
    raise SexprError(f"Cannot serialize node of type {type(expr).__name__}")


def try_parse(text: str) -> tuple[Optional[Expr], Optional[SexprError]]:
    """Parse without raising; returns (expr, None) or (None, error)."""
    try:
        return parse_sexpr(text), None
    except SexprError as e:
        return None, e
