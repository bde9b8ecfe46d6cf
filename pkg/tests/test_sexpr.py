"""Tests for the s-expression parser and serializer."""

import numpy as np
import pytest

from socheck.core.funcdsl import Abs, Constant, FunctionDef, IntPower, Product, Sum, Variable, evaluate
from socheck.core.sexpr import SexprParser, format_sexpr, parse_sexpr, try_parse
from socheck.errors import SexprError


class TestParsing:

    def test_atoms(self):
        assert parse_sexpr("v3") == Variable(3)
        assert parse_sexpr("-2.5e-1") == Constant(-0.25)

    def test_nary_product_folds_left(self):
        expr = parse_sexpr("(* 0.5 v0 (abs v0))")
        assert expr == Product(Product(Constant(0.5), Variable(0)), Abs(Variable(0)))

    def test_binary_minus_is_sum_with_negation(self):
        f = FunctionDef("f", 2, parse_sexpr("(- v1 (* v0 (abs v0)))"))
        assert evaluate(f, [-2.0, 1.0]) == pytest.approx(1.0 + 4.0)

    def test_pow_takes_integer_exponent(self):
        assert parse_sexpr("(pow (+ v0 1) 3)") == IntPower(Sum((Variable(0), Constant(1.0))), 3)

    def test_smooth_unary_and_minmax(self):
        f = FunctionDef("f", 2, parse_sexpr("(+ (exp v0) (max v0 v1) (min (sin v1) (cos v0)))"))
        assert evaluate(f, [0.0, 0.0]) == pytest.approx(1.0 + 0.0 + 0.0)

    def test_whitespace_is_free(self):
        assert parse_sexpr("  ( +  v0\n v1 )  ") == parse_sexpr("(+ v0 v1)")


class TestErrors:

    @pytest.mark.parametrize("text", [
        "",
        "(+ v0",
        "(+ v0))",
        "(foo v0)",
        "(pow v0 1.5)",
        "(pow v0 0)",
        "(abs v0 v1)",
        "(* v0)",
        "x0",
        ")",
        "(())",
    ])
    def test_malformed_input_raises(self, text):
        with pytest.raises(SexprError):
            parse_sexpr(text)

    def test_error_reports_offset(self):
        with pytest.raises(SexprError) as excinfo:
            parse_sexpr("(+ v0 (bogus v1))")
        assert excinfo.value.position == 7

    def test_try_parse_does_not_raise(self):
        expr, error = try_parse("(+ v0")
        assert expr is None
        assert isinstance(error, SexprError)
        expr, error = try_parse("v0")
        assert error is None and expr == Variable(0)


class TestFormatting:

    @pytest.mark.parametrize("text", [
        "(+ (* 0.5 v0 (abs v0)) (pow v1 2))",
        "(- v1 (* v0 (abs v0)))",
        "(max (exp v0) (- (cos v1)))",
        "(min v0 1e-05)",
    ])
    def test_parse_format_parse_is_stable(self, text):
        expr = parse_sexpr(text)
        assert parse_sexpr(format_sexpr(expr)) == expr

    def test_format_is_canonical(self):
        assert format_sexpr(parse_sexpr("(+ v0 (* 2 v1))")) == "(+ v0 (* 2.0 v1))"

    def test_parser_instance_is_reusable(self):
        parser = SexprParser()
        first = parser.parse("(+ v0 v1)")
        second = parser.parse("(abs v2)")
        assert first.max_index() == 1
        assert second.max_index() == 2
        values = np.array([[1.0], [2.0], [-3.0]])
        assert float(second.value(values)[0]) == 3.0
