import math

import numpy as np
import pytest

from varcalc.exceptions import ExprSyntaxError, NonFiniteError
from varcalc.services.expressions import compile_expr, evaluate, parse_expr, print_expr, tokenize, variables


def value(text, **env):
    return evaluate(parse_expr(text), env)


class TestPrecedence:
    @pytest.mark.parametrize("text,expected", [
        ("1 + 2 * 3", 7.0),
        ("8 / 2 / 2", 2.0),
        ("10 - 4 - 3", 3.0),
        ("2^3^2", 512.0),
        ("-2^2", -4.0),
        ("2^-1", 0.5),
        ("(1 + 2) * 3", 9.0),
        ("--3", 3.0),
        ("2 * pi", 2.0 * math.pi),
        ("1.5e2 + .5", 150.5),
    ])
    def test_constant_expressions(self, text, expected):
        assert value(text) == pytest.approx(expected, rel=1e-15)

    def test_variables(self):
        assert value("q1^2 + y1*y1", q1=2.0, y1=3.0) == 13.0
        assert value("-q1^2", q1=2.0) == -4.0
        assert value("sin(q1)/q1", q1=1e-8) == pytest.approx(1.0, abs=1e-12)
        assert value("t * u2", t=2.0, u2=4.0) == 8.0

    def test_functions(self):
        assert value("sqrt(abs(-16))") == 4.0
        assert value("log(exp(2))") == pytest.approx(2.0)
        assert value("cos(0) + tan(0)") == 1.0


class TestErrors:
    @pytest.mark.parametrize("text,position", [
        ("q1 +", 4),
        ("(q1", 3),
        ("q1)", 2),
        ("foo(q1)", 0),
        ("q1 @ 2", 3),
        ("sin(q1, q2)", 0),
        ("", 0),
        ("q1 q2", 3),
        ("3 +* 4", 3),
        ("exp q1", 0),
    ])
    def test_positions(self, text, position):
        with pytest.raises(ExprSyntaxError) as info:
            parse_expr(text, {"q": 2})
        assert info.value.position == position
        assert f"(at position {position})" in str(info.value)

    def test_undeclared_variables(self):
        with pytest.raises(ExprSyntaxError) as info:
            parse_expr("q1 + q3", {"q": 2})
        assert info.value.position == 5
        with pytest.raises(ExprSyntaxError):
            parse_expr("t + q1", {"q": 1})
        with pytest.raises(ExprSyntaxError):
            parse_expr("y0", {"y": 1})

    def test_overflowing_literal(self):
        with pytest.raises(ExprSyntaxError):
            parse_expr("1e999")

    def test_missing_value(self):
        with pytest.raises(ExprSyntaxError):
            value("q1 + q2", q1=1.0)

    def test_non_finite_evaluation(self):
        with pytest.raises(NonFiniteError):
            value("log(q1)", q1=-1.0)
        with pytest.raises(NonFiniteError):
            value("1 / q1", q1=0.0)


class TestTokens:
    def test_positions_skip_whitespace(self):
        tokens = tokenize("  q1 *  2.5")
        assert [(t.kind, t.text, t.pos) for t in tokens] == [
            ("name", "q1", 2), ("op", "*", 5), ("number", "2.5", 8), ("end", "", 11)]


class TestPrinting:
    @pytest.mark.parametrize("text", [
        "-q1^2 + 3", "2^3^2", "q1 - (q2 - y1)", "sin(q1)*cos(t)/(1 + y1^2)", "-(-2.5)", "8/2/2",
    ])
    def test_print_reparses_to_same_value(self, text):
        env = {"q1": 0.7, "q2": -1.3, "y1": 0.4, "t": 0.25}
        node = parse_expr(text)
        again = parse_expr(print_expr(node))
        used = {k: v for k, v in env.items() if k in variables(node)}
        assert evaluate(again, used) == evaluate(node, used)

    def test_variables(self):
        assert variables(parse_expr("q1*y2 + sin(t) - pi")) == {"q1", "y2", "t"}


class TestCompile:
    def test_canonical_arity(self):
        f = compile_expr("q1*y1 + t", {"y": 1, "q": 1, "t": 1})
        assert f.arity == ("t", "q", "y")
        assert f(t=1.0, q=[2.0], y=[3.0]) == 7.0

    def test_finite_difference_gradient(self, config):
        f = compile_expr("0.5*y1^2 - cos(q1)", {"q": 1, "y": 1})
        np.testing.assert_allclose(f.grad("q", config, q=[0.5], y=[1.0]), [math.sin(0.5)], atol=1e-9)
        np.testing.assert_allclose(f.grad("y", config, q=[0.5], y=[1.0]), [1.0], atol=1e-9)

    def test_guarded(self):
        f = compile_expr("sqrt(q1)", {"q": 1})
        with pytest.raises(NonFiniteError):
            f(q=[-1.0])
