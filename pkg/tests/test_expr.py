import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffscope.expr import ExpressionParseError, compile_expression

X = np.array([0.5, 1.0, 2.0, 3.5])


@pytest.mark.parametrize(
    "text, fn",
    [
        ("x", lambda x: x),
        ("1/x", lambda x: 1 / x),
        ("x^-4", lambda x: x**-4.0),
        ("x**2", lambda x: x**2),
        ("-x^2", lambda x: -(x**2)),
        ("2^-x", lambda x: 2.0 ** (-x)),
        ("2^3^2", lambda x: np.full_like(x, 512.0)),
        ("(0.2*x)^2", lambda x: (0.2 * x) ** 2),
        ("-0.05*x^-1.0", lambda x: -0.05 * x**-1.0),
        ("exp(-x*x/2)/sqrt(2*pi)", lambda x: np.exp(-x * x / 2) / math.sqrt(2 * math.pi)),
        ("log(x) + abs(x - 2) * sign(x - 2)", lambda x: np.log(x) + (x - 2)),
        ("pow(x, 1.5e0) - e", lambda x: x**1.5 - math.e),
        ("1 - 2 - 3", lambda x: np.full_like(x, -4.0)),
        ("8 / 4 / 2", lambda x: np.full_like(x, 1.0)),
        ("+x * -3", lambda x: -3 * x),
    ],
)
def test_evaluation(text, fn):
    e = compile_expression(text)
    np.testing.assert_allclose(e(X) * np.ones_like(X), fn(X), rtol=1e-15)


def test_constant_broadcasts_and_dependence():
    c = compile_expression("3")
    assert not c.depends_on_x
    assert compile_expression("x^2").depends_on_x
    np.testing.assert_array_equal(np.asarray(c(X)) * np.ones_like(X), 3.0)


def test_domain_errors_give_nan_without_warnings():
    e = compile_expression("log(x)")
    with np.errstate(all="raise"):
        out = e(np.array([-1.0, 0.0, 1.0]))
    assert np.isnan(out[0]) and out[1] == -np.inf and out[2] == 0.0


@pytest.mark.parametrize(
    "text, position",
    [
        ("1/(x^4", 6),
        ("2**", 3),
        ("x + * 2", 4),
        ("foo(x)", 0),
        ("exp(x, 2)", 0),
        ("x $ 2", 2),
        ("", 0),
        ("(x))", 3),
        ("y", 0),
    ],
)
def test_parse_errors_report_position(text, position):
    with pytest.raises(ExpressionParseError) as info:
        compile_expression(text)
    assert info.value.position == position
    assert info.value.text == text
    assert f"position {position}" in str(info.value)


numbers = st.floats(-50.0, 50.0, allow_nan=False).map(lambda v: round(v, 6))


@settings(max_examples=100, deadline=None)
@given(a=numbers, b=numbers, c=st.floats(0.1, 5.0).map(lambda v: round(v, 6)))
def test_matches_python_arithmetic(a, b, c):
    text = f"({a!r}) + ({b!r}) * x - x / ({c!r}) + x^2"
    got = compile_expression(text)(X)
    np.testing.assert_allclose(got, a + b * X - X / c + X**2, rtol=1e-12, atol=1e-12)
