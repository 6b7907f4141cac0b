import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gapcert.errors import ExpressionEvaluationError, SpecSyntaxError
from gapcert.expr import parse_expr


@pytest.mark.parametrize(
    "text,i,expected",
    [
        ("1 + 2 * 3", 0, 7.0),
        ("2 ^ 3 ^ 2", 0, 512.0),
        ("-2 ^ 2", 0, -4.0),
        ("2 ^ -1", 0, 0.5),
        ("(1 + i) / 2", 3, 2.0),
        ("i - 1 - 1", 5, 3.0),
        ("i / 2 / 2", 8, 2.0),
        ("min(i, 3) + max(i, 3)", 5, 8.0),
        ("sqrt(i) * log(i)", 1, 0.0),
        ("abs(1 - i)", 4, 3.0),
        ("1e-3 * i", 2000, 2.0),
    ],
)
def test_evaluation(text, i, expected):
    assert parse_expr(text).evaluate(i) == pytest.approx(expected, rel=1e-15)


def test_if_even_selects_by_parity():
    e = parse_expr("if_even(i^4, i^2)")
    np.testing.assert_array_equal(e.evaluate(np.arange(1, 5)), [1.0, 16.0, 9.0, 256.0])


def test_parameters():
    e = parse_expr("$a * i + $b")
    assert e.parameters() == {"a", "b"}
    assert e.evaluate(2, {"a": 4.0, "b": 1.0}) == 9.0


@pytest.mark.parametrize(
    "text,column",
    [("i^^2", 3), ("1 +", 4), ("(i", 3), ("i )", 3), ("foo(i)", 1), ("sqrt(i, 2)", 10), ("i # 2", 3)],
)
def test_syntax_error_column(text, column):
    with pytest.raises(SpecSyntaxError) as info:
        parse_expr(text)
    assert info.value.column == column


def test_unknown_variable():
    with pytest.raises(SpecSyntaxError):
        parse_expr("j + 1")
    assert parse_expr("j + 1", variables=("j",)).evaluate(0, variables={"j": 2}) == 3.0


@pytest.mark.parametrize("text", ["1 / (i - 2)", "log(i - 3)", "sqrt(-i)"])
def test_undefined_values_raise(text):
    with pytest.raises(ExpressionEvaluationError):
        parse_expr(text).evaluate(np.arange(1, 5))


def test_mp_agrees_with_numpy():
    e = parse_expr("if_even(i^1.5, 2*i) + sqrt(i) / (1 + log(i))")
    for i in (1, 2, 17, 10**6):
        assert float(e.evaluate_mp(i)) == pytest.approx(float(e.evaluate(i)), rel=1e-13)


_atoms = st.sampled_from(["i", "2", "0.5", "$a", "(i + 1)", "sqrt(i)", "if_even(i, 3)"])


@st.composite
def expressions(draw, depth=3):
    if depth == 0:
        return draw(_atoms)
    op = draw(st.sampled_from(["+", "-", "*", "/", "^", None]))
    if op is None:
        return draw(_atoms)
    return f"{draw(expressions(depth=depth - 1))} {op} {draw(expressions(depth=depth - 1))}"


@given(expressions())
def test_round_trip_through_string(text):
    e = parse_expr(text)
    again = parse_expr(str(e))
    assert again == e
    i = np.arange(1, 6)
    with np.errstate(all="ignore"):
        try:
            expected = e.evaluate(i, {"a": 1.5})
        except ExpressionEvaluationError:
            return
    np.testing.assert_array_equal(again.evaluate(i, {"a": 1.5}), expected)
