from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smoothconn.polynomial import (
    PolyBundle,
    Polynomial,
    PolynomialSyntaxError,
    gradient,
    hessian,
    jacobian,
    minor_sum,
    parse,
    polys_from_strings,
)

NAMES = ["x", "y", "z"]

exponents = st.tuples(*[st.integers(0, 3)] * 3)
coefficients = st.fractions(min_value=-5, max_value=5, max_denominator=7)
polys = st.dictionaries(exponents, coefficients, max_size=6).map(lambda t: Polynomial(3, t))
points = st.lists(st.floats(-2, 2, allow_nan=False), min_size=3, max_size=3).map(np.array)


def test_parse_basic():
    p = parse("x^2 - 2*x*y + 1/2", NAMES)
    assert p.terms == {(2, 0, 0): 1, (1, 1, 0): -2, (0, 0, 0): Fraction(1, 2)}
    assert p.degree() == 2


def test_parse_decimals_are_exact():
    p = parse("0.1*x + 0.2*x", NAMES)
    assert p.terms == {(1, 0, 0): Fraction(3, 10)}


def test_parse_params_are_exact():
    p = parse("a*x^2 + a^2", NAMES, {"a": Fraction(1, 3)})
    assert p.terms == {(2, 0, 0): Fraction(1, 3), (0, 0, 0): Fraction(1, 9)}


def test_parse_expands_products_and_powers():
    p = parse("(x + y)^3", NAMES)
    q = parse("x^3 + 3*x^2*y + 3*x*y^2 + y^3", NAMES)
    assert p == q


@pytest.mark.parametrize("text, fragment", [
    ("x +", "unexpected end"),
    ("x y", "implicit multiplication"),
    ("x / y", "division only by nonzero constants"),
    ("x^-1", "exponent"),
    ("w + 1", "unknown variable"),
    ("x $ 2", "unexpected character"),
    ("", "empty expression"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(PolynomialSyntaxError, match=fragment) as info:
        parse(text, NAMES)
    assert info.value.position >= 0


def test_params_may_not_shadow_variables():
    with pytest.raises(ValueError, match="shadow"):
        parse("x", NAMES, {"x": 1})


@given(polys)
def test_to_string_round_trip(p):
    assert parse(p.to_string(NAMES), NAMES) == p


@given(polys, polys, polys)
def test_ring_laws(a, b, c):
    assert a + b == b + a
    assert a * b == b * a
    assert (a + b) * c == a * c + b * c
    assert (a - a).is_zero()


@given(polys, polys, st.integers(0, 2))
def test_product_rule(a, b, i):
    assert (a * b).differentiate(i) == a.differentiate(i) * b + a * b.differentiate(i)


@settings(max_examples=50)
@given(polys, points)
def test_evaluate_matches_bundle(p, x):
    bundle = PolyBundle([p, p * p], 3)
    vals = bundle(x)
    assert vals[0] == pytest.approx(p.evaluate(x), rel=1e-10, abs=1e-10)
    assert vals[1] == pytest.approx(p.evaluate(x) ** 2, rel=1e-9, abs=1e-9)


@settings(max_examples=50)
@given(polys, points)
def test_gradient_finite_differences(p, x):
    h = 1e-6
    g = gradient(p)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (p.evaluate(x + e) - p.evaluate(x - e)) / (2 * h)
        exact = g[i].evaluate(x)
        assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact), abs(p.evaluate(x)))


@settings(max_examples=30)
@given(polys, points)
def test_hessian_symmetric_and_matches_gradient_fd(p, x):
    H = hessian(p)
    g = gradient(p)
    h = 1e-6
    for i in range(3):
        for j in range(3):
            assert H[i][j] == H[j][i]
            e = np.zeros(3)
            e[j] = h
            fd = (g[i].evaluate(x + e) - g[i].evaluate(x - e)) / (2 * h)
            exact = H[i][j].evaluate(x)
            assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact), abs(g[i].evaluate(x)))


def test_minor_sum_single_equation_is_squared_gradient():
    g = parse("x^2 - y^2*z", NAMES)
    S = minor_sum(jacobian(polys_from_strings(["x^2 - y^2*z"], NAMES)), 1)
    assert S == parse("4*x^2 + 4*y^2*z^2 + y^4", NAMES)
    assert S == sum((d * d for d in gradient(g)), Polynomial.zero(3))


def test_minor_sum_matches_numeric_minors():
    system = polys_from_strings(["x^2 + y^2 + z^2 - 1", "x*y - z"], NAMES)
    S = minor_sum(jacobian(system), 2)
    x = np.array([0.3, -0.7, 1.1])
    J = np.array([[q.evaluate(x) for q in row] for row in jacobian(system)])
    numeric = sum(np.linalg.det(J[:, [a, b]]) ** 2 for a, b in [(0, 1), (0, 2), (1, 2)])
    assert S.evaluate(x) == pytest.approx(numeric, rel=1e-12)


def test_divisible_by_variable():
    assert parse("x*y + x^2", NAMES).divisible_by_variable(0)
    assert not parse("x*y + 1", NAMES).divisible_by_variable(0)
