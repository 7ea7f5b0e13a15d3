"""Exact polynomial arithmetic, parsing, and Lie derivatives."""

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cisynth.poly import (Polynomial, VectorField, PolyParseError,
                          lie_derivative, lie_chain, extend_field,
                          parse_poly, format_poly,
                          parse_fraction, format_fraction)


def P(text):
    return parse_poly(text)


# ----------------------------------------------------------------------
# Construction and arithmetic
# ----------------------------------------------------------------------

def test_zero_and_constant():
    assert Polynomial.zero().is_zero()
    c = Polynomial.constant(Fraction(3, 7))
    assert c.is_constant() and c.constant_value() == Fraction(3, 7)
    assert Polynomial.constant(0).is_zero()


def test_arithmetic_identities():
    x, y = Polynomial.var("x"), Polynomial.var("y")
    assert (x + y) * (x - y) == x * x - y * y
    assert (x + 1) ** 3 == x ** 3 + 3 * x ** 2 + 3 * x + 1
    assert x - x == Polynomial.zero()
    assert (x * 0).is_zero()


def test_degree_and_variables():
    p = P("x^2*y - 3*z + 5")
    assert p.degree() == 3
    assert p.variables() == frozenset({"x", "y", "z"})
    assert Polynomial.zero().degree() == 0


def test_evaluate_exact():
    p = P("x^2 - 2*x*y + 1/3")
    pt = {"x": Fraction(1, 2), "y": Fraction(-3)}
    # 1/4 - 2*(1/2)*(-3) + 1/3 = 1/4 + 3 + 1/3 = 43/12
    assert p.evaluate(pt) == Fraction(43, 12)


def test_diff():
    p = P("x^3*y + 2*y^2 - 7")
    assert p.diff("x") == P("3*x^2*y")
    assert p.diff("y") == P("x^3 + 4*y")
    assert p.diff("z").is_zero()


def test_substitute_polynomial():
    p = P("x^2 + y")
    q = p.substitute({"x": P("u + 1"), "y": Fraction(2)})
    assert q == P("u^2 + 2*u + 3")


# ----------------------------------------------------------------------
# Parsing / formatting
# ----------------------------------------------------------------------

def test_parse_format_roundtrip_simple():
    for text in ["x", "0", "-x + 1", "x^2 - 2*x*y + 1/3",
                 "36/25*a*p^2 - 792*p^2"]:
        p = P(text)
        assert parse_poly(format_poly(p)) == p


def test_parse_rejects_garbage():
    for bad in ["x +", "2 ** 3", "x^", "(x", "x^-1"]:
        with pytest.raises(PolyParseError):
            parse_poly(bad)


def test_fraction_roundtrip():
    for f in [Fraction(0), Fraction(-3, 7), Fraction(6575, 12)]:
        assert parse_fraction(format_fraction(f)) == f


# ----------------------------------------------------------------------
# Lie derivatives
# ----------------------------------------------------------------------

def test_lie_derivative_oracle():
    # d/dt (x^2 y + 3y) under (x' = y^2, y' = x - y)
    # = 2xy * y^2 + (x^2 + 3)(x - y)   [checked independently]
    f = VectorField.make([("x", P("y^2")), ("y", P("x - y"))])
    L1 = lie_derivative(P("x^2*y + 3*y"), f)
    assert L1 == P("x^3 - x^2*y + 2*x*y^3 + 3*x - 3*y")
    L2 = lie_derivative(L1, f)
    assert L2 == P("-x^3 + 9*x^2*y^2 + x^2*y - 8*x*y^3 - 3*x"
                   " + 2*y^5 + 3*y^2 + 3*y")


def test_lie_chain_prefix():
    f = VectorField.make([("x", P("y^2")), ("y", P("x - y"))])
    p = P("x^2*y + 3*y")
    chain = lie_chain(p, f, 2)
    assert chain[0] == p
    assert chain[1] == lie_derivative(p, f)
    assert chain[2] == lie_derivative(chain[1], f)


def test_lie_derivative_invariant_circle():
    # x^2 + y^2 is conserved under rotation (x' = -y, y' = x)
    f = VectorField.make([("x", P("-y")), ("y", P("x"))])
    assert lie_derivative(P("x^2 + y^2"), f).is_zero()


def test_extend_field():
    f = VectorField.make([("x", P("1"))])
    g = extend_field(f, ["a"])
    assert g.variables == ("x", "a")
    assert g.component("a").is_zero()


# ----------------------------------------------------------------------
# Property tests
# ----------------------------------------------------------------------

fracs = st.fractions(min_value=-50, max_value=50, max_denominator=10)
names = st.sampled_from(["x", "y", "z"])


@st.composite
def polys(draw, max_terms=4):
    terms = {}
    for _ in range(draw(st.integers(0, max_terms))):
        mono = tuple(sorted(
            (v, draw(st.integers(1, 3)))
            for v in draw(st.sets(names, max_size=2))))
        terms[mono] = draw(fracs)
    return Polynomial(terms)


@given(polys(), polys(), polys())
@settings(max_examples=60, deadline=None)
def test_ring_axioms(a, b, c):
    assert a * (b + c) == a * b + a * c
    assert (a + b) + c == a + (b + c)
    assert a * b == b * a


@given(polys(), polys(),
       st.dictionaries(names, fracs, min_size=3, max_size=3))
@settings(max_examples=60, deadline=None)
def test_evaluate_is_ring_homomorphism(a, b, pt):
    assert (a + b).evaluate(pt) == a.evaluate(pt) + b.evaluate(pt)
    assert (a * b).evaluate(pt) == a.evaluate(pt) * b.evaluate(pt)


@given(polys(), polys())
@settings(max_examples=60, deadline=None)
def test_diff_product_rule(a, b):
    for v in ("x", "y"):
        assert (a * b).diff(v) == a.diff(v) * b + a * b.diff(v)


@given(polys())
@settings(max_examples=60, deadline=None)
def test_format_parse_roundtrip(p):
    assert parse_poly(format_poly(p)) == p


@given(polys(), polys(),
       st.dictionaries(names, fracs, min_size=3, max_size=3))
@settings(max_examples=40, deadline=None)
def test_lie_derivative_is_a_derivation(a, b, pt):
    f = VectorField.make([("x", P("y")), ("y", P("x*y - 1")),
                          ("z", P("2"))])
    lhs = lie_derivative(a * b, f)
    rhs = lie_derivative(a, f) * b + a * lie_derivative(b, f)
    assert lhs == rhs
