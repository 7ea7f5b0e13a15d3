"""Diagonally-dominant sum-of-squares relaxation over exact rationals."""

import random
from fractions import Fraction

import pytest

from cisynth.poly import Polynomial, parse_poly, format_poly
from cisynth.sosrelax import (monomial_basis, dsos_check, GramForm,
                              gram_setup, extract_gram)


def P(text):
    return parse_poly(text)


def test_monomial_basis_counts():
    # C(n + d, d) monomials of degree <= d
    assert len(monomial_basis(["x"], 2)) == 3
    assert len(monomial_basis(["x", "y"], 2)) == 6
    assert len(monomial_basis(["x", "y", "z"], 1)) == 4


def test_gram_polynomial_and_dominance():
    basis = (tuple(), (("x", 1),))  # (1, x)
    g = GramForm(basis, ((Fraction(2), Fraction(1)),
                         (Fraction(1), Fraction(1))))
    assert g.polynomial() == P("x^2 + 2*x + 2")
    assert g.is_diagonally_dominant()
    bad = GramForm(basis, ((Fraction(1), Fraction(2)),
                           (Fraction(2), Fraction(1))))
    assert not bad.is_diagonally_dominant()


def test_gram_setup_rejects_odd_degree():
    with pytest.raises(ValueError):
        gram_setup(3, ["x"])


def test_dsos_accepts_simple_squares():
    for text in ["x^2", "x^2 + 2*x + 1", "x^2 + y^2",
                 "4*x^2 - 4*x*y + y^2 + 9"]:
        cert = dsos_check(P(text))
        assert cert is not None, text
        g = cert.block("s")
        # the certificate reconstructs the polynomial exactly and the
        # Gram matrix is diagonally dominant (hence PSD)
        assert g.polynomial() == P(text)
        assert g.is_diagonally_dominant()


def test_dsos_certificate_text():
    cert = dsos_check(P("x^2 + 1"))
    text = cert.text()
    assert "block s" in text and "row" in text


def test_dsos_rejects_indefinite():
    # 2xy takes both signs
    assert dsos_check(P("2*x*y")) is None
    # x^2 y^2 - 1 is negative at the origin
    assert dsos_check(P("x^2*y^2 - 1")) is None
    # odd degree cannot be a square
    assert dsos_check(P("x^3")) is None


def test_dsos_motzkin_gap():
    # the Motzkin polynomial is nonnegative but not SOS, so the dsos
    # relaxation must not find a certificate
    motzkin = P("x^4*y^2 + x^2*y^4 - 3*x^2*y^2 + 1")
    assert dsos_check(motzkin) is None


def _random_sos(rng, nvars=2, squares=3, degree=2):
    names = ["x", "y", "z"][:nvars]
    total = Polynomial({})
    for _ in range(squares):
        q = Polynomial({})
        for m in monomial_basis(names, degree):
            if rng.random() < 0.6:
                q = q + Polynomial({m: Fraction(rng.randint(-3, 3))})
        total = total + q * q
    return total


def test_dsos_random_sums_of_squares():
    rng = random.Random(99)
    checked = 0
    for _ in range(30):
        p = _random_sos(rng, squares=rng.choice([2, 3]),
                        degree=rng.choice([1, 2]))
        if p.is_zero():
            continue
        cert = dsos_check(p)
        assert cert is not None, format_poly(p)
        g = cert.block("s")
        assert g.polynomial() == p and g.is_diagonally_dominant()
        checked += 1
    assert checked >= 25
