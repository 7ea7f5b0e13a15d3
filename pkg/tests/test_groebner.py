"""Groebner bases, ideal membership, and the derivative-chain rank."""

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cisynth.poly import Polynomial, VectorField, parse_poly, lie_chain
from cisynth.groebner import (GREVLEX, LEX, groebner_basis, ideal_member,
                              normal_form, rank_n, leading_monomial,
                              ResourceCapExceeded)


def P(text):
    return parse_poly(text)


def test_leading_monomial_orders():
    p = P("x^2 + x*y^2 + y")
    assert leading_monomial(p, ["x", "y"], LEX) == (("x", 2),)
    # grevlex: degree first, so x*y^2 (degree 3) leads
    assert leading_monomial(p, ["x", "y"], GREVLEX) == (("x", 1), ("y", 2))


def test_groebner_known_basis():
    # <xy - 1, y^2 - 1> has reduced grevlex basis {y^2 - 1, x - y}
    # (checked independently)
    basis = groebner_basis([P("x*y - 1"), P("y^2 - 1")], ["x", "y"])
    got = {str(g) for g in basis.generators}
    assert got == {"y^2 - 1", "x - y"}


def test_normal_form_oracle():
    basis = groebner_basis([P("x*y - 1"), P("y^2 - 1")], ["x", "y"])
    # x^2 + y^2 reduces to the constant 2 modulo that ideal
    nf = normal_form(P("x^2 + y^2"), basis.generators, basis.variables,
                     basis.order)
    assert nf == Polynomial.constant(2)


def test_ideal_membership():
    basis = groebner_basis([P("x*y - 1"), P("y^2 - 1")], ["x", "y"])
    assert ideal_member(P("x^2*y^2 - 1"), basis)
    assert ideal_member(P("x^2 - 1"), basis)
    assert not ideal_member(P("x + 1"), basis)
    assert ideal_member(Polynomial.zero(), basis)


def test_groebner_of_unit_ideal():
    basis = groebner_basis([P("x"), P("x - 1")], ["x"])
    assert ideal_member(Polynomial.constant(5), basis)


def test_rank_n_zero_when_first_derivative_in_ideal():
    # p = x, flow x' = x: L p = x is in <x>, so the chain stabilises
    # immediately and N = 0
    f = VectorField.make([("x", P("x"))])
    assert rank_n(P("x"), f) == 0


def test_rank_n_conserved_quantity():
    # rotation conserves p: L p = 0 lies in every ideal
    f = VectorField.make([("x", P("-y")), ("y", P("x"))])
    assert rank_n(P("x^2 + y^2 - 1"), f) == 0


def test_rank_n_two():
    # p = x, flow (x' = y, y' = 1): L p = y not in <x>, L^2 p = 1 not in
    # the proper ideal <x, y>, L^3 p = 0 always a member, so N = 2
    f = VectorField.make([("x", P("y")), ("y", P("1"))])
    assert rank_n(P("x"), f) == 2


def test_rank_n_three():
    # one more integrator extends the chain by one: x, y, z, 1, 0
    f = VectorField.make([("x", P("y")), ("y", P("z")), ("z", P("1"))])
    assert rank_n(P("x"), f) == 3


def test_rank_n_cap_raises():
    f = VectorField.make([("x", P("y")), ("y", P("z")), ("z", P("1"))])
    with pytest.raises(ResourceCapExceeded):
        rank_n(P("x"), f, cap=1)


def test_chain_rank_defining_property():
    # N is the first index where L^{N+1} p lies in <p, ..., L^N p>
    f = VectorField.make([("p", P("1")), ("x", P("x/10 - 6*p - 50"))])
    p = P("x - 36/25*p^2 + 2*p - 530")
    n = rank_n(p, f)
    chain = lie_chain(p, f, n + 1)
    basis = groebner_basis(chain[:n + 1], sorted(f.variables))
    assert ideal_member(chain[n + 1], basis)
    if n > 0:
        shorter = groebner_basis(chain[:n], sorted(f.variables))
        assert not ideal_member(chain[n], shorter)


# ----------------------------------------------------------------------
# Property tests
# ----------------------------------------------------------------------

fracs = st.fractions(min_value=-20, max_value=20, max_denominator=5)
names = st.sampled_from(["x", "y"])


@st.composite
def polys(draw):
    terms = {}
    for _ in range(draw(st.integers(1, 3))):
        mono = tuple(sorted(
            (v, draw(st.integers(1, 2)))
            for v in draw(st.sets(names, max_size=2))))
        terms[mono] = draw(fracs)
    p = Polynomial(terms)
    return p


@given(st.lists(polys(), min_size=1, max_size=2), polys(), polys())
@settings(max_examples=25, deadline=None)
def test_ideal_closure_properties(gens, a, b):
    gens = [g for g in gens if not g.is_zero()]
    if not gens:
        return
    basis = groebner_basis(gens, ["x", "y"], budget=5000)
    # every generator and any polynomial combination of generators is a
    # member; normal forms of members are zero
    for g in gens:
        assert ideal_member(g, basis)
    combo = a * gens[0] + b * gens[-1]
    assert ideal_member(combo, basis)
    assert normal_form(combo, basis.generators, basis.variables,
                       basis.order).is_zero()


@given(st.lists(polys(), min_size=1, max_size=2), polys())
@settings(max_examples=25, deadline=None)
def test_normal_form_is_congruent(gens, p):
    gens = [g for g in gens if not g.is_zero()]
    if not gens:
        return
    basis = groebner_basis(gens, ["x", "y"], budget=5000)
    nf = normal_form(p, basis.generators, basis.variables, basis.order)
    assert ideal_member(p - nf, basis)
