"""Invariance criterion: psi construction, point checks, facet
conditions, and synthesis-constraint derivation."""

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cisynth.poly import VectorField, parse_poly, lie_derivative
from cisynth.sets import Atom, And, TRUE, holds, TemplateSet
from cisynth.criterion import (build_psi, ci_check_point, facet_conditions,
                               derive_constraints, Clause)


def P(text):
    return parse_poly(text)


ROT = VectorField.make([("x", P("-y")), ("y", P("x"))])


def test_build_psi_conserved_trivially_true():
    # the level-set polynomial of a conserved quantity gives an empty
    # chain with the equality disjunct: identically true
    psi = build_psi(P("x^2 + y^2 - 1"), ROT)
    assert psi.n == 0
    assert psi.has_equality_disjunct and not psi.truncated
    assert psi.is_trivially_true()
    assert psi.evaluate({"x": Fraction(5), "y": Fraction(-17)})


def test_build_psi_rank_zero_invariant_flow():
    f = VectorField.make([("x", P("x"))])
    psi = build_psi(P("x"), f)
    assert psi.n == 0 and psi.is_trivially_true()


def test_build_psi_chain_and_disjuncts():
    # p = x under (x' = y, y' = 1): chain (y, 1), closing disjunct kept
    f = VectorField.make([("x", P("y")), ("y", P("1"))])
    psi = build_psi(P("x"), f)
    assert [str(q) for q in psi.chain] == ["y", "1"]
    dis = psi.disjuncts()
    assert len(dis) == 3
    assert [a.rel for a in dis[0]] == [">"]
    assert [a.rel for a in dis[1]] == ["=", ">"]
    assert [a.rel for a in dis[2]] == ["=", "="]


def test_psi_evaluate_sign_scan():
    f = VectorField.make([("x", P("y")), ("y", P("1"))])
    psi = build_psi(P("x"), f)
    assert psi.evaluate({"x": Fraction(0), "y": Fraction(1)})
    assert not psi.evaluate({"x": Fraction(0), "y": Fraction(-1)})
    # y = 0: second derivative 1 > 0 rescues
    assert psi.evaluate({"x": Fraction(0), "y": Fraction(0)})


def test_psi_parametric_truncation():
    # parametric polynomial whose chain does not stabilise within the
    # cap: sufficient-only condition, equality disjunct dropped
    f = VectorField.make([("x", P("y")), ("y", P("z")), ("z", P("1"))])
    psi = build_psi(P("x - a"), f, n_cap=2)
    assert psi.truncated and not psi.has_equality_disjunct
    assert psi.n == 2


def test_ci_check_point_verdicts():
    f = VectorField.make([("x", P("-y")), ("y", P("x"))])
    p = P("-x^2 - y^2 + 2*y")   # boundary: circle through origin
    on = {"x": Fraction(0), "y": Fraction(0)}
    off = {"x": Fraction(2), "y": Fraction(0)}
    assert ci_check_point(p, f, off, TRUE) == "vacuous"
    # conserved quantity: holds everywhere on the level set
    assert ci_check_point(p, f, on, TRUE) == "holds"
    bad = VectorField.make([("x", P("y")), ("y", P("-1"))])
    # at the origin: L p = -2x y + (2 - 2y)(-1) = -2 < 0
    assert ci_check_point(p, bad, on, TRUE) == "fails"


def test_ci_check_point_domain_gate():
    f = VectorField.make([("x", P("1"))])
    pt = {"x": Fraction(0)}
    region = Atom(P("x - 1"), ">=")
    assert ci_check_point(P("x"), f, pt, region) == "vacuous"


def test_facet_conditions_structure():
    box = And((Atom(P("x"), ">="), Atom(P("1 - x"), ">=")))
    f = VectorField.make([("x", P("1"))])
    pairs = facet_conditions(box, TRUE, f)
    assert len(pairs) == 2
    polys = {str(psi.p) for _, psi in pairs}
    assert polys == {"x", "-x + 1"}
    # equality atom contributes both signed facets
    eq_pairs = facet_conditions(Atom(P("x"), "="), TRUE, f)
    assert {str(psi.p) for _, psi in eq_pairs} == {"x", "-x"}


def test_derive_constraints_nuclear_shape(nuclear, nuclear_templates):
    c = derive_constraints(nuclear, nuclear_templates)
    assert set(c.params) == {"a", "b", "c", "d"}
    assert len(c.clauses) == 86
    for cl in c.clauses:
        assert isinstance(cl, Clause)
        assert cl.provenance  # every clause is traceable


def test_constraint_substitute_closes_params(nuclear, nuclear_templates):
    from tests.conftest import EQ7_PARAMS
    c = derive_constraints(nuclear, nuclear_templates)
    inst = c.substitute_params(EQ7_PARAMS)
    assert not inst.params
    pt = {"p": Fraction(1, 2), "x": Fraction(530)}
    for cl in inst.clauses:
        assert cl.evaluate(pt)


# ----------------------------------------------------------------------
# Property: psi agrees with a numeric forward-flow probe
# ----------------------------------------------------------------------

fracs = st.fractions(min_value=-5, max_value=5, max_denominator=3)


@given(st.dictionaries(st.sampled_from(["x", "y"]), fracs,
                       min_size=2, max_size=2))
@settings(max_examples=40, deadline=None)
def test_psi_matches_taylor_sign(pt):
    # sign of the first nonzero chain value equals the sign of p along
    # the flow for small positive time; the flow is polynomial in t
    # (x'' = 1), so the truncated Taylor sum below is the exact solution
    f = VectorField.make([("x", P("y")), ("y", P("1"))])
    p = P("x")
    psi = build_psi(p, f)
    chain = [p] + list(psi.chain)
    first = next((v for v in (q.evaluate(pt) for q in chain[1:]) if v != 0),
                 None)
    if first is None:
        return
    # exact Taylor value at a small rational time
    t = Fraction(1, 10 ** 6)
    val = Fraction(0)
    fact = 1
    for k, q in enumerate(chain):
        if k:
            fact *= k
        val += q.evaluate(pt) * t ** k / fact
    moved = val - p.evaluate(pt)
    assert (moved > 0) == (first > 0)
