"""Semialgebraic formulas, model (de)serialization, and templates."""

import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cisynth.poly import parse_poly
from cisynth.sets import (Atom, And, Or, TRUE, FALSE, ModelError,
                          holds, negate, atoms, substitute, variables,
                          conjuncts, is_conjunctive, to_dnf, to_cnf,
                          formula_to_json, formula_from_json, formula_str,
                          is_syntactically_closed,
                          parse_model, serialize_model,
                          automaton_from_json, automaton_to_json,
                          TemplateSet, templates_from_json,
                          parse_templates, templates_to_json,
                          progress_region)


def P(text):
    return parse_poly(text)


def A(text, rel=">="):
    return Atom(P(text), rel)


def test_holds_atoms():
    pt = {"x": Fraction(1, 2)}
    assert holds(A("x", ">"), pt)
    assert holds(A("2*x - 1", "="), pt)
    assert not holds(A("x - 1", ">="), pt)
    assert holds(TRUE, pt)
    assert not holds(FALSE, pt)


def test_holds_connectives():
    pt = {"x": Fraction(0), "y": Fraction(1)}
    f = And((A("y - 1", ">="), Or((A("x", ">"), A("y - x", ">=")))))
    assert holds(f, pt)
    assert not holds(And((f, A("x - 5", ">="))), pt)


def test_negate_is_complement():
    f = And((A("x", ">="), Or((A("y", ">"), A("x + y", "=")))))
    for xv in (-1, 0, 1):
        for yv in (-1, 0, 1):
            pt = {"x": Fraction(xv), "y": Fraction(yv)}
            assert holds(f, pt) != holds(negate(f), pt)


def test_syntactic_closure():
    assert is_syntactically_closed(And((A("x", ">="), A("y", "="))))
    assert not is_syntactically_closed(And((A("x", ">="), A("y", ">"))))


def test_substitute():
    f = A("x - a", ">=")
    g = substitute(f, {"a": Fraction(3)})
    assert holds(g, {"x": Fraction(3)})
    assert not holds(g, {"x": Fraction(2)})
    assert variables(g) == frozenset({"x"})


def test_conjuncts_and_dnf():
    f = And((A("x", ">="), A("y", "<=")))
    assert len(conjuncts(f)) == 2
    assert is_conjunctive(f)
    g = Or((A("x", ">"), And((A("y", ">="), A("x", "=")))))
    assert not is_conjunctive(g)
    dnf = to_dnf(g)
    assert len(dnf) == 2 and len(dnf[1]) == 2
    cnf = to_cnf(And((A("x", ">"), Or((A("y", ">"), A("x", "="))))))
    assert len(cnf) == 2


def test_formula_json_roundtrip():
    f = And((A("x - 1/3", ">="), Or((A("y", ">"), TRUE))))
    doc = formula_to_json(f)
    json.dumps(doc)  # serializable
    assert formula_from_json(doc) == f


def test_formula_str_readable():
    s = formula_str(And((A("x - 510", ">="), A("550 - x", ">="))))
    assert "x - 510 >= 0" in s and "-x + 550 >= 0" in s


def test_model_roundtrip(nuclear):
    text = serialize_model(nuclear)
    again = parse_model(text)
    assert again == nuclear
    assert [m.id for m in nuclear.modes] == ["q1", "q2", "q3", "q4"]
    assert nuclear.state_vars == ("p", "x")
    assert len(nuclear.edges) == 4


def test_model_rejects_open_domain():
    doc = {
        "stateVars": ["x"],
        "modes": [{"id": "m", "flow": ["1"],
                   "domain": {"poly": "x", "rel": ">"},
                   "safe": {"poly": "x", "rel": ">="}}],
        "edges": [],
    }
    with pytest.raises(ModelError):
        automaton_from_json(doc)


def test_model_rejects_unknown_edge_mode(nuclear):
    doc = automaton_to_json(nuclear)
    doc["edges"][0]["from"] = "nope"
    with pytest.raises(ModelError):
        automaton_from_json(doc)


def test_templates_roundtrip(nuclear_templates):
    doc = templates_to_json(nuclear_templates)
    again = templates_from_json(doc)
    assert again == nuclear_templates
    assert set(nuclear_templates.params) == {"a", "b", "c", "d"}
    mids = [mid for mid, _ in nuclear_templates.per_mode]
    assert mids == ["q1", "q2", "q3", "q4"]


def test_templates_reject_strict_atoms():
    doc = {"params": ["a"],
           "perMode": {"m": {"poly": "x - a", "rel": ">"}}}
    with pytest.raises(ModelError):
        templates_from_json(doc)


def test_progress_region_excludes_guards(nuclear, nuclear_templates):
    from cisynth.synth import refine_guards
    from tests.conftest import EQ7_PARAMS
    binding = {k: Fraction(v) for k, v in EQ7_PARAMS.items()}
    domains = {mid: substitute(f, binding)
               for mid, f in nuclear_templates.per_mode}
    guards = refine_guards(nuclear, domains)
    region = progress_region(guards, nuclear, "q2")
    # interior point of q2 where no refined guard is enabled
    assert holds(region, {"p": Fraction(1, 2), "x": Fraction(530)})
    # on the outgoing refined guard p = 1 (with x in the target window)
    assert not holds(region, {"p": Fraction(1), "x": Fraction(530)})


# ----------------------------------------------------------------------
# Property tests
# ----------------------------------------------------------------------

fracs = st.fractions(min_value=-8, max_value=8, max_denominator=4)


@st.composite
def formulas(draw, depth=2):
    if depth == 0 or draw(st.booleans()):
        poly = P(draw(st.sampled_from(
            ["x", "y", "x - y", "x + 2*y - 1", "x^2 - y"])))
        return Atom(poly, draw(st.sampled_from([">=", "<=", ">", "<", "="])))
    parts = tuple(draw(st.lists(formulas(depth=depth - 1),
                                min_size=1, max_size=2)))
    return draw(st.sampled_from([And, Or]))(parts)


@given(formulas(), st.dictionaries(st.sampled_from(["x", "y"]), fracs,
                                   min_size=2, max_size=2))
@settings(max_examples=60, deadline=None)
def test_dnf_cnf_preserve_semantics(f, pt):
    want = holds(f, pt)
    dnf = to_dnf(f)
    assert any(all(holds(a, pt) for a in conj) for conj in dnf) == want
    cnf = to_cnf(f)
    assert all(any(holds(a, pt) for a in disj) for disj in cnf) == want


@given(formulas())
@settings(max_examples=60, deadline=None)
def test_json_roundtrip_property(f):
    assert formula_from_json(json.loads(json.dumps(formula_to_json(f)))) == f


@given(formulas(), st.dictionaries(st.sampled_from(["x", "y"]), fracs,
                                   min_size=2, max_size=2))
@settings(max_examples=60, deadline=None)
def test_double_negation(f, pt):
    assert holds(negate(negate(f)), pt) == holds(f, pt)
