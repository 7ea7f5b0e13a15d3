"""Semi-algebraic sets, hybrid automata, and template documents.

Formulas are kept in positive normal form: negation only ever appears as a
flipped relation on an atom.  A set is syntactically closed when every atom
uses a non-strict relation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .poly import (Polynomial, VectorField, format_poly, parse_poly)

RELS = ("<", "<=", "=", ">=", ">")
_NEG = {"<": ">=", "<=": ">", "=": "<", ">=": "<", ">": "<="}
_NONSTRICT = ("<=", "=", ">=")


class ModelError(ValueError):
    """Validation or parse failure in a model/template/controller document."""


@dataclass(frozen=True)
class Atom:
    """poly rel 0."""

    poly: Polynomial
    rel: str

    def __post_init__(self):
        if self.rel not in RELS:
            raise ModelError(f"bad relation {self.rel!r}")

    def holds(self, point: Mapping[str, Fraction]) -> bool:
        v = self.poly.evaluate(point)
        if self.rel == "<":
            return v < 0
        if self.rel == "<=":
            return v <= 0
        if self.rel == "=":
            return v == 0
        if self.rel == ">=":
            return v >= 0
        return v > 0

    def negate(self) -> "Formula":
        if self.rel == "=":
            return Or((Atom(self.poly, "<"), Atom(self.poly, ">")))
        return Atom(self.poly, _NEG[self.rel])

    def is_strict(self) -> bool:
        return self.rel in ("<", ">")

    def substitute(self, binding) -> "Atom":
        return Atom(self.poly.substitute(binding), self.rel)

    def to_json(self):
        return {"poly": format_poly(self.poly), "rel": self.rel}

    def __str__(self):
        return f"{format_poly(self.poly)} {self.rel} 0"


@dataclass(frozen=True)
class And:
    children: tuple

    def __init__(self, children: Sequence):
        object.__setattr__(self, "children", tuple(children))


@dataclass(frozen=True)
class Or:
    children: tuple

    def __init__(self, children: Sequence):
        object.__setattr__(self, "children", tuple(children))


Formula = object  # Atom | And | Or

TRUE = And(())
FALSE = Or(())


def holds(formula: Formula, point: Mapping[str, Fraction]) -> bool:
    if isinstance(formula, Atom):
        return formula.holds(point)
    if isinstance(formula, And):
        return all(holds(c, point) for c in formula.children)
    if isinstance(formula, Or):
        return any(holds(c, point) for c in formula.children)
    raise TypeError(f"not a formula: {formula!r}")


def negate(formula: Formula) -> Formula:
    if isinstance(formula, Atom):
        return formula.negate()
    if isinstance(formula, And):
        return Or(tuple(negate(c) for c in formula.children))
    if isinstance(formula, Or):
        return And(tuple(negate(c) for c in formula.children))
    raise TypeError(f"not a formula: {formula!r}")


def atoms(formula: Formula) -> list:
    if isinstance(formula, Atom):
        return [formula]
    out = []
    for c in formula.children:
        out.extend(atoms(c))
    return out


def is_syntactically_closed(formula: Formula) -> bool:
    return all(a.rel in _NONSTRICT for a in atoms(formula))


def substitute(formula: Formula, binding) -> Formula:
    if isinstance(formula, Atom):
        return formula.substitute(binding)
    if isinstance(formula, And):
        return And(tuple(substitute(c, binding) for c in formula.children))
    return Or(tuple(substitute(c, binding) for c in formula.children))


def variables(formula: Formula) -> frozenset:
    out = set()
    for a in atoms(formula):
        out |= a.poly.variables()
    return frozenset(out)


def conjuncts(formula: Formula) -> list:
    """Atoms of a purely conjunctive formula; raises on any disjunction."""
    if isinstance(formula, Atom):
        return [formula]
    if isinstance(formula, And):
        out = []
        for c in formula.children:
            out.extend(conjuncts(c))
        return out
    if isinstance(formula, Or) and not formula.children:
        raise ModelError("empty disjunction (false) is not conjunctive")
    raise ModelError("formula is not conjunctive")


def is_conjunctive(formula: Formula) -> bool:
    try:
        conjuncts(formula)
        return True
    except ModelError:
        return False


def to_dnf(formula: Formula) -> list:
    """List of conjunctive branches (each a list of Atoms)."""
    if isinstance(formula, Atom):
        return [[formula]]
    if isinstance(formula, And):
        branches = [[]]
        for c in formula.children:
            sub = to_dnf(c)
            branches = [b + s for b in branches for s in sub]
        return branches
    if isinstance(formula, Or):
        out = []
        for c in formula.children:
            out.extend(to_dnf(c))
        return out
    raise TypeError(f"not a formula: {formula!r}")


def to_cnf(formula: Formula) -> list:
    """List of disjunctive clauses (each a list of Atoms)."""
    if isinstance(formula, Atom):
        return [[formula]]
    if isinstance(formula, And):
        out = []
        for c in formula.children:
            out.extend(to_cnf(c))
        return out
    if isinstance(formula, Or):
        clauses = [[]]
        for c in formula.children:
            sub = to_cnf(c)
            clauses = [cl + s for cl in clauses for s in sub]
        return clauses
    raise TypeError(f"not a formula: {formula!r}")


def formula_to_json(formula: Formula):
    if isinstance(formula, Atom):
        return formula.to_json()
    if isinstance(formula, And):
        return {"and": [formula_to_json(c) for c in formula.children]}
    return {"or": [formula_to_json(c) for c in formula.children]}


def formula_from_json(obj) -> Formula:
    if not isinstance(obj, dict):
        raise ModelError(f"bad formula node: {obj!r}")
    if "and" in obj:
        return And(tuple(formula_from_json(c) for c in obj["and"]))
    if "or" in obj:
        return Or(tuple(formula_from_json(c) for c in obj["or"]))
    if "poly" in obj and "rel" in obj:
        return Atom(parse_poly(obj["poly"]), obj["rel"])
    raise ModelError(f"bad formula node: {sorted(obj)!r}")


def formula_str(formula: Formula) -> str:
    if isinstance(formula, Atom):
        return str(formula)
    if isinstance(formula, And):
        if not formula.children:
            return "true"
        return "(" + " & ".join(formula_str(c) for c in formula.children) + ")"
    if not formula.children:
        return "false"
    return "(" + " | ".join(formula_str(c) for c in formula.children) + ")"


# ----------------------------------------------------------------------
# Hybrid automata
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Mode:
    id: str
    flow: VectorField
    domain: Formula
    safe: Formula


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    guard: Formula


@dataclass(frozen=True)
class HybridAutomaton:
    state_vars: tuple
    modes: tuple
    edges: tuple

    def mode(self, mode_id: str) -> Mode:
        for m in self.modes:
            if m.id == mode_id:
                return m
        raise KeyError(mode_id)

    def outgoing(self, mode_id: str) -> list:
        return [e for e in self.edges if e.source == mode_id]


def _check_closed(formula: Formula, what: str):
    for a in atoms(formula):
        if a.is_strict():
            raise ModelError(
                f"{what} must be a closed set; strict atom {a} not allowed")


def automaton_from_json(doc) -> HybridAutomaton:
    try:
        state_vars = tuple(doc["stateVars"])
        mode_objs = doc["modes"]
        edge_objs = doc["edges"]
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model document: {exc}") from None
    if not state_vars:
        raise ModelError("stateVars must be nonempty")
    modes = []
    for mo in mode_objs:
        flow_polys = [parse_poly(s) for s in mo["flow"]]
        if len(flow_polys) != len(state_vars):
            raise ModelError(
                f"mode {mo['id']!r}: flow dimension {len(flow_polys)} != "
                f"state dimension {len(state_vars)}")
        domain = formula_from_json(mo["domain"])
        safe = formula_from_json(mo["safe"])
        _check_closed(domain, f"domain of mode {mo['id']!r}")
        _check_closed(safe, f"safe region of mode {mo['id']!r}")
        modes.append(Mode(mo["id"], VectorField(state_vars, tuple(flow_polys)),
                          domain, safe))
    ids = [m.id for m in modes]
    if len(set(ids)) != len(ids):
        raise ModelError("duplicate mode ids")
    edges = []
    for eo in edge_objs:
        if eo["from"] not in ids or eo["to"] not in ids:
            raise ModelError(f"edge {eo['from']}->{eo['to']}: unknown endpoint")
        guard = formula_from_json(eo["guard"])
        _check_closed(guard, f"guard of edge {eo['from']}->{eo['to']}")
        edges.append(Edge(eo["from"], eo["to"], guard))
    return HybridAutomaton(state_vars, tuple(modes), tuple(edges))


def automaton_to_json(h: HybridAutomaton):
    return {
        "stateVars": list(h.state_vars),
        "modes": [
            {
                "id": m.id,
                "flow": [format_poly(p) for p in m.flow.components],
                "domain": formula_to_json(m.domain),
                "safe": formula_to_json(m.safe),
            }
            for m in h.modes
        ],
        "edges": [
            {"from": e.source, "to": e.target, "guard": formula_to_json(e.guard)}
            for e in h.edges
        ],
    }


def parse_model(text: str) -> HybridAutomaton:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"model document is not valid JSON: {exc}") from None
    return automaton_from_json(doc)


def serialize_model(h: HybridAutomaton) -> str:
    return json.dumps(automaton_to_json(h), indent=2) + "\n"


# ----------------------------------------------------------------------
# Templates
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class TemplateSet:
    params: tuple
    per_mode: tuple  # tuple of (mode_id, Formula)

    def formula(self, mode_id: str) -> Formula:
        for mid, f in self.per_mode:
            if mid == mode_id:
                return f
        raise KeyError(mode_id)

    def mode_ids(self) -> list:
        return [mid for mid, _ in self.per_mode]


def templates_from_json(doc) -> TemplateSet:
    try:
        params = tuple(doc["params"])
        per_mode_obj = doc["perMode"]
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed template document: {exc}") from None
    per_mode = []
    used = set()
    for mid in sorted(per_mode_obj):
        f = formula_from_json(per_mode_obj[mid])
        for a in atoms(f):
            if a.is_strict():
                raise ModelError(
                    f"template for mode {mid!r} has strict atom {a}; "
                    "templates must define closed sets")
            used |= a.poly.variables()
        per_mode.append((mid, f))
    for p in params:
        if p not in used:
            raise ModelError(f"parameter {p!r} appears in no template atom")
    return TemplateSet(params, tuple(per_mode))


def parse_templates(text: str) -> TemplateSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"template document is not valid JSON: {exc}") from None
    return templates_from_json(doc)


def templates_to_json(t: TemplateSet):
    return {
        "params": list(t.params),
        "perMode": {mid: formula_to_json(f) for mid, f in t.per_mode},
    }


# ----------------------------------------------------------------------
# Progress regions
# ----------------------------------------------------------------------

def progress_region(refined_guards: Mapping, h: HybridAutomaton,
                    mode_id: str) -> Formula:
    """Complement of the union of the refined guards leaving mode_id.

    refined_guards maps (source, target) pairs to formulas.  With no
    outgoing edges the region is all of state space (true).
    """
    parts = []
    for e in h.outgoing(mode_id):
        g = refined_guards[(e.source, e.target)]
        parts.append(negate(g))
    if not parts:
        return TRUE
    return And(tuple(parts))
