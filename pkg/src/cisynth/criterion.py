"""The first-nonzero-Lie-derivative criterion and synthesis constraints.

For a boundary polynomial p and flow f, continuous invariance is decided by
the sign ladder over L^1 p .. L^N p, where N is the stabilization rank of
the Lie-derivative ideal chain.  Conjunctive sets get one such condition
per facet; the refinement and invariance requirements of the whole
automaton flatten into a family of universally quantified clauses over the
template parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .groebner import ResourceCapExceeded, rank_n
from .poly import (Polynomial, VectorField, extend_field, format_poly,
                   lie_chain)
from .sets import (And, Atom, Formula, HybridAutomaton, ModelError,
                   TemplateSet, conjuncts, holds, progress_region, to_cnf,
                   to_dnf)


@dataclass(frozen=True)
class PsiFormula:
    """Disjunctive sign condition over a Lie-derivative chain.

    Disjunct j (1-based) is L^1 p = 0 & ... & L^{j-1} p = 0 & L^j p > 0.
    When has_equality_disjunct, the final all-equalities disjunct is kept
    (exact criterion); otherwise the condition is sufficient only.
    """

    p: Polynomial
    chain: tuple  # (L^1 p, ..., L^N p)
    has_equality_disjunct: bool
    truncated: bool

    @property
    def n(self) -> int:
        return len(self.chain)

    def is_trivially_true(self) -> bool:
        return self.n == 0 and self.has_equality_disjunct

    def disjuncts(self) -> list:
        """DNF as lists of Atoms."""
        out = []
        for j in range(1, self.n + 1):
            conj = [Atom(self.chain[i], "=") for i in range(j - 1)]
            conj.append(Atom(self.chain[j - 1], ">"))
            out.append(conj)
        if self.has_equality_disjunct:
            out.append([Atom(q, "=") for q in self.chain])
        return out

    def evaluate(self, point: Mapping[str, Fraction]) -> bool:
        for q in self.chain:
            v = q.evaluate(point)
            if v > 0:
                return True
            if v < 0:
                return False
        return self.has_equality_disjunct


def build_psi(p: Polynomial, f: VectorField, n_cap: int = 3,
              keep_equality_when_truncated: bool = False,
              chain_cap: int = 20) -> PsiFormula:
    """Criterion formula for p >= 0 under flow f.

    Parameter-free p: N is the exact ideal-chain rank and the equality
    disjunct is kept (necessary and sufficient).  Parametric p: the chain
    is truncated at n_cap and by default the equality disjunct is dropped,
    leaving a strictly sufficient condition.
    """
    parametric = bool(p.variables() - set(f.variables))
    if parametric:
        f = extend_field(f, sorted(p.variables() - set(f.variables)))
    if not parametric:
        n = rank_n(p, f, cap=chain_cap)
        chain = lie_chain(p, f, n)[1:]
        return PsiFormula(p, tuple(chain), True, False)
    try:
        n = rank_n(p, f, cap=n_cap)
        chain = lie_chain(p, f, n)[1:]
        # rank over the parameter-extended ring over-approximates every
        # instantiation, so the exact disjunction stays valid
        return PsiFormula(p, tuple(chain), True, False)
    except ResourceCapExceeded:
        chain = lie_chain(p, f, n_cap)[1:]
        return PsiFormula(p, tuple(chain), keep_equality_when_truncated, True)


def ci_check_point(p: Polynomial, f: VectorField, x0: Mapping[str, Fraction],
                   domain: Formula, chain_cap: int = 20) -> str:
    """Evaluate the criterion at a single boundary point.

    Returns "vacuous" when the premise p = 0 and x0 in domain fails,
    otherwise "holds" or "fails" by exact sign scan of the chain.
    """
    if p.evaluate(x0) != 0 or not holds(domain, x0):
        return "vacuous"
    psi = build_psi(p, f, chain_cap=chain_cap)
    return "holds" if psi.evaluate(x0) else "fails"


def facet_conditions(p_set: Formula, domain: Formula, f: VectorField,
                     n_cap: int = 3,
                     keep_equality_when_truncated: bool = False) -> list:
    """One (premise, psi) pair per facet of a conjunctive closed set.

    An equality atom g = 0 contributes the two facets g and -g.  The
    premise of facet i is g_i = 0 together with the remaining atoms of the
    set and the domain; the conjunction of all pairs is sufficient for
    continuous invariance.
    """
    facet_atoms = conjuncts(p_set)  # raises ModelError if disjunctive
    facets = []
    for a in facet_atoms:
        if a.rel == ">=":
            facets.append(a.poly)
        elif a.rel == "<=":
            facets.append(-a.poly)
        elif a.rel == "=":
            facets.append(a.poly)
            facets.append(-a.poly)
        else:
            raise ModelError(f"strict atom {a} in conjunctive template")
    out = []
    for g in facets:
        premise = And(tuple([Atom(g, "=")] + facet_atoms + [domain]))
        psi = build_psi(g, f, n_cap, keep_equality_when_truncated)
        out.append((premise, psi))
    return out


@dataclass(frozen=True)
class Clause:
    """Universally quantified implication: /\\ premise -> \\/ /\\ conclusion."""

    premise: tuple  # Atoms, conjunction
    conclusion: tuple  # tuple of tuples of Atoms, DNF
    provenance: str

    def evaluate(self, point: Mapping[str, Fraction]) -> bool:
        if not all(a.holds(point) for a in self.premise):
            return True
        return any(all(a.holds(point) for a in conj)
                   for conj in self.conclusion)

    def premise_holds(self, point: Mapping[str, Fraction]) -> bool:
        return all(a.holds(point) for a in self.premise)

    def substitute(self, binding) -> "Clause":
        return Clause(tuple(a.substitute(binding) for a in self.premise),
                      tuple(tuple(a.substitute(binding) for a in conj)
                            for conj in self.conclusion),
                      self.provenance)


@dataclass(frozen=True)
class SynthesisConstraint:
    params: tuple
    state_vars: tuple
    clauses: tuple

    def evaluate(self, point: Mapping[str, Fraction]) -> bool:
        return all(cl.evaluate(point) for cl in self.clauses)

    def substitute_params(self, values: Mapping[str, Fraction]) -> "SynthesisConstraint":
        binding = {k: Fraction(v) for k, v in values.items()}
        return SynthesisConstraint(
            tuple(p for p in self.params if p not in binding),
            self.state_vars,
            tuple(cl.substitute(binding) for cl in self.clauses))

    def groups(self) -> dict:
        out: dict[str, int] = {}
        for cl in self.clauses:
            key = cl.provenance.split("#")[0]
            out[key] = out.get(key, 0) + 1
        return out

    def canonical_text(self) -> str:
        lines = []
        for cl in self.clauses:
            prem = " & ".join(sorted(str(a) for a in cl.premise))
            conc = " | ".join(sorted(
                "(" + " & ".join(sorted(str(a) for a in conj)) + ")"
                for conj in cl.conclusion))
            lines.append(f"[{cl.provenance}] ({prem}) -> ({conc})")
        return "\n".join(sorted(lines)) + "\n"


def _dnf_branches(formula: Formula) -> list:
    return to_dnf(formula)


def derive_constraints(h: HybridAutomaton, templates: TemplateSet,
                       n_cap: int = 3,
                       keep_equality_when_truncated: bool = False) -> SynthesisConstraint:
    """Clauses for refinement (per mode) and per-facet invariance.

    The refined guard of each edge is the original guard together with the
    target's template; the progress region is the complement of the union
    of a mode's outgoing refined guards.
    """
    missing = [m.id for m in h.modes if m.id not in templates.mode_ids()]
    if missing:
        raise ModelError(f"templates missing for modes {missing}")

    refined_guards = {}
    for e in h.edges:
        refined_guards[(e.source, e.target)] = And(
            (e.guard, templates.formula(e.target)))

    clauses = []
    for m in h.modes:
        tmpl = templates.formula(m.id)
        tmpl_atoms = conjuncts(tmpl)
        # refinement: template -> domain & safe, one clause per CNF clause
        target = And((m.domain, m.safe))
        for idx, cnf_clause in enumerate(to_cnf(target)):
            clauses.append(Clause(
                tuple(tmpl_atoms),
                tuple((a,) for a in cnf_clause),
                f"c1({m.id})#{idx}"))
        # invariance: per facet, against the progress region
        region = progress_region(refined_guards, h, m.id)
        branches = _dnf_branches(region)
        pairs = facet_conditions(tmpl, And(()), m.flow, n_cap,
                                 keep_equality_when_truncated)
        for fi, (premise, psi) in enumerate(pairs):
            premise_atoms = conjuncts(premise)
            conclusion = tuple(tuple(conj) for conj in psi.disjuncts())
            if psi.is_trivially_true():
                continue
            for bi, branch in enumerate(branches):
                clauses.append(Clause(
                    tuple(premise_atoms + branch),
                    conclusion,
                    f"c2({m.id},facet{fi})#branch{bi}"))
    return SynthesisConstraint(templates.params, h.state_vars, tuple(clauses))
