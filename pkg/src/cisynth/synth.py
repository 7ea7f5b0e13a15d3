"""Synthesis pipeline: template assignment, guard refinement, constraint
solving, instantiation and final checks.

Three interchangeable backends produce refined mode domains:

* ``cegis``     -- sample-based parameter search over a template set,
                   returning an externally checkable candidate;
* ``polyhedra`` -- template polyhedra with fixed facet directions and
                   exact Farkas certificates (linear modes);
* ``dsos``      -- polynomial invariants from diagonally-dominant
                   sum-of-squares linear programs, exactly recovered.

The controller output document (refined domains/guards as formula trees,
certificates, solver report, seed) is produced here and consumed by the
verification module and the CLI.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .criterion import SynthesisConstraint, derive_constraints
from .lp import FEASIBLE, OPTIMAL, LinearProgram, solve_lp
from .poly import (Polynomial, VectorField, format_fraction, format_poly,
                   lie_derivative, parse_fraction)
from .polyhedra import (AffineMode, FarkasCertificate, Polyhedron,
                        SynthesisFailure, octagon_directions, slice_interval,
                        synth_rho, verify_certificate)
from .sets import (And, Atom, HybridAutomaton, ModelError, TemplateSet,
                   automaton_from_json, automaton_to_json, conjuncts,
                   formula_from_json, formula_to_json, holds,
                   is_syntactically_closed, substitute)
from .sosrelax import (GramForm, LinPoly, add_dsos_block, lin_derivative,
                       lin_substitute, monomial_basis, recover_blocks)

BACKENDS = ("cegis", "polyhedra", "dsos")


# ----------------------------------------------------------------------
# Result types
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RefinedAutomaton:
    """A switching controller: the base automaton with refined mode
    domains and guards, plus per-mode certificates and a nonemptiness
    witness."""

    base: HybridAutomaton
    refined_domains: tuple  # tuple of (mode_id, Formula)
    refined_guards: tuple   # tuple of ((source, target), Formula)
    certificates: tuple     # tuple of (mode_id, JSON-able dict)
    witness: tuple          # (mode_id, {var: Fraction})

    def domain(self, mode_id: str):
        for mid, f in self.refined_domains:
            if mid == mode_id:
                return f
        raise KeyError(mode_id)

    def guard(self, source: str, target: str):
        for key, f in self.refined_guards:
            if key == (source, target):
                return f
        raise KeyError((source, target))

    def certificate(self, mode_id: str):
        for mid, c in self.certificates:
            if mid == mode_id:
                return c
        return None


@dataclass(frozen=True)
class SolveReport:
    backend: str
    param_values: tuple    # tuple of (name, Fraction)
    status: str            # certified | candidate | failed
    diagnostics: tuple     # tuple of (key, JSON-able value)

    def params_dict(self) -> dict:
        return dict(self.param_values)

    def diagnostics_dict(self) -> dict:
        return dict(self.diagnostics)


# ----------------------------------------------------------------------
# Guard refinement
# ----------------------------------------------------------------------

def refine_guards(h: HybridAutomaton, domains: Mapping) -> dict:
    """G'_e = G_e and D'_target, for every edge."""
    missing = [m.id for m in h.modes if m.id not in domains]
    if missing:
        raise ModelError(f"refined domains missing for modes {missing}")
    return {(e.source, e.target): And((e.guard, domains[e.target]))
            for e in h.edges}


# ----------------------------------------------------------------------
# State boxes
# ----------------------------------------------------------------------

def _atom_bound(atom: Atom):
    """(var, lo, hi) when the atom is univariate linear, else None."""
    vs = atom.poly.variables()
    if len(vs) != 1 or atom.poly.degree() != 1:
        return None
    (v,) = vs
    c = atom.poly.coefficient(((v, 1),))
    d = atom.poly.coefficient(())
    root = -d / c
    if atom.rel == "=":
        return (v, root, root)
    wants_ge = atom.rel in (">=", ">")
    if (c > 0) == wants_ge:
        return (v, root, None)
    return (v, None, root)


def constraint_box(c: SynthesisConstraint,
                   default=(Fraction(-100), Fraction(100))) -> dict:
    """A bounding box per state variable, read off the univariate linear
    premise atoms of the clauses (loosest bound wins, so the box covers
    every premise region)."""
    lows: dict[str, list] = {}
    highs: dict[str, list] = {}
    for cl in c.clauses:
        for a in cl.premise:
            got = _atom_bound(a)
            if got is None:
                continue
            v, lo, hi = got
            if v not in c.state_vars:
                continue
            if lo is not None:
                lows.setdefault(v, []).append(lo)
            if hi is not None:
                highs.setdefault(v, []).append(hi)
    box = {}
    for v in c.state_vars:
        lo = min(lows[v]) if v in lows else default[0]
        hi = max(highs[v]) if v in highs else default[1]
        if lo > hi:
            lo, hi = hi, lo
        box[v] = (lo, hi)
    return box


def formula_box(formula, state_vars,
                default=(Fraction(-100), Fraction(100))) -> dict:
    """Bounding box for a formula (tightest bounds win); disjunctive
    parts contribute nothing."""
    box = {v: list(default) for v in state_vars}
    try:
        atoms_list = conjuncts(formula)
    except ModelError:
        atoms_list = [formula] if isinstance(formula, Atom) else []
        if isinstance(formula, And):
            atoms_list = [c for c in formula.children if isinstance(c, Atom)]
    for a in atoms_list:
        if not isinstance(a, Atom):
            continue
        got = _atom_bound(a)
        if got is None:
            continue
        v, lo, hi = got
        if v not in box:
            continue
        if lo is not None:
            box[v][0] = max(box[v][0], lo)
        if hi is not None:
            box[v][1] = min(box[v][1], hi)
    return {v: (lo, hi) for v, (lo, hi) in box.items()}


def grid_points(box: Mapping, per_axis: int):
    """Deterministic rational grid over a box, row-major in sorted
    variable order."""
    names = sorted(box)
    axes = []
    for v in names:
        lo, hi = box[v]
        if lo == hi or per_axis == 1:
            axes.append([lo])
        else:
            axes.append([lo + (hi - lo) * Fraction(i, per_axis - 1)
                         for i in range(per_axis)])
    out = [{}]
    for v, axis in zip(names, axes):
        out = [dict(p, **{v: val}) for p in out for val in axis]
    return out


def random_point(box: Mapping, rng: random.Random, denom: int = 997) -> dict:
    return {v: lo + (hi - lo) * Fraction(rng.randrange(denom + 1), denom)
            for v, (lo, hi) in sorted(box.items())}


# ----------------------------------------------------------------------
# CEGIS backend
# ----------------------------------------------------------------------

_VIOLATION_MARGIN = Fraction(1, 1000)


def _affine_in_params(poly: Polynomial, params, point: Mapping):
    """Evaluate the state variables, keeping the parameters symbolic;
    returns (coeff map param -> Fraction, constant)."""
    pset = set(params)
    coeffs: dict[str, Fraction] = {}
    const = Fraction(0)
    for m, c in poly.terms.items():
        val = c
        pvar = None
        for v, e in m:
            if v in pset:
                if pvar is not None or e > 1:
                    raise ModelError("template is not linear in its parameters")
                pvar = v
            else:
                val *= Fraction(point[v]) ** e
        if pvar is None:
            const += val
        else:
            coeffs[pvar] = coeffs.get(pvar, Fraction(0)) + val
    return coeffs, const


def _affine_subst(poly: Polynomial, params, point, subs):
    """Like _affine_in_params, but state variables in ``subs`` map to
    param-affine expressions (coeff map, const) instead of numbers.
    Raises ModelError when the result would not be affine in params."""
    pset = set(params)
    coeffs: dict[str, Fraction] = {}
    const = Fraction(0)
    for m, c in poly.terms.items():
        val = c
        pvar = None
        sub = None
        for v, e in m:
            if v in pset:
                if pvar is not None or sub is not None or e > 1:
                    raise ModelError("substitution is not affine in params")
                pvar = v
            elif v in subs:
                if pvar is not None or sub is not None or e > 1:
                    raise ModelError("substitution is not affine in params")
                sub = subs[v]
            else:
                val *= Fraction(point[v]) ** e
        if sub is not None:
            sco, sconst = sub
            if pvar is not None:
                if sco:
                    raise ModelError("substitution is not affine in params")
                coeffs[pvar] = coeffs.get(pvar, Fraction(0)) + val * sconst
            else:
                for p, sc in sco.items():
                    coeffs[p] = coeffs.get(p, Fraction(0)) + val * sc
                const += val * sconst
        elif pvar is not None:
            coeffs[pvar] = coeffs.get(pvar, Fraction(0)) + val
        else:
            const += val
    return coeffs, const


def _facet_substitutions(clause, params, point):
    """Param-affine expressions for state variables pinned by premise
    equalities at this sample (e.g. x = a(1-p) + c p on a parametric
    facet).  Using them keeps LP rows exact along moving facets, which
    is what lets the parameter search close in on boundary-tight
    solutions instead of chasing them asymptotically."""
    pset = set(params)
    subs: dict = {}
    for a in clause.premise:
        if a.rel != "=":
            continue
        for v in sorted(a.poly.variables() - pset):
            if v in subs:
                continue
            alpha = Fraction(0)
            ok = True
            rest_terms = {}
            for m, c in a.poly.terms.items():
                ve = next((e for w, e in m if w == v), 0)
                if ve > 1:
                    ok = False
                    break
                if ve == 1:
                    val = c
                    for w, e in m:
                        if w == v:
                            continue
                        if w in pset:
                            ok = False
                            break
                        val *= Fraction(point[w]) ** e
                    if not ok:
                        break
                    alpha += val
                else:
                    rest_terms[m] = c
            if not ok or alpha == 0:
                continue
            try:
                rco, rconst = _affine_in_params(
                    Polynomial(rest_terms), params, point)
            except (ModelError, KeyError):
                continue
            subs[v] = ({p: -c_ / alpha for p, c_ in rco.items()},
                       -rconst / alpha)
            break
    return subs


def _atom_rows(atom: Atom, params, point, negated: bool, subs=None,
               slacked: bool = True):
    """LP rows forcing the atom to hold (or to fail by a margin) at a
    fixed state point.  Returns a list of (coeffs, rel, rhs) options,
    each option itself a list of rows, or None when the atom is
    state-only and simply true/false."""
    if subs:
        try:
            coeffs, const = _affine_subst(atom.poly, params, point, subs)
        except ModelError:
            coeffs, const = _affine_in_params(atom.poly, params, point)
    else:
        coeffs, const = _affine_in_params(atom.poly, params, point)
    if not coeffs:
        value = const
        state_atom = Atom(Polynomial.constant(value), atom.rel)
        ok = state_atom.holds({})
        if negated:
            ok = not ok
        return [[]] if ok else None
    rel = atom.rel
    if not negated:
        if rel in (">=", ">"):
            return [[(coeffs, ">=", -const, slacked)]]
        if rel in ("<=", "<"):
            return [[(coeffs, "<=", -const, slacked)]]
        return [[(coeffs, "=", -const, slacked)]]
    # negation, strengthened by a margin so LP vertices sit strictly off
    if rel in (">=", ">"):
        return [[(coeffs, "<=", -const - _VIOLATION_MARGIN, slacked)]]
    if rel in ("<=", "<"):
        return [[(coeffs, ">=", -const + _VIOLATION_MARGIN, slacked)]]
    return [[(coeffs, "<=", -const - _VIOLATION_MARGIN, slacked)],
            [(coeffs, ">=", -const + _VIOLATION_MARGIN, slacked)]]


def _clause_options(clause, params, point):
    """Ways to satisfy one clause at one state sample, in syntactic
    order: each conclusion disjunct first, then violating each premise
    atom.  Every option is a list of LP rows (possibly empty); an
    unsatisfiable option is dropped."""
    subs = _facet_substitutions(clause, params, point)
    # closure points: the sample pushed onto the boundary of each strict
    # premise atom (e.g. p = 1 when the premise has p < 1).  By
    # continuity a conclusion that holds strictly on the open premise
    # region must hold non-strictly at these limits, and the resulting
    # slack-free rows pin down boundary-tight parameters exactly instead
    # of letting the search chase them asymptotically.
    from .verify import _snap_to_facet_var
    closures = []
    for a in clause.premise:
        if a.rel not in (">", "<"):
            continue
        got = _snap_to_facet_var(Atom(a.poly, "="), dict(point))
        if got is None:
            continue
        closures.append(got[0])
    options = []
    for conj in clause.conclusion:
        rows: list = []
        dead = False
        for a in conj:
            got = _atom_rows(a, params, point, negated=False, subs=subs)
            if got is None:
                dead = True
                break
            rows.extend(got[0])
        if dead:
            continue
        relax = {">": ">=", "<": "<="}
        for pt_b in closures:
            subs_b = _facet_substitutions(clause, params, pt_b)
            for a in conj:
                if a.rel not in relax:
                    continue    # only strictness degenerates at the limit
                weak = Atom(a.poly, relax[a.rel])
                got = _atom_rows(weak, params, pt_b, negated=False,
                                 subs=subs_b, slacked=False)
                if got is not None:
                    rows.extend(got[0])
        options.append(rows)
    for a in clause.premise:
        got = _atom_rows(a, params, point, negated=True)
        if got is None:
            continue
        options.extend(got)
    return options


def cegis_solve(c: SynthesisConstraint, box: Mapping, budget,
                seed: int = 0, state_box: Mapping | None = None) -> SolveReport:
    """Counterexample-guided parameter search.

    Alternates an exact LP over the template parameters (on a growing
    state-sample set, choosing per-clause disjuncts in syntactic order)
    with falsification by dense and randomized state sampling.  The
    result is a candidate -- never ``certified``; certification is the
    verifier's job.
    """
    from .verify import falsify

    max_rounds, samples_per_round = budget
    rng = random.Random(seed)
    params = tuple(c.params)
    if not params:
        cex = falsify(c, {}, samples_per_round, seed)
        if cex is None:
            return SolveReport("cegis", (), "candidate",
                               (("rounds", 0), ("samples", 0)))
        return SolveReport("cegis", (), "failed",
                           (("counterexamples",
                             (_point_json(cex),)),))
    if state_box is None:
        state_box = constraint_box(c)

    rows: list = []            # accumulated LP rows
    chosen: dict = {}          # (sample idx, clause idx) -> option idx
    samples: list = grid_points(state_box, 3)
    counterexamples: list = []

    def row_holds(coeffs, rel, rhs, vals):
        lhs = sum((c * vals[p] for p, c in coeffs.items()), Fraction(0))
        if rel == "=":
            return lhs == rhs
        return lhs >= rhs if rel == ">=" else lhs <= rhs

    def simplify_values(vals):
        """Round a vertex to small denominators when the rounded point
        still satisfies every accumulated row exactly."""
        for limit in (24, 100, 10 ** 4, 10 ** 8):
            cand = {p: v.limit_denominator(limit) for p, v in vals.items()}
            if all(box[p][0] <= cand[p] <= box[p][1] for p in params) and \
                    all(row_holds(co, rel, rhs, cand)
                        for co, rel, rhs, _ in rows):
                return cand
        return vals

    def solve_rows():
        lp = LinearProgram(list(params) + ["slack"])
        for p in params:
            lo, hi = box[p]
            lp.add({p: 1}, ">=", lo)
            lp.add({p: 1}, "<=", hi)
        lp.add({"slack": 1}, ">=", 0)
        lp.add({"slack": 1}, "<=", Fraction(10))
        for coeffs, rel, rhs, slacked in rows:
            if rel == "=" or not slacked:
                lp.add(coeffs, rel, rhs)
            elif rel == ">=":
                lp.add(dict(coeffs, slack=Fraction(-1)), rel, rhs)
            else:
                lp.add(dict(coeffs, slack=Fraction(1)), rel, rhs)
        lp.set_objective({"slack": Fraction(-1)})  # minimize -slack
        out = solve_lp(lp)
        if out.status not in (FEASIBLE, OPTIMAL):
            return None
        return simplify_values({p: out.assignment[p] for p in params})

    values = solve_rows()
    if values is None:
        return SolveReport("cegis", (), "failed",
                           (("reason", "parameter box infeasible"),))

    def repair(shift):
        """Add LP rows until every (sample, clause) pair holds at the
        solved values.  Disjunct options are tried in syntactic order
        rotated by ``shift`` (restarts explore different commitments).
        Returns the solved values, or None if some violation admits no
        option consistent with the rows committed so far."""
        nonlocal values
        seen_rows = {(frozenset(co.items()), rel, rhs, sl)
                     for co, rel, rhs, sl in rows}
        iters = 0
        progress = True
        while progress:
            iters += 1
            if iters > 500:
                return None
            progress = False
            inst = c.substitute_params(values)
            for si, pt in enumerate(samples):
                for ci, cl in enumerate(inst.clauses):
                    if cl.evaluate(pt):
                        continue
                    options = _clause_options(c.clauses[ci], params, pt)
                    k = shift % max(len(options), 1)
                    order = list(enumerate(options))
                    order = order[k:] + order[:k]
                    fixed = False
                    for oi, opt in order:
                        fresh = [r for r in opt
                                 if (frozenset(r[0].items()),) + r[1:]
                                 not in seen_rows]
                        if not fresh and opt:
                            continue    # re-adding known rows cannot help
                        saved = len(rows)
                        rows.extend(fresh)
                        trial = solve_rows()
                        if trial is not None and \
                                c.clauses[ci].substitute(trial).evaluate(pt):
                            chosen[(si, ci)] = oi
                            values = trial
                            for r in fresh:
                                seen_rows.add(
                                    (frozenset(r[0].items()),) + r[1:])
                            fixed = True
                            break
                        del rows[saved:]
                    if not fixed:
                        return None
                    progress = True
                    break
                if progress:
                    break
        return values

    max_restarts = 6
    for rnd in range(max_rounds):
        got = repair(0)
        restarts = 0
        while got is None and restarts < max_restarts:
            # greedy disjunct commitments became jointly infeasible;
            # drop them and redo with a rotated option order
            restarts += 1
            rows.clear()
            chosen.clear()
            values = solve_rows()
            got = repair(restarts)
        if got is None:
            return SolveReport(
                "cegis", tuple(sorted(values.items())), "failed",
                (("reason", "no consistent disjunct"),
                 ("rounds", rnd)))
        cex = falsify(c, values, samples_per_round,
                      rng.randrange(2 ** 30), state_box=state_box)
        if cex is not None:
            cex = _simplify_cex(c.substitute_params(values), cex)
        if cex is None:
            return SolveReport(
                "cegis", tuple(sorted(values.items())), "candidate",
                (("rounds", rnd + 1),
                 ("samples", len(samples)),
                 ("counterexamples",
                  tuple(_point_json(p) for p in counterexamples)),
                 ("disjuncts", tuple(sorted(
                     (f"{s}/{c.clauses[ci].provenance}", oi)
                     for (s, ci), oi in chosen.items())))))
        counterexamples.append(cex)
        samples.append(cex)
    return SolveReport(
        "cegis", tuple(sorted(values.items())), "failed",
        (("reason", "budget exhausted"),
         ("rounds", max_rounds),
         ("counterexamples",
          tuple(_point_json(p) for p in counterexamples[-5:]))))


def _simplify_cex(inst: SynthesisConstraint, pt: Mapping) -> Mapping:
    """Round a counterexample to small denominators while preserving the
    violation (keeps later LP rows well-conditioned)."""
    for limit in (10, 100, 1000, 10 ** 6):
        cand = {v: Fraction(x).limit_denominator(limit)
                for v, x in pt.items()}
        if not all(cl.evaluate(cand) for cl in inst.clauses):
            return cand
    return pt


def _point_json(pt: Mapping) -> tuple:
    return tuple((v, format_fraction(Fraction(x)))
                 for v, x in sorted(pt.items()))


# ----------------------------------------------------------------------
# Instantiation and final checks
# ----------------------------------------------------------------------

def instantiate_and_check(h: HybridAutomaton, templates: TemplateSet,
                          params: Mapping, grid_per_axis: int = 64,
                          random_tries: int = 10 ** 4,
                          seed: int = 0,
                          certificates: Mapping | None = None) -> RefinedAutomaton:
    """Substitute parameter values, check closedness syntactically, find
    an exact rational nonemptiness witness for at least one mode, and
    spot-check D' subset of D and S on the witness search hits."""
    binding = {p: Fraction(params[p]) for p in templates.params}
    domains = {}
    for mid, f in templates.per_mode:
        inst = substitute(f, binding)
        if not is_syntactically_closed(inst):
            raise ModelError(
                f"refined domain for mode {mid!r} is not closed")
        domains[mid] = inst
    return _finish_refinement(h, domains, certificates or {}, seed,
                              grid_per_axis, random_tries)


def _finish_refinement(h, domains, certificates, seed,
                       grid_per_axis=64, random_tries=10 ** 4):
    rng = random.Random(seed)
    witness = None
    for m in h.modes:
        f = domains[m.id]
        box = formula_box(And((f, m.domain, m.safe)), h.state_vars,
                          default=(Fraction(-1000), Fraction(1000)))
        hits = []
        for pt in grid_points(box, min(grid_per_axis, 9)):
            if holds(f, pt):
                hits.append(pt)
                break
        if not hits:
            per_axis = max(2, round(grid_per_axis ** (1 / max(len(box), 1))))
            for pt in grid_points(box, per_axis):
                if holds(f, pt):
                    hits.append(pt)
                    break
        tries = 0
        while not hits and tries < random_tries:
            pt = random_point(box, rng)
            tries += 1
            if holds(f, pt):
                hits.append(pt)
        for pt in hits:
            if not (holds(m.domain, pt) and holds(m.safe, pt)):
                raise ModelError(
                    f"refined domain of {m.id!r} leaves the mode domain "
                    f"or the safe set at {_point_json(pt)}")
        if hits and witness is None:
            witness = (m.id, hits[0])
    if witness is None:
        raise ModelError("every refined domain appears empty "
                         "(no witness found within the search budget)")
    guards = refine_guards(h, domains)
    return RefinedAutomaton(
        base=h,
        refined_domains=tuple((m.id, domains[m.id]) for m in h.modes),
        refined_guards=tuple(sorted(guards.items())),
        certificates=tuple(sorted(certificates.items())),
        witness=witness)


# ----------------------------------------------------------------------
# Polyhedra backend
# ----------------------------------------------------------------------

def _coordinate_subst(design: Mapping) -> tuple:
    """The polyhedral template lives in coordinates ``vars``; one of
    them may be a scaled copy of a state variable.  Returns (vars,
    binding state->template-coords polynomial, inverse scale map)."""
    tvars = tuple(design["vars"])
    binding = {}
    inverse = {}
    for tv, spec in design.get("coordinate", {}).items():
        sv = spec["var"]
        scale = parse_fraction(spec["scale"])  # template = scale * state
        binding[sv] = Polynomial.var(tv) * (1 / scale)
        inverse[tv] = (sv, scale)
    return tvars, binding, inverse


def _affine_mode(flow, tvars, binding, inverse) -> tuple:
    """A, b of the flow in template coordinates; flow must be affine.
    A scaled coordinate u = scale*x has derivative scale*(dx/dt)."""
    a_rows, b_vec = [], []
    for tv in tvars:
        if tv in inverse:
            sv, scale = inverse[tv]
            fp = flow.component(sv).substitute(binding) * scale
        else:
            fp = flow.component(tv).substitute(binding)
        row = []
        for other in tvars:
            coef = fp.coefficient(((other, 1),))
            row.append(coef)
        const = fp.coefficient(())
        if fp - Polynomial({((v, 1),): c for v, c in zip(tvars, row) if c}) \
                - Polynomial.constant(const) != Polynomial({}):
            raise ModelError("flow is not affine in the template coordinates")
        a_rows.append(tuple(row))
        b_vec.append(const)
    return tuple(a_rows), tuple(b_vec)


def _domain_halfspaces(formula, tvars, binding) -> tuple:
    """Open halfspaces c.z < a covering the interior of a conjunctive
    linear mode domain, in template coordinates."""
    out = []
    for a in conjuncts(formula):
        if not isinstance(a, Atom) or a.rel == "=":
            continue
        p = a.poly.substitute(binding)
        if p.degree() > 1:
            raise ModelError("mode domain is not linear")
        row = [p.coefficient(((v, 1),)) for v in tvars]
        const = p.coefficient(())
        sign = Fraction(-1) if a.rel in (">=", ">") else Fraction(1)
        out.append((tuple(sign * x for x in row), -sign * const))
    return tuple(out)


def _safe_halfspaces(formula, tvars, binding) -> tuple:
    out = []
    for a in conjuncts(formula):
        if not isinstance(a, Atom):
            continue
        p = a.poly.substitute(binding)
        if p.degree() > 1:
            raise ModelError("safe set is not linear")
        row = [p.coefficient(((v, 1),)) for v in tvars]
        const = p.coefficient(())
        sign = Fraction(-1) if a.rel in (">=", ">") else Fraction(1)
        out.append((tuple(sign * x for x in row), -sign * const))
    return tuple(out)


def _polytope_formula(poly: Polyhedron, tvars, inverse):
    """Facet atoms of Qz <= rho back in state variables."""
    out = []
    for row, off in zip(poly.directions, poly.rho):
        terms = Polynomial.constant(-off)
        for tv, coef in zip(tvars, row):
            if not coef:
                continue
            if tv in inverse:
                sv, scale = inverse[tv]
                terms = terms + Polynomial.var(sv) * (coef * scale)
            else:
                terms = terms + Polynomial.var(tv) * coef
        out.append(Atom(terms, "<="))
    return And(tuple(out))


def _interval_formula(spec: Mapping, bounds: Mapping):
    """Interval template for a dwell mode: clock pinned, one variable
    boxed between (possibly slice-referenced) bounds."""
    parts = []
    for v, val in sorted(spec["fix"].items()):
        parts.append(Atom(Polynomial.var(v) - parse_fraction(val), "="))
    var = spec["var"]
    lo, hi = bounds
    parts.append(Atom(Polynomial.var(var) * -1 + lo, "<="))
    parts.append(Atom(Polynomial.var(var) - hi, "<="))
    return And(tuple(parts))


def _resolve_bound(ref, slices, inverse_scale):
    if isinstance(ref, str):
        return parse_fraction(ref)
    lo, hi = slices[(ref["mode"], parse_fraction(ref["at"]))]
    val = lo if ref["bound"] == "lo" else hi
    return val * inverse_scale


def _fractions(seq) -> tuple:
    return tuple(parse_fraction(s) if isinstance(s, str) else Fraction(s)
                 for s in seq)


def _farkas_cert_json(poly, mode, cert, tvars, design) -> dict:
    return {
        "type": "farkas",
        "vars": list(tvars),
        "coordinate": design.get("coordinate", {}),
        "directions": [[format_fraction(x) for x in row]
                       for row in poly.directions],
        "rho": [format_fraction(x) for x in poly.rho],
        "aMatrix": [[format_fraction(x) for x in row]
                    for row in mode.a_matrix],
        "bVector": [format_fraction(x) for x in mode.b_vector],
        "domain": [[[format_fraction(x) for x in row], format_fraction(a)]
                   for row, a in mode.domain],
        "h": [[format_fraction(x) for x in row] for row in cert.h_matrix],
        "eta": [format_fraction(x) for x in cert.eta],
        "xi": [[format_fraction(x) for x in row] for row in cert.xi],
        "lam": [format_fraction(x) for x in cert.lam],
    }


def _interval_cert_json(spec, lo, hi, flow_lo, flow_hi) -> dict:
    return {
        "type": "interval",
        "fix": dict(sorted(spec["fix"].items())),
        "var": spec["var"],
        "lo": format_fraction(lo),
        "hi": format_fraction(hi),
        "flowAtLo": format_fraction(flow_lo),
        "flowAtHi": format_fraction(flow_hi),
    }


def _interval_flow(h, mode_id, spec, lo, hi):
    """Exact flow values of the boxed variable at both interval ends."""
    m = h.mode(mode_id)
    var = spec["var"]
    idx = h.state_vars.index(var)
    fixed = {v: parse_fraction(val) for v, val in spec["fix"].items()}
    flow = m.flow.components[idx]
    return (flow.evaluate(dict(fixed, **{var: lo})),
            flow.evaluate(dict(fixed, **{var: hi})))


def _check_interval_exits(h, mode_id, spec, lo, hi, flow_lo, flow_hi,
                          guards):
    """A dwell interval is non-blocking when each outflow endpoint lies
    in some outgoing refined guard (exact membership)."""
    var = spec["var"]
    fixed = {v: parse_fraction(val) for v, val in spec["fix"].items()}
    for endpoint, flow_val, outward in ((lo, flow_lo, flow_lo < 0),
                                        (hi, flow_hi, flow_hi > 0)):
        if not outward:
            continue
        pt = dict(fixed, **{var: endpoint})
        if not any(holds(g, pt) for (src, _), g in guards.items()
                   if src == mode_id):
            raise SynthesisFailure(
                f"dwell mode {mode_id!r} blocks at "
                f"{var}={format_fraction(endpoint)} (no enabled guard)")


def solve_polyhedra(h: HybridAutomaton, design: Mapping,
                    seed: int = 0) -> tuple:
    """Octagonal template-polyhedra backend for the affine modes named
    in the design document, with interval templates for dwell modes."""
    tvars, binding, inverse = _coordinate_subst(design)
    directions = octagon_directions(int(design.get("directions", 8)))
    slices: dict = {}
    polytopes: dict = {}
    domains: dict = {}
    certificates: dict = {}
    diagnostics: list = []
    for mid in sorted(design["modes"]):
        spec = design["modes"][mid]
        m = h.mode(mid)
        a_mat, b_vec = _affine_mode(m.flow, tvars, binding, inverse)
        dom = _domain_halfspaces(m.domain, tvars, binding)
        mode = AffineMode(a_mat, b_vec, dom)
        safe = _safe_halfspaces(And((m.domain, m.safe)), tvars, binding)
        seed_rho = _fractions(spec["seed"])
        poly, cert = synth_rho(directions, mode, safe, seed_rho,
                               rounds=int(spec.get("rounds", 3)),
                               freeze=tuple(spec.get("freeze", ())))
        if not verify_certificate(poly, mode, cert):
            raise SynthesisFailure(f"certificate for {mid!r} failed "
                                   "exact re-verification")
        polytopes[mid] = (poly, mode)
        certificates[mid] = _farkas_cert_json(poly, mode, cert, tvars, design)
        domains[mid] = _polytope_formula(poly, tvars, inverse)
        diagnostics.append((f"rho[{mid}]",
                            tuple(format_fraction(x) for x in poly.rho)))
    # slices of each polytope at clock values referenced by dwell modes
    clock_index = {v: i for i, v in enumerate(tvars)}
    scaled_index = next(i for i, v in enumerate(tvars) if v in inverse)
    for spec in design.get("intervals", {}).values():
        for ref in (spec["lo"], spec["hi"]):
            if isinstance(ref, str):
                continue
            key = (ref["mode"], parse_fraction(ref["at"]))
            if key in slices:
                continue
            poly, _ = polytopes[key[0]]
            clock_var = next(v for v in tvars if v not in inverse)
            slices[key] = slice_interval(
                poly, {clock_index[clock_var]: key[1]}, scaled_index)
    inv_scale = 1 / next(iter(
        parse_fraction(s["scale"])
        for s in design.get("coordinate", {}).values()), Fraction(1))
    interval_data = {}
    for mid in sorted(design.get("intervals", {})):
        spec = design["intervals"][mid]
        lo = _resolve_bound(spec["lo"], slices, inv_scale)
        hi = _resolve_bound(spec["hi"], slices, inv_scale)
        flow_lo, flow_hi = _interval_flow(h, mid, spec, lo, hi)
        domains[mid] = _interval_formula(spec, (lo, hi))
        certificates[mid] = _interval_cert_json(spec, lo, hi, flow_lo, flow_hi)
        interval_data[mid] = (spec, lo, hi, flow_lo, flow_hi)
    missing = [m.id for m in h.modes if m.id not in domains]
    if missing:
        raise ModelError(f"design document covers no template for {missing}")
    guards = refine_guards(h, domains)
    for mid, (spec, lo, hi, flow_lo, flow_hi) in interval_data.items():
        _check_interval_exits(h, mid, spec, lo, hi, flow_lo, flow_hi, guards)
    ra = _finish_refinement(h, domains, certificates, seed)
    report = SolveReport(
        "polyhedra",
        tuple((f"rho_{mid}_{i}", x)
              for mid, (poly, _) in sorted(polytopes.items())
              for i, x in enumerate(poly.rho)),
        "certified",
        tuple(diagnostics))
    return ra, report


# ----------------------------------------------------------------------
# DSOS backend
# ----------------------------------------------------------------------

def _mono(*pairs):
    return tuple(p for p in pairs if p[1])


def _lin_point_row(lp, linp, point, rel, rhs):
    """One LP row: the (fully substituted) linear polynomial at a point,
    compared against rhs."""
    q = linp
    for v, val in point.items():
        q = lin_substitute(q, v, val)
    coeffs: dict = {}
    const = Fraction(0)
    for m, row in q.coeffs.items():
        assert not m
        for k, v in row.items():
            if k is None:
                const += v
            else:
                coeffs[k] = coeffs.get(k, Fraction(0)) + v
    lp.add(coeffs, rel, Fraction(rhs) - const)


def _dsos_structure(direction: Fraction, fy: Polynomial, clock: str,
                    yvar: str, entry, exit_spec, eps, delta, margin, bound):
    """The quartic invariant synthesis LP for one mode.

    Template T(clock, y), total degree 4, y-degree <= 2, with
    T concave in y.  Conditions, each reduced to polynomial identities
    with diagonally dominant Gram blocks:

    * invariance:  L T = s0 + sa*clock + sb*(1-clock) + eps  on the strip;
    * safety:      T and the matching slope sign at y = +/-1, clockwise
                   certificates in the clock variable;
    * entry:       T >= delta on the entry window at the entry clock;
    * exit:        T <= -delta with inward slope at the exit point.

    Returns (params, lp, T, blocks, identities).
    """
    pvar = Polynomial.var(clock)
    params = []
    t_lin = LinPoly()
    for i in range(5):
        for j in range(3):
            if i + j > 4:
                continue
            name = f"u_{i}_{j}"
            params.append(name)
            t_lin._bump(_mono((clock, i), (yvar, j)), name, Fraction(1))
    lp = LinearProgram(list(params))
    for name in params:
        lp.add({name: 1}, "<=", bound)
        lp.add({name: 1}, ">=", -bound)

    lie = LinPoly()
    for m, row in t_lin.coeffs.items():
        q = Polynomial({m: Fraction(1)})
        dq = q.diff(clock) * direction + q.diff(yvar) * fy
        for mm, c in dq.terms.items():
            for k, v in row.items():
                lie._bump(mm, k, c * v)

    blocks: list = []
    identities: list = []

    def block(prefix, basis):
        blocks.append((prefix, tuple(basis)))
        return add_dsos_block(lp, prefix, tuple(basis))

    s0 = block("s0", monomial_basis((clock, yvar), 2))
    lin_basis = [_mono(), _mono((clock, 1)), _mono((yvar, 1))]
    sa = block("sa", lin_basis)
    sb = block("sb", lin_basis)
    diff = lie - s0 - sa.times_poly(pvar) \
        - sb.times_poly(Polynomial.constant(1) - pvar) \
        - LinPoly.constant(Polynomial.constant(eps))
    diff.equate_zero(lp)
    identities.append((diff, ("s0", "sa", "sb")))

    def clock_nonneg(linp, prefix, deg):
        """linp >= 0 on 0 <= clock <= 1 via o0 + o1*clock + o2*(1-clock)."""
        b0 = monomial_basis((clock,), (deg + 1) // 2)
        b1 = monomial_basis((clock,), max((deg - 1) // 2, 0))
        o0 = block(prefix + "0", b0)
        o1 = block(prefix + "1", b1)
        o2 = block(prefix + "2", b1)
        d = linp - o0 - o1.times_poly(pvar) \
            - o2.times_poly(Polynomial.constant(1) - pvar)
        d.equate_zero(lp)
        identities.append((d, (prefix + "0", prefix + "1", prefix + "2")))

    t_y = lin_derivative(t_lin, yvar)
    dconst = LinPoly.constant(Polynomial.constant(delta))
    clock_nonneg(lin_substitute(t_lin, yvar, Fraction(1)).scaled(Fraction(-1))
                 - dconst, "uv", 4)
    clock_nonneg(lin_substitute(t_y, yvar, Fraction(1)).scaled(Fraction(-1)),
                 "us", 3)
    clock_nonneg(lin_substitute(t_lin, yvar, Fraction(-1)).scaled(Fraction(-1))
                 - dconst, "lv", 4)
    clock_nonneg(lin_substitute(t_y, yvar, Fraction(-1)), "ls", 3)
    # concavity in y: the y^2 coefficient (a clock polynomial) is <= 0
    ycoef = LinPoly()
    for m, row in t_lin.coeffs.items():
        md = dict(m)
        if md.pop(yvar, 0) != 2:
            continue
        for k, v in row.items():
            ycoef._bump(tuple(sorted(md.items())), k, v)
    clock_nonneg(ycoef.scaled(Fraction(-1)), "cc", 2)

    # entry window: T(entry clock, y) - delta = t0 + t1*(y-lo)*(hi-y)
    yv = Polynomial.var(yvar)
    lo, hi = entry["lo"], entry["hi"]
    win = (yv - lo) * (Polynomial.constant(hi) - yv)
    en0 = block("en0", [_mono(), _mono((yvar, 1))])
    en1 = block("en1", [_mono()])
    d = lin_substitute(t_lin, clock, entry["clock"]) - dconst \
        - en0 - en1.times_poly(win)
    d.equate_zero(lp)
    identities.append((d, ("en0", "en1")))

    # exit point: dead there, with the slope pointing at the invariant
    ex_pt = {clock: exit_spec["clock"], yvar: exit_spec["y"]}
    # enforced with twice the certified margin: these rows are only
    # satisfied approximately by the rationalized float solution, so the
    # extra room keeps the exact recheck at one margin safe
    _lin_point_row(lp, t_lin, ex_pt, "<=", -delta - 2 * margin)
    _lin_point_row(lp, t_y.scaled(exit_spec["side"]), ex_pt, ">=",
                   2 * margin)
    return params, lp, t_lin, blocks, identities


def _dsos_design_mode(h, design, mid):
    """Per-mode pieces of the DSOS design document, parsed."""
    clock = design["clockVar"]
    (yvar, cspec), = design["coordinate"].items()
    center = parse_fraction(cspec["center"])
    halfwidth = parse_fraction(cspec["halfwidth"])
    m = h.mode(mid)
    cidx = h.state_vars.index(clock)
    sidx = h.state_vars.index(cspec["var"])
    direction = m.flow.components[cidx]
    if not direction.is_constant():
        raise ModelError(f"clock flow of {mid!r} is not constant")
    direction = direction.constant_value()
    scaled_state = Polynomial.var(yvar) * halfwidth + center
    fy = m.flow.components[sidx].substitute(
        {cspec["var"]: scaled_state}) * (1 / halfwidth)
    spec = design["modes"][mid]
    entry = {"clock": parse_fraction(spec["entry"]["clock"]),
             "lo": parse_fraction(spec["entry"]["lo"]),
             "hi": parse_fraction(spec["entry"]["hi"])}
    exit_spec = {"clock": parse_fraction(spec["exit"]["clock"]),
                 "y": parse_fraction(spec["exit"]["y"]),
                 "side": Fraction(int(spec["exit"]["side"]))}
    return clock, yvar, cspec, center, halfwidth, direction, fy, entry, exit_spec


def solve_dsos(h: HybridAutomaton, design: Mapping, seed: int = 0) -> tuple:
    """Quartic DSOS invariants for the clocked modes named in the design
    document, interval templates for the dwell modes."""
    eps = parse_fraction(design.get("epsilon", "1/1000"))
    delta = parse_fraction(design.get("delta", "1"))
    margin = parse_fraction(design.get("margin", "1/100"))
    bound = parse_fraction(design.get("bound", "1000"))
    domains: dict = {}
    certificates: dict = {}
    param_values: list = []
    diagnostics: list = []
    for mid in sorted(design["modes"]):
        (clock, yvar, cspec, center, halfwidth, direction, fy,
         entry, exit_spec) = _dsos_design_mode(h, design, mid)
        params, lp, t_lin, blocks, identities = _dsos_structure(
            direction, fy, clock, yvar, entry, exit_spec,
            eps, delta, margin, bound)
        got = recover_blocks(lp, blocks, identities)
        if got is None:
            raise SynthesisFailure(
                f"DSOS synthesis failed for mode {mid!r} "
                "(LP infeasible or exact recovery failed)")
        values, grams = got
        t_scaled = t_lin.instantiate(values)
        # back to state coordinates: y = (x - center) / halfwidth
        y_of_x = (Polynomial.var(cspec["var"]) - center) * (1 / halfwidth)
        t_state = t_scaled.substitute({yvar: y_of_x})
        m = h.mode(mid)
        domains[mid] = And(tuple(conjuncts(m.domain))
                           + (Atom(t_state * -1, "<="),))
        certificates[mid] = {
            "type": "dsos",
            "clockVar": clock,
            "coordinate": {yvar: dict(cspec)},
            "entry": {k: format_fraction(v) for k, v in entry.items()},
            "exit": {k: format_fraction(v) for k, v in exit_spec.items()},
            "epsilon": format_fraction(eps),
            "delta": format_fraction(delta),
            "margin": format_fraction(margin),
            "bound": format_fraction(bound),
            "values": {k: format_fraction(v)
                       for k, v in sorted(values.items())},
        }
        for name in params:
            param_values.append((f"{mid}.{name}", values[name]))
        diagnostics.append((f"invariant[{mid}]", format_poly(t_state)))
    for mid in sorted(design.get("intervals", {})):
        spec = design["intervals"][mid]
        lo = parse_fraction(spec["lo"])
        hi = parse_fraction(spec["hi"])
        flow_lo, flow_hi = _interval_flow(h, mid, spec, lo, hi)
        domains[mid] = _interval_formula(spec, (lo, hi))
        certificates[mid] = _interval_cert_json(spec, lo, hi, flow_lo, flow_hi)
    missing = [m.id for m in h.modes if m.id not in domains]
    if missing:
        raise ModelError(f"design document covers no template for {missing}")
    guards = refine_guards(h, domains)
    for mid in sorted(design.get("intervals", {})):
        spec = design["intervals"][mid]
        lo = parse_fraction(spec["lo"])
        hi = parse_fraction(spec["hi"])
        flow_lo, flow_hi = _interval_flow(h, mid, spec, lo, hi)
        _check_interval_exits(h, mid, spec, lo, hi, flow_lo, flow_hi, guards)
    ra = _finish_refinement(h, domains, certificates, seed)
    report = SolveReport("dsos", tuple(param_values), "certified",
                         tuple(diagnostics))
    return ra, report


def recheck_dsos_certificate(h: HybridAutomaton, mid: str,
                             cert: Mapping) -> list:
    """Re-derive the identity structure from the model and check the
    stored values exactly: zero residuals, diagonal dominance, and the
    exit point rows.  Returns a list of problems (empty = valid)."""
    problems = []
    clock = cert["clockVar"]
    (yvar, cspec), = cert["coordinate"].items()
    m = h.mode(mid)
    cidx = h.state_vars.index(clock)
    sidx = h.state_vars.index(cspec["var"])
    direction = m.flow.components[cidx].constant_value()
    center = parse_fraction(cspec["center"])
    halfwidth = parse_fraction(cspec["halfwidth"])
    scaled_state = Polynomial.var(yvar) * halfwidth + center
    fy = m.flow.components[sidx].substitute(
        {cspec["var"]: scaled_state}) * (1 / halfwidth)
    entry = {k: parse_fraction(v) for k, v in cert["entry"].items()}
    exit_spec = {k: parse_fraction(v) for k, v in cert["exit"].items()}
    eps = parse_fraction(cert["epsilon"])
    delta = parse_fraction(cert["delta"])
    margin = parse_fraction(cert["margin"])
    bound = parse_fraction(cert["bound"])
    _, _, t_lin, blocks, identities = _dsos_structure(
        direction, fy, clock, yvar, entry, exit_spec,
        eps, delta, margin, bound)
    values = {k: parse_fraction(v) for k, v in cert["values"].items()}
    for diff, prefixes in identities:
        if diff.instantiate(values).terms:
            problems.append(f"{mid}: nonzero residual in identity "
                            f"{'/'.join(prefixes)}")
    from .sosrelax import extract_gram
    for prefix, basis in blocks:
        gram = extract_gram(values, prefix, basis)
        if not gram.is_diagonally_dominant():
            problems.append(f"{mid}: Gram block {prefix} not diagonally "
                            "dominant")
    t_poly = t_lin.instantiate(values)
    t_y = t_poly.diff(yvar)
    pt = {clock: exit_spec["clock"], yvar: exit_spec["y"]}
    if t_poly.evaluate(pt) > -delta - margin:
        problems.append(f"{mid}: exit value row violated")
    if exit_spec["side"] * t_y.evaluate(pt) < margin:
        problems.append(f"{mid}: exit slope row violated")
    return problems


def recheck_certificate(ra: RefinedAutomaton, mid: str) -> list:
    """Exact re-verification of one mode's stored certificate; returns a
    list of problems (empty = valid)."""
    cert = ra.certificate(mid)
    if cert is None:
        return []
    kind = cert.get("type")
    if kind == "farkas":
        poly = Polyhedron(
            tuple(tuple(parse_fraction(x) for x in row)
                  for row in cert["directions"]),
            tuple(parse_fraction(x) for x in cert["rho"]))
        mode = AffineMode(
            tuple(tuple(parse_fraction(x) for x in row)
                  for row in cert["aMatrix"]),
            tuple(parse_fraction(x) for x in cert["bVector"]),
            tuple((tuple(parse_fraction(x) for x in row), parse_fraction(a))
                  for row, a in cert["domain"]))
        fc = FarkasCertificate(
            tuple(tuple(parse_fraction(x) for x in row) for row in cert["h"]),
            tuple(parse_fraction(x) for x in cert["eta"]),
            tuple(tuple(parse_fraction(x) for x in row) for row in cert["xi"]),
            tuple(parse_fraction(x) for x in cert["lam"]))
        if not verify_certificate(poly, mode, fc):
            return [f"{mid}: Farkas certificate failed exact re-check"]
        return []
    if kind == "interval":
        lo = parse_fraction(cert["lo"])
        hi = parse_fraction(cert["hi"])
        spec = {"fix": cert["fix"], "var": cert["var"]}
        flow_lo, flow_hi = _interval_flow(ra.base, mid, spec, lo, hi)
        problems = []
        if flow_lo != parse_fraction(cert["flowAtLo"]) or \
                flow_hi != parse_fraction(cert["flowAtHi"]):
            problems.append(f"{mid}: stored interval flow values are stale")
        guards = dict(ra.refined_guards)
        try:
            _check_interval_exits(ra.base, mid, spec, lo, hi,
                                  flow_lo, flow_hi, guards)
        except SynthesisFailure as exc:
            problems.append(str(exc))
        return problems
    if kind == "dsos":
        return recheck_dsos_certificate(ra.base, mid, cert)
    return [f"{mid}: unknown certificate type {kind!r}"]


# ----------------------------------------------------------------------
# Orchestration
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SynthOptions:
    seed: int = 0
    max_rounds: int = 12
    samples_per_round: int = 2000
    param_box: Mapping | None = None
    state_box: Mapping | None = None
    n_cap: int = 3


def _default_param_box(params) -> dict:
    return {p: (Fraction(-1000), Fraction(1000)) for p in params}


def synthesize(h: HybridAutomaton, templates, backend: str,
               options: SynthOptions | None = None) -> tuple:
    """Run the full pipeline with the chosen backend.

    ``templates`` is a TemplateSet for the cegis backend and a design
    document (parsed JSON dict) for the polyhedra and dsos backends.
    Returns (RefinedAutomaton or None, SolveReport).
    """
    options = options or SynthOptions()
    if backend not in BACKENDS:
        raise ModelError(f"unknown backend {backend!r}")
    if backend == "polyhedra":
        try:
            return solve_polyhedra(h, templates, options.seed)
        except SynthesisFailure as exc:
            return None, SolveReport("polyhedra", (), "failed",
                                     (("reason", str(exc)),))
    if backend == "dsos":
        try:
            return solve_dsos(h, templates, options.seed)
        except SynthesisFailure as exc:
            return None, SolveReport("dsos", (), "failed",
                                     (("reason", str(exc)),))
    if not isinstance(templates, TemplateSet):
        raise ModelError("cegis backend needs a template set")
    constraint = derive_constraints(h, templates, n_cap=options.n_cap)
    box = options.param_box or _default_param_box(constraint.params)
    report = cegis_solve(constraint, box,
                         (options.max_rounds, options.samples_per_round),
                         options.seed, state_box=options.state_box)
    if report.status == "failed":
        return None, report
    ra = instantiate_and_check(h, templates, report.params_dict(),
                               seed=options.seed)
    return ra, report


# ----------------------------------------------------------------------
# Controller document
# ----------------------------------------------------------------------

def controller_to_json(ra: RefinedAutomaton, report: SolveReport,
                       seed: int = 0) -> dict:
    return {
        "automaton": automaton_to_json(ra.base),
        "refinedDomains": {mid: formula_to_json(f)
                           for mid, f in ra.refined_domains},
        "refinedGuards": [{"from": s, "to": t, "guard": formula_to_json(f)}
                          for (s, t), f in ra.refined_guards],
        "certificates": {mid: cert for mid, cert in ra.certificates},
        "witness": {"mode": ra.witness[0],
                    "point": {v: format_fraction(x)
                              for v, x in sorted(ra.witness[1].items())}},
        "report": {
            "backend": report.backend,
            "paramValues": {k: format_fraction(v)
                            for k, v in report.param_values},
            "status": report.status,
            "diagnostics": _json_safe(dict(report.diagnostics)),
        },
        "seed": seed,
    }


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, Fraction):
        return format_fraction(obj)
    return obj


def serialize_controller(ra: RefinedAutomaton, report: SolveReport,
                         seed: int = 0) -> str:
    return json.dumps(controller_to_json(ra, report, seed),
                      indent=2, sort_keys=True) + "\n"


def controller_from_json(doc: Mapping) -> tuple:
    """(RefinedAutomaton, report dict, seed) from a controller document."""
    try:
        h = automaton_from_json(doc["automaton"])
        domains = tuple(sorted(
            (mid, formula_from_json(f))
            for mid, f in doc["refinedDomains"].items()))
        guards = tuple(sorted(
            ((e["from"], e["to"]), formula_from_json(e["guard"]))
            for e in doc["refinedGuards"]))
        certificates = tuple(sorted(doc.get("certificates", {}).items()))
        wit = doc["witness"]
        witness = (wit["mode"], {v: parse_fraction(x)
                                 for v, x in wit["point"].items()})
        report = doc.get("report", {})
        seed = int(doc.get("seed", 0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed controller document: {exc}") from None
    ra = RefinedAutomaton(h, domains, guards, certificates, witness)
    return ra, report, seed


def parse_controller(text: str) -> tuple:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(
            f"controller document is not valid JSON: {exc}") from None
    return controller_from_json(doc)
