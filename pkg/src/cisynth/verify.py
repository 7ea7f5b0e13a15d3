"""Independent checking of synthesized controllers.

* ``simulate``              -- hybrid trajectory semantics with event
                               detection (safety and non-blocking);
* ``boundary_sample_check`` -- exact criterion checks at rational points
                               snapped onto invariant facets;
* ``falsify``               -- dense + randomized exact evaluation of a
                               synthesis constraint;
* ``export_smtlib2`` / ``export_qepcad`` -- external-solver exports.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .criterion import SynthesisConstraint, ci_check_point
from .poly import Polynomial, VectorField, format_fraction
from .sets import And, Atom, Or, conjuncts, holds, is_conjunctive
from .synth import RefinedAutomaton, _atom_bound, constraint_box, formula_box, \
    grid_points, random_point

GUARD_TOL = 1e-9          # event bisection tolerance (time units)
MEMBERSHIP_TOL = 1e-6     # numeric set-membership slack
ZENO_JUMPS = 1000         # jumps per unit time flagged as suspected Zeno


# ----------------------------------------------------------------------
# Trajectory types
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class HybridTimeSet:
    intervals: tuple  # ((tau_i, tau'_i), ...), adjacent, tau_0 = 0
    last_open: bool


@dataclass(frozen=True)
class JumpRecord:
    source: str
    target: str
    time: float
    state: tuple


@dataclass(frozen=True)
class HybridTrajectory:
    variables: tuple
    time_set: HybridTimeSet
    mode_seq: tuple    # mode id per interval
    state_seq: tuple   # per interval: tuple of (t, state tuple)
    events: tuple      # JumpRecord per jump


@dataclass(frozen=True)
class SimOutcome:
    status: str              # ranToHorizon | blocked | leftSafe | numericalFailure
    witness: tuple | None    # (time, mode, state) of the first violation
    jumps: int
    suspected_zeno: bool = False


# ----------------------------------------------------------------------
# Numeric compilation
# ----------------------------------------------------------------------

def _poly_src(p: Polynomial, names: Mapping) -> str:
    parts = []
    for m, c in sorted(p.terms.items()):
        factors = [repr(float(c))]
        for v, e in m:
            factors.extend([names[v]] * e)
        parts.append("*".join(factors))
    return "(" + " + ".join(parts) + ")" if parts else "0.0"


def compile_flow(field: VectorField):
    """RK4 stepper for a polynomial field, generated as one function."""
    n = len(field.variables)
    lines = ["def _step(s, h):"]
    names = {v: f"s[{i}]" for i, v in enumerate(field.variables)}
    for stage, factor in ((1, "0.5*h"), (2, "0.5*h"), (3, "h"), (4, None)):
        for i in range(n):
            lines.append(f"    k{stage}_{i} = "
                         + _poly_src(field.components[i], names))
        if factor is not None:
            for i in range(n):
                lines.append(
                    f"    m{stage}_{i} = s[{i}] + {factor}*k{stage}_{i}")
            names = {v: f"m{stage}_{i}"
                     for i, v in enumerate(field.variables)}
    ret = ", ".join(
        f"s[{i}] + h/6.0*(k1_{i} + 2.0*k2_{i} + 2.0*k3_{i} + k4_{i})"
        for i in range(n))
    lines.append(f"    return ({ret}{',' if n == 1 else ''})")
    ns: dict = {}
    exec("\n".join(lines), ns)
    return ns["_step"]


def _formula_pred(formula, var_index):
    """formula -> f(state tuple, tol, eq_tol) -> bool; inequalities are
    relaxed by tol, equalities by eq_tol (clock equalities need a looser
    band than inequality crossings)."""
    if isinstance(formula, Atom):
        names = {v: f"s[{i}]" for v, i in var_index.items()}
        src = _poly_src(formula.poly, names)
        if formula.rel in ("<=", "<"):
            body = f"{src} <= tol"
        elif formula.rel in (">=", ">"):
            body = f"{src} >= -tol"
        else:
            body = f"abs({src}) <= eq_tol"
        ns: dict = {}
        exec(f"def _a(s, tol, eq_tol):\n    return {body}", ns)
        return ns["_a"]
    preds = [_formula_pred(c, var_index) for c in formula.children]
    if isinstance(formula, And):
        return lambda s, tol, eq_tol: all(p(s, tol, eq_tol) for p in preds)
    return lambda s, tol, eq_tol: any(p(s, tol, eq_tol) for p in preds)


def _equality_event(formula, var_index):
    """Signed event function from the first equality atom of a guard, or
    None when the guard has no equality atom."""
    for a in conjuncts(formula) if is_conjunctive(formula) else []:
        if isinstance(a, Atom) and a.rel == "=":
            names = {v: f"s[{i}]" for v, i in var_index.items()}
            ns: dict = {}
            exec(f"def _e(s):\n    return {_poly_src(a.poly, names)}", ns)
            return ns["_e"]
    return None


# ----------------------------------------------------------------------
# Simulation
# ----------------------------------------------------------------------

class _CompiledController:
    def __init__(self, ra: RefinedAutomaton):
        self.ra = ra
        h = ra.base
        self.variables = h.state_vars
        self.var_index = {v: i for i, v in enumerate(h.state_vars)}
        self.flow = {m.id: compile_flow(m.flow) for m in h.modes}
        self.domain = {mid: _formula_pred(f, self.var_index)
                       for mid, f in ra.refined_domains}
        self.safe = {m.id: _formula_pred(m.safe, self.var_index)
                     for m in h.modes}
        self.edges = {}
        for (src, tgt), g in ra.refined_guards:
            self.edges.setdefault(src, []).append(
                (src, tgt, _formula_pred(g, self.var_index),
                 _equality_event(g, self.var_index)))
        # canonical order: the base automaton's edge order
        order = {(e.source, e.target): i for i, e in enumerate(h.edges)}
        for src in self.edges:
            self.edges[src].sort(key=lambda e: order[(e[0], e[1])])


def _edge_enabled(edge, s):
    _, _, pred, _ = edge
    return pred(s, GUARD_TOL, MEMBERSHIP_TOL)


def _bisect_event(step_fn, s0, h, event, pred):
    """Earliest fraction lam in (0, 1] of an RK4 step of size h at which
    the guard becomes enabled; bisection down to GUARD_TOL in time.
    Returns None when the guard stays disabled over the whole step."""
    if event is not None and abs(event(s0)) > MEMBERSHIP_TOL:
        # the guard's equality atom is away from zero: root-find its
        # crossing, then confirm the full guard there
        v0 = event(s0)
        v1 = event(step_fn(s0, h))
        if v0 * v1 > 0.0:
            return None
        lo, hi = 0.0, 1.0
        while (hi - lo) * h > GUARD_TOL:
            mid = 0.5 * (lo + hi)
            if v0 * event(step_fn(s0, h * mid)) > 0.0:
                lo = mid
            else:
                hi = mid
        if pred(step_fn(s0, h * hi), GUARD_TOL, MEMBERSHIP_TOL):
            return hi
        return None
    # equality atom already parked at zero (or no equality atom):
    # boolean bisection on full enabledness
    def enabled(lam):
        return pred(step_fn(s0, h * lam), GUARD_TOL, MEMBERSHIP_TOL)

    if not enabled(1.0):
        return None
    lo, hi = 0.0, 1.0
    while (hi - lo) * h > GUARD_TOL:
        mid = 0.5 * (lo + hi)
        if enabled(mid):
            hi = mid
        else:
            lo = mid
    return hi


def simulate(ra: RefinedAutomaton, q0: str, x0: Mapping, horizon: float,
             dt: float, seed: int = 0) -> tuple:
    """Deterministic hybrid simulation under the first-enabled-edge jump
    policy.  Returns (HybridTrajectory, SimOutcome)."""
    del seed  # accepted for interface stability; the policy is deterministic
    cc = _CompiledController(ra)
    state = tuple(float(Fraction(x0[v])) for v in cc.variables)
    if not cc.domain[q0](state, MEMBERSHIP_TOL, MEMBERSHIP_TOL):
        raise ValueError(f"initial state is outside the refined domain "
                         f"of mode {q0!r}")
    mode = q0
    t = 0.0
    intervals = []
    mode_seq = []
    state_seq = []
    events = []
    jump_times: list = []
    cur_start = 0.0
    cur_path = [(0.0, state)]

    def close_interval(end):
        intervals.append((cur_start, end))
        mode_seq.append(mode)
        state_seq.append(tuple(cur_path))

    def outcome(status, witness=None, zeno=False):
        close_interval(t)
        traj = HybridTrajectory(
            cc.variables,
            HybridTimeSet(tuple(intervals), last_open=status != "ranToHorizon"),
            tuple(mode_seq), tuple(state_seq), tuple(events))
        return traj, SimOutcome(status, witness, len(events), zeno)

    def do_jump(edge):
        nonlocal mode, cur_start, cur_path
        src, tgt, _, _ = edge
        events.append(JumpRecord(src, tgt, t, state))
        jump_times.append(t)
        close_interval(t)
        mode = tgt
        cur_start = t
        cur_path = [(t, state)]
        return (len(jump_times) > ZENO_JUMPS
                and t - jump_times[-ZENO_JUMPS - 1] < 1.0)

    while t < horizon - 1e-12:
        # eager policy: take the first enabled refined guard right away
        jumped = False
        for edge in cc.edges.get(mode, []):
            if _edge_enabled(edge, state):
                if do_jump(edge):
                    return outcome("numericalFailure", (t, mode, state),
                                   zeno=True)
                jumped = True
                break
        if jumped:
            continue
        h = min(dt, horizon - t)
        step_fn = cc.flow[mode]
        s1 = step_fn(state, h)
        if not all(math.isfinite(v) for v in s1):
            return outcome("numericalFailure", (t, mode, state))
        # earliest guard crossing inside the step, canonical edge order
        best = None
        for edge in cc.edges.get(mode, []):
            _, _, pred, event = edge
            lam = _bisect_event(step_fn, state, h, event, pred)
            if lam is not None and (best is None or lam < best[0] - 1e-15):
                best = (lam, edge)
        if best is not None:
            lam, edge = best
            state = step_fn(state, h * lam)
            t += h * lam
            cur_path.append((t, state))
            if do_jump(edge):
                return outcome("numericalFailure", (t, mode, state),
                               zeno=True)
            continue
        state = s1
        t += h
        cur_path.append((t, state))
        if not cc.safe[mode](state, MEMBERSHIP_TOL, MEMBERSHIP_TOL):
            return outcome("leftSafe", (t, mode, state))
        if not cc.domain[mode](state, MEMBERSHIP_TOL, MEMBERSHIP_TOL):
            return outcome("blocked", (t, mode, state))
    return outcome("ranToHorizon")


def trajectory_csv(traj: HybridTrajectory) -> str:
    lines = ["t,mode," + ",".join(traj.variables)]
    for mode, path in zip(traj.mode_seq, traj.state_seq):
        for t, s in path:
            lines.append(f"{t!r},{mode}," + ",".join(repr(v) for v in s))
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# Boundary sampling
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryReport:
    holds: int
    vacuous: int
    fails: int
    witnesses: tuple  # ((facet index, point), ...) for failures

    @property
    def total(self) -> int:
        return self.holds + self.vacuous + self.fails


def _snap_to_facet(atom: Atom, others: Mapping):
    got = _snap_to_facet_var(atom, others)
    return got[0] if got else None


def _snap_to_facet_var(atom: Atom, others: Mapping):
    """Solve the facet atom for one coordinate it is linear in; returns
    (exact rational point, solved variable) or None."""
    for v in sorted(atom.poly.variables()):
        deg = max((e for m in atom.poly.terms for w, e in m if w == v),
                  default=0)
        if deg != 1:
            continue
        coef = Fraction(0)
        rest = Fraction(0)
        ok = True
        for m, c in atom.poly.terms.items():
            val = c
            has_v = False
            for w, e in m:
                if w == v:
                    has_v = True
                else:
                    if w not in others:
                        ok = False
                        break
                    val *= Fraction(others[w]) ** e
            if not ok:
                break
            if has_v:
                coef += val
            else:
                rest += val
        if not ok or coef == 0:
            continue
        pt = dict(others)
        pt[v] = -rest / coef
        return pt, v
    return None


def boundary_sample_check(dprime, f: VectorField, region, n_samples: int,
                          seed: int = 0) -> BoundaryReport:
    """Sample rational points on each facet of a conjunctive set and run
    the exact single-point criterion against the progress region."""
    facet_atoms = [a for a in conjuncts(dprime) if isinstance(a, Atom)]
    if not facet_atoms:
        return BoundaryReport(0, 0, 0, ())
    all_vars = set(f.variables)
    for a in facet_atoms:
        all_vars |= a.poly.variables()
    box = formula_box(dprime, sorted(all_vars))
    rng = random.Random(seed)
    per_facet = max(1, n_samples // len(facet_atoms))
    n_holds = n_vac = n_fail = 0
    witnesses = []
    probe = {v: (Fraction(box[v][0]) + Fraction(box[v][1])) / 2
             for v in box}
    for fi, atom in enumerate(facet_atoms):
        got = _snap_to_facet_var(atom, probe)
        free = sorted(v for v in all_vars
                      if got is None or v != got[1])
        free_box = {v: box[v] for v in free}
        grid = grid_points(free_box,
                           max(2, int(round(per_facet ** (1 / max(len(free), 1))))))
        k = 0
        while len(grid) < per_facet and k < per_facet * 4:
            grid.append(random_point(free_box, rng))
            k += 1
        for others in grid[:per_facet]:
            pt = _snap_to_facet(atom, others)
            if pt is None:
                n_vac += 1
                continue
            rest = And(tuple(a for j, a in enumerate(facet_atoms) if j != fi))
            if not holds(rest, pt):
                n_vac += 1
                continue
            if atom.rel == "<=":
                polys = [-atom.poly]
            elif atom.rel == ">=":
                polys = [atom.poly]
            else:
                polys = [atom.poly, -atom.poly]
            verdicts = [ci_check_point(p, f, pt, region) for p in polys]
            if "fails" in verdicts:
                n_fail += 1
                witnesses.append((fi, tuple(sorted(
                    (v, format_fraction(Fraction(x))) for v, x in pt.items()))))
            elif "holds" in verdicts:
                n_holds += 1
            else:
                n_vac += 1
    return BoundaryReport(n_holds, n_vac, n_fail, tuple(witnesses))


# ----------------------------------------------------------------------
# Falsification
# ----------------------------------------------------------------------

def _directed_points(c: SynthesisConstraint, box: Mapping) -> list:
    """Premise-directed candidates: per variable, the box ends, midpoint
    and every bound induced by a univariate linear premise atom; combined
    as a cross product (capped)."""
    values: dict[str, list] = {}
    for v, (lo, hi) in box.items():
        values[v] = [lo, (lo + hi) / 2, hi]
    for cl in c.clauses:
        for a in cl.premise:
            got = _atom_bound(a)
            if got is None:
                continue
            v, lo, hi = got
            for val in (lo, hi):
                if val is None or v not in values:
                    continue
                blo, bhi = box[v]
                if blo <= val <= bhi and val not in values[v]:
                    values[v].append(val)
    names = sorted(values)
    pts = [{}]
    for v in names:
        pts = [dict(p, **{v: val}) for p in pts for val in sorted(set(values[v]))]
        if len(pts) > 20000:
            break
    return pts


def _facet_directed_points(c: SynthesisConstraint, box: Mapping,
                           rng: random.Random, cap: int) -> list:
    """Points snapped exactly onto multivariate equality premise atoms
    (facet surfaces) -- where invariance clauses are live."""
    eq_atoms: dict = {}
    for cl in c.clauses:
        for a in cl.premise:
            if a.rel != "=" or len(a.poly.variables()) < 2:
                continue
            companions = eq_atoms.setdefault(str(a.poly), (a, []))[1]
            for b in cl.premise:
                if b is not a:
                    companions.append(b)
    if not eq_atoms:
        return []
    per = max(4, cap // len(eq_atoms))
    probe = {v: (Fraction(lo) + Fraction(hi)) / 2 for v, (lo, hi) in box.items()}
    out = []

    def in_box(pt):
        return all(box[v][0] <= pt[v] <= box[v][1] for v in pt if v in box)

    for a, companions in eq_atoms.values():
        got = _snap_to_facet_var(a, probe)
        solve_v = got[1] if got else None
        free_box = {v: box[v] for v in box if v != solve_v}
        n_free = max(len(free_box), 1)
        bases = grid_points(free_box,
                            max(2, int(round(per ** (1 / n_free)))))
        while len(bases) < per:
            bases.append(random_point(free_box, rng))
        for others in bases[:per]:
            pt = _snap_to_facet(a, others)
            if pt is not None and in_box(pt):
                out.append(pt)
        # corner ladders: where a companion premise bound goes tight, the
        # still-violating region can shrink toward a facet corner, so
        # sample geometrically refined offsets along the facet there
        for comp in companions:
            gb = _atom_bound(comp)
            if gb is None:
                continue
            v, lo, hi = gb
            for val in (lo, hi):
                if val is None:
                    continue
                if v == solve_v:
                    got2 = _snap_to_facet_var(a, {v: Fraction(val)})
                    if got2 is None:
                        continue
                    corner, axis = got2
                else:
                    others_c = {w: (Fraction(val) if w == v else probe[w])
                                for w in box if w != solve_v}
                    corner = _snap_to_facet(a, others_c)
                    if corner is None:
                        continue
                    axis = v
                if axis not in box:
                    continue
                span = Fraction(box[axis][1]) - Fraction(box[axis][0])
                base = {w: corner.get(w, probe[w])
                        for w in box if w != solve_v}
                for k in range(1, 15):
                    for sign in (1, -1):
                        others_l = dict(base)
                        others_l[axis] = corner[axis] + \
                            sign * span / Fraction(2) ** k
                        pt = _snap_to_facet(a, others_l)
                        if pt is not None and in_box(pt):
                            out.append(pt)
    return out


def falsify_report(c: SynthesisConstraint, params: Mapping, budget: int,
                   seed: int = 0, state_box: Mapping | None = None) -> tuple:
    """(counterexample or None, stats dict).  Samples: deterministic
    grid, then premise-directed points (bound- and facet-snapped), then
    seeded random rationals; every clause is evaluated exactly at every
    visited point."""
    inst = c.substitute_params(params) if params else c
    if inst.params:
        raise ValueError(f"unbound parameters {inst.params}")
    box = state_box or constraint_box(inst)
    rng = random.Random(seed)
    n = max(len(box), 1)
    per_axis = max(2, int(round((budget / 2) ** (1 / n))))
    points = grid_points(box, per_axis)
    points.extend(_directed_points(inst, box))
    points.extend(_facet_directed_points(inst, box, rng, budget // 4))
    while len(points) < budget:
        points.append(random_point(box, rng))
    stats = {"points": 0, "evaluations": 0, "clauses": len(inst.clauses)}
    for pt in points[:max(budget, len(points))]:
        stats["points"] += 1
        for cl in inst.clauses:
            stats["evaluations"] += 1
            if not cl.evaluate(pt):
                return pt, stats
    return None, stats


def falsify(c: SynthesisConstraint, params: Mapping, budget: int,
            seed: int = 0, state_box: Mapping | None = None):
    cex, _ = falsify_report(c, params, budget, seed, state_box)
    return cex


# ----------------------------------------------------------------------
# Exports
# ----------------------------------------------------------------------

def _smt_rat(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator) if x >= 0 else f"(- {-x.numerator})"
    if x >= 0:
        return f"(/ {x.numerator} {x.denominator})"
    return f"(- (/ {-x.numerator} {x.denominator}))"


def _smt_poly(p: Polynomial) -> str:
    if not p.terms:
        return "0"
    parts = []
    for m, c in sorted(p.terms.items()):
        factors = [_smt_rat(c)]
        for v, e in m:
            factors.extend([v] * e)
        parts.append(factors[0] if len(factors) == 1
                     else "(* " + " ".join(factors) + ")")
    if len(parts) == 1:
        return parts[0]
    return "(+ " + " ".join(parts) + ")"


_SMT_REL = {"<=": "<=", "<": "<", "=": "=", ">=": ">=", ">": ">"}


def _smt_atom(a: Atom) -> str:
    return f"({_SMT_REL[a.rel]} {_smt_poly(a.poly)} 0)"


def _smt_clause(cl) -> str:
    prem = [_smt_atom(a) for a in cl.premise]
    concs = []
    for conj in cl.conclusion:
        parts = [_smt_atom(a) for a in conj]
        concs.append(parts[0] if len(parts) == 1
                     else "(and " + " ".join(parts) + ")")
    if not concs:
        conc = "false"
    elif len(concs) == 1:
        conc = concs[0]
    else:
        conc = "(or " + " ".join(concs) + ")"
    if not prem:
        return conc
    p = prem[0] if len(prem) == 1 else "(and " + " ".join(prem) + ")"
    return f"(=> {p} {conc})"


def export_smtlib2(c: SynthesisConstraint, params: Mapping | None = None) -> str:
    """SMT-LIB2 script over NRA.  With parameters bound the script
    asserts the negation of the universal formula (expected unsat);
    without, it poses the exists-forall synthesis query."""
    inst = c.substitute_params(params) if params else c
    clauses = [_smt_clause(cl) for cl in inst.clauses]
    body = "true" if not clauses else (
        clauses[0] if len(clauses) == 1
        else "(and\n    " + "\n    ".join(clauses) + ")")
    state_binds = " ".join(f"({v} Real)" for v in sorted(inst.state_vars))
    lines = ["(set-logic NRA)",
             f"; clauses: {len(inst.clauses)}"]
    if inst.params:
        param_binds = " ".join(f"({p} Real)" for p in sorted(inst.params))
        lines.append(f"(assert (exists ({param_binds}) "
                     f"(forall ({state_binds})\n  {body})))")
    else:
        lines.append(f"(assert (not (forall ({state_binds})\n  {body})))")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


def _qepcad_poly(p: Polynomial) -> str:
    denom = 1
    for c in p.terms.values():
        denom = denom * c.denominator // math.gcd(denom, c.denominator)
    scaled = p * denom
    parts = []
    for m, c in sorted(scaled.terms.items()):
        factors = []
        cc = int(c)
        if cc != 1 or not m:
            factors.append(str(cc) if cc >= 0 else f"({cc})")
        for v, e in m:
            factors.append(v if e == 1 else f"{v}^{e}")
        parts.append(" ".join(factors))
    return " + ".join(parts) if parts else "0"


def _qepcad_atom(a: Atom) -> str:
    return f"{_qepcad_poly(a.poly)} {a.rel} 0"


def export_qepcad(c: SynthesisConstraint) -> str:
    """QEPCAD input with an (E params)(A state) quantifier prefix."""
    clause_texts = []
    for cl in c.clauses:
        prem = r" /\ ".join(f"[{_qepcad_atom(a)}]" for a in cl.premise)
        concs = []
        for conj in cl.conclusion:
            concs.append(r" /\ ".join(f"[{_qepcad_atom(a)}]" for a in conj))
        conc = r" \/ ".join(f"[{t}]" for t in concs) if concs else "[0 > 0]"
        if prem:
            clause_texts.append(f"[[{prem}] ==> [{conc}]]")
        else:
            clause_texts.append(f"[{conc}]")
    body = r" /\ ".join(clause_texts) if clause_texts else "[0 = 0]"
    variables = list(c.params) + sorted(c.state_vars)
    prefix = "".join(f"(E {p})" for p in c.params) \
        + "".join(f"(A {v})" for v in sorted(c.state_vars))
    return ("[ synthesized controller constraint ]\n"
            f"({', '.join(variables)})\n"
            "0\n"
            f"{prefix}[{body}].\n"
            "finish.\n")
