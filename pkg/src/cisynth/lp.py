"""Exact-rational linear programming.

Two-phase primal simplex over Fraction with Bland's anti-cycling rule.
Infeasible outcomes carry Farkas multipliers; unbounded outcomes carry an
improving ray.  No floating point anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class Constraint:
    coeffs: dict  # var -> Fraction
    rel: str  # "<=", "=", ">="
    rhs: Fraction

    def residual(self, assignment: Mapping[str, Fraction]) -> Fraction:
        """Non-negative-when-satisfied residual (zero for equalities)."""
        lhs = sum((Fraction(c) * Fraction(assignment[v])
                   for v, c in self.coeffs.items()), Fraction(0))
        if self.rel == "<=":
            return Fraction(self.rhs) - lhs
        if self.rel == ">=":
            return lhs - Fraction(self.rhs)
        return lhs - Fraction(self.rhs)

    def satisfied(self, assignment: Mapping[str, Fraction]) -> bool:
        r = self.residual(assignment)
        return r == 0 if self.rel == "=" else r >= 0


@dataclass
class LinearProgram:
    variables: list
    constraints: list = field(default_factory=list)
    objective: dict | None = None  # var -> Fraction
    sense: str = "max"

    def declare(self, name: str) -> str:
        if name not in self._index():
            self.variables.append(name)
            self._index_cache.add(name)
        return name

    def _index(self) -> set:
        cache = getattr(self, "_index_cache", None)
        if cache is None or len(cache) != len(self.variables):
            cache = set(self.variables)
            self._index_cache = cache
        return cache

    def add(self, coeffs: Mapping[str, "Fraction | int"], rel: str, rhs) -> None:
        if rel not in ("<=", "=", ">="):
            raise ValueError(f"bad relation {rel!r}")
        clean = {v: Fraction(c) for v, c in coeffs.items() if Fraction(c)}
        index = self._index()
        for v in clean:
            if v not in index:
                raise ValueError(f"undeclared variable {v!r}")
        self.constraints.append(Constraint(clean, rel, Fraction(rhs)))

    def set_objective(self, coeffs: Mapping[str, "Fraction | int"], sense: str = "max"):
        if sense not in ("max", "min"):
            raise ValueError(f"bad sense {sense!r}")
        self.objective = {v: Fraction(c) for v, c in coeffs.items()}
        self.sense = sense


@dataclass(frozen=True)
class LpOutcome:
    status: str
    assignment: dict | None = None
    objective_value: Fraction | None = None
    farkas: list | None = None  # one multiplier per constraint
    ray: dict | None = None
    pivots: int = 0


def check_feasible_point(lp: LinearProgram, assignment: Mapping) -> bool:
    for v in lp.variables:
        if v not in assignment:
            raise KeyError(f"unbound variable {v!r}")
    return all(c.satisfied(assignment) for c in lp.constraints)


class _Tableau:
    """Full-tableau simplex core on exact rationals."""

    def __init__(self, rows, rhs, ncols):
        self.rows = rows  # list of lists of Fraction, length ncols
        self.rhs = rhs
        self.ncols = ncols
        self.basis = []  # column index basic in each row
        self.pivots = 0

    def pivot(self, r: int, c: int):
        piv = self.rows[r][c]
        inv = Fraction(1) / piv
        self.rows[r] = [x * inv for x in self.rows[r]]
        self.rhs[r] *= inv
        for i in range(len(self.rows)):
            if i == r:
                continue
            factor = self.rows[i][c]
            if factor:
                row_r = self.rows[r]
                self.rows[i] = [a - factor * b for a, b in zip(self.rows[i], row_r)]
                self.rhs[i] -= factor * self.rhs[r]
        self.basis[r] = c
        self.pivots += 1

    def reduced_costs(self, cost):
        # c_j - c_B . T[:, j] for every column
        cb = [cost[b] for b in self.basis]
        out = []
        for j in range(self.ncols):
            acc = cost[j]
            for i, cbi in enumerate(cb):
                if cbi:
                    acc -= cbi * self.rows[i][j]
            out.append(acc)
        return out

    def objective_value(self, cost):
        return sum((cost[b] * self.rhs[i] for i, b in enumerate(self.basis)),
                   Fraction(0))

    def simplex_min(self, cost, allowed):
        """Minimize cost over the current basis; Bland's rule.

        Returns "optimal" or ("unbounded", entering_column).
        """
        while True:
            red = self.reduced_costs(cost)
            enter = None
            for j in range(self.ncols):
                if allowed[j] and red[j] < 0:
                    enter = j
                    break
            if enter is None:
                return "optimal", None
            leave = None
            best = None
            for i in range(len(self.rows)):
                a = self.rows[i][enter]
                if a > 0:
                    ratio = self.rhs[i] / a
                    key = (ratio, self.basis[i])
                    if best is None or key < best:
                        best = key
                        leave = i
            if leave is None:
                return "unbounded", enter
            self.pivot(leave, enter)


def _build_system(lp: LinearProgram):
    """Standard-form data shared by the exact and float paths."""
    m = len(lp.constraints)
    nvars = len(lp.variables)
    var_index = {v: i for i, v in enumerate(lp.variables)}

    # columns: u_j, w_j (x_j = u_j - w_j), one slack per inequality, one
    # artificial per row
    slack_of = {}
    ncols = 2 * nvars
    for i, c in enumerate(lp.constraints):
        if c.rel in ("<=", ">="):
            slack_of[i] = ncols
            ncols += 1
    art0 = ncols
    ncols += m

    rows = []
    rhs = []
    sigma = []
    for i, c in enumerate(lp.constraints):
        row = [Fraction(0)] * ncols
        for v, coef in c.coeffs.items():
            j = var_index[v]
            row[2 * j] = coef
            row[2 * j + 1] = -coef
        if c.rel == "<=":
            row[slack_of[i]] = Fraction(1)
        elif c.rel == ">=":
            row[slack_of[i]] = Fraction(-1)
        b = Fraction(c.rhs)
        s = 1
        if b < 0:
            s = -1
            row = [-x for x in row]
            b = -b
        row[art0 + i] = Fraction(1)
        rows.append(row)
        rhs.append(b)
        sigma.append(s)
    return rows, rhs, sigma, slack_of, art0, ncols


def solve_lp(lp: LinearProgram) -> LpOutcome:
    m = len(lp.constraints)
    nvars = len(lp.variables)
    var_index = {v: i for i, v in enumerate(lp.variables)}
    rows, rhs, sigma, slack_of, art0, ncols = _build_system(lp)

    tab = _Tableau(rows, rhs, ncols)
    tab.basis = [art0 + i for i in range(m)]

    # phase 1
    cost1 = [Fraction(0)] * ncols
    for i in range(m):
        cost1[art0 + i] = Fraction(1)
    allowed = [True] * ncols
    tab.simplex_min(cost1, allowed)
    if tab.objective_value(cost1) > 0:
        farkas = _extract_farkas(lp, tab, cost1, art0, sigma, slack_of)
        return LpOutcome(INFEASIBLE, farkas=farkas, pivots=tab.pivots)

    # drive artificials out of the basis where possible
    for i in range(m):
        if tab.basis[i] >= art0:
            piv_col = next((j for j in range(art0) if tab.rows[i][j] != 0), None)
            if piv_col is not None:
                tab.pivot(i, piv_col)
    for j in range(art0, ncols):
        allowed[j] = False

    def extract(j_ray=None):
        vals = {v: Fraction(0) for v in lp.variables}
        for i, b in enumerate(tab.basis):
            if b < 2 * nvars:
                v = lp.variables[b // 2]
                vals[v] += tab.rhs[i] if b % 2 == 0 else -tab.rhs[i]
        return vals

    if lp.objective is None:
        return LpOutcome(FEASIBLE, assignment=extract(), pivots=tab.pivots)

    # phase 2: minimize -obj for max problems
    cost2 = [Fraction(0)] * ncols
    sgn = -1 if lp.sense == "max" else 1
    for v, coef in lp.objective.items():
        j = var_index[v]
        cost2[2 * j] = sgn * coef
        cost2[2 * j + 1] = -sgn * coef
    status, enter = tab.simplex_min(cost2, allowed)
    if status == "unbounded":
        ray = {v: Fraction(0) for v in lp.variables}
        if enter < 2 * nvars:
            v = lp.variables[enter // 2]
            ray[v] += Fraction(1) if enter % 2 == 0 else Fraction(-1)
        for i, b in enumerate(tab.basis):
            if b < 2 * nvars:
                v = lp.variables[b // 2]
                delta = -tab.rows[i][enter]
                ray[v] += delta if b % 2 == 0 else -delta
        return LpOutcome(UNBOUNDED, assignment=extract(), ray=ray,
                         pivots=tab.pivots)
    assignment = extract()
    value = sum((Fraction(c) * assignment[v] for v, c in lp.objective.items()),
                Fraction(0))
    return LpOutcome(OPTIMAL, assignment=assignment, objective_value=value,
                     pivots=tab.pivots)


def _extract_farkas(lp, tab, cost1, art0, sigma, slack_of):
    """Multipliers m_i with sum m_i * residual_i identically negative.

    m_i >= 0 for inequalities, free sign for equalities.
    """
    m = len(lp.constraints)
    cb = [cost1[b] for b in tab.basis]
    y = []
    for i in range(m):
        acc = Fraction(0)
        for r in range(m):
            if cb[r]:
                acc += cb[r] * tab.rows[r][art0 + i]
        y.append(acc)
    mult = []
    for i, c in enumerate(lp.constraints):
        t = y[i] * sigma[i]
        if c.rel == "<=":
            mult.append(-t)
        else:
            mult.append(t)
    return mult


def verify_farkas(lp: LinearProgram, mult: Sequence[Fraction]) -> bool:
    """Check the combination identity: the weighted sum of residuals is a
    negative constant, with non-negative weights on inequalities."""
    combo: dict[str, Fraction] = {}
    const = Fraction(0)
    for c, m in zip(lp.constraints, mult):
        if c.rel in ("<=", ">=") and m < 0:
            return False
        # residual = sign*(a.x) + sign*(-rhs), oriented ">= 0"
        s = Fraction(-1) if c.rel == "<=" else Fraction(1)
        for v, coef in c.coeffs.items():
            combo[v] = combo.get(v, Fraction(0)) + m * s * coef
        const += m * (-s) * Fraction(c.rhs)
    if any(x != 0 for x in combo.values()):
        return False
    return const < 0


def dump_tableau(lp: LinearProgram) -> str:
    """Plain text rendering for debugging."""
    lines = ["vars: " + " ".join(lp.variables)]
    for c in lp.constraints:
        terms = " + ".join(f"{coef}*{v}" for v, coef in sorted(c.coeffs.items()))
        lines.append(f"  {terms or '0'} {c.rel} {c.rhs}")
    if lp.objective is not None:
        terms = " + ".join(f"{coef}*{v}" for v, coef in sorted(lp.objective.items()))
        lines.append(f"  {lp.sense} {terms or '0'}")
    return "\n".join(lines) + "\n"
