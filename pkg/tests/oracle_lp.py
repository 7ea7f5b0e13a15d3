"""Independent exact LP oracle: brute-force vertex enumeration.

Solves min c.x over exact rationals by intersecting every n-subset of
constraint boundaries and keeping the feasible vertices.  Requires the
instance to contain bounding-box rows for every variable, so the
feasible region is a polytope: nonempty implies it has a vertex, and the
problem is never unbounded.  Exponential, fine for <= 3 variables.
"""

from fractions import Fraction
from itertools import combinations


def _solve_square(rows, rhs):
    """Gaussian elimination over Fraction; None if singular."""
    n = len(rows)
    a = [list(r) + [rhs[i]] for i, r in enumerate(rows)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        inv = Fraction(1) / a[col][col]
        a[col] = [v * inv for v in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [v - f * w for v, w in zip(a[r], a[col])]
    return [a[r][n] for r in range(n)]


def feasible_point(x, rows, rels, rhs):
    for row, rel, b in zip(rows, rels, rhs):
        v = sum(c * xi for c, xi in zip(row, x))
        if rel == "<=" and v > b:
            return False
        if rel == ">=" and v < b:
            return False
        if rel == "=" and v != b:
            return False
    return True


def brute_force_lp(n, rows, rels, rhs, objective):
    """("optimal", value) or ("infeasible", None) for box-bounded
    instances."""
    m = len(rows)
    best = None
    for idx in combinations(range(m), n):
        sol = _solve_square([rows[i] for i in idx], [rhs[i] for i in idx])
        if sol is not None and feasible_point(sol, rows, rels, rhs):
            val = sum(c * xi for c, xi in zip(objective, sol))
            if best is None or val < best:
                best = val
    if best is None:
        return "infeasible", None
    return "optimal", best
