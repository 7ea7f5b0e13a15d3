"""Polyhedral continuous invariants for affine modes.

A template polyhedron Qx <= rho has fixed facet directions Q and synthesized
offsets rho.  Invariance is certified by an essentially non-negative matrix
H together with non-negative multipliers (eta, xi, lambda): the facet-wise
linear combination that witnesses unsatisfiability of an outward crossing.
The bilinear search over (H, rho) is replaced by alternation, and every
returned pair is re-checked exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .lp import FEASIBLE, INFEASIBLE, OPTIMAL, LinearProgram, solve_lp


@dataclass(frozen=True)
class Polyhedron:
    directions: tuple  # r rows, each an n-tuple of Fractions
    rho: tuple  # r offsets

    def __post_init__(self):
        if not self.directions:
            raise ValueError("need at least one facet direction")
        if len(self.directions) != len(self.rho):
            raise ValueError("direction/offset count mismatch")
        if any(all(x == 0 for x in row) for row in self.directions):
            raise ValueError("zero facet direction")

    @property
    def r(self) -> int:
        return len(self.directions)

    @property
    def n(self) -> int:
        return len(self.directions[0])

    def contains(self, point: Sequence[Fraction]) -> bool:
        return all(_dot(row, point) <= off
                   for row, off in zip(self.directions, self.rho))


@dataclass(frozen=True)
class AffineMode:
    """Flow x' = Ax + b on the open domain /\\_k c_k x < a_k."""

    a_matrix: tuple  # n x n
    b_vector: tuple  # n
    domain: tuple  # tuple of (c row, a scalar)

    @property
    def n(self) -> int:
        return len(self.b_vector)


@dataclass(frozen=True)
class FarkasCertificate:
    h_matrix: tuple  # r x r, off-diagonal >= 0
    eta: tuple  # r, >= 0
    xi: tuple  # r rows, one entry per domain halfspace, >= 0
    lam: tuple  # r, >= 0


class SynthesisFailure(RuntimeError):
    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace or []


def _dot(a, b):
    return sum((Fraction(x) * Fraction(y) for x, y in zip(a, b)), Fraction(0))


def _mat_vec(m, v):
    return tuple(_dot(row, v) for row in m)


def _row_times_mat(row, m):
    n = len(m[0])
    return tuple(sum((Fraction(row[k]) * Fraction(m[k][j])
                      for k in range(len(m))), Fraction(0)) for j in range(n))


def octagon_directions(r: int) -> tuple:
    """Integer rescalings of uniformly spaced planar directions."""
    if r == 4:
        return ((Fraction(1), Fraction(0)), (Fraction(0), Fraction(1)),
                (Fraction(-1), Fraction(0)), (Fraction(0), Fraction(-1)))
    if r == 8:
        raw = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1),
               (1, -1)]
        return tuple((Fraction(a), Fraction(b)) for a, b in raw)
    raise ValueError(f"unsupported direction count {r}")


def check_positive_invariant(p: Polyhedron, a_matrix: Sequence) -> tuple | None:
    """H with HQ = QA, H rho <= 0, off-diagonal >= 0, for the closed
    system x' = Ax; None when no such H exists."""
    r, n = p.r, p.n
    qa = [_row_times_mat(row, a_matrix) for row in p.directions]
    names = [f"h_{i}_{j}" for i in range(r) for j in range(r)]
    lp = LinearProgram(names)
    for i in range(r):
        for j in range(r):
            if i != j:
                lp.add({f"h_{i}_{j}": 1}, ">=", 0)
    for i in range(r):
        for col in range(n):
            coeffs = {f"h_{i}_{k}": p.directions[k][col] for k in range(r)}
            lp.add(coeffs, "=", qa[i][col])
        lp.add({f"h_{i}_{k}": p.rho[k] for k in range(r)}, "<=", 0)
    out = solve_lp(lp)
    if out.status != FEASIBLE:
        return None
    return tuple(tuple(out.assignment[f"h_{i}_{j}"] for j in range(r))
                 for i in range(r))


def farkas_facet_lp(p: Polyhedron, mode: AffineMode, facet: int,
                    rho=None) -> LinearProgram:
    """LP over the facet's multipliers with the offsets fixed.

    Unknowns: the facet's H row, eta, one xi per domain halfspace, lambda.
    Normalization sum(xi) + eta = 1 stands in for the strict condition.
    """
    rho = p.rho if rho is None else tuple(rho)
    r, n = p.r, p.n
    i = facet
    qa_i = _row_times_mat(p.directions[i], mode.a_matrix)
    qb_i = _dot(p.directions[i], mode.b_vector)
    names = [f"h_{j}" for j in range(r)] + ["eta", "lam"] + \
        [f"xi_{k}" for k in range(len(mode.domain))]
    lp = LinearProgram(names)
    for j in range(r):
        if j != i:
            lp.add({f"h_{j}": 1}, ">=", 0)
    lp.add({"eta": 1}, ">=", 0)
    lp.add({"lam": 1}, ">=", 0)
    for k in range(len(mode.domain)):
        lp.add({f"xi_{k}": 1}, ">=", 0)
    # (1): sum_j h_j q_j + sum_k xi_k c_k - lam * (q_i A) = 0, per coordinate
    for col in range(n):
        coeffs = {f"h_{j}": p.directions[j][col] for j in range(r)}
        for k, (c_row, _) in enumerate(mode.domain):
            coeffs[f"xi_{k}"] = coeffs.get(f"xi_{k}", Fraction(0)) + Fraction(c_row[col])
        coeffs["lam"] = -qa_i[col]
        lp.add(coeffs, "=", 0)
    # (2): sum_j h_j rho_j + eta + sum_k xi_k a_k + lam * (q_i b) = 0
    coeffs = {f"h_{j}": rho[j] for j in range(r)}
    coeffs["eta"] = Fraction(1)
    for k, (_, a_k) in enumerate(mode.domain):
        coeffs[f"xi_{k}"] = Fraction(a_k)
    coeffs["lam"] = qb_i
    lp.add(coeffs, "=", 0)
    # (3) via normalization (the system is homogeneous)
    norm = {"eta": Fraction(1)}
    for k in range(len(mode.domain)):
        norm[f"xi_{k}"] = Fraction(1)
    lp.add(norm, "=", 1)
    return lp


def certify(p: Polyhedron, mode: AffineMode) -> FarkasCertificate | None:
    """Per-facet Farkas LPs; exact certificate or None."""
    r = p.r
    h_rows, etas, xis, lams = [], [], [], []
    for i in range(r):
        out = solve_lp(farkas_facet_lp(p, mode, i))
        if out.status != FEASIBLE:
            return None
        asg = out.assignment
        h_rows.append(tuple(asg[f"h_{j}"] for j in range(r)))
        etas.append(asg["eta"])
        xis.append(tuple(asg[f"xi_{k}"] for k in range(len(mode.domain))))
        lams.append(asg["lam"])
    cert = FarkasCertificate(tuple(h_rows), tuple(etas), tuple(xis),
                             tuple(lams))
    assert verify_certificate(p, mode, cert)
    return cert


def verify_certificate(p: Polyhedron, mode: AffineMode,
                       cert: FarkasCertificate) -> bool:
    """Exact re-check of the three conditions and all sign patterns."""
    r, n = p.r, p.n
    if len(cert.h_matrix) != r or len(cert.eta) != r or len(cert.lam) != r:
        return False
    for i in range(r):
        row = cert.h_matrix[i]
        if len(row) != r:
            return False
        if any(row[j] < 0 for j in range(r) if j != i):
            return False
        if cert.eta[i] < 0 or cert.lam[i] < 0:
            return False
        if any(x < 0 for x in cert.xi[i]):
            return False
        # (1)
        qa_i = _row_times_mat(p.directions[i], mode.a_matrix)
        for col in range(n):
            acc = sum((row[j] * p.directions[j][col] for j in range(r)),
                      Fraction(0))
            for k, (c_row, _) in enumerate(mode.domain):
                acc += cert.xi[i][k] * Fraction(c_row[col])
            acc -= cert.lam[i] * qa_i[col]
            if acc != 0:
                return False
        # (2)
        acc = sum((row[j] * p.rho[j] for j in range(r)), Fraction(0))
        acc += cert.eta[i]
        for k, (_, a_k) in enumerate(mode.domain):
            acc += cert.xi[i][k] * Fraction(a_k)
        acc += cert.lam[i] * _dot(p.directions[i], mode.b_vector)
        if acc != 0:
            return False
        # (3)
        if cert.eta[i] + sum(cert.xi[i], Fraction(0)) <= 0:
            return False
    return True


def halfspace_multipliers(directions, c_row, a_unused=None):
    """y >= 0 with y Q = c, so that y . rho <= a implies Qx <= rho lies in
    {cx <= a}; None when c is not in the cone of the rows."""
    r = len(directions)
    n = len(directions[0])
    names = [f"y_{j}" for j in range(r)]
    lp = LinearProgram(names)
    for j in range(r):
        lp.add({f"y_{j}": 1}, ">=", 0)
    for col in range(n):
        lp.add({f"y_{j}": directions[j][col] for j in range(r)}, "=",
               Fraction(c_row[col]))
    lp.set_objective({f"y_{j}": 1 for j in range(r)}, "min")
    out = solve_lp(lp)
    if out.status != OPTIMAL:
        return None
    return tuple(out.assignment[f"y_{j}"] for j in range(r))


def improve_rho(p: Polyhedron, mode: AffineMode, cert: FarkasCertificate,
                containment: Sequence, strict_floor: Fraction = Fraction(1, 1000),
                step: Fraction = Fraction(1), freeze: Sequence = ()):
    """Re-optimize the offsets with the multipliers held fixed.

    containment is a list of (y multipliers, bound) rows enforcing that the
    polyhedron stays inside the admissible region.  Offsets may only grow,
    by at most `step` per facet, so the polyhedron expands monotonically and
    the LP stays bounded.  Facet indices in `freeze` keep their offsets
    (used when a facet position encodes a cross-mode alignment that growth
    would break).  Maximizes the sum of offsets (a volume proxy).  Returns
    new rho or None.
    """
    r = p.r
    names = [f"rho_{j}" for j in range(r)] + [f"eta_{i}" for i in range(r)]
    lp = LinearProgram(names)
    for j in range(r):
        lp.add({f"rho_{j}": 1}, ">=", p.rho[j])
        cap = Fraction(0) if j in freeze else step
        lp.add({f"rho_{j}": 1}, "<=", p.rho[j] + cap)
    for i in range(r):
        floor = Fraction(0)
        if sum(cert.xi[i], Fraction(0)) == 0:
            floor = strict_floor  # keep condition (3) strict on this row
        lp.add({f"eta_{i}": 1}, ">=", floor)
        coeffs = {f"rho_{j}": cert.h_matrix[i][j] for j in range(r)}
        coeffs[f"eta_{i}"] = Fraction(1)
        rhs = -sum((cert.xi[i][k] * Fraction(a_k)
                    for k, (_, a_k) in enumerate(mode.domain)), Fraction(0))
        rhs -= cert.lam[i] * _dot(p.directions[i], mode.b_vector)
        lp.add(coeffs, "=", rhs)
    for y, bound in containment:
        lp.add({f"rho_{j}": y[j] for j in range(r) if y[j]}, "<=", bound)
    lp.set_objective({f"rho_{j}": 1 for j in range(r)}, "max")
    out = solve_lp(lp)
    if out.status != OPTIMAL:
        return None
    return tuple(out.assignment[f"rho_{j}"] for j in range(r))


def synth_rho(directions, mode: AffineMode, safe_halfspaces: Sequence,
              init_rho: Sequence, rounds: int = 8, freeze: Sequence = ()):
    """Alternating synthesis of offsets for fixed facet directions.

    safe_halfspaces is a list of (c row, bound) pairs describing the region
    the polyhedron must stay inside.  init_rho must already be certifiable;
    each round re-optimizes the offsets against the last certificate and
    re-certifies exactly.  Returns (Polyhedron, FarkasCertificate).
    """
    directions = tuple(tuple(Fraction(x) for x in row) for row in directions)
    trace = []
    containment = []
    for c_row, bound in safe_halfspaces:
        y = halfspace_multipliers(directions, c_row)
        if y is None:
            raise SynthesisFailure(
                f"safe halfspace {c_row} is not expressible in the template "
                "directions", trace)
        containment.append((y, Fraction(bound)))

    p = Polyhedron(directions, tuple(Fraction(x) for x in init_rho))
    for y, bound in containment:
        if _dot(y, p.rho) > bound:
            raise SynthesisFailure("initial offsets violate containment", trace)
    cert = certify(p, mode)
    if cert is None:
        raise SynthesisFailure("initial offsets are not certifiable", trace)
    trace.append(("init", p.rho))

    best = (p, cert)
    for _ in range(rounds):
        new_rho = improve_rho(best[0], mode, best[1], containment,
                              freeze=freeze)
        if new_rho is None or new_rho == best[0].rho:
            break
        cand = Polyhedron(directions, new_rho)
        cand_cert = certify(cand, mode)
        if cand_cert is None:
            trace.append(("reject", new_rho))
            break
        trace.append(("accept", new_rho))
        best = (cand, cand_cert)
    assert verify_certificate(best[0], mode, best[1])
    return best


def slice_interval(p: Polyhedron, fixed: dict, free_index: int):
    """Exact [lo, hi] of one coordinate over a slice of the polyhedron.

    fixed maps coordinate indices to values.  Returns None when empty.
    """
    name = "t"
    lo = hi = None
    for sense in ("min", "max"):
        lp = LinearProgram([name])
        for row, off in zip(p.directions, p.rho):
            coef = row[free_index]
            shift = sum((Fraction(row[k]) * Fraction(v)
                         for k, v in fixed.items()), Fraction(0))
            lp.add({name: coef}, "<=", off - shift)
        lp.set_objective({name: 1}, sense)
        out = solve_lp(lp)
        if out.status == INFEASIBLE:
            return None
        if out.status != OPTIMAL:
            return None  # unbounded slice is not usable as an interval
        if sense == "min":
            lo = out.objective_value
        else:
            hi = out.objective_value
    return (lo, hi)
