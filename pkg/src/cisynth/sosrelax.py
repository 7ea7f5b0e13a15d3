"""SOS relaxation via diagonally dominant Gram matrices.

A polynomial of degree 2d is SOS iff it equals q G q^T for some PSD Gram G
over the monomial basis q.  Restricting G to be diagonally dominant with
non-negative diagonal keeps PSD-ness but turns the search into a linear
program: coefficient-matching equalities plus dominance rows.  The
relaxation is an inner approximation — a miss proves nothing — and every
certificate is re-expanded and checked by exact rational arithmetic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .lp import FEASIBLE, LinearProgram, solve_lp
from .poly import Polynomial, format_poly


def monomial_basis(variables, degree):
    """All monomials in `variables` of total degree <= degree, sorted."""
    variables = tuple(variables)
    out = []
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(variables, total):
            exps = {}
            for v in combo:
                exps[v] = exps.get(v, 0) + 1
            out.append(tuple(sorted(exps.items())))
    return tuple(sorted(set(out), key=lambda m: (sum(e for _, e in m), m)))


def _mono_mul(a, b):
    exps = dict(a)
    for v, e in b:
        exps[v] = exps.get(v, 0) + e
    return tuple(sorted(exps.items()))


def _mono_poly(m):
    return Polynomial({m: Fraction(1)})


@dataclass(frozen=True)
class GramForm:
    basis: tuple  # monomials
    entries: tuple | None = None  # symmetric rows of Fractions, None if symbolic

    def polynomial(self) -> Polynomial:
        if self.entries is None:
            raise ValueError("symbolic Gram has no fixed polynomial")
        acc = Polynomial({})
        n = len(self.basis)
        for i in range(n):
            for j in range(n):
                c = self.entries[i][j]
                if c:
                    acc = acc + Polynomial({_mono_mul(self.basis[i],
                                                     self.basis[j]): c})
        return acc

    def is_diagonally_dominant(self) -> bool:
        n = len(self.basis)
        for i in range(n):
            if self.entries[i][i] < 0:
                return False
            off = sum(abs(self.entries[i][j]) for j in range(n) if j != i)
            if self.entries[i][i] < off:
                return False
        return True

    def is_positive_semidefinite(self) -> bool:
        """Exact rational LDL^T elimination.

        A symmetric matrix is PSD iff every pivot is non-negative and a
        zero diagonal forces a zero row.
        """
        a = [list(row) for row in self.entries]
        n = len(a)
        for i in range(n):
            if a[i][i] < 0:
                return False
            if a[i][i] == 0:
                if any(a[i][j] != 0 for j in range(i, n)):
                    return False
                continue
            for r in range(i + 1, n):
                if a[r][i] != 0:
                    f = a[r][i] / a[i][i]
                    for c in range(i, n):
                        a[r][c] -= f * a[i][c]
        return True


@dataclass(frozen=True)
class SosCertificate:
    """Named Gram blocks plus the epsilon margin of the defining identity."""
    blocks: tuple  # (name, GramForm) pairs
    epsilon: Fraction

    def block(self, name: str) -> GramForm:
        for n, g in self.blocks:
            if n == name:
                return g
        raise KeyError(name)

    def text(self) -> str:
        lines = [f"epsilon {self.epsilon}"]
        for name, g in self.blocks:
            lines.append(f"block {name}")
            lines.append("  basis " + " ".join(
                format_poly(_mono_poly(m)) for m in g.basis))
            for row in g.entries:
                lines.append("  row " + " ".join(str(c) for c in row))
        return "\n".join(lines) + "\n"


def gram_setup(degree2d: int, variables, basis=None) -> GramForm:
    if degree2d % 2:
        raise ValueError("Gram degree must be even")
    if basis is None:
        basis = monomial_basis(variables, degree2d // 2)
    return GramForm(tuple(basis), None)


class LinPoly:
    """Polynomial whose coefficients are affine expressions in LP unknowns.

    Coefficient maps use variable names as keys; the key None holds the
    constant part.  Everything needed here is addition, scaling by a fixed
    polynomial, and emitting one LP equality per monomial.
    """

    def __init__(self, coeffs=None):
        self.coeffs = coeffs or {}  # monomial -> {var|None: Fraction}

    def _bump(self, mono, key, val):
        if not val:
            return
        row = self.coeffs.setdefault(mono, {})
        row[key] = row.get(key, Fraction(0)) + val
        if not row[key]:
            del row[key]
            if not row:
                del self.coeffs[mono]

    @staticmethod
    def constant(p: Polynomial) -> "LinPoly":
        out = LinPoly()
        for m, c in p.terms.items():
            out._bump(m, None, c)
        return out

    @staticmethod
    def parametric(p: Polynomial, params) -> "LinPoly":
        """Split a polynomial linear in `params` into state-monomial
        coefficients that are affine in the parameter names."""
        params = set(params)
        out = LinPoly()
        for m, c in p.terms.items():
            present = [v for v, _ in m if v in params]
            if not present:
                out._bump(m, None, c)
                continue
            if len(present) > 1 or any(e > 1 for v, e in m if v in params):
                raise ValueError("template is not linear in its parameters")
            (pvar,) = present
            state = tuple((v, e) for v, e in m if v != pvar)
            out._bump(state, pvar, c)
        return out

    @staticmethod
    def from_gram(prefix: str, basis) -> "LinPoly":
        out = LinPoly()
        n = len(basis)
        for i in range(n):
            for j in range(i, n):
                name = f"{prefix}_g_{i}_{j}"
                mono = _mono_mul(basis[i], basis[j])
                out._bump(mono, name, Fraction(1) if i == j else Fraction(2))
        return out

    def __add__(self, other: "LinPoly") -> "LinPoly":
        out = LinPoly({m: dict(r) for m, r in self.coeffs.items()})
        for m, row in other.coeffs.items():
            for k, v in row.items():
                out._bump(m, k, v)
        return out

    def __sub__(self, other: "LinPoly") -> "LinPoly":
        return self + other.scaled(Fraction(-1))

    def scaled(self, c: Fraction) -> "LinPoly":
        out = LinPoly()
        for m, row in self.coeffs.items():
            for k, v in row.items():
                out._bump(m, k, c * v)
        return out

    def times_poly(self, p: Polynomial) -> "LinPoly":
        out = LinPoly()
        for pm, pc in p.terms.items():
            for m, row in self.coeffs.items():
                for k, v in row.items():
                    out._bump(_mono_mul(pm, m), k, pc * v)
        return out

    def equate_zero(self, lp: LinearProgram):
        """One equality row per monomial: affine coefficient == 0."""
        for m in sorted(self.coeffs):
            row = self.coeffs[m]
            const = row.get(None, Fraction(0))
            coeffs = {k: v for k, v in row.items() if k is not None}
            lp.add(coeffs, "=", -const)

    def instantiate(self, values) -> Polynomial:
        """Fix all unknowns (missing names read as zero)."""
        terms = {}
        for m, row in self.coeffs.items():
            acc = Fraction(0)
            for k, v in row.items():
                acc += v if k is None else v * values.get(k, Fraction(0))
            if acc:
                terms[m] = acc
        return Polynomial(terms)


def add_dsos_block(lp: LinearProgram, prefix: str, basis,
                   margin: Fraction = Fraction(0)) -> LinPoly:
    """Declare one diagonally dominant Gram block on an LP under
    construction; returns the block polynomial as a LinPoly.

    Off-diagonal magnitudes are linearized through helper variables m_ij
    with m_ij >= g_ij and m_ij >= -g_ij.  A positive margin strengthens
    the dominance rows, leaving room for later rational rounding.

    Each dominance row also carries a slack variable sl_i in [0, 1];
    maximizing total slack steers numerical solutions away from tight
    dominance rows so that rational rounding survives the exact recheck.
    """
    n = len(basis)
    for i in range(n):
        lp.declare(f"{prefix}_g_{i}_{i}")
        for j in range(i + 1, n):
            lp.declare(f"{prefix}_g_{i}_{j}")
            lp.declare(f"{prefix}_m_{i}_{j}")
    for i in range(n):
        sl = f"{prefix}_sl_{i}"
        lp.declare(sl)
        lp.add({sl: 1}, ">=", 0)
        lp.add({sl: 1}, "<=", 1)
        dominance = {f"{prefix}_g_{i}_{i}": Fraction(1), sl: Fraction(-1)}
        for j in range(n):
            if j == i:
                continue
            lo, hi = min(i, j), max(i, j)
            g = f"{prefix}_g_{lo}_{hi}"
            m = f"{prefix}_m_{lo}_{hi}"
            if i < j:
                lp.add({m: 1, g: -1}, ">=", 0)
                lp.add({m: 1, g: 1}, ">=", 0)
            dominance[m] = Fraction(-1)
        lp.add(dominance, ">=", Fraction(margin))
    return LinPoly.from_gram(prefix, basis)


def float_solve(lp: LinearProgram, bound: float = 1e6, objective=None):
    """Feasible point of an exact LP via a numerical solver; values come
    back as floats and prove nothing until re-verified exactly.

    By default slack variables (named *_sl_*) are maximized so the
    returned point sits interior to dominance rows wherever possible; an
    explicit `objective` dict (minimized) overrides that.
    """
    from scipy.optimize import linprog

    idx = {v: i for i, v in enumerate(lp.variables)}
    n = len(lp.variables)
    obj = [0.0] * n
    if objective is None:
        for v, i in idx.items():
            if "_sl_" in v:
                obj[i] = -1.0
    else:
        for v, coef in objective.items():
            obj[idx[v]] = float(coef)
    a_eq, b_eq, a_ub, b_ub = [], [], [], []
    for c in lp.constraints:
        row = [0.0] * n
        for v, coef in c.coeffs.items():
            row[idx[v]] = float(coef)
        if c.rel == "=":
            a_eq.append(row)
            b_eq.append(float(c.rhs))
        elif c.rel == "<=":
            a_ub.append(row)
            b_ub.append(float(c.rhs))
        else:
            a_ub.append([-x for x in row])
            b_ub.append(-float(c.rhs))
    res = linprog(obj, A_ub=a_ub or None, b_ub=b_ub or None,
                  A_eq=a_eq or None, b_eq=b_eq or None,
                  bounds=[(-bound, bound)] * n, method="highs")
    if not res.success:
        return None
    return {v: res.x[idx[v]] for v in lp.variables}


def rationalize(values, limit: int = 10 ** 6) -> dict:
    return {k: Fraction(v).limit_denominator(limit) for k, v in values.items()}


def gram_values(assignment, prefix: str, basis) -> dict:
    """The {prefix}_g_* entries of an assignment, as a mutable dict keyed
    by (i, j) with i <= j."""
    out = {}
    n = len(basis)
    for i in range(n):
        for j in range(i, n):
            v = assignment.get(f"{prefix}_g_{i}_{j}", Fraction(0))
            if isinstance(v, float):
                v = Fraction(v)
            out[(i, j)] = v
    return out


def absorb_residual(entries: dict, basis, residual: Polynomial) -> bool:
    """Shift Gram entries so the block soaks up `residual` exactly.

    Each residual monomial goes to one fixed representative basis pair;
    returns False when some monomial has no product decomposition in the
    basis (the identity cannot be repaired in this block).
    """
    products = {}
    n = len(basis)
    for i in range(n):
        for j in range(i, n):
            products.setdefault(_mono_mul(basis[i], basis[j]), (i, j))
    for m, c in residual.terms.items():
        pair = products.get(m)
        if pair is None:
            return False
        i, j = pair
        entries[(i, j)] += c if i == j else c / 2
    return True


def gram_from_entries(basis, entries: dict) -> GramForm:
    n = len(basis)
    rows = tuple(tuple(entries[(min(i, j), max(i, j))] for j in range(n))
                 for i in range(n))
    return GramForm(tuple(basis), rows)


def extract_gram(assignment, prefix: str, basis) -> GramForm:
    n = len(basis)
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            lo, hi = min(i, j), max(i, j)
            row.append(assignment.get(f"{prefix}_g_{lo}_{hi}", Fraction(0)))
        rows.append(tuple(row))
    g = GramForm(tuple(basis), tuple(rows))
    assert g.is_diagonally_dominant()
    return g


def _block_names(lp: LinearProgram):
    return list(lp.variables)


def dsos_check(p: Polynomial, basis=None) -> SosCertificate | None:
    """SOS membership with an exactly verified rational Gram matrix.

    Fast path: the diagonally-dominant LP relaxation.  When that misses
    (the DSOS cone is a strict subset of SOS), a second stage searches
    the full Gram spectrahedron numerically — concave maximization of
    the smallest eigenvalue, with facial reduction through rationalized
    kernels for singular instances — and the recovered rational Gram is
    re-checked by exact LDL^T.  None means "not found", never "not SOS";
    a returned certificate is always exact.
    """
    deg = p.degree()
    if deg % 2:
        return None
    if basis is None:
        basis = monomial_basis(p.variables(), deg // 2)
    lp = LinearProgram([])
    body = add_dsos_block(lp, "s", basis)
    (body - LinPoly.constant(p)).equate_zero(lp)
    out = solve_lp(lp)
    if out.status == FEASIBLE:
        g = extract_gram(out.assignment, "s", basis)
        assert g.polynomial() - p == Polynomial({})
        return SosCertificate((("s", g),), Fraction(0))
    g = _psd_gram_search(p, basis)
    if g is None:
        return None
    assert g.polynomial() - p == Polynomial({})
    assert g.is_positive_semidefinite()
    return SosCertificate((("s", g),), Fraction(0))


# ----------------------------------------------------------------------
# Exact PSD Gram recovery (second stage of dsos_check)
# ----------------------------------------------------------------------

def _gram_family(p: Polynomial, basis):
    """Rational affine parameterization of every Gram representation.

    Returns (free, build) where free lists the independent symmetric
    entries and build maps a {pair: Fraction} assignment to full rows;
    None when some monomial of p is not a product of basis monomials.
    """
    groups: dict = {}
    n = len(basis)
    for i in range(n):
        for j in range(i, n):
            groups.setdefault(_mono_mul(basis[i], basis[j]), []).append((i, j))
    if any(m not in groups for m, c in p.terms.items() if c):
        return None
    free = []
    for prs in groups.values():
        free.extend(prs[1:])

    def build(tmap):
        rows = [[Fraction(0)] * n for _ in range(n)]
        for m, prs in groups.items():
            c = Fraction(p.terms.get(m, 0))
            acc = Fraction(0)
            for pr in prs[1:]:
                v = Fraction(tmap.get(pr, 0))
                rows[pr[0]][pr[1]] = rows[pr[1]][pr[0]] = v
                acc += (1 if pr[0] == pr[1] else 2) * v
            d = prs[0]
            v0 = (c - acc) / (1 if d[0] == d[1] else 2)
            rows[d[0]][d[1]] = rows[d[1]][d[0]] = v0
        return rows

    return free, build


def _solve_affine(a_rows, b_vals, nvars):
    """Exact solution set of A t = b: (particular, nullspace columns) or
    None when inconsistent."""
    rows = [list(r) + [b] for r, b in zip(a_rows, b_vals)]
    pivots = []
    r = 0
    for col in range(nvars):
        piv = next((i for i in range(r, len(rows)) if rows[i][col] != 0),
                   None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = Fraction(1) / rows[r][col]
        rows[r] = [v * inv for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][col] != 0:
                f = rows[i][col]
                rows[i] = [v - f * w for v, w in zip(rows[i], rows[r])]
        pivots.append(col)
        r += 1
    for i in range(r, len(rows)):
        if rows[i][nvars] != 0:
            return None
    part = [Fraction(0)] * nvars
    for i, col in enumerate(pivots):
        part[col] = rows[i][nvars]
    null_cols = []
    for fcol in range(nvars):
        if fcol in pivots:
            continue
        vec = [Fraction(0)] * nvars
        vec[fcol] = Fraction(1)
        for i, col in enumerate(pivots):
            vec[col] = -rows[i][fcol]
        null_cols.append(vec)
    return part, null_cols


def _rref_rows(rows):
    """Nonzero rows of the reduced row-echelon form (exact)."""
    work = [list(r) for r in rows]
    ncols = len(work[0]) if work else 0
    out = []
    r = 0
    for col in range(ncols):
        piv = next((i for i in range(r, len(work)) if work[i][col] != 0),
                   None)
        if piv is None:
            continue
        work[r], work[piv] = work[piv], work[r]
        inv = Fraction(1) / work[r][col]
        work[r] = [v * inv for v in work[r]]
        for i in range(len(work)):
            if i != r and work[i][col] != 0:
                f = work[i][col]
                work[i] = [v - f * w for v, w in zip(work[i], work[r])]
        r += 1
    return work[:r]


def _psd_gram_search(p: Polynomial, basis) -> GramForm | None:
    import numpy as np

    fam = _gram_family(p, basis)
    if fam is None:
        return None
    free, build = fam
    n = len(basis)
    g0 = build({})
    g0f = np.array([[float(v) for v in row] for row in g0])
    nmats_exact = []
    nmats = []
    for k, pr in enumerate(free):
        rows = build({pr: Fraction(1)})
        delta = [[rows[i][j] - g0[i][j] for j in range(n)] for i in range(n)]
        nmats_exact.append(delta)
        nmats.append(np.array([[float(v) for v in row] for row in delta]))

    kernel: list = []  # rational kernel vectors (facial reduction)
    for _depth in range(4):
        # exact restriction of the family to G k = 0 for the current
        # rational kernel guesses
        a_rows, b_vals = [], []
        for kv in kernel:
            for i in range(n):
                a_rows.append([sum(nm[i][c] * kv[c] for c in range(n))
                               for nm in nmats_exact])
                b_vals.append(-sum(g0[i][c] * kv[c] for c in range(n)))
        got = _solve_affine(a_rows, b_vals, len(free)) if a_rows else \
            ([Fraction(0)] * len(free), [[Fraction(1) if i == j else
                                          Fraction(0)
                                          for i in range(len(free))]
                                         for j in range(len(free))])
        if got is None:
            return None
        t_part, null_cols = got

        # numeric complement of the kernel for restricted eigenvalues
        if kernel:
            kn = np.array([[float(v) for v in kv] for kv in kernel]).T
            q, _ = np.linalg.qr(np.eye(n) - kn @ np.linalg.pinv(kn))
            rank = n - np.linalg.matrix_rank(kn)
            # columns of q spanning the complement
            proj = np.eye(n) - kn @ np.linalg.pinv(kn)
            w, vecs = np.linalg.eigh(proj)
            comp = vecs[:, w > 0.5]
        else:
            comp = np.eye(n)

        tpf = np.array([float(v) for v in t_part])
        zf = np.array([[float(null_cols[c][k]) for c in range(len(null_cols))]
                       for k in range(len(free))]) if null_cols else \
            np.zeros((len(free), 0))
        base = g0f.copy()
        for k in range(len(free)):
            base = base + tpf[k] * nmats[k]
        dirs = []
        for c in range(zf.shape[1]):
            d = np.zeros_like(g0f)
            for k in range(len(free)):
                if zf[k, c]:
                    d = d + zf[k, c] * nmats[k]
            dirs.append(d)
        r0 = comp.T @ base @ comp
        rcs = [comp.T @ d @ comp for d in dirs]
        dim = zf.shape[1]

        def rmat(s):
            acc = r0.copy()
            for c in range(dim):
                acc = acc + s[c] * rcs[c]
            return acc

        def gmat(s):
            acc = base.copy()
            for c in range(dim):
                acc = acc + s[c] * dirs[c]
            return acc

        # concave maximization of the restricted smallest eigenvalue by
        # cutting planes: each unit vector v yields the valid linear cut
        # lam <= v' R(s) v
        best_s = np.zeros(dim)
        best_lam = float(np.linalg.eigvalsh(rmat(best_s))[0])
        if dim:
            from scipy.optimize import linprog
            a_ub, b_ub = [], []

            def add_cut(v):
                a_ub.append([-float(v @ rc @ v) for rc in rcs] + [1.0])
                b_ub.append(float(v @ r0 @ v))

            for i in range(r0.shape[0]):
                e = np.zeros(r0.shape[0])
                e[i] = 1.0
                add_cut(e)
            bounds = [(-1000.0, 1000.0)] * dim + [(None, None)]
            cost = [0.0] * dim + [-1.0]
            for _it in range(80):
                sol = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds,
                              method="highs")
                if not sol.success:
                    break
                s = sol.x[:dim]
                w, vecs = np.linalg.eigh(rmat(s))
                lam = float(w[0])
                if lam > best_lam:
                    best_lam, best_s = lam, s.copy()
                upper = -sol.fun
                if upper - lam < 1e-10:
                    break
                for j in range(min(2, len(w))):
                    add_cut(vecs[:, j])

        # rationalize and re-check exactly
        for limit in (16, 256, 4096, 10 ** 6, 10 ** 9):
            s_rat = [Fraction(x).limit_denominator(limit) for x in best_s]
            t = list(t_part)
            for c, col in enumerate(null_cols):
                for k in range(len(free)):
                    t[k] += s_rat[c] * col[k]
            rows = build(dict(zip(free, t)))
            g = GramForm(tuple(basis), tuple(tuple(r) for r in rows))
            if g.is_positive_semidefinite():
                return g

        # singular instance: harvest a rational kernel subspace from the
        # near-optimal matrix (spans of conjugate zero evaluations are
        # rational even when individual zeros are not)
        gbest = gmat(best_s)
        w, vecs = np.linalg.eigh(gbest)
        kdirs = vecs[:, np.abs(w) < max(1e-6, 10 * abs(min(best_lam, 0)))]
        if kdirs.shape[1] == 0 or kdirs.shape[1] >= n:
            return None
        proj = kdirs @ kdirs.T
        new_kernel = None
        for limit in (8, 64, 1024, 32768, 10 ** 6):
            rat = [[Fraction(float(proj[i][j])).limit_denominator(limit)
                    for j in range(n)] for i in range(n)]
            rref = _rref_rows(rat)
            if len(rref) == kdirs.shape[1]:
                new_kernel = rref
                break
        if new_kernel is None:
            return None
        merged = _rref_rows(kernel + new_kernel) if kernel else new_kernel
        if kernel and len(merged) <= len(kernel):
            return None  # no new information
        kernel = merged
    return None


def sos_synthesize(template: Polynomial, params, field, h_list,
                   epsilon: Fraction = Fraction(1, 1000), degrees=None):
    """Parameters u and DSOS certificate for the identity

        L^1_f template = s0 + sum_i s_i h_i + epsilon

    so that template >= 0 is a continuous invariant of the system with
    domain /\\ h_i > 0.  Template must be linear in params.  Returns
    (param assignment dict, SosCertificate) or None.
    """
    from .poly import extend_field, lie_derivative

    params = tuple(params)
    lie = lie_derivative(template, extend_field(field, params))
    lhs = LinPoly.parametric(lie, params)
    state_vars = field.variables
    base_deg = max((sum(e for v, e in m) for m in lhs.coeffs), default=0)
    if degrees is None:
        degrees = {}
    lp = LinearProgram(list(params))
    d0 = degrees.get("s0", base_deg + (base_deg % 2))
    rhs = add_dsos_block(lp, "s0", monomial_basis(state_vars, d0 // 2))
    for i, h in enumerate(h_list):
        di = degrees.get(f"s{i + 1}", None)
        if di is None:
            di = max(base_deg - h.degree(), 0)
            di += di % 2
        blk = add_dsos_block(lp, f"s{i + 1}",
                             monomial_basis(state_vars, di // 2))
        rhs = rhs + blk.times_poly(h)
    diff = lhs - rhs - LinPoly.constant(Polynomial.constant(epsilon))
    diff.equate_zero(lp)
    out = solve_lp(lp)
    if out.status != FEASIBLE:
        return None
    values = {u: out.assignment.get(u, Fraction(0)) for u in params}
    blocks = [("s0", extract_gram(out.assignment, "s0",
                                  monomial_basis(state_vars, d0 // 2)))]
    for i, h in enumerate(h_list):
        di = degrees.get(f"s{i + 1}", None)
        if di is None:
            di = max(base_deg - h.degree(), 0)
            di += di % 2
        blocks.append((f"s{i + 1}",
                       extract_gram(out.assignment, f"s{i + 1}",
                                    monomial_basis(state_vars, di // 2))))
    cert = SosCertificate(tuple(blocks), epsilon)
    assert identity_residual(template, params, values, field, h_list,
                             cert) == Polynomial({})
    return values, cert


def identity_residual(template, params, values, field, h_list,
                      cert: SosCertificate) -> Polynomial:
    """L^1_f p(u*) - s0 - sum s_i h_i - epsilon, expanded exactly."""
    from .poly import lie_derivative

    inst = template.substitute({u: Polynomial.constant(values[u])
                                for u in params})
    lie = lie_derivative(inst, field)
    acc = lie - cert.block("s0").polynomial()
    for i, h in enumerate(h_list):
        acc = acc - cert.block(f"s{i + 1}").polynomial() * h
    return acc - Polynomial.constant(cert.epsilon)


def lin_substitute(lin: LinPoly, var: str, value: Fraction) -> LinPoly:
    """Fix one polynomial variable to a rational value."""
    out = LinPoly()
    for m, row in lin.coeffs.items():
        scale = Fraction(1)
        rest = []
        for v, e in m:
            if v == var:
                scale *= value ** e
            else:
                rest.append((v, e))
        if not scale:
            continue
        for k, c in row.items():
            out._bump(tuple(rest), k, c * scale)
    return out


def lin_derivative(lin: LinPoly, var: str) -> LinPoly:
    """Partial derivative with respect to one polynomial variable."""
    out = LinPoly()
    for m, row in lin.coeffs.items():
        for i, (v, e) in enumerate(m):
            if v != var:
                continue
            rest = list(m)
            if e == 1:
                del rest[i]
            else:
                rest[i] = (v, e - 1)
            for k, c in row.items():
                out._bump(tuple(rest), k, c * e)
    return out


def lin_freeze(lin: LinPoly, values: dict, keep_prefixes) -> LinPoly:
    """Substitute known values for every unknown except the Gram entries
    of the named blocks, which stay symbolic."""
    out = LinPoly()
    for m, row in lin.coeffs.items():
        for k, v in row.items():
            if k is not None and any(k.startswith(p + "_g_") for p in keep_prefixes):
                out._bump(m, k, v)
            else:
                out._bump(m, None, v if k is None else v * values.get(k, Fraction(0)))
    return out


def recover_blocks(lp: LinearProgram, blocks, identities, limit: int = 10 ** 6):
    """Solve a DSOS synthesis LP numerically, then rebuild exact rational
    Gram blocks.

    `blocks` is a list of (prefix, basis) pairs, `identities` a list of
    (difference LinPoly, tuple of block prefixes) that must vanish.  After
    rounding the numerical solution, each identity's blocks are re-solved
    jointly by an exact LP with every remaining unknown frozen, so the
    rounded point is repaired into exact diagonal dominance and exactly
    zero residuals.  Returns (values, {prefix: GramForm}) or None.
    """
    from .lp import solve_lp, FEASIBLE

    floats = float_solve(lp)
    if floats is None:
        return None
    values = rationalize(floats, limit)
    basis_of = dict(blocks)
    for diff, prefixes in identities:
        sub = LinearProgram([])
        for pref in prefixes:
            add_dsos_block(sub, pref, basis_of[pref], margin=Fraction(0))
        lin_freeze(diff, values, prefixes).equate_zero(sub)
        out = solve_lp(sub)
        if out.status != FEASIBLE:
            return None
        for pref in prefixes:
            n = len(basis_of[pref])
            for i in range(n):
                for j in range(i, n):
                    name = f"{pref}_g_{i}_{j}"
                    values[name] = out.assignment.get(name, Fraction(0))
    grams = {}
    for pref, basis in blocks:
        gram = extract_gram(values, pref, basis)
        if not gram.is_diagonally_dominant():
            return None
        grams[pref] = gram
    for diff, _ in identities:
        if diff.instantiate(values).terms:
            return None
    return values, grams
