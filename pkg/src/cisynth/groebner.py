"""Buchberger's algorithm, ideal membership, and the Lie-chain rank.

All computations are exact.  Resource caps fail loudly: a wrong basis or a
wrong rank is never returned.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .poly import (Monomial, Polynomial, VectorField, extend_field,
                   lie_derivative, mono_degree)

GREVLEX = "graded-reverse-lex"
LEX = "lex"


class ResourceCapExceeded(RuntimeError):
    """Raised when an S-polynomial budget or chain cap is exhausted."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


def _exps(m: Monomial, variables: Sequence[str]) -> tuple:
    d = dict(m)
    return tuple(d.get(v, 0) for v in variables)


def _order_key(m: Monomial, variables: Sequence[str], order: str):
    e = _exps(m, variables)
    if order == LEX:
        return e
    if order == GREVLEX:
        # higher total degree first; ties broken by smaller last nonzero
        return (sum(e), tuple(-x for x in reversed(e)))
    raise ValueError(f"unknown monomial order {order!r}")


def leading_monomial(p: Polynomial, variables: Sequence[str], order: str) -> Monomial:
    if p.is_zero():
        raise ValueError("zero polynomial has no leading monomial")
    return max(p.terms, key=lambda m: _order_key(m, variables, order))


def _mono_divides(a: Monomial, b: Monomial) -> bool:
    db = dict(b)
    return all(db.get(v, 0) >= e for v, e in a)


def _mono_div(a: Monomial, b: Monomial) -> Monomial:
    # a / b, assuming b | a
    exps = dict(a)
    for v, e in b:
        exps[v] -= e
    return tuple(sorted((v, e) for v, e in exps.items() if e))


def _mono_lcm(a: Monomial, b: Monomial) -> Monomial:
    exps = dict(a)
    for v, e in b:
        exps[v] = max(exps.get(v, 0), e)
    return tuple(sorted(exps.items()))


def normal_form(p: Polynomial, basis: Sequence[Polynomial],
                variables: Sequence[str], order: str) -> Polynomial:
    """Remainder of multivariate division of p by basis."""
    basis = [g for g in basis if not g.is_zero()]
    lms = [leading_monomial(g, variables, order) for g in basis]
    rem = Polynomial()
    work = p
    while not work.is_zero():
        lm = leading_monomial(work, variables, order)
        lc = work.terms[lm]
        for g, glm in zip(basis, lms):
            if _mono_divides(glm, lm):
                q = _mono_div(lm, glm)
                factor = Polynomial({q: lc / g.terms[glm]})
                work = work - factor * g
                break
        else:
            rem = rem + Polynomial({lm: lc})
            work = work - Polynomial({lm: lc})
    return rem


def _s_polynomial(f: Polynomial, g: Polynomial,
                  variables: Sequence[str], order: str) -> Polynomial:
    lmf = leading_monomial(f, variables, order)
    lmg = leading_monomial(g, variables, order)
    lcm = _mono_lcm(lmf, lmg)
    tf = Polynomial({_mono_div(lcm, lmf): Fraction(1) / f.terms[lmf]})
    tg = Polynomial({_mono_div(lcm, lmg): Fraction(1) / g.terms[lmg]})
    return tf * f - tg * g


@dataclass(frozen=True)
class IdealBasis:
    generators: tuple
    variables: tuple
    order: str = GREVLEX
    reduced: bool = True

    def contains(self, p: Polynomial) -> bool:
        return normal_form(p, self.generators, self.variables, self.order).is_zero()


def groebner_basis(gens: Sequence[Polynomial], variables: Sequence[str] | None = None,
                   order: str = GREVLEX, budget: int = 20000) -> IdealBasis:
    """Reduced Groebner basis of the ideal generated by gens.

    budget caps the number of S-polynomial reductions; exceeding it raises
    ResourceCapExceeded rather than returning a possibly wrong basis.
    """
    gens = list(gens)
    if not gens:
        raise ValueError("gens must be nonempty")
    if variables is None:
        vs: set[str] = set()
        for g in gens:
            vs |= g.variables()
        variables = tuple(sorted(vs))
    else:
        variables = tuple(variables)

    basis = [g for g in gens if not g.is_zero()]
    if not basis:
        # the zero ideal
        return IdealBasis((), variables, order, True)

    pairs = [(i, j) for i in range(len(basis)) for j in range(i + 1, len(basis))]
    spent = 0
    while pairs:
        i, j = pairs.pop(0)
        spent += 1
        if spent > budget:
            raise ResourceCapExceeded(
                f"S-polynomial budget {budget} exhausted", partial=tuple(basis))
        lmi = leading_monomial(basis[i], variables, order)
        lmj = leading_monomial(basis[j], variables, order)
        # Buchberger's first criterion: coprime leading monomials
        if not (set(dict(lmi)) & set(dict(lmj))):
            continue
        s = _s_polynomial(basis[i], basis[j], variables, order)
        r = normal_form(s, basis, variables, order)
        if not r.is_zero():
            k = len(basis)
            basis.append(r)
            pairs.extend((t, k) for t in range(k))

    # minimize: drop generators whose lead is divisible by another kept lead
    lead = [leading_monomial(g, variables, order) for g in basis]
    minimal = []
    for idx in range(len(basis)):
        lm = lead[idx]
        dominated = False
        for jdx in range(len(basis)):
            if jdx == idx:
                continue
            if _mono_divides(lead[jdx], lm) and lead[jdx] != lm:
                dominated = True
                break
            if lead[jdx] == lm and jdx < idx:
                dominated = True
                break
        if not dominated:
            minimal.append(basis[idx])

    # reduce each generator against the others and normalize lead coeff to 1
    reduced = []
    for idx, g in enumerate(minimal):
        others = minimal[:idx] + minimal[idx + 1:]
        r = normal_form(g, others, variables, order) if others else g
        if r.is_zero():
            continue
        lc = r.terms[leading_monomial(r, variables, order)]
        reduced.append(r * (Fraction(1) / lc))
    # a second pass so every generator is reduced w.r.t. the final set
    final = []
    for idx, g in enumerate(reduced):
        others = reduced[:idx] + reduced[idx + 1:]
        r = normal_form(g, others, variables, order) if others else g
        if not r.is_zero():
            lc = r.terms[leading_monomial(r, variables, order)]
            final.append(r * (Fraction(1) / lc))
    final.sort(key=lambda g: _order_key(leading_monomial(g, variables, order),
                                        variables, order))
    return IdealBasis(tuple(final), variables, order, True)


def ideal_member(p: Polynomial, basis: IdealBasis) -> bool:
    if p.is_zero():
        return True
    if not basis.generators:
        return False
    return basis.contains(p)


def rank_n(p: Polynomial, f: VectorField, cap: int = 20,
           budget: int = 20000) -> int:
    """Smallest N >= 0 such that L^{N+1} p lies in <L^0 p, ..., L^N p>.

    Template parameters, if any, are treated as extra ring indeterminates,
    which over-approximates the rank of every instantiation.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    variables = tuple(sorted(set(f.variables) | p.variables()))
    f = extend_field(f, sorted(p.variables() - set(f.variables)))
    chain = [p]
    nxt = lie_derivative(p, f)
    for n in range(cap + 1):
        if all(g.is_zero() for g in chain):
            # the zero ideal: membership iff next is zero
            if nxt.is_zero():
                return n
        else:
            basis = groebner_basis([g for g in chain if not g.is_zero()],
                                   variables, GREVLEX, budget)
            if ideal_member(nxt, basis):
                return n
        chain.append(nxt)
        nxt = lie_derivative(nxt, f)
    raise ResourceCapExceeded(f"Lie chain did not stabilize within cap {cap}",
                              partial=tuple(chain))
