"""Exact sparse multivariate polynomials over the rationals.

Monomials are sorted tuples of (variable, exponent) pairs; coefficients are
`fractions.Fraction`.  Everything here is immutable and hashable, so values
can be shared freely across threads and used as dict keys.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

Monomial = tuple  # tuple[(str, int), ...] sorted by variable name, exps > 0

Scalar = Union[int, Fraction]


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    exps: dict[str, int] = dict(a)
    for v, e in b:
        exps[v] = exps.get(v, 0) + e
    return tuple(sorted((v, e) for v, e in exps.items() if e))


def mono_degree(m: Monomial) -> int:
    return sum(e for _, e in m)


class Polynomial:
    """A polynomial with exact rational coefficients.

    The zero polynomial has an empty term map.  No zero coefficients are
    ever stored.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Monomial, Scalar] | None = None):
        clean: dict[Monomial, Fraction] = {}
        if terms:
            for m, c in terms.items():
                c = Fraction(c)
                if c:
                    clean[m] = c
        self.terms = clean

    # -- constructors -------------------------------------------------

    @staticmethod
    def zero() -> "Polynomial":
        return Polynomial()

    @staticmethod
    def constant(c: Scalar) -> "Polynomial":
        return Polynomial({(): Fraction(c)})

    @staticmethod
    def var(name: str) -> "Polynomial":
        return Polynomial({((name, 1),): Fraction(1)})

    # -- queries ------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(not m for m in self.terms)

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("not a constant polynomial")
        return self.terms.get((), Fraction(0))

    def degree(self) -> int:
        if not self.terms:
            return 0
        return max(mono_degree(m) for m in self.terms)

    def variables(self) -> frozenset:
        out = set()
        for m in self.terms:
            for v, _ in m:
                out.add(v)
        return frozenset(out)

    def coefficient(self, m: Monomial) -> Fraction:
        return self.terms.get(m, Fraction(0))

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other: "Polynomial | Scalar") -> "Polynomial":
        other = _coerce(other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            terms[m] = terms.get(m, Fraction(0)) + c
        return Polynomial(terms)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Polynomial | Scalar") -> "Polynomial":
        return self + (-_coerce(other))

    def __rsub__(self, other: Scalar) -> "Polynomial":
        return _coerce(other) - self

    def __mul__(self, other: "Polynomial | Scalar") -> "Polynomial":
        if isinstance(other, (int, Fraction)):
            c = Fraction(other)
            return Polynomial({m: cc * c for m, cc in self.terms.items()})
        terms: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                terms[m] = terms.get(m, Fraction(0)) + c1 * c2
        return Polynomial(terms)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Polynomial":
        if k < 0:
            raise ValueError("negative exponent")
        out = Polynomial.constant(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, Polynomial) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    # -- calculus and evaluation --------------------------------------

    def diff(self, var: str) -> "Polynomial":
        terms: dict[Monomial, Fraction] = {}
        for m, c in self.terms.items():
            exps = dict(m)
            e = exps.get(var, 0)
            if not e:
                continue
            exps[var] = e - 1
            nm = tuple(sorted((v, k) for v, k in exps.items() if k))
            terms[nm] = terms.get(nm, Fraction(0)) + c * e
        return Polynomial(terms)

    def evaluate(self, point: Mapping[str, Scalar]) -> Fraction:
        total = Fraction(0)
        for m, c in self.terms.items():
            val = c
            for v, e in m:
                if v not in point:
                    raise KeyError(f"unbound variable {v!r}")
                val *= Fraction(point[v]) ** e
            total += val
        return total

    def substitute(self, binding: Mapping[str, "Polynomial | Scalar"]) -> "Polynomial":
        """Substitute polynomials (or constants) for a subset of variables."""
        out = Polynomial()
        for m, c in self.terms.items():
            term = Polynomial.constant(c)
            for v, e in m:
                if v in binding:
                    term = term * (_coerce(binding[v]) ** e)
                else:
                    term = term * (Polynomial.var(v) ** e)
            out = out + term
        return out

    # -- printing -----------------------------------------------------

    def __str__(self) -> str:
        return format_poly(self)

    def __repr__(self) -> str:
        return f"Polynomial({format_poly(self)!r})"


def _coerce(x: "Polynomial | Scalar") -> Polynomial:
    if isinstance(x, Polynomial):
        return x
    return Polynomial.constant(x)


@dataclass(frozen=True)
class VectorField:
    """One flow component per state variable, in declared order."""

    variables: tuple
    components: tuple

    def __post_init__(self):
        if len(self.variables) != len(self.components):
            raise ValueError("component count must equal state dimension")

    @staticmethod
    def make(pairs: Sequence) -> "VectorField":
        names = tuple(v for v, _ in pairs)
        comps = tuple(p for _, p in pairs)
        return VectorField(names, comps)

    def component(self, var: str) -> Polynomial:
        return self.components[self.variables.index(var)]


def lie_derivative(p: Polynomial, f: VectorField) -> Polynomial:
    """Inner product of the gradient of p with the flow components."""
    extra = p.variables() - set(f.variables)
    if extra:
        raise ValueError(f"polynomial uses non-state variables {sorted(extra)}")
    out = Polynomial()
    for v, comp in zip(f.variables, f.components):
        out = out + p.diff(v) * comp
    return out


def extend_field(f: VectorField, extra) -> VectorField:
    """Same flow with additional frozen variables (zero derivative); lets
    Lie chains run over parametric polynomials."""
    extra = tuple(v for v in extra if v not in f.variables)
    if not extra:
        return f
    return VectorField(f.variables + extra,
                       f.components + tuple(Polynomial() for _ in extra))


def lie_chain(p: Polynomial, f: VectorField, k: int) -> list:
    """[p, L^1 p, ..., L^k p] by repeated differentiation along f."""
    if k < 0:
        raise ValueError("k must be non-negative")
    chain = [p]
    for _ in range(k):
        chain.append(lie_derivative(chain[-1], f))
    return chain


# ----------------------------------------------------------------------
# Text grammar: identifiers, integer or integer/integer literals,
# operators + - * / ^ (with ^ only to non-negative integer literals and
# / only by integer literals).  No implicit multiplication.
# ----------------------------------------------------------------------

class PolyParseError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


def _tokenize(text: str):
    tokens = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit():
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            tokens.append(("int", text[i:j], i))
            i = j
        elif c.isalpha() or c == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("ident", text[i:j], i))
            i = j
        elif c in "+-*/^()":
            tokens.append((c, c, i))
            i += 1
        else:
            raise PolyParseError(f"unexpected character {c!r}", i)
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str):
        tok = self.next()
        if tok[0] != kind:
            raise PolyParseError(f"expected {kind!r}, got {tok[1]!r}", tok[2])
        return tok

    def parse(self) -> Polynomial:
        p = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise PolyParseError(f"trailing input {tok[1]!r}", tok[2])
        return p

    def expr(self) -> Polynomial:
        # [+-] term (("+"|"-") term)*
        sign = 1
        while self.peek()[0] in ("+", "-"):
            if self.next()[0] == "-":
                sign = -sign
        p = self.term() * sign
        while self.peek()[0] in ("+", "-"):
            op = self.next()[0]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self) -> Polynomial:
        p = self.factor()
        while self.peek()[0] in ("*", "/"):
            op = self.next()[0]
            if op == "*":
                p = p * self.factor()
            else:
                tok = self.expect("int")
                d = int(tok[1])
                if d == 0:
                    raise PolyParseError("division by zero", tok[2])
                p = p * Fraction(1, d)
        return p

    def factor(self) -> Polynomial:
        base = self.atom()
        if self.peek()[0] == "^":
            self.next()
            tok = self.expect("int")
            base = base ** int(tok[1])
        return base

    def atom(self) -> Polynomial:
        tok = self.next()
        if tok[0] == "int":
            num = int(tok[1])
            if self.peek()[0] == "/":
                # integer/integer literal
                save = self.pos
                self.next()
                den_tok = self.peek()
                if den_tok[0] == "int":
                    self.next()
                    den = int(den_tok[1])
                    if den == 0:
                        raise PolyParseError("zero denominator", den_tok[2])
                    return Polynomial.constant(Fraction(num, den))
                self.pos = save
            return Polynomial.constant(num)
        if tok[0] == "ident":
            return Polynomial.var(tok[1])
        if tok[0] == "-":
            return -self.atom()
        if tok[0] == "(":
            p = self.expr()
            self.expect(")")
            return p
        raise PolyParseError(f"unexpected token {tok[1]!r}", tok[2])


def parse_poly(text: str) -> Polynomial:
    return _Parser(text).parse()


def _mono_sort_key(m: Monomial):
    # graded lex on variable names, for stable printing
    return (-mono_degree(m), tuple((v, -e) for v, e in m))


def format_poly(p: Polynomial) -> str:
    """Canonical text form; round-trips bit-exactly through parse_poly."""
    if p.is_zero():
        return "0"
    parts = []
    for m in sorted(p.terms, key=_mono_sort_key):
        c = p.terms[m]
        mono = "*".join(v if e == 1 else f"{v}^{e}" for v, e in m)
        mag = abs(c)
        if mag.denominator == 1:
            coef = str(mag.numerator)
        else:
            coef = f"{mag.numerator}/{mag.denominator}"
        if mono and mag == 1:
            body = mono
        elif mono:
            body = f"{coef}*{mono}"
        else:
            body = coef
        if not parts:
            parts.append(body if c > 0 else f"-{body}")
        else:
            parts.append(f"+ {body}" if c > 0 else f"- {body}")
    return " ".join(parts)


def format_fraction(x: Fraction) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def parse_fraction(text: str) -> Fraction:
    return Fraction(text)
