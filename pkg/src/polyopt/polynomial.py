"""Sparse multivariate polynomials over a graded-lexicographic monomial order.

A monomial is an exponent vector a = (a_1, ..., a_n) representing
x^a = x_1^a_1 * ... * x_n^a_n.  Monomials are ordered by total degree first
and, within a degree, lexicographically with x_1 > x_2 > ... > x_n, so the
enumeration starts  1, x1, ..., xn, x1^2, x1*x2, ...  This order is dense:
the position of a monomial does not depend on the truncation degree, which
lets moment vectors of different degrees share index arithmetic.

Coefficients are doubles.  The zero polynomial stores no terms and has no
degree; operations that need a degree reject it.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache, total_ordering
from typing import Iterable, Iterator, Mapping, Sequence

__all__ = [
    "Monomial",
    "Polynomial",
    "MonomialBasis",
    "PolynomialParseError",
    "degree_half",
    "constraint_half_degree",
    "parse_polynomial",
]


@total_ordering
@dataclass(frozen=True)
class Monomial:
    """Exponent vector with cached total degree, ordered graded-lex."""

    exponents: tuple[int, ...]
    degree: int = field(init=False, compare=False)

    def __post_init__(self) -> None:
        exps = tuple(int(e) for e in self.exponents)
        if any(e < 0 for e in exps):
            raise ValueError(f"negative exponent in {exps}")
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "degree", sum(exps))

    @property
    def nvars(self) -> int:
        return len(self.exponents)

    def _key(self) -> tuple:
        # Graded-lex: degree first, then x1 > x2 > ... (higher leading
        # exponents come earlier, hence the negation).
        return (self.degree, tuple(-e for e in self.exponents))

    def __lt__(self, other: "Monomial") -> bool:
        return self._key() < other._key()

    def __mul__(self, other: "Monomial") -> "Monomial":
        if len(self.exponents) != len(other.exponents):
            raise ValueError("monomials over different variable counts")
        return Monomial(tuple(a + b for a, b in zip(self.exponents, other.exponents)))

    def __repr__(self) -> str:
        return f"Monomial{self.exponents}"


def _monomials_of_degree(nvars: int, total: int) -> Iterator[tuple[int, ...]]:
    """Exponent vectors of exact degree `total`, in graded-lex order."""
    if nvars == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _monomials_of_degree(nvars - 1, total - first):
            yield (first,) + rest


@lru_cache(maxsize=None)
def _basis_tuples(nvars: int, max_degree: int) -> tuple[tuple[int, ...], ...]:
    out: list[tuple[int, ...]] = []
    for total in range(max_degree + 1):
        out.extend(_monomials_of_degree(nvars, total))
    return tuple(out)


class MonomialBasis:
    """All monomials of degree <= d in n variables, graded-lex indexed.

    index(a) < index(b) iff a precedes b in graded-lex order; the constant
    monomial has index 0 and len(basis) == C(n+d, d).
    """

    __slots__ = ("nvars", "max_degree", "exponents", "_index")

    def __init__(self, nvars: int, max_degree: int) -> None:
        if nvars < 1:
            raise ValueError("need at least one variable")
        if max_degree < 0:
            raise ValueError("degree must be nonnegative")
        self.nvars = nvars
        self.max_degree = max_degree
        self.exponents = _basis_tuples(nvars, max_degree)
        self._index = {e: i for i, e in enumerate(self.exponents)}

    def __len__(self) -> int:
        return len(self.exponents)

    def __getitem__(self, i: int) -> Monomial:
        return Monomial(self.exponents[i])

    def __iter__(self) -> Iterator[Monomial]:
        return (Monomial(e) for e in self.exponents)

    def index(self, mono: Monomial | tuple[int, ...]) -> int:
        exps = mono.exponents if isinstance(mono, Monomial) else tuple(mono)
        try:
            return self._index[exps]
        except KeyError:
            raise ValueError(
                f"monomial {exps} exceeds basis degree {self.max_degree}"
            ) from None

    def index_of_exponents(self, exps: tuple[int, ...]) -> int:
        return self._index[exps]

    def __repr__(self) -> str:
        return f"MonomialBasis(nvars={self.nvars}, max_degree={self.max_degree}, size={len(self)})"


@lru_cache(maxsize=None)
def basis(nvars: int, max_degree: int) -> MonomialBasis:
    """Shared, cached basis instances (immutable)."""
    return MonomialBasis(nvars, max_degree)


class Polynomial:
    """Sparse polynomial: finite map from Monomial to nonzero coefficient.

    Immutable after construction; arithmetic returns new objects.
    """

    __slots__ = ("nvars", "terms")

    def __init__(
        self,
        nvars: int,
        terms: Mapping[Monomial, float] | Mapping[tuple[int, ...], float] | None = None,
    ) -> None:
        if nvars < 1:
            raise ValueError("need at least one variable")
        self.nvars = nvars
        clean: dict[Monomial, float] = {}
        if terms:
            for key, coeff in terms.items():
                mono = key if isinstance(key, Monomial) else Monomial(tuple(key))
                if mono.nvars != nvars:
                    raise ValueError(
                        f"monomial {mono.exponents} has {mono.nvars} variables, expected {nvars}"
                    )
                c = float(coeff)
                if c != 0.0:
                    clean[mono] = clean.get(mono, 0.0) + c
        self.terms = {m: c for m, c in clean.items() if c != 0.0}

    # ---- constructors -------------------------------------------------

    @staticmethod
    def zero(nvars: int) -> "Polynomial":
        return Polynomial(nvars, {})

    @staticmethod
    def constant(nvars: int, value: float) -> "Polynomial":
        return Polynomial(nvars, {(0,) * nvars: value})

    @staticmethod
    def variable(nvars: int, var: int) -> "Polynomial":
        """The polynomial x_{var+1} (0-based variable index)."""
        if not 0 <= var < nvars:
            raise ValueError(f"variable index {var} out of range for {nvars} variables")
        exps = [0] * nvars
        exps[var] = 1
        return Polynomial(nvars, {tuple(exps): 1.0})

    @staticmethod
    def one(nvars: int) -> "Polynomial":
        return Polynomial.constant(nvars, 1.0)

    # ---- structure ----------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        """Total degree.  Undefined (raises) for the zero polynomial."""
        if not self.terms:
            raise ValueError("the zero polynomial has no degree")
        return max(m.degree for m in self.terms)

    def coefficient(self, mono: Monomial | tuple[int, ...]) -> float:
        m = mono if isinstance(mono, Monomial) else Monomial(tuple(mono))
        return self.terms.get(m, 0.0)

    def sorted_terms(self) -> list[tuple[Monomial, float]]:
        return sorted(self.terms.items(), key=lambda kv: kv[0]._key())

    def coefficient_vector(self, bas: MonomialBasis) -> "list[float]":
        """Dense coefficients over a basis (raises if a term does not fit)."""
        vec = [0.0] * len(bas)
        for mono, coeff in self.terms.items():
            vec[bas.index(mono)] = coeff
        return vec

    # ---- arithmetic ---------------------------------------------------

    def _check_same_vars(self, other: "Polynomial") -> None:
        if self.nvars != other.nvars:
            raise ValueError(
                f"variable count mismatch: {self.nvars} vs {other.nvars}"
            )

    def __add__(self, other: "Polynomial | float | int") -> "Polynomial":
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        self._check_same_vars(other)
        out = dict(self.terms)
        for mono, coeff in other.terms.items():
            out[mono] = out.get(mono, 0.0) + coeff
        return Polynomial(self.nvars, out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.nvars, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Polynomial | float | int") -> "Polynomial":
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        return self + (-other)

    def __rsub__(self, other: "float | int") -> "Polynomial":
        return Polynomial.constant(self.nvars, other) - self

    def __mul__(self, other: "Polynomial | float | int") -> "Polynomial":
        if isinstance(other, (int, float)):
            return Polynomial(self.nvars, {m: c * other for m, c in self.terms.items()})
        self._check_same_vars(other)
        out: dict[Monomial, float] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = m1 * m2
                out[m] = out.get(m, 0.0) + c1 * c2
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, exponent: int) -> "Polynomial":
        if exponent < 0:
            raise ValueError("negative powers not supported")
        out = Polynomial.one(self.nvars)
        for _ in range(exponent):
            out = out * self
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self) -> int:
        return hash((self.nvars, frozenset(self.terms.items())))

    # ---- calculus and evaluation ---------------------------------------

    def partial_derivative(self, var: int) -> "Polynomial":
        """Formal derivative with respect to x_{var+1} (0-based index)."""
        if not 0 <= var < self.nvars:
            raise ValueError(f"variable index {var} out of range for {self.nvars} variables")
        out: dict[tuple[int, ...], float] = {}
        for mono, coeff in self.terms.items():
            e = mono.exponents[var]
            if e == 0:
                continue
            new = list(mono.exponents)
            new[var] = e - 1
            key = tuple(new)
            out[key] = out.get(key, 0.0) + coeff * e
        return Polynomial(self.nvars, out)

    def gradient(self) -> list["Polynomial"]:
        return [self.partial_derivative(i) for i in range(self.nvars)]

    def __call__(self, point: Sequence[float]) -> float:
        return self.evaluate(point)

    def evaluate(self, point: Sequence[float]) -> float:
        """Value at a point, accumulated with compensated summation."""
        pt = tuple(float(v) for v in point)
        if len(pt) != self.nvars:
            raise ValueError(f"point has dimension {len(pt)}, expected {self.nvars}")
        contributions = []
        for mono, coeff in self.sorted_terms():
            term = coeff
            for x, e in zip(pt, mono.exponents):
                if e:
                    term *= x**e
            contributions.append(term)
        return math.fsum(contributions)

    # ---- text form ------------------------------------------------------

    def __str__(self) -> str:
        return format_polynomial(self)

    def __repr__(self) -> str:
        return f"Polynomial({self.nvars}, {format_polynomial(self)!r})"


def degree_half(p: Polynomial) -> int:
    """ceil(deg(p)/2); the half-degree governing matrix block sizes."""
    if p.is_zero:
        raise ValueError("half-degree of the zero polynomial is undefined")
    return (p.degree + 1) // 2


def constraint_half_degree(constraints: Iterable[Polynomial]) -> int:
    """max(1, d_1, ..., d_m) over half-degrees; 1 for no constraints.

    The empty case corresponds to the whole space, treated as the trivial
    constraint 1 >= 0.
    """
    return max([1] + [degree_half(g) for g in constraints])


# ---------------------------------------------------------------------------
# Text grammar
#
#   poly   := [sign] term (('+'|'-') term)*
#   term   := factor ('*' factor)*
#   factor := NUMBER | VAR ['^' INT]
#   VAR    := 'x' INT           (x1 is the first variable)
#
# Whitespace is insignificant.  Example:
#   x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1
# ---------------------------------------------------------------------------


class PolynomialParseError(ValueError):
    """Syntax error with position information (1-based line and column)."""

    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<var>x\d+)"
    r"|(?P<op>[-+*^()])"
    r"|(?P<bad>\S))"
)


def _tokenize(text: str, line: int, col_offset: int) -> list[tuple[str, str, int]]:
    tokens = []
    for match in _TOKEN_RE.finditer(text):
        col = match.start(match.lastgroup) + 1 + col_offset
        kind = match.lastgroup
        value = match.group(kind)
        if kind == "bad":
            raise PolynomialParseError(f"unexpected character {value!r}", line, col)
        tokens.append((kind, value, col))
    return tokens


class _PolyParser:
    def __init__(self, text: str, nvars: int | None, line: int, col_offset: int) -> None:
        self.tokens = _tokenize(text, line, col_offset)
        self.pos = 0
        self.line = line
        self.end_col = col_offset + len(text) + 1
        self.nvars = nvars
        self.max_var_seen = 0

    def _peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _next(self) -> tuple[str, str, int] | None:
        tok = self._peek()
        if tok is not None:
            self.pos += 1
        return tok

    def _fail(self, message: str, tok: tuple[str, str, int] | None) -> None:
        col = tok[2] if tok is not None else self.end_col
        raise PolynomialParseError(message, self.line, col)

    def parse(self) -> list[tuple[float, dict[int, int]]]:
        """Returns a list of (coefficient, {var index: exponent}) terms."""
        terms = []
        sign = 1.0
        tok = self._peek()
        if tok is not None and tok[1] in "+-":
            self._next()
            sign = -1.0 if tok[1] == "-" else 1.0
        terms.append(self._term(sign))
        while (tok := self._peek()) is not None:
            if tok[1] not in "+-":
                self._fail(f"expected '+' or '-', found {tok[1]!r}", tok)
            self._next()
            sign = -1.0 if tok[1] == "-" else 1.0
            terms.append(self._term(sign))
        return terms

    def _term(self, sign: float) -> tuple[float, dict[int, int]]:
        coeff = sign
        powers: dict[int, int] = {}
        while True:
            coeff, powers = self._factor(coeff, powers)
            tok = self._peek()
            if tok is not None and tok[1] == "*":
                self._next()
                continue
            return coeff, powers

    def _factor(
        self, coeff: float, powers: dict[int, int]
    ) -> tuple[float, dict[int, int]]:
        tok = self._next()
        if tok is None:
            self._fail("expected a coefficient or variable", None)
        kind, value, col = tok
        if kind == "num":
            return coeff * float(value), powers
        if kind == "var":
            var = int(value[1:])
            if var < 1:
                raise PolynomialParseError("variable indices start at x1", self.line, col)
            if self.nvars is not None and var > self.nvars:
                raise PolynomialParseError(
                    f"undeclared variable {value}", self.line, col
                )
            self.max_var_seen = max(self.max_var_seen, var)
            exp = 1
            nxt = self._peek()
            if nxt is not None and nxt[1] == "^":
                self._next()
                etok = self._next()
                if etok is None or etok[0] != "num" or not etok[1].isdigit():
                    self._fail("expected an integer exponent after '^'", etok)
                exp = int(etok[1])
            powers[var - 1] = powers.get(var - 1, 0) + exp
            return coeff, powers
        self._fail(f"expected a coefficient or variable, found {value!r}", tok)
        raise AssertionError("unreachable")


def parse_polynomial(
    text: str,
    nvars: int | None = None,
    line: int = 1,
    col_offset: int = 0,
) -> Polynomial:
    """Parse the text grammar above into a Polynomial.

    With nvars=None the variable count is inferred from the largest index
    used (at least 1).  line/col_offset shift reported error positions for
    callers embedding polynomials in larger documents.
    """
    parser = _PolyParser(text, nvars, line, col_offset)
    if not parser.tokens:
        raise PolynomialParseError("empty polynomial", line, col_offset + 1)
    raw_terms = parser.parse()
    n = nvars if nvars is not None else max(1, parser.max_var_seen)
    terms: dict[tuple[int, ...], float] = {}
    for coeff, powers in raw_terms:
        exps = [0] * n
        for var, e in powers.items():
            exps[var] = e
        key = tuple(exps)
        terms[key] = terms.get(key, 0.0) + coeff
    return Polynomial(n, terms)


def _format_coefficient(c: float) -> str:
    if c == int(c) and abs(c) < 1e15:
        return str(int(c))
    return repr(c)


def format_polynomial(p: Polynomial) -> str:
    """Inverse of parse_polynomial up to term ordering (graded-lex, constant
    first) and coefficient formatting."""
    if p.is_zero:
        return "0"
    pieces: list[str] = []
    for mono, coeff in p.sorted_terms():
        factors = [
            f"x{i + 1}^{e}" if e > 1 else f"x{i + 1}"
            for i, e in enumerate(mono.exponents)
            if e > 0
        ]
        mag = abs(coeff)
        if not factors:
            body = _format_coefficient(mag)
        elif mag == 1.0:
            body = "*".join(factors)
        else:
            body = "*".join([_format_coefficient(mag)] + factors)
        if not pieces:
            pieces.append(body if coeff > 0 else f"-{body}")
        else:
            pieces.append(f"+ {body}" if coeff > 0 else f"- {body}")
    return " ".join(pieces)
