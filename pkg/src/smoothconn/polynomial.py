"""Exact sparse multivariate polynomials.

Coefficients are :class:`fractions.Fraction`; numerical work goes through
:class:`PolyBundle`, which evaluates a batch of polynomials (and, through
precomputed derivative polynomials, their gradients and Hessians) in double
precision.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from numbers import Rational
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_VARS = 16
MAX_MINOR_SIZE = 6

Exponent = tuple[int, ...]


class PolynomialSyntaxError(ValueError):
    """Raised by :func:`parse` with the offending character position."""

    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} (at position {position})")


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        # exact binary value of the float
        return Fraction(value)
    raise TypeError(f"cannot use {type(value).__name__} as an exact coefficient")


class Polynomial:
    """Immutable sparse polynomial in ``nvars`` variables.

    ``terms`` maps exponent tuples to nonzero :class:`Fraction` coefficients.
    """

    __slots__ = ("nvars", "_terms", "__dict__")

    def __init__(self, nvars: int, terms: Mapping[Exponent, object] | None = None):
        if not 0 <= nvars <= MAX_VARS:
            raise ValueError(f"nvars must be in [0, {MAX_VARS}], got {nvars}")
        self.nvars = nvars
        clean: dict[Exponent, Fraction] = {}
        for exp, coef in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != nvars:
                raise ValueError(f"exponent {exp} does not have length {nvars}")
            if any(e < 0 for e in exp):
                raise ValueError(f"negative exponent in {exp}")
            c = _as_fraction(coef)
            if c != 0:
                clean[exp] = clean.get(exp, Fraction(0)) + c
                if clean[exp] == 0:
                    del clean[exp]
        self._terms = clean

    # -- constructors -----------------------------------------------------

    @classmethod
    def constant(cls, nvars: int, value=1) -> Polynomial:
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars: int, i: int) -> Polynomial:
        if not 0 <= i < nvars:
            raise IndexError(f"variable index {i} out of range for {nvars} variables")
        exp = [0] * nvars
        exp[i] = 1
        return cls(nvars, {tuple(exp): 1})

    @classmethod
    def zero(cls, nvars: int) -> Polynomial:
        return cls(nvars, {})

    # -- basic queries ----------------------------------------------------

    @property
    def terms(self) -> dict[Exponent, Fraction]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self._terms:
            return -1
        return max(sum(e) for e in self._terms)

    def degree_in(self, i: int) -> int:
        if not self._terms:
            return -1
        return max(e[i] for e in self._terms)

    def is_constant(self) -> bool:
        return all(not any(e) for e in self._terms)

    def constant_value(self) -> Fraction:
        return self._terms.get((0,) * self.nvars, Fraction(0))

    def divisible_by_variable(self, i: int) -> bool:
        return bool(self._terms) and all(e[i] >= 1 for e in self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            return self.nvars == other.nvars and self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self == Polynomial.constant(self.nvars, other)
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.nvars, frozenset(self._terms.items())))

    # -- arithmetic -------------------------------------------------------

    def _coerce(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError(f"variable count mismatch: {self.nvars} vs {other.nvars}")
            return other
        return Polynomial.constant(self.nvars, _as_fraction(other))

    def __add__(self, other) -> Polynomial:
        other = self._coerce(other)
        out = dict(self._terms)
        for e, c in other._terms.items():
            out[e] = out.get(e, Fraction(0)) + c
        return Polynomial(self.nvars, out)

    __radd__ = __add__

    def __neg__(self) -> Polynomial:
        return Polynomial(self.nvars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other) -> Polynomial:
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> Polynomial:
        return self._coerce(other) - self

    def __mul__(self, other) -> Polynomial:
        other = self._coerce(other)
        out: dict[Exponent, Fraction] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, Fraction(0)) + c1 * c2
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    def __truediv__(self, other) -> Polynomial:
        other = self._coerce(other)
        if not other.is_constant() or other.is_zero():
            raise ZeroDivisionError("polynomials can only be divided by nonzero constants")
        inv = 1 / other.constant_value()
        return Polynomial(self.nvars, {e: c * inv for e, c in self._terms.items()})

    def __pow__(self, k: int) -> Polynomial:
        if not isinstance(k, int) or k < 0:
            raise ValueError(f"exponent must be a non-negative integer, got {k!r}")
        result = Polynomial.constant(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    # -- calculus ---------------------------------------------------------

    def differentiate(self, i: int) -> Polynomial:
        if not 0 <= i < self.nvars:
            raise IndexError(f"variable index {i} out of range for {self.nvars} variables")
        out = {}
        for e, c in self._terms.items():
            if e[i]:
                ne = list(e)
                ne[i] -= 1
                out[tuple(ne)] = c * e[i]
        return Polynomial(self.nvars, out)

    def lift(self, nvars: int, offset: int = 0) -> Polynomial:
        """Embed into a ring with more variables (ours occupy ``offset:offset+self.nvars``)."""
        if offset + self.nvars > nvars:
            raise ValueError("target ring too small")
        pad_l, pad_r = (0,) * offset, (0,) * (nvars - offset - self.nvars)
        return Polynomial(nvars, {pad_l + e + pad_r: c for e, c in self._terms.items()})

    # -- numerics ---------------------------------------------------------

    @cached_property
    def _numeric(self) -> tuple[np.ndarray, np.ndarray]:
        if not self._terms:
            return np.zeros((0, self.nvars), dtype=np.int64), np.zeros(0)
        exps = np.array(list(self._terms.keys()), dtype=np.int64).reshape(-1, self.nvars)
        coefs = np.array([float(c) for c in self._terms.values()])
        return exps, coefs

    def evaluate(self, x) -> float | complex:
        x = np.asarray(x)
        if x.shape != (self.nvars,):
            raise ValueError(f"expected a point with {self.nvars} coordinates, got shape {x.shape}")
        exps, coefs = self._numeric
        if not len(coefs):
            return 0.0
        return (coefs * np.prod(x[None, :] ** exps, axis=1)).sum()

    __call__ = evaluate

    # -- printing ---------------------------------------------------------

    def to_string(self, names: Sequence[str] | None = None) -> str:
        names = list(names) if names is not None else [f"x{i + 1}" for i in range(self.nvars)]
        if not self._terms:
            return "0"
        pieces = []
        for e in sorted(self._terms, key=lambda e: (-sum(e), tuple(-a for a in e))):
            c = self._terms[e]
            mono = "*".join(
                names[i] if k == 1 else f"{names[i]}^{k}" for i, k in enumerate(e) if k
            )
            mag = abs(c)
            sign = "-" if c < 0 else "+"
            if mono and mag == 1:
                body = mono
            elif mono:
                body = f"{mag}*{mono}"
            else:
                body = str(mag)
            pieces.append((sign, body))
        first_sign, first = pieces[0]
        out = ("-" if first_sign == "-" else "") + first
        for sign, body in pieces[1:]:
            out += f" {sign} {body}"
        return out

    def __repr__(self) -> str:
        return f"Polynomial({self.to_string()!r})"


@dataclass(frozen=True)
class PolySystem:
    """Ordered list of polynomials sharing one variable set."""

    nvars: int
    polys: tuple[Polynomial, ...]

    def __post_init__(self):
        object.__setattr__(self, "polys", tuple(self.polys))
        for p in self.polys:
            if p.nvars != self.nvars:
                raise ValueError(f"system member has {p.nvars} variables, expected {self.nvars}")

    def __len__(self) -> int:
        return len(self.polys)

    def __iter__(self):
        return iter(self.polys)

    def __getitem__(self, i):
        return self.polys[i]

    def degrees(self) -> list[int]:
        return [p.degree() for p in self.polys]

    def evaluate(self, x) -> np.ndarray:
        return np.array([p.evaluate(x) for p in self.polys])


# -- symbolic calculus helpers -------------------------------------------


def differentiate(p: Polynomial, i: int) -> Polynomial:
    return p.differentiate(i)


def evaluate(p: Polynomial, x) -> float:
    return p.evaluate(x)


def gradient(p: Polynomial) -> PolySystem:
    return PolySystem(p.nvars, tuple(p.differentiate(i) for i in range(p.nvars)))


def hessian(p: Polynomial) -> list[list[Polynomial]]:
    grads = [p.differentiate(i) for i in range(p.nvars)]
    H = [[None] * p.nvars for _ in range(p.nvars)]
    for i in range(p.nvars):
        for j in range(i, p.nvars):
            H[i][j] = H[j][i] = grads[i].differentiate(j)
    return H


def jacobian(system: PolySystem) -> list[list[Polynomial]]:
    return [[p.differentiate(j) for j in range(system.nvars)] for p in system.polys]


def _det(M: list[list[Polynomial]], rows: tuple[int, ...], cols: tuple[int, ...], memo: dict) -> Polynomial:
    key = (rows, cols)
    if key in memo:
        return memo[key]
    if len(rows) == 1:
        out = M[rows[0]][cols[0]]
    else:
        nvars = M[rows[0]][cols[0]].nvars
        out = Polynomial.zero(nvars)
        r0, rest = rows[0], rows[1:]
        for j, c in enumerate(cols):
            entry = M[r0][c]
            if entry.is_zero():
                continue
            sub = _det(M, rest, cols[:j] + cols[j + 1:], memo)
            out = out + entry * sub if j % 2 == 0 else out - entry * sub
    memo[key] = out
    return out


def minor_sum(J: list[list[Polynomial]], m: int) -> Polynomial:
    """Sum of squares of all ``m x m`` minors of the polynomial matrix ``J``.

    Laplace expansion along rows, memoized on (row suffix, column subset).
    """
    rows, cols = len(J), len(J[0]) if J else 0
    if not 1 <= m <= min(rows, cols):
        raise ValueError(f"minor size {m} out of range for a {rows}x{cols} matrix")
    if m > MAX_MINOR_SIZE:
        raise ValueError(f"minor size {m} exceeds the supported maximum {MAX_MINOR_SIZE}")
    nvars = J[0][0].nvars
    memo: dict = {}
    total = Polynomial.zero(nvars)
    for rs in itertools.combinations(range(rows), m):
        for cs in itertools.combinations(range(cols), m):
            d = _det(J, rs, cs, memo)
            if not d.is_zero():
                total = total + d * d
    return total


# -- batched numeric evaluation --------------------------------------------


class PolyBundle:
    """Evaluate many polynomials at once.

    All monomials are collected into one exponent table; values are a single
    matrix product ``monomials @ coefficients``.  Works for real or complex
    points.
    """

    def __init__(self, polys: Sequence[Polynomial], nvars: int | None = None):
        polys = list(polys)
        if nvars is None:
            if not polys:
                raise ValueError("empty bundle needs nvars")
            nvars = polys[0].nvars
        self.nvars = nvars
        self.size = len(polys)
        index: dict[Exponent, int] = {}
        entries = []
        for j, p in enumerate(polys):
            if p.nvars != nvars:
                raise ValueError("bundle members must share nvars")
            for e, c in p._terms.items():
                t = index.setdefault(e, len(index))
                entries.append((t, j, float(c)))
        if not index:
            index[(0,) * nvars] = 0
        self.exps = np.array(list(index.keys()), dtype=np.int64).reshape(-1, nvars)
        self.coefs = np.zeros((len(index), self.size))
        for t, j, c in entries:
            self.coefs[t, j] += c
        self.maxdeg = int(self.exps.max(initial=0))
        self._cols = np.arange(nvars)[None, :]

    def monomials(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1] != self.nvars:
            raise ValueError(f"expected {self.nvars} coordinates, got {x.shape[-1]}")
        powers = np.ones(x.shape[:-1] + (self.nvars, self.maxdeg + 1), dtype=np.result_type(x, float))
        for k in range(1, self.maxdeg + 1):
            powers[..., k] = powers[..., k - 1] * x
        gathered = powers[..., self._cols, self.exps]  # (..., T, nvars)
        return gathered.prod(axis=-1)

    def __call__(self, x) -> np.ndarray:
        return self.monomials(x) @ self.coefs


# -- parsing ---------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise PolynomialSyntaxError(f"unexpected character {text[start]!r}", start, text)
        start = m.start(m.lastgroup)
        tokens.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, names: Sequence[str], params: Mapping[str, Fraction]):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.index = {name: k for k, name in enumerate(names)}
        self.nvars = len(names)
        self.params = params

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str, tok=None):
        tok = tok or self.peek()
        raise PolynomialSyntaxError(message, tok[2], self.text)

    def expect(self, op: str):
        tok = self.take()
        if tok[1] != op or tok[0] != "op":
            self.error(f"expected {op!r}", tok)

    def parse(self) -> Polynomial:
        if self.peek()[0] == "end":
            self.error("empty expression")
        p = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected {self.peek()[1]!r}; implicit multiplication is not allowed")
        return p

    def expr(self) -> Polynomial:
        p = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self) -> Polynomial:
        p = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            tok = self.take()
            q = self.unary()
            if tok[1] == "*":
                p = p * q
            else:
                if not q.is_constant() or q.is_zero():
                    self.error("division only by nonzero constants", tok)
                p = p / q
        return p

    def unary(self) -> Polynomial:
        tok = self.peek()
        if tok[0] == "op" and tok[1] in "+-":
            self.take()
            p = self.unary()
            return -p if tok[1] == "-" else p
        return self.power()

    def power(self) -> Polynomial:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            tok = self.peek()
            negative = False
            if tok[0] == "op" and tok[1] in "+-":
                negative = tok[1] == "-"
                self.take()
                tok = self.peek()
            if tok[0] != "num" or not tok[1].isdigit():
                self.error("exponent must be a non-negative integer literal", tok)
            self.take()
            if negative:
                self.error("negative exponent", tok)
            return base ** int(tok[1])
        return base

    def atom(self) -> Polynomial:
        tok = self.take()
        kind, value, _ = tok
        if kind == "num":
            return Polynomial.constant(self.nvars, Fraction(value))
        if kind == "name":
            if value in self.index:
                return Polynomial.variable(self.nvars, self.index[value])
            if value in self.params:
                return Polynomial.constant(self.nvars, self.params[value])
            self.error(f"unknown variable {value!r}", tok)
        if kind == "op" and value == "(":
            p = self.expr()
            self.expect(")")
            return p
        if kind == "end":
            self.error("unexpected end of expression", tok)
        self.error(f"unexpected {value!r}", tok)


def parse(text: str, names: Sequence[str], params: Mapping[str, object] | None = None) -> Polynomial:
    """Parse an expanded-or-not polynomial expression.

    Grammar: identifiers from ``names`` (or ``params``, which are exact
    constants), integer / decimal literals, ``+ - * / ^`` and parentheses.
    ``/`` requires a constant right operand, so ``1/2`` is the rational
    one half.  Exponents are non-negative integer literals.
    """
    names = list(names)
    if len(set(names)) != len(names):
        raise ValueError("duplicate variable names")
    params = {k: _as_fraction(v) for k, v in (params or {}).items()}
    clash = set(params) & set(names)
    if clash:
        raise ValueError(f"parameters shadow variables: {sorted(clash)}")
    return _Parser(text, names, params).parse()


def polys_from_strings(texts: Iterable[str], names: Sequence[str], params=None) -> PolySystem:
    return PolySystem(len(names), tuple(parse(t, names, params) for t in texts))
