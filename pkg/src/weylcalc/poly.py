"""Exact sparse polynomials on the dual of a Lie algebra.

Coefficients live in the Gaussian rationals ``Q(i)`` (``sympy``'s ``QQ_I``
domain), so sums, products, derivatives and conjugation are exact.
"""
from __future__ import annotations

from fractions import Fraction
from math import factorial
from typing import Dict, Mapping, Tuple

import numpy as np
from sympy.polys.domains import QQ, QQ_I

Monomial = Tuple[int, ...]
ZERO = QQ_I(0, 0)
ONE = QQ_I(1, 0)
I_UNIT = QQ_I(0, 1)


def to_coeff(v):
    """Convert a number to an exact ``QQ_I`` element.

    Floats are converted through their exact binary value; complex numbers
    through their real and imaginary parts.  Pairs ``(re, im)`` are accepted.
    """
    if isinstance(v, type(ZERO)):
        return v
    if isinstance(v, tuple) and len(v) == 2:
        return QQ_I(_to_q(v[0]), _to_q(v[1]))
    if isinstance(v, complex):
        return QQ_I(_to_q(v.real), _to_q(v.imag))
    return QQ_I(_to_q(v), 0)


def _to_q(v):
    if isinstance(v, float):
        return QQ(*Fraction(v).as_integer_ratio())
    if isinstance(v, (int, Fraction)):
        f = Fraction(v)
        return QQ(f.numerator, f.denominator)
    if isinstance(v, str):
        f = Fraction(v)
        return QQ(f.numerator, f.denominator)
    return QQ.convert(v)


def coeff_conj(c):
    return QQ_I(c.x, -c.y)


def coeff_complex(c) -> complex:
    return complex(float(c.x), float(c.y))


def coeff_str(c) -> str:
    re, im = Fraction(int(c.x.numerator), int(c.x.denominator)), Fraction(int(c.y.numerator), int(c.y.denominator))
    if im == 0:
        return str(re)
    return f"({re},{im})"


class PolySymbol:
    """Polynomial ``sum_alpha c_alpha xi^alpha`` in ``nvars`` variables.

    Parameters
    ----------
    nvars : int
        Number of variables ``xi1..xin``.
    terms : mapping, optional
        Multi-index to coefficient.  Zero coefficients are dropped so that the
        zero polynomial has an empty term map.
    """

    __slots__ = ("nvars", "terms", "_hash")

    def __init__(self, nvars: int, terms: Mapping[Monomial, object] | None = None):
        self.nvars = int(nvars)
        clean: Dict[Monomial, object] = {}
        for mono, c in (terms or {}).items():
            mono = tuple(int(e) for e in mono)
            if len(mono) != self.nvars or min(mono, default=0) < 0:
                raise ValueError(f"bad multi-index {mono} for {self.nvars} variables")
            c = to_coeff(c)
            if c != ZERO:
                clean[mono] = clean.get(mono, ZERO) + c
                if clean[mono] == ZERO:
                    del clean[mono]
        self.terms = clean
        self._hash = None

    # -- constructors ----------------------------------------------------------
    @classmethod
    def constant(cls, nvars: int, c=1) -> "PolySymbol":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars: int, i: int) -> "PolySymbol":
        mono = [0] * nvars
        mono[i] = 1
        return cls(nvars, {tuple(mono): 1})

    @classmethod
    def _raw(cls, nvars, terms):
        out = cls.__new__(cls)
        out.nvars = nvars
        out.terms = terms
        out._hash = None
        return out

    @classmethod
    def parse(cls, text: str, nvars: int) -> "PolySymbol":
        from .expr import parse_symbol
        out = parse_symbol(text, nvars)
        if not isinstance(out, PolySymbol):
            raise ValueError(f"not a polynomial expression: {text!r}")
        return out

    # -- basic queries ---------------------------------------------------------
    @property
    def degree(self) -> int:
        """Total degree, ``-1`` for the zero polynomial."""
        return max((sum(m) for m in self.terms), default=-1)

    def is_zero(self) -> bool:
        return not self.terms

    def is_real(self) -> bool:
        return all(c.y == 0 for c in self.terms.values())

    def coefficient(self, mono) -> object:
        return self.terms.get(tuple(mono), ZERO)

    def homogeneous_parts(self):
        """Homogeneous components, highest degree first, zero parts omitted."""
        by_deg: Dict[int, dict] = {}
        for m, c in self.terms.items():
            by_deg.setdefault(sum(m), {})[m] = c
        return [PolySymbol._raw(self.nvars, by_deg[d]) for d in sorted(by_deg, reverse=True)]

    def principal_part(self) -> "PolySymbol":
        parts = self.homogeneous_parts()
        return parts[0] if parts else PolySymbol(self.nvars)

    # -- arithmetic ------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, PolySymbol):
            if other.nvars != self.nvars:
                raise ValueError("polynomials in different numbers of variables")
            return other
        return PolySymbol.constant(self.nvars, other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            v = out.get(m, ZERO) + c
            if v == ZERO:
                out.pop(m, None)
            else:
                out[m] = v
        return PolySymbol._raw(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return PolySymbol._raw(self.nvars, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, PolySymbol):
            c = to_coeff(other)
            if c == ZERO:
                return PolySymbol(self.nvars)
            return PolySymbol._raw(self.nvars, {m: v * c for m, v in self.terms.items()})
        other = self._coerce(other)
        out: Dict[Monomial, object] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out.get(m, ZERO) + c1 * c2
        return PolySymbol._raw(self.nvars, {m: c for m, c in out.items() if c != ZERO})

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power of a polynomial")
        out = PolySymbol.constant(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, PolySymbol):
            return self.nvars == other.nvars and self.terms == other.terms
        try:
            return self == PolySymbol.constant(self.nvars, other)
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.nvars, frozenset((m, (c.x, c.y)) for m, c in self.terms.items())))
        return self._hash

    def conj(self) -> "PolySymbol":
        return PolySymbol._raw(self.nvars, {m: coeff_conj(c) for m, c in self.terms.items()})

    # -- calculus --------------------------------------------------------------
    def diff(self, i: int, k: int = 1) -> "PolySymbol":
        out = {}
        for m, c in self.terms.items():
            if m[i] < k:
                continue
            f = 1
            for r in range(k):
                f *= m[i] - r
            nm = list(m)
            nm[i] -= k
            out[tuple(nm)] = c * f
        return PolySymbol._raw(self.nvars, out)

    def derivative(self, alpha) -> "PolySymbol":
        """Partial derivative ``D^alpha``."""
        out = self
        for i, k in enumerate(alpha):
            if k:
                out = out.diff(i, k)
        return out

    def gradient(self):
        return [self.diff(i) for i in range(self.nvars)]

    def substitute(self, values: Mapping[int, object]) -> "PolySymbol":
        """Replace variables by exact constants, keeping the variable count."""
        vals = {i: to_coeff(v) for i, v in values.items()}
        out: Dict[Monomial, object] = {}
        for m, c in self.terms.items():
            nm = list(m)
            for i, v in vals.items():
                c = c * v ** nm[i] if nm[i] else c
                nm[i] = 0
            nm = tuple(nm)
            out[nm] = out.get(nm, ZERO) + c
        return PolySymbol(self.nvars, out)

    # -- numerics --------------------------------------------------------------
    def __call__(self, xi) -> np.ndarray:
        """Evaluate at points of shape ``(..., nvars)``."""
        xi = np.asarray(xi)
        if xi.shape[-1] != self.nvars:
            raise ValueError(f"points must have last axis {self.nvars}")
        out = np.zeros(xi.shape[:-1], dtype=complex)
        powers = {}
        for m, c in self.terms.items():
            term = np.full(xi.shape[:-1], coeff_complex(c))
            for i, e in enumerate(m):
                if e:
                    key = (i, e)
                    if key not in powers:
                        powers[key] = xi[..., i] ** e
                    term = term * powers[key]
            out = out + term
        return out

    def compile(self):
        """Vectorised evaluator ``xi -> p(xi)`` (real output when coefficients are real)."""
        if not self.terms:
            return lambda xi: np.zeros(np.shape(xi)[:-1])
        monos = list(self.terms)
        E = np.array(monos, dtype=float)
        c = np.array([coeff_complex(self.terms[m]) for m in monos])
        if np.all(c.imag == 0):
            c = c.real

        def f(xi):
            xi = np.asarray(xi, dtype=float)
            return np.prod(xi[..., None, :] ** E, axis=-1) @ c
        return f

    def taylor_coefficients(self, points: np.ndarray, max_degree: int, monomials) -> np.ndarray:
        """Taylor coefficients ``D^gamma p(x0) / gamma!`` for ``gamma`` in ``monomials``."""
        points = np.asarray(points, dtype=complex)
        out = np.zeros((len(monomials),) + points.shape[:-1], dtype=complex)
        for idx, g in enumerate(monomials):
            if sum(g) > max_degree:
                continue
            d = self.derivative(g)
            if d.is_zero():
                continue
            f = 1
            for e in g:
                f *= factorial(e)
            out[idx] = d(points) / f
        return out

    # -- text ------------------------------------------------------------------
    def __repr__(self):
        return f"PolySymbol({self.nvars}, {self.to_text()!r})"

    def to_text(self) -> str:
        """Render in the mini-language accepted by :func:`weylcalc.expr.parse_symbol`."""
        if not self.terms:
            return "0"
        parts = []
        for m in sorted(self.terms, key=lambda m: (-sum(m), tuple(-e for e in m))):
            c = self.terms[m]
            factors = [f"xi{i + 1}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(m) if e]
            cs = coeff_str(c)
            if not factors:
                parts.append(cs)
            elif cs == "1":
                parts.append("*".join(factors))
            else:
                parts.append(cs + "*" + "*".join(factors))
        return " + ".join(parts)


def monomials_upto(nvars: int, degree: int):
    """All multi-indices of total degree ``<= degree``, graded then reverse-lex."""
    out = []
    for d in range(degree + 1):
        out.extend(monomials_of_degree(nvars, d))
    return out


def monomials_of_degree(nvars: int, d: int):
    if nvars == 1:
        return [(d,)]
    out = []
    for first in range(d, -1, -1):
        for rest in monomials_of_degree(nvars - 1, d - first):
            out.append((first,) + rest)
    return out


def random_poly(rng: np.random.Generator, nvars: int, max_degree: int, nterms: int = 4,
                max_num: int = 5, complex_coeffs: bool = True) -> PolySymbol:
    """Random polynomial with small Gaussian-rational coefficients."""
    monos = monomials_upto(nvars, max_degree)
    picks = rng.choice(len(monos), size=min(nterms, len(monos)), replace=False)
    terms = {}
    for p in picks:
        re = Fraction(int(rng.integers(-max_num, max_num + 1)), int(rng.integers(1, 4)))
        im = Fraction(int(rng.integers(-max_num, max_num + 1)), int(rng.integers(1, 4))) if complex_coeffs else 0
        terms[monos[p]] = (re, im)
    return PolySymbol(nvars, terms)


def homogeneous_parts(p: PolySymbol):
    return p.homogeneous_parts()
