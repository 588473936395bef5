"""The #-product on symbols and its bidifferential expansion.

For the Fourier convention ``p(xi) = int F^{-1}p(x) e^{-i<x, xi>} dx`` one
has ``#``: ``(p # q)(xi) = int int F^{-1}p(x) F^{-1}q(y) e^{-i<x._1 y, xi>}``.
Expanding ``x ._t y`` in ``t`` around ``t = 0`` produces the factors
``psi_k`` and, after replacing ``x^alpha`` by ``(i D)^alpha`` acting on ``p``
and ``y^beta`` by ``(i D)^beta`` acting on ``q``, the operators ``C_k``.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Dict, List, Tuple

import numpy as np
import sympy

from .jets import Jet
from .lie import LieAlgebra, bch_homogeneous
from .poly import PolySymbol, QQ_I, to_coeff

I_POW = [QQ_I(1, 0), QQ_I(0, 1), QQ_I(-1, 0), QQ_I(0, -1)]


class TruncationError(ValueError):
    """Raised when a finite BCH truncation cannot give the requested object."""


class NotNilpotentError(TruncationError):
    """Raised when an exact product is requested on a non-nilpotent algebra."""


@dataclass(frozen=True)
class BidiffOperator:
    """``(p, q) -> sum c(xi) D^alpha p D^beta q`` with exact coefficients."""

    k: int
    nvars: int
    terms: Tuple[Tuple[Tuple[int, ...], Tuple[int, ...], PolySymbol], ...]

    def __call__(self, p: PolySymbol, q: PolySymbol) -> PolySymbol:
        out = PolySymbol(self.nvars)
        dp: Dict = {}
        dq: Dict = {}
        for a, b, c in self.terms:
            if a not in dp:
                dp[a] = p.derivative(a)
            if dp[a].is_zero():
                continue
            if b not in dq:
                dq[b] = q.derivative(b)
            if dq[b].is_zero():
                continue
            out = out + c * dp[a] * dq[b]
        return out

    def max_orders(self):
        return (max((sum(a) for a, _, _ in self.terms), default=0),
                max((sum(b) for _, b, _ in self.terms), default=0))

    def to_json(self) -> dict:
        return {"k": self.k, "terms": [{"alpha": list(a), "beta": list(b), "coefficient": c.to_text()}
                                       for a, b, c in self.terms]}


# -- psi_k -------------------------------------------------------------------------
def _phase_components(A: LieAlgebra, order: int):
    """Polynomials ``-i <Z_{m+1}(x, y), xi>`` for ``m = 0..order`` in 3n variables."""
    n = A.dim
    N = 3 * n
    xs = [PolySymbol.variable(N, i) for i in range(n)]
    ys = [PolySymbol.variable(N, n + i) for i in range(n)]
    xis = [PolySymbol.variable(N, 2 * n + i) for i in range(n)]
    br = lambda u, v: A.bracket(u, v, check=False)
    add = lambda u, v: [a + b for a, b in zip(u, v)]
    scale = lambda s, u: [a * to_coeff(s) if isinstance(a, PolySymbol) else a * s for a in u]
    depth = order if A.nilpotency_step is None else min(order, A.nilpotency_step)
    Z = bch_homogeneous(br, add, scale, xs, ys, depth)
    minus_i = QQ_I(0, -1)
    out = []
    for z in Z:
        acc = PolySymbol(N)
        for zk, xk in zip(z, xis):
            if isinstance(zk, PolySymbol):
                acc = acc + zk * xk
            elif zk != 0:
                acc = acc + xk * zk
        out.append(acc * minus_i)
    while len(out) < order + 1:
        out.append(PolySymbol(N))
    return out


def _exp_series(b: List[PolySymbol], k: int, N: int) -> List[PolySymbol]:
    """Coefficients ``E_0..E_k`` of ``exp(sum_{j>=1} b_j s^j)``."""
    E = [PolySymbol.constant(N, 1)]
    for m in range(1, k + 1):
        acc = PolySymbol(N)
        for j in range(1, m + 1):
            if j < len(b) and not b[j].is_zero():
                acc = acc + b[j] * E[m - j] * j
        E.append(acc * Fraction(1, m))
    return E


def psi_k(A: LieAlgebra, k: int, t=0, truncate: bool = False) -> PolySymbol:
    """``psi_k`` with ``d^k/dt^k e^{-i<x._t y, xi>} = psi_k e^{-i<x._t y, xi>}``.

    The result is a polynomial in ``3n`` variables ordered ``x, y, xi``.  At
    ``t = 0`` only finitely many BCH components enter, so the value is exact
    for every algebra.  For ``t != 0`` the full series is needed, which is
    finite only for nilpotent algebras; otherwise pass ``truncate=True``.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    t = Fraction(t)
    if t != 0 and A.nilpotency_step is None and not truncate:
        raise TruncationError("psi_k at t != 0 needs the full BCH series on a non-nilpotent algebra")
    order = k if t == 0 else max(k, A.nilpotency_step or k) + (0 if A.nilpotency_step else 4)
    a = _phase_components(A, order)
    N = 3 * A.dim
    # b_j(t) = sum_{m>=j} binom(m, j) t^{m-j} a_m
    b = [PolySymbol(N)]
    for j in range(1, k + 1):
        acc = PolySymbol(N)
        for m in range(j, len(a)):
            if a[m].is_zero():
                continue
            w = Fraction(factorial(m), factorial(j) * factorial(m - j)) * t ** (m - j)
            if w:
                acc = acc + a[m] * w
        b.append(acc)
    E = _exp_series(b, k, N)
    return E[k] * factorial(k)


# -- C_k ------------------------------------------------------------------------
_CACHE: Dict[tuple, Dict[int, BidiffOperator]] = {}
_LOCK = threading.Lock()


def _algebra_key(A: LieAlgebra):
    return (A.dim, tuple((i, j, k, str(v)) for i, j, k, v in A.triplets()))


def _to_operator(poly: PolySymbol, n: int, k: int) -> BidiffOperator:
    grouped: Dict[tuple, Dict[tuple, object]] = {}
    for mono, c in poly.terms.items():
        a, b, x = mono[:n], mono[n:2 * n], mono[2 * n:]
        w = c * I_POW[(sum(a) + sum(b)) % 4]
        grouped.setdefault((a, b), {})[x] = w
    terms = []
    for (a, b) in sorted(grouped):
        terms.append((a, b, PolySymbol(n, grouped[(a, b)])))
    return BidiffOperator(k, n, tuple(terms))


def ck_operator(A: LieAlgebra, k: int) -> BidiffOperator:
    """Bidifferential operator ``C_k``; cached per algebra, computed once."""
    key = _algebra_key(A)
    table = _CACHE.get(key)
    if table is not None and k in table:
        return table[k]
    op = _to_operator(psi_k(A, k, 0) * Fraction(1, factorial(k)), A.dim, k)
    with _LOCK:
        _CACHE.setdefault(key, {}).setdefault(k, op)
        return _CACHE[key][k]


def ck_table_json(A: LieAlgebra, kmax: int) -> str:
    """JSON export of ``C_0..C_kmax``."""
    return json.dumps({"algebra": A.to_json(), "operators": [ck_operator(A, k).to_json() for k in range(kmax + 1)]},
                      indent=1, sort_keys=True)


def stable_order(A: LieAlgebra, p: PolySymbol, q: PolySymbol) -> int:
    """Truncation beyond which every further ``C_k(p, q)`` vanishes (nilpotent case)."""
    if A.nilpotency_step is None:
        raise NotNilpotentError(f"{A.label} is not nilpotent; the # expansion does not terminate")
    if p.is_zero() or q.is_zero():
        return 0
    # every term of C_k differentiates p and q at least once and at most k times
    # with |alpha| + |beta| >= k + 1; hence C_k(p, q) = 0 for k >= deg p + deg q
    return max(0, p.degree + q.degree - 1)


def sharp(A: LieAlgebra, p: PolySymbol, q: PolySymbol, N: int | None = None) -> PolySymbol:
    """Truncated product ``sum_{k<=N} C_k(p, q)``.

    With ``N=None`` the algebra must be nilpotent and the expansion is summed
    until it terminates, which gives the exact product.
    """
    if N is None:
        N = stable_order(A, p, q)
    out = PolySymbol(A.dim)
    for k in range(N + 1):
        out = out + ck_operator(A, k)(p, q)
    return out


def poisson_bracket(A: LieAlgebra, f: PolySymbol, g: PolySymbol) -> PolySymbol:
    """``{f, g}(xi) = <xi, [Df(xi), Dg(xi)]>``."""
    n = A.dim
    df, dg = f.gradient(), g.gradient()
    out = PolySymbol(n)
    c = A.structure_exact if A.exact else A.c
    for i in range(n):
        if df[i].is_zero():
            continue
        for j in range(n):
            if dg[j].is_zero():
                continue
            prod = None
            for k in range(n):
                if c[i, j, k] != 0:
                    term = PolySymbol.variable(n, k) * to_coeff(c[i, j, k])
                    prod = term if prod is None else prod + term
            if prod is not None:
                out = out + prod * df[i] * dg[j]
    return out


# -- non-polynomial factors -------------------------------------------------------
class ShiftedPoly:
    """``p - lam`` for a polynomial ``p`` and a batch of complex ``lam``."""

    def __init__(self, p: PolySymbol, lam):
        self.p = p
        self.lam = np.asarray(lam, dtype=complex)

    def jet_derivative(self, alpha, points, degree):
        d = self.p.derivative(alpha)
        j = Jet.from_poly(d, points, degree)
        if sum(alpha) == 0:
            j = j - self.lam
        return j


def _factor_degree(f, order):
    return np.inf if isinstance(f, (PolySymbol, ShiftedPoly)) else f.degree - order


def _factor_derivative(f, alpha, points, degree):
    if isinstance(f, Jet):
        d = f.derivative(alpha)
        return d.truncate(degree) if d.degree > degree else d
    if isinstance(f, ShiftedPoly):
        return f.jet_derivative(alpha, points, degree)
    return Jet.from_poly(f.derivative(alpha), points, degree)


def sharp_jet(A: LieAlgebra, p, q, points: np.ndarray, K: int, degree: int | None = None) -> Jet:
    """Truncated ``sum_{k<=K} C_k(p, q)`` for polynomial or jet factors.

    ``p`` and ``q`` may be :class:`PolySymbol`, :class:`ShiftedPoly` or
    :class:`~weylcalc.jets.Jet` evaluated at ``points``.  The output degree is
    the largest one supported by every term unless ``degree`` is given.
    """
    ops = [ck_operator(A, k) for k in range(K + 1)]
    used = []
    out_deg = np.inf
    for op in ops:
        for a, b, c in op.terms:
            if isinstance(p, PolySymbol) and p.derivative(a).is_zero():
                continue
            if isinstance(q, PolySymbol) and q.derivative(b).is_zero():
                continue
            if isinstance(p, ShiftedPoly) and sum(a) and p.p.derivative(a).is_zero():
                continue
            if isinstance(q, ShiftedPoly) and sum(b) and q.p.derivative(b).is_zero():
                continue
            used.append((a, b, c))
            out_deg = min(out_deg, _factor_degree(p, sum(a)), _factor_degree(q, sum(b)))
    if degree is None:
        if out_deg == np.inf:
            raise ValueError("both factors are polynomials; give an explicit jet degree")
        degree = int(out_deg)
    elif degree > out_deg:
        raise TruncationError(f"requested jet degree {degree} exceeds the supported {out_deg}")
    if degree < 0:
        raise TruncationError("jets too short for the requested truncation")
    points = np.asarray(points)
    batch = points.shape[:-1]
    out = Jet.constant(A.dim, degree, 0, batch)
    for a, b, c in used:
        term = _factor_derivative(p, a, points, degree) * _factor_derivative(q, b, points, degree)
        if not (c.degree == 0 and c.coefficient((0,) * A.dim) == QQ_I(1, 0)):
            term = term * Jet.from_poly(c, points, degree)
        out = out + term
    return out


# -- the maps S_t and their jacobian -----------------------------------------------------
def st_map(A: LieAlgebra, t, x, y, order: int = 6, radius: float | None = None):
    """``S_t(x, y) = 1/2 (x - y + x._t y, y - x + x._t y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if radius is not None and np.hypot(np.linalg.norm(x), np.linalg.norm(y)) > radius:
        raise ValueError("(x, y) outside the configured BCH radius")
    z = A.bch(x, y, t, order)
    return 0.5 * (x - y + z), 0.5 * (y - x + z)


def st_jacobian(A: LieAlgebra, t, x, y, order: int = 6, radius: float | None = None,
                h: float = 1e-5) -> float:
    """Jacobian determinant ``K_t`` of ``S_t`` at ``(x, y)``.

    Exact polynomial determinant on nilpotent algebras, central differences
    otherwise.
    """
    n = A.dim
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if radius is not None and np.hypot(np.linalg.norm(x), np.linalg.norm(y)) > radius:
        raise ValueError("(x, y) outside the configured BCH radius")
    if A.nilpotency_step is not None:
        return float(_exact_st_det(A, Fraction(t)).subs(
            {s: v for s, v in zip(_st_symbols(n), list(x) + list(y))}))
    J = np.zeros((2 * n, 2 * n))
    base = np.concatenate([x, y])
    for c in range(2 * n):
        e = np.zeros(2 * n)
        e[c] = h
        fp = np.concatenate(st_map(A, t, (base + e)[:n], (base + e)[n:], order))
        fm = np.concatenate(st_map(A, t, (base - e)[:n], (base - e)[n:], order))
        J[:, c] = (fp - fm) / (2 * h)
    return float(np.linalg.det(J))


def _st_symbols(n):
    return sympy.symbols(f"x1:{n + 1}") + sympy.symbols(f"y1:{n + 1}")


def _exact_st_det(A: LieAlgebra, t: Fraction):
    n = A.dim
    syms = _st_symbols(n)
    xs = [sympy.Integer(0) + s for s in syms[:n]]
    ys = [sympy.Integer(0) + s for s in syms[n:]]
    order = A.nilpotency_step
    br = lambda u, v: [sympy.expand(e) for e in A.bracket(u, v, check=False)]
    add = lambda u, v: [a + b for a, b in zip(u, v)]
    scale = lambda s, u: [sympy.Rational(Fraction(s).numerator, Fraction(s).denominator) * a for a in u]
    Z = bch_homogeneous(br, add, scale, xs, ys, order)
    tt = sympy.Rational(t.numerator, t.denominator)
    z = [sum((tt ** m * Z[m][i] for m in range(len(Z))), sympy.Integer(0)) for i in range(n)]
    S = [sympy.Rational(1, 2) * (xs[i] - ys[i] + z[i]) for i in range(n)] + \
        [sympy.Rational(1, 2) * (ys[i] - xs[i] + z[i]) for i in range(n)]
    M = sympy.Matrix([[sympy.diff(s, v) for v in syms] for s in S])
    return sympy.expand(M.det())
