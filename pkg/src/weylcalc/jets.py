"""Truncated multivariate Taylor jets evaluated on batches of base points.

A :class:`Jet` of degree ``J`` at base points ``xi0`` stores the Taylor
coefficients ``D^gamma f(xi0) / gamma!`` for ``|gamma| <= J`` as an array of
shape ``(M, *batch)``.  Monomials are graded, so truncating to a lower degree
is a slice.  Jets carry symbol derivatives through non-polynomial products
where a closed form is not available.
"""
from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np

from .poly import monomials_upto


@lru_cache(maxsize=None)
def basis(nvars: int, degree: int):
    monos = tuple(monomials_upto(nvars, degree))
    index = {m: i for i, m in enumerate(monos)}
    return monos, index


@lru_cache(maxsize=None)
def _count(nvars, degree):
    return len(basis(nvars, degree)[0])


@lru_cache(maxsize=None)
def _mult_table(nvars, degree):
    monos, index = basis(nvars, degree)
    ii, jj, kk = [], [], []
    for a, ma in enumerate(monos):
        da = sum(ma)
        for b, mb in enumerate(monos):
            if da + sum(mb) > degree:
                continue
            ii.append(a)
            jj.append(b)
            kk.append(index[tuple(x + y for x, y in zip(ma, mb))])
    order = np.argsort(kk, kind="stable")
    kk = np.array(kk)[order]
    # every output index occurs (paired with the constant monomial), so segment starts cover them all
    starts = np.searchsorted(kk, np.arange(len(monos)))
    return np.array(ii)[order], np.array(jj)[order], starts


@lru_cache(maxsize=None)
def _deriv_table(nvars, degree, alpha):
    """Source indices and factors so that ``(D^alpha f)_gamma = fac * f_{gamma+alpha}``."""
    src_monos, src_index = basis(nvars, degree)
    out_deg = degree - sum(alpha)
    out_monos, _ = basis(nvars, out_deg)
    src, fac = [], []
    for g in out_monos:
        ga = tuple(x + y for x, y in zip(g, alpha))
        f = 1
        for x, y in zip(ga, g):
            f *= factorial(x) // factorial(y)
        src.append(src_index[ga])
        fac.append(f)
    return np.array(src, dtype=int), np.array(fac, dtype=float)


class Jet:
    """Taylor jet of a function of ``nvars`` variables at a batch of points."""

    __array_priority__ = 100
    __array_ufunc__ = None

    def __init__(self, nvars: int, degree: int, coeffs: np.ndarray):
        self.nvars = nvars
        self.degree = degree
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape[0] != _count(nvars, degree):
            raise ValueError("coefficient array does not match the jet size")
        self.coeffs = coeffs

    @property
    def batch_shape(self):
        return self.coeffs.shape[1:]

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[0]

    @classmethod
    def constant(cls, nvars, degree, value, batch_shape):
        c = np.zeros((_count(nvars, degree),) + tuple(batch_shape), dtype=complex)
        c[0] = value
        return cls(nvars, degree, c)

    @classmethod
    def from_poly(cls, p, points: np.ndarray, degree: int) -> "Jet":
        points = np.asarray(points)
        monos, _ = basis(p.nvars, degree)
        return cls(p.nvars, degree, p.taylor_coefficients(points, degree, monos))

    @classmethod
    def variables(cls, points: np.ndarray, degree: int):
        """Jets of the coordinate functions ``xi_i`` at ``points``."""
        points = np.asarray(points, dtype=complex)
        n = points.shape[-1]
        _, index = basis(n, degree)
        out = []
        for i in range(n):
            c = np.zeros((_count(n, degree),) + points.shape[:-1], dtype=complex)
            c[0] = points[..., i]
            if degree >= 1:
                e = [0] * n
                e[i] = 1
                c[index[tuple(e)]] = 1
            out.append(cls(n, degree, c))
        return out

    def truncate(self, degree: int) -> "Jet":
        if degree > self.degree:
            raise ValueError("cannot raise the degree of a jet")
        return Jet(self.nvars, degree, self.coeffs[:_count(self.nvars, degree)])

    def _align(self, other):
        if isinstance(other, Jet):
            d = min(self.degree, other.degree)
            a = self if self.degree == d else self.truncate(d)
            b = other if other.degree == d else other.truncate(d)
            return a, b
        return self, None

    # -- arithmetic -----------------------------------------------------------
    def __add__(self, other):
        a, b = self._align(other)
        if b is None:
            c = a.coeffs.copy()
            c[0] = c[0] + other
            return Jet(a.nvars, a.degree, c)
        return Jet(a.nvars, a.degree, a.coeffs + b.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.nvars, self.degree, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a, b = self._align(other)
        if b is None:
            return Jet(a.nvars, a.degree, a.coeffs * other)
        ii, jj, starts = _mult_table(a.nvars, a.degree)
        out = np.add.reduceat(a.coeffs[ii] * b.coeffs[jj], starts, axis=0)
        return Jet(a.nvars, a.degree, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return Jet(self.nvars, self.degree, self.coeffs / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def _compose(self, series):
        """``sum_k series[k] (f - f0)^k`` for a scalar Taylor series at ``f0``."""
        h = Jet(self.nvars, self.degree, self.coeffs.copy())
        h.coeffs[0] = 0
        out = Jet.constant(self.nvars, self.degree, series[0], self.batch_shape)
        power = None
        for k in range(1, self.degree + 1):
            power = h if power is None else power * h
            out = out + power * series[k]
        return out

    def reciprocal(self) -> "Jet":
        f0 = self.value
        series = [(-1) ** k / f0 ** (k + 1) for k in range(self.degree + 1)]
        return self._compose(series)

    def power(self, s: float) -> "Jet":
        """Principal-branch ``f^s``."""
        f0 = self.value
        series = []
        coef = 1.0
        for k in range(self.degree + 1):
            series.append(coef * f0 ** (s - k))
            coef = coef * (s - k) / (k + 1)
        return self._compose(series)

    def exp(self) -> "Jet":
        f0 = np.exp(self.value)
        return self._compose([f0 / factorial(k) for k in range(self.degree + 1)])

    def derivative(self, alpha) -> "Jet":
        k = sum(alpha)
        if k > self.degree:
            raise ValueError("derivative exceeds the jet degree")
        if k == 0:
            return self
        src, fac = _deriv_table(self.nvars, self.degree, tuple(alpha))
        return Jet(self.nvars, self.degree - k, self.coeffs[src] * fac.reshape((-1,) + (1,) * len(self.batch_shape)))

    def taylor_derivative_value(self, alpha) -> np.ndarray:
        """Value of ``D^alpha f`` at the base points."""
        _, index = basis(self.nvars, self.degree)
        f = 1
        for e in alpha:
            f *= factorial(e)
        return self.coeffs[index[tuple(alpha)]] * f

    def __repr__(self):
        return f"Jet(nvars={self.nvars}, degree={self.degree}, batch={self.batch_shape})"
