"""Real Lie algebras given by structure constants.

The bracket convention is ``[X_i, X_j] = sum_k c[i][j][k] X_k``.  Exact input
(ints, Fractions or rational strings) is kept as :class:`fractions.Fraction`
so that every symbolic computation downstream stays in rational arithmetic.
"""
from __future__ import annotations

import itertools
import json
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import sympy


class DimensionError(ValueError):
    """Raised when a vector does not match the algebra dimension."""


class SeriesDivergenceError(ArithmeticError):
    """Raised when a power series is requested outside its radius."""


def _as_exact(v):
    if isinstance(v, bool):
        raise TypeError("boolean is not a structure constant")
    if isinstance(v, (int, Rational)):
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(v)
    return None


class LieAlgebra:
    """Finite-dimensional real Lie algebra.

    Parameters
    ----------
    dim : int
        Dimension ``n``.
    structure : array-like or iterable of (i, j, k, value)
        Either a dense ``(n, n, n)`` array of structure constants or sparse
        0-based triplets.  Antisymmetric partners of sparse triplets are
        filled in automatically when absent.
    names : sequence of str, optional
        Basis labels, default ``X1..Xn``.
    jacobi_tol : float
        Tolerance applied to the Jacobi residual for float input.

    Notes
    -----
    Instances are immutable.  Derived data (adjoint matrices, nilpotency step,
    Jacobi residual) is computed once in the constructor.
    """

    def __init__(self, dim: int, structure=None, names: Sequence[str] | None = None,
                 label: str | None = None, jacobi_tol: float = 1e-12):
        if dim < 1:
            raise ValueError("dimension must be positive")
        self.dim = int(dim)
        self.names = tuple(names) if names is not None else tuple(f"X{i + 1}" for i in range(dim))
        if len(self.names) != dim:
            raise ValueError("names must have one entry per basis vector")
        self.label = label or f"lie{dim}"
        c, exact = self._read_structure(structure)
        self.exact = exact
        self._c = c
        self.c = c.astype(float)
        self.c.setflags(write=False)
        for i, j, k in itertools.product(range(dim), repeat=3):
            if c[i, j, k] != -c[j, i, k]:
                raise ValueError(f"structure constants not antisymmetric at ({i},{j},{k})")
        self.jacobi_residual = self._jacobi_residual()
        limit = 0 if exact else jacobi_tol
        if self.jacobi_residual > limit:
            raise ValueError(f"Jacobi identity fails, residual {self.jacobi_residual}")
        self.nilpotency_step = self._nilpotency_step()

    def _read_structure(self, structure):
        n = self.dim
        entries = {}
        if structure is None:
            structure = []
        arr = None
        if isinstance(structure, np.ndarray) and structure.shape == (n, n, n):
            arr = structure
        elif (isinstance(structure, (list, tuple)) and len(structure) == n
              and all(isinstance(r, (list, tuple, np.ndarray)) and len(r) == n
                      and all(isinstance(s, (list, tuple, np.ndarray)) and len(s) == n for s in r)
                      for r in structure)):
            arr = structure
        if arr is not None:
            for i, j, k in itertools.product(range(n), repeat=3):
                v = arr[i][j][k]
                if v != 0:
                    entries[(i, j, k)] = v
        else:
            for trip in structure:
                i, j, k, v = trip
                i, j, k = int(i), int(j), int(k)
                if not (0 <= i < n and 0 <= j < n and 0 <= k < n):
                    raise DimensionError(f"triplet index out of range: {trip}")
                entries[(i, j, k)] = v
                if (j, i, k) not in entries:
                    entries[(j, i, k)] = -v if not isinstance(v, str) else -Fraction(v)
        exact_vals = {key: _as_exact(v) for key, v in entries.items()}
        exact = all(v is not None for v in exact_vals.values())
        if exact:
            c = np.full((n, n, n), Fraction(0), dtype=object)
            for key, v in exact_vals.items():
                c[key] = v
        else:
            c = np.zeros((n, n, n))
            for key, v in entries.items():
                c[key] = float(Fraction(v)) if isinstance(v, str) else float(v)
        return c, exact

    # -- derived data -----------------------------------------------------
    def _jacobi_residual(self):
        n, c = self.dim, self._c
        worst = 0
        for i, j, k in itertools.combinations_with_replacement(range(n), 3):
            for m in range(n):
                s = 0
                for l in range(n):
                    s += (c[j, k, l] * c[i, l, m] + c[k, i, l] * c[j, l, m]
                          + c[i, j, l] * c[k, l, m])
                worst = max(worst, abs(s))
        return float(worst) if not self.exact else worst

    def _nilpotency_step(self):
        """Smallest s such that every s-fold bracket vanishes, or None."""
        n = self.dim
        basis = [self._unit(i) for i in range(n)]
        current = basis
        for s in range(1, n + 2):
            nxt = [self.bracket(x, y, check=False) for x in basis for y in current]
            nxt = self._span(nxt)
            if not nxt:
                return s
            if len(nxt) == len(current) and s > 1:
                return None
            current = nxt
        return None

    def _span(self, vectors):
        if self.exact:
            M = sympy.Matrix([[sympy.Rational(v.numerator, v.denominator) for v in vec] for vec in vectors])
            rows = M.T.columnspace()
            return [[Fraction(int(sympy.fraction(e)[0]), int(sympy.fraction(e)[1])) for e in r] for r in rows]
        M = np.array(vectors, dtype=float)
        if M.size == 0:
            return []
        u, s, vt = np.linalg.svd(M)
        r = int(np.sum(s > 1e-12 * max(1.0, s[0] if s.size else 0)))
        return [list(row) for row in vt[:r]]

    def _unit(self, i):
        zero = Fraction(0) if self.exact else 0.0
        one = Fraction(1) if self.exact else 1.0
        return [one if k == i else zero for k in range(self.dim)]

    @property
    def structure_exact(self):
        """Structure constants as an object array (Fractions when exact)."""
        return self._c.copy()

    def is_nilpotent(self) -> bool:
        return self.nilpotency_step is not None

    def triplets(self):
        """Nonzero structure constants as 0-based ``(i, j, k, value)`` with ``i < j``."""
        out = []
        for i, j, k in itertools.product(range(self.dim), repeat=3):
            if i < j and self._c[i, j, k] != 0:
                out.append((i, j, k, self._c[i, j, k]))
        return out

    def to_json(self) -> dict:
        def enc(v):
            if isinstance(v, Fraction):
                return str(v) if v.denominator != 1 else int(v)
            return float(v)
        return {"dim": self.dim, "names": list(self.names),
                "structure": [[i, j, k, enc(v)] for i, j, k, v in self.triplets()]}

    def __repr__(self):
        return f"LieAlgebra({self.label!r}, dim={self.dim}, step={self.nilpotency_step})"

    # -- operations ---------------------------------------------------------
    def _check(self, *vs):
        for v in vs:
            if len(v) != self.dim:
                raise DimensionError(f"expected vector of length {self.dim}, got {len(v)}")

    def bracket(self, x, y, check: bool = True):
        """``[x, y]`` for coefficient vectors.

        Works on sequences of any ring elements that can be multiplied by the
        structure constants (numbers, Fractions, polynomials).
        """
        if check:
            self._check(x, y)
        n, c = self.dim, self._c if self.exact else self.c
        if isinstance(x, np.ndarray) and isinstance(y, np.ndarray) and x.dtype != object and y.dtype != object:
            return np.einsum("i,j,ijk->k", x, y, self.c)
        out = [0] * n
        for i in range(n):
            if x[i] == 0:
                continue
            for j in range(n):
                if y[j] == 0:
                    continue
                xy = x[i] * y[j]
                for k in range(n):
                    cijk = c[i, j, k]
                    if cijk != 0:
                        out[k] = out[k] + cijk * xy
        return out

    def ad(self, x) -> np.ndarray:
        """Matrix of ``ad x`` in the basis (columns are images of basis vectors)."""
        self._check(x)
        x = np.asarray(x, dtype=float)
        return np.einsum("i,ijk->kj", x, self.c)

    def bch(self, x, y, t=1, order: int = 6):
        """Truncated ``x ._t y = t^{-1} log(exp(tx) exp(ty))``.

        Parameters
        ----------
        order : int
            Largest power of ``t`` (equal to the bracket depth) kept.  For a
            nilpotent algebra of step ``s <= order`` the result is exact.
        """
        if order < 1:
            raise ValueError("order must be at least 1")
        self._check(x, y)
        numeric = not (self.exact and all(_as_exact(v) is not None for v in list(x) + list(y))
                       and _as_exact(t) is not None)
        if numeric:
            x = np.asarray(x, dtype=complex if np.iscomplexobj(x) or np.iscomplexobj(y) else float)
            y = np.asarray(y, dtype=x.dtype)
        else:
            x = [Fraction(v) for v in x]
            y = [Fraction(v) for v in y]
            t = Fraction(t)
        terms = bch_terms(self, x, y, order)
        total = None
        tp = 1
        for z in terms:
            part = [tp * v for v in z] if not numeric else tp * np.asarray(z)
            total = part if total is None else ([a + b for a, b in zip(total, part)]
                                                if not numeric else total + part)
            tp = tp * t
        return np.asarray(total) if numeric else total

    def jacobian_jg(self, x, method: str = "auto", radius: float = 2 * np.pi,
                    terms: int = 60) -> float:
        """``|det((1 - exp(-ad x)) / ad x)|``.

        ``method`` is ``"series"`` (power series, guarded by ``radius``),
        ``"eigen"`` (product of the scalar function over eigenvalues) or
        ``"auto"`` (series inside the radius, eigenvalues outside).
        """
        M = self.ad(x)
        norm = np.linalg.norm(M, 2) if M.size else 0.0
        if method == "auto":
            method = "series" if norm < radius else "eigen"
        if method == "series":
            if norm >= radius:
                raise SeriesDivergenceError(f"|ad x| = {norm:.3g} exceeds the series radius {radius:.3g}")
            acc = np.eye(self.dim)
            term = np.eye(self.dim)
            for m in range(1, terms):
                term = term @ (-M) / (m + 1)
                acc = acc + term
                if np.abs(term).max() < 1e-17:
                    break
            return float(abs(np.linalg.det(acc)))
        if method == "eigen":
            mu = np.linalg.eigvals(M)
            vals = np.ones_like(mu)
            big = np.abs(mu) > 1e-8
            vals[big] = -np.expm1(-mu[big]) / mu[big]
            small = mu[~big]
            vals[~big] = 1 - small / 2 + small ** 2 / 6
            return float(abs(np.prod(vals)))
        raise ValueError(f"unknown method {method!r}")


def bracket(A: LieAlgebra, x, y):
    """Module-level shorthand for :meth:`LieAlgebra.bracket`."""
    return A.bracket(x, y)


def bch(A: LieAlgebra, x, y, t=1, order: int = 6):
    return A.bch(x, y, t, order)


def jacobian_jg(A: LieAlgebra, x, **kw) -> float:
    return A.jacobian_jg(x, **kw)


@lru_cache(maxsize=None)
def _bernoulli_even(m: int) -> Fraction:
    b = sympy.bernoulli(m)
    num, den = sympy.fraction(b)
    return Fraction(int(num), int(den))


def _compositions(n: int, parts: int):
    if parts == 1:
        yield (n,)
        return
    for first in range(1, n - parts + 2):
        for rest in _compositions(n - first, parts - 1):
            yield (first,) + rest


def bch_homogeneous(br: Callable, add: Callable, scale: Callable, x, y, depth: int) -> list:
    """Homogeneous Dynkin components ``Z_1..Z_{depth+1}`` of ``log(e^x e^y)``.

    Uses the recursion ``(n+1) Z_{n+1} = 1/2 [x - y, Z_n] + sum_p B_{2p}/(2p)!
    sum_{k_1+..+k_{2p}=n} [Z_{k_1}, [... [Z_{k_{2p}}, x + y]]]``, which only needs
    a bracket, an addition and a scalar multiplication on the vector type.
    """
    xpy = add(x, y)
    xmy = add(x, scale(-1, y))
    Z = [None, xpy]
    for n in range(1, depth + 1):
        acc = scale(Fraction(1, 2), br(xmy, Z[n]))
        for p in range(1, n // 2 + 1):
            coef = _bernoulli_even(2 * p) / Fraction(_factorial(2 * p))
            if coef == 0:
                continue
            for comp in _compositions(n, 2 * p):
                v = xpy
                for k in reversed(comp):
                    v = br(Z[k], v)
                acc = add(acc, scale(coef, v))
        Z.append(scale(Fraction(1, n + 1), acc))
    return Z[1:]


def _factorial(m):
    out = 1
    for i in range(2, m + 1):
        out *= i
    return out


def bch_terms(A: LieAlgebra, x, y, order: int) -> list:
    """Coefficients of ``t^0 .. t^order`` in ``x ._t y``.

    For nilpotent algebras the components beyond the step are exactly zero and
    the list is padded with zero vectors.
    """
    numeric = isinstance(x, np.ndarray)
    if numeric:
        br = lambda u, v: np.einsum("i,j,ijk->k", u, v, A.c)
        add = lambda u, v: u + v
        scale = lambda s, u: float(s) * u
    else:
        br = lambda u, v: A.bracket(u, v, check=False)
        add = lambda u, v: [a + b for a, b in zip(u, v)]
        scale = lambda s, u: [s * a for a in u]
    depth = order
    if A.nilpotency_step is not None:
        depth = min(order, A.nilpotency_step)
    Z = bch_homogeneous(br, add, scale, x, y, depth)
    zero = np.zeros_like(x) if numeric else [0 * v for v in x]
    while len(Z) < order + 1:
        Z.append(zero)
    return Z


# -- catalog ------------------------------------------------------------------
def abelian(n: int) -> LieAlgebra:
    return LieAlgebra(n, [], label=f"abelian_{n}")


def heisenberg3() -> LieAlgebra:
    return LieAlgebra(3, [(0, 1, 2, 1)], label="heisenberg3")


def so3() -> LieAlgebra:
    return LieAlgebra(3, [(0, 1, 2, 1), (1, 2, 0, 1), (2, 0, 1, 1)],
                      names=("e1", "e2", "e3"), label="so3")


BUILTINS = ("abelian_n", "heisenberg3", "so3")


def builtin(name: str) -> LieAlgebra:
    """Look up a built-in algebra: ``heisenberg3``, ``so3`` or ``abelian_<n>``."""
    if name == "heisenberg3":
        return heisenberg3()
    if name == "so3":
        return so3()
    if name.startswith("abelian_"):
        suffix = name[len("abelian_"):]
        if suffix.isdigit() and int(suffix) > 0:
            return abelian(int(suffix))
    raise KeyError(name)


def from_json(data: dict, label: str | None = None) -> LieAlgebra:
    """Build an algebra from ``{dim, structure: [[i, j, k, value], ...], names}``.

    Triplet indices are 0-based.
    """
    return LieAlgebra(int(data["dim"]), [tuple(t) for t in data.get("structure", [])],
                      names=data.get("names"), label=label or data.get("label"))


def load_algebra(path: str | Path) -> LieAlgebra:
    p = Path(path)
    return from_json(json.loads(p.read_text()), label=p.stem)
