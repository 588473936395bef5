"""Representation backends realising ``p^{W,pi}``: the abelian regular representation and
the Schroedinger representation of the Heisenberg algebra.

Conventions for ``heisenberg3`` (central parameter 1): ``Op(xi1) = Q``,
``Op(xi2) = P``, ``Op(xi3) = 1`` with ``[Q, P] = i``; the group acts by
``pi(exp x) = exp(-i (x1 Q + x2 P + x3))``.  The Laplacian ``-sum X_j^2``
becomes ``Q^2 + P^2 + 1`` so ``1 + Delta`` has eigenvalues ``2k + 3`` on the
Hermite basis.
"""
from __future__ import annotations

import csv
import io
import threading
from dataclasses import dataclass, field
from math import comb
from typing import Callable

import numpy as np

from .poly import PolySymbol, coeff_complex
from .symbols import IN, N_RAPID, OUT, ConeSet, decay_slope, top_half

H3_OFFSET = 3  # 1 + Delta = 2k + 3 on the k-th Hermite function


class TruncationDominatedError(ValueError):
    """Symbol degree too high for the truncated basis."""


@dataclass
class GridVector:
    """Vector of a backend: spatial samples (abelian) or Hermite coefficients (Heisenberg)."""

    backend: object
    coefficients: np.ndarray
    declared_class: str = "unknown"
    label: str = ""

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=complex)
        if self.declared_class not in ("smooth", "distribution", "unknown"):
            raise ValueError("declared_class must be smooth, distribution or unknown")
        self.backend.check_vector(self.coefficients)
        if not np.all(np.isfinite(self.coefficients)):
            raise ValueError("vector has non-finite entries")

    def norm(self) -> float:
        return self.backend.norm(self.coefficients)

    def with_coefficients(self, c, label: str | None = None, declared_class: str | None = None) -> "GridVector":
        return GridVector(self.backend, c, declared_class or self.declared_class, label or self.label)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "re", "im"])
        for i, c in enumerate(self.coefficients.ravel()):
            w.writerow([i, repr(float(c.real)), repr(float(c.imag))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, backend, text: str, declared_class="unknown", label=""):
        rows = list(csv.reader(io.StringIO(text)))[1:]
        c = np.array([float(r[1]) + 1j * float(r[2]) for r in rows])
        return cls(backend, c.reshape(backend.vector_shape), declared_class, label)


@dataclass
class ConeEstimate(ConeSet):
    """A :class:`ConeSet` with diagnostic notes."""

    notes: dict = field(default_factory=dict)


def _symbol_key(p):
    if isinstance(p, PolySymbol):
        return ("poly", p)
    return ("fn", p)  # holding the object keeps its identity unique


class _Cache:
    def __init__(self):
        self._d = {}
        self._lock = threading.Lock()

    def get(self, key, build):
        v = self._d.get(key)
        if v is None:
            v = build()
            with self._lock:
                v = self._d.setdefault(key, v)
        return v


# -- abelian regular representation ---------------------------------------------------------
class Multiplier:
    """Fourier multiplier on an abelian grid."""

    def __init__(self, backend: "AbelianRegular", values: np.ndarray):
        self.backend = backend
        self.values = np.asarray(values, dtype=complex)

    def __call__(self, u):
        c = u.coefficients if isinstance(u, GridVector) else np.asarray(u)
        out = self.backend.ifft(self.values * self.backend.fft(c))
        return u.with_coefficients(out) if isinstance(u, GridVector) else out

    def __matmul__(self, other: "Multiplier") -> "Multiplier":
        return Multiplier(self.backend, self.values * other.values)

    def __sub__(self, other: "Multiplier") -> "Multiplier":
        return Multiplier(self.backend, self.values - other.values)

    def matrix(self) -> np.ndarray:
        """Diagonal matrix in the discrete frequency basis."""
        return np.diag(self.values.ravel())

    def norm(self) -> float:
        return float(np.max(np.abs(self.values)))


class AbelianRegular:
    """Regular representation of ``R^n`` on a periodic grid of ``size^n`` points in ``[-extent, extent)^n``."""

    variant = "abelian"
    rapid_slope = N_RAPID
    bump_profile = "step"

    def __init__(self, n: int = 1, size: int = 4096, extent: float = np.pi):
        self.n, self.size, self.extent = int(n), int(size), float(extent)
        self.dx = 2 * self.extent / self.size
        self.x1 = -self.extent + self.dx * np.arange(self.size)
        self.k1 = 2 * np.pi * np.fft.fftfreq(self.size, self.dx)
        self.vector_shape = (self.size,) * self.n
        self.cache = _Cache()

    # grids -----------------------------------------------------------------
    @property
    def freq_points(self) -> np.ndarray:
        ks = np.meshgrid(*([self.k1] * self.n), indexing="ij")
        return np.stack(ks, axis=-1)

    @property
    def space_points(self) -> np.ndarray:
        xs = np.meshgrid(*([self.x1] * self.n), indexing="ij")
        return np.stack(xs, axis=-1)

    def fft(self, c):
        return np.fft.fftn(c)

    def ifft(self, c):
        return np.fft.ifftn(c)

    def check_vector(self, c):
        if c.shape != self.vector_shape:
            raise ValueError(f"vector shape {c.shape} does not match the grid {self.vector_shape}")

    def norm(self, c) -> float:
        return float(np.sqrt(np.sum(np.abs(c) ** 2) * self.dx ** self.n))

    # quantization ----------------------------------------------------------
    def quantize(self, p) -> Multiplier:
        """Multiplier by ``p`` on the grid frequencies."""
        def build():
            return Multiplier(self, np.asarray(p(self.freq_points), dtype=complex)
                              * np.ones(self.vector_shape))
        return self.cache.get(_symbol_key(p), build)

    def vector(self, f: Callable, declared_class="unknown", label="", fourier: bool = False) -> GridVector:
        """Sample ``f`` in space, or in frequency when ``fourier`` (returning the inverse FFT)."""
        if fourier:
            return GridVector(self, self.ifft(f(self.freq_points)), declared_class, label)
        return GridVector(self, f(self.space_points), declared_class, label)

    def delta(self, label="delta") -> GridVector:
        c = np.zeros(self.vector_shape, dtype=complex)
        c[(self.size // 2,) * self.n] = 1 / self.dx ** self.n
        return GridVector(self, c, "distribution", label)

    def sobolev_norm(self, u, s: float) -> float:
        c = u.coefficients if isinstance(u, GridVector) else u
        w = (1 + np.sum(self.freq_points ** 2, axis=-1)) ** (s / 2)
        ch = self.fft(c) * w
        return float(np.sqrt(np.sum(np.abs(ch) ** 2) * self.dx ** self.n / self.size ** self.n))

    def window_norms(self, v, dirs, radii, sigma: float = 4.0) -> np.ndarray:
        """``|| Op(g(eta + .)) v ||`` for ``eta = t omega`` with a gaussian window ``g`` of width ``sigma``.

        ``v`` may carry a trailing batch axis; the result then has shape
        ``(len(dirs), len(radii), batch)``.
        """
        c = v.coefficients if isinstance(v, GridVector) else np.asarray(v)
        batch = c.ndim > self.n
        axes = tuple(range(self.n))
        vh = np.fft.fftn(c, axes=axes)
        P2 = (np.abs(vh) ** 2).reshape(self.size ** self.n, -1)
        K = self.freq_points.reshape(-1, self.n)
        scale = self.dx ** self.n / self.size ** self.n
        out = np.empty((len(dirs), len(radii), P2.shape[1]))
        for i, d in enumerate(np.asarray(dirs, dtype=float)):
            for j, t in enumerate(radii):
                g2 = np.exp(-np.sum((K + t * d) ** 2, axis=-1) / sigma ** 2)
                out[i, j] = np.sqrt(g2 @ P2 * scale)
        return out if batch else out[..., 0]

    def flow(self, a, t: float):
        """``exp(i t Op(a))`` for a real symbol (a multiplier)."""
        return Multiplier(self, np.exp(1j * t * np.asarray(a(self.freq_points))))

    def to_json(self) -> dict:
        return {"variant": "abelian", "n": self.n, "size": self.size, "extent": self.extent}


# -- Schroedinger representation of h3 ---------------------------------------------------------
def hermite_functions(x: np.ndarray, N: int) -> np.ndarray:
    """Orthonormal Hermite functions ``h_0..h_{N-1}`` at ``x`` (shape ``(len(x), N)``)."""
    x = np.asarray(x, dtype=float)
    H = np.zeros((len(x), N))
    H[:, 0] = np.pi ** -0.25 * np.exp(-x ** 2 / 2)
    if N > 1:
        H[:, 1] = np.sqrt(2) * x * H[:, 0]
    for n in range(1, N - 1):
        H[:, n + 1] = np.sqrt(2 / (n + 1)) * x * H[:, n] - np.sqrt(n / (n + 1)) * H[:, n - 1]
    return H


def ladder(N: int):
    """Truncated position and momentum matrices ``Q = (a + a*)/sqrt2``, ``P = -i (a - a*)/sqrt2``."""
    a = np.diag(np.sqrt(np.arange(1, N)), 1).astype(complex)
    Q = (a + a.T) / np.sqrt(2)
    P = -1j * (a - a.T) / np.sqrt(2)
    return Q, P


def weyl_monomial(Q, P, a: int, b: int) -> np.ndarray:
    """Symmetric ordering of ``q^a p^b``: ``2^{-a} sum_k C(a,k) Q^{a-k} P^b Q^k``."""
    mp = np.linalg.matrix_power
    Pb = mp(P, b)
    out = np.zeros_like(Q)
    for k in range(a + 1):
        out = out + comb(a, k) * (mp(Q, a - k) @ Pb @ mp(Q, k))
    return out / 2 ** a


class HeisenbergSchrodinger:
    """Schroedinger representation on ``hermite_N`` Hermite functions.

    Non-polynomial symbols are quantized through the Weyl kernel on a
    position grid of ``grid_M`` points in ``[-extent, extent)``.
    """

    variant = "heisenberg"
    # the phase-space ladder reaches only |eta| = 16 at N = 256: two octaves
    # in the fit window, so a slope of -3 already means a drop by 64
    rapid_slope = 3.0
    bump_profile = "erfc"

    def __init__(self, hermite_N: int = 64, grid_M: int = 512, extent: float = 26.0):
        self.N = int(hermite_N)
        self.M = int(grid_M)
        self.extent = float(extent)
        self.dx = 2 * self.extent / self.M
        self.x = -self.extent + self.dx * np.arange(self.M)
        self.vector_shape = (self.N,)
        self.cache = _Cache()
        self._Hn = None

    @property
    def Hn(self) -> np.ndarray:
        """Hermite functions on the grid scaled to orthonormal columns."""
        if self._Hn is None:
            self._Hn = hermite_functions(self.x, self.N) * np.sqrt(self.dx)
        return self._Hn

    def check_vector(self, c):
        if c.shape != self.vector_shape:
            raise ValueError(f"expected {self.N} Hermite coefficients")

    def norm(self, c) -> float:
        return float(np.linalg.norm(c))

    def interior(self, maxdeg: int) -> slice:
        size = self.N - 2 * maxdeg
        if size <= 0:
            raise TruncationDominatedError(f"degree {maxdeg} too high for {self.N} basis functions")
        return slice(0, size)

    # polynomial quantization ---------------------------------------------------
    def quantize(self, p) -> np.ndarray:
        """Matrix of ``p^{W,pi}`` on the Hermite basis (``xi3 -> 1``)."""
        if not isinstance(p, PolySymbol):
            return self.quantize_symbol(p)
        if p.nvars != 3:
            raise ValueError("heisenberg symbols have three variables")

        def build():
            d = max(p.degree, 0)
            if 2 * d >= self.N:
                raise TruncationDominatedError(f"degree {d} too high for {self.N} basis functions")
            Q, P = ladder(self.N + d + 2)
            out = np.zeros_like(Q)
            for (a, b, _), c in p.terms.items():
                out = out + coeff_complex(c) * weyl_monomial(Q, P, a, b)
            return out[:self.N, :self.N]
        return self.cache.get(_symbol_key(p), build)

    # general symbols -------------------------------------------------------------
    def weyl_grid_kernel(self, f: Callable) -> np.ndarray:
        """``(K dx)_{ij}`` for the Weyl kernel ``(2 pi)^{-1} int f((x_i+x_j)/2, xi) e^{i (x_i - x_j) xi} dxi``.

        ``f`` is evaluated at points ``(q, p, 1)`` of shape ``(..., 3)``.
        The momentum grid is the one dual to differences of grid points.
        """
        M, dx = self.M, self.dx
        L = 2 * M
        dxi = 2 * np.pi / (L * dx)
        xi = (np.arange(L) - L // 2) * dxi
        mids = self.x[0] + dx * np.arange(2 * M - 1) / 2
        G = np.empty((2 * M - 1, L), dtype=complex)
        for s0 in range(0, 2 * M - 1, 128):
            m = mids[s0:s0 + 128]
            pts = np.stack(np.broadcast_arrays(m[:, None], xi[None, :], np.ones((1, 1))), axis=-1)
            G[s0:s0 + 128] = np.fft.ifft(np.asarray(f(pts), dtype=complex), axis=1)
        i = np.arange(M)
        I, J = np.meshgrid(i, i, indexing="ij")
        sign = np.where((I - J) % 2 == 0, 1.0, -1.0)
        return sign * G[I + J, (I - J) % L]

    @property
    def phase_radius(self) -> float:
        """Phase-space radius reached by the truncated Hermite basis."""
        return float(np.sqrt(2 * self.N + 1))

    def phase_cut(self, pts) -> np.ndarray:
        """Smooth cutoff equal to 1 inside the reach of the basis and 0 near the grid edges.

        Order-0 symbols do not decay in momentum; without the cut the
        periodic momentum sum of the grid kernel aliases them.
        """
        from .symbols import _smooth_step
        r = np.hypot(pts[..., 0], pts[..., 1])
        r_in = self.phase_radius + 1
        r_out = min(self.extent, np.pi / self.dx)
        if r_out <= r_in:
            return np.ones(r.shape)
        return 1 - _smooth_step((r - r_in) / (r_out - r_in))

    def quantize_symbol(self, f: Callable, cut: bool = True) -> np.ndarray:
        """Hermite matrix of a general symbol through the grid Weyl kernel.

        With ``cut`` the symbol is multiplied by :meth:`phase_cut`, which
        leaves it unchanged where the basis functions live.
        """
        g = (lambda z: f(z) * self.phase_cut(z)) if cut else f

        def build():
            K = self.weyl_grid_kernel(g)
            return self.Hn.T @ K @ self.Hn
        return self.cache.get(_symbol_key(f) + (cut,), build)

    def window_kernel(self, eta, sigma: float = 1.0) -> np.ndarray:
        """Grid kernel of the gaussian window ``exp(-|eta + xi|^2 / (2 sigma^2))`` at ``xi3 = 1``."""
        eta = np.asarray(eta, dtype=float)
        X = self.x
        m = 0.5 * (X[:, None] + X[None, :])
        d = X[:, None] - X[None, :]
        c3 = np.exp(-(1 + eta[2]) ** 2 / (2 * sigma ** 2))
        return (self.dx * sigma / np.sqrt(2 * np.pi) * c3 * np.exp(-(m + eta[0]) ** 2 / (2 * sigma ** 2))
                * np.exp(-sigma ** 2 * d ** 2 / 2) * np.exp(-1j * eta[1] * d))

    def window_norms(self, v, dirs, radii, sigma: float = 1.0) -> np.ndarray:
        """``|| Op(g(eta + .)) v ||`` for ``eta = t omega``; ``v`` may be a batch (columns)."""
        c = v.coefficients if isinstance(v, GridVector) else np.asarray(v)
        w = self.Hn @ c
        out = np.empty((len(dirs), len(radii)) + c.shape[1:])
        for i, d in enumerate(np.asarray(dirs, dtype=float)):
            for j, t in enumerate(radii):
                out[i, j] = np.linalg.norm(self.window_kernel(t * d, sigma) @ w, axis=0)
        return out

    # vectors ---------------------------------------------------------------------
    def hermite(self, k: int) -> GridVector:
        c = np.zeros(self.N, dtype=complex)
        c[k] = 1
        return GridVector(self, c, "smooth", f"hermite_{k}")

    def from_grid(self, w: np.ndarray, declared_class="unknown", label="") -> GridVector:
        """Project samples of a function on the position grid onto the Hermite basis."""
        return GridVector(self, self.Hn.T @ (np.asarray(w) * np.sqrt(self.dx)), declared_class, label)

    def coherent(self, q: float, p: float) -> np.ndarray:
        """Hermite coefficients of the coherent state centred at ``(q, p)``."""
        alpha = (q + 1j * p) / np.sqrt(2)
        n = np.arange(self.N)
        from scipy.special import gammaln
        logmag = -abs(alpha) ** 2 / 2 + n * np.log(abs(alpha) + 1e-300) - 0.5 * gammaln(n + 1)
        c = np.exp(logmag) * np.exp(1j * n * np.angle(alpha))
        if alpha == 0:
            c = (n == 0).astype(complex)
        return c

    def laplacian_eigenvalues(self) -> np.ndarray:
        return 2.0 * np.arange(self.N) + H3_OFFSET

    def sobolev_weight(self, s: float) -> np.ndarray:
        return self.laplacian_eigenvalues() ** (s / 2)

    def sobolev_norm(self, u, s: float) -> float:
        c = u.coefficients if isinstance(u, GridVector) else np.asarray(u)
        return float(np.linalg.norm(self.sobolev_weight(s) * c))

    def tail_mass(self, u, tail: int = 8) -> float:
        c = u.coefficients if isinstance(u, GridVector) else np.asarray(u)
        return float(np.linalg.norm(c[-tail:]) / max(np.linalg.norm(c), 1e-300))

    def flow(self, a: PolySymbol, t: float) -> np.ndarray:
        """``exp(i t Op(a))`` on the Hermite basis (dense eigensolve of the Hermitian matrix)."""
        A = self.quantize(a)
        ev, V = np.linalg.eigh(0.5 * (A + A.conj().T))
        return (V * np.exp(1j * t * ev)) @ V.conj().T

    def group_element(self, x) -> np.ndarray:
        """``pi(exp x) = exp(-i (x1 Q + x2 P + x3))`` restricted to the basis."""
        from scipy.linalg import expm
        x = np.asarray(x, dtype=float)
        pad = self.N + 80
        Q, P = ladder(pad)
        U = expm(-1j * (x[0] * Q + x[1] * P + x[2] * np.eye(pad)))
        return U[:self.N, :self.N]

    def to_json(self) -> dict:
        return {"variant": "heisenberg", "hermite_N": self.N, "grid_M": self.M, "extent": self.extent}


def backend_from_json(d: dict):
    if d.get("variant") == "abelian":
        return AbelianRegular(d.get("n", 1), d.get("size", 4096), d.get("extent", np.pi))
    if d.get("variant") == "heisenberg":
        return HeisenbergSchrodinger(d.get("hermite_N", 64), d.get("grid_M", 512), d.get("extent", 26.0))
    raise ValueError(f"unknown backend variant {d.get('variant')!r}")
    raise ValueError(f"unknown backend variant {d.get('variant')!r}")


# -- operations ---------------------------------------------------------------------------------
def quantize(backend, p):
    return backend.quantize(p)


def sobolev_norm(backend, u, s: float) -> float:
    return backend.sobolev_norm(u, s)


def _vector_floor(backend, v, floor_rel):
    c = v.coefficients if isinstance(v, GridVector) else np.asarray(v)
    axes = tuple(range(len(backend.vector_shape)))
    scale = np.sqrt(np.sum(np.abs(c) ** 2, axis=axes))
    if isinstance(backend, AbelianRegular):
        scale = scale * np.sqrt(backend.dx ** backend.n)
    return floor_rel * np.maximum(scale, 1e-300)


def symbol_window_norms(backend, v, p: Callable, dirs, radii) -> np.ndarray:
    """``|| Op(p(t omega + .)) v ||`` for a general test symbol ``p``."""
    c = v.coefficients if isinstance(v, GridVector) else np.asarray(v)
    out = np.empty((len(dirs), len(radii)))
    for i, d in enumerate(np.asarray(dirs, dtype=float)):
        for j, t in enumerate(radii):
            shift = t * d
            if isinstance(backend, AbelianRegular):
                vals = p(backend.freq_points + shift)
                out[i, j] = backend.norm(backend.ifft(vals * backend.fft(c)))
            else:
                K = backend.weyl_grid_kernel(lambda z, s=shift: p(z + s))
                out[i, j] = np.linalg.norm(K @ (backend.Hn @ c))
    return out


def window_slopes(backend, v, dirs, radii, sigma=None, p: Callable | None = None,
                  floor_rel: float = 1e-12, floor: float | None = None) -> np.ndarray:
    """Decay slopes over the top half of ``radii`` of translated-window norms of ``v``.

    One slope per direction; a batch of vectors (columns) gives one column each.
    Norms at or below ``floor`` (default ``floor_rel`` times the norm of each
    vector) count as decayed.
    """
    radii = np.asarray(radii, dtype=float)
    if p is not None:
        W = symbol_window_norms(backend, v, p, dirs, radii)
    else:
        kw = {} if sigma is None else {"sigma": sigma}
        W = backend.window_norms(v, dirs, radii, **kw)
    if floor is None:
        floor = _vector_floor(backend, v, floor_rel)
    floor = np.broadcast_to(np.asarray(floor, dtype=float), W.shape[2:]) if W.ndim == 3 else floor
    win = top_half(radii)
    if W.ndim == 2:
        return np.array([decay_slope(radii, W[i], floor, win) for i in range(len(dirs))])
    return np.array([[decay_slope(radii, W[i, :, b], floor[b], win) for b in range(W.shape[2])]
                     for i in range(len(dirs))])


def smooth_decay_test(backend, u: GridVector, dirs, radii, p: Callable | None = None, sigma=None,
                      n_rapid: float | None = None, tail_tol: float = 1e-10) -> ConeEstimate:
    """Flag directions whose translated test-symbol norms of ``u`` do not decay rapidly.

    Parameters
    ----------
    p : callable, optional
        Test symbol, translated by ``eta = t omega`` along ``radii``.  The
        default is a gaussian window (a Schwartz symbol), which has a closed
        form Weyl kernel.
    """
    n_rapid = backend.rapid_slope if n_rapid is None else n_rapid
    slopes = window_slopes(backend, u, dirs, radii, sigma, p)
    flags = [OUT if s <= -n_rapid else IN for s in slopes]
    notes = {}
    if isinstance(backend, HeisenbergSchrodinger):
        tm = backend.tail_mass(u)
        notes["tail_mass"] = tm
        notes["truncation_dominated"] = bool(tm > tail_tol)
    return ConeEstimate(dirs, flags, slopes, notes)


def garding_check(backend, p, s_norm: float | None = None, eps: float = 0.25, C_max: float = 10.0,
                  maxdeg: int | None = None) -> dict:
    """Smallest eigenvalue of the symmetrised quantization on the interior block and the constant
    ``C = max(0, -lambda_min(W^{-1} M W^{-1}))`` for the Sobolev weight of order ``s_norm``.

    ``s_norm`` defaults to ``(m - 1/2 + eps) / 2`` for a symbol of degree ``m``.
    """
    m = p.degree if isinstance(p, PolySymbol) else 0
    if s_norm is None:
        s_norm = (m - 0.5 + eps) / 2
    if isinstance(backend, AbelianRegular):
        vals = backend.quantize(p).values.real
        lam = float(vals.min())
        w = (1 + np.sum(backend.freq_points ** 2, axis=-1)) ** (s_norm / 2)
        C = max(0.0, float(-(vals / w ** 2).min()))
        return {"min_eig": lam, "C": C, "s_norm": s_norm, "C_max": C_max, "pass": C <= C_max}
    M = backend.quantize(p)
    d = maxdeg if maxdeg is not None else max(m, 0)
    blk = backend.interior(d)
    Mb = 0.5 * (M + M.conj().T)[blk, blk]
    lam = float(np.linalg.eigvalsh(Mb).min())
    w = backend.sobolev_weight(s_norm)[blk]
    Mw = Mb / np.outer(w, w)
    C = max(0.0, float(-np.linalg.eigvalsh(Mw).min()))
    return {"min_eig": lam, "C": C, "s_norm": s_norm, "C_max": C_max, "block": blk.stop, "pass": C <= C_max}


def sobolev_continuity_norm(backend: HeisenbergSchrodinger, p: PolySymbol, s: float) -> float:
    """Operator norm of ``W^{s-m} Op(p) W^{-s}`` on the interior block (``m`` the degree of ``p``)."""
    m = p.degree
    blk = backend.interior(m)
    A = backend.quantize(p)[blk, blk]
    wl = backend.sobolev_weight(s - m)[blk]
    wr = backend.sobolev_weight(-s)[blk]
    return float(np.linalg.norm(wl[:, None] * A * wr[None, :], 2))


def homomorphism_defect(backend, A, p: PolySymbol, q: PolySymbol, N: int | None = None) -> float:
    """``|| Op(p # q) - Op(p) Op(q) ||`` on the interior block, relative to ``|| Op(p # q) ||``.

    Entries of degree-6 products reach ``1e6`` at ``N=64``, so an absolute
    defect would only measure rounding.  Abelian grids use sup norms of the
    multipliers; the Hermite backend uses the max entry of the block.
    """
    from .star import sharp
    pq = sharp(A, p, q, N)
    if isinstance(backend, AbelianRegular):
        lhs = backend.quantize(pq)
        return (lhs - backend.quantize(p) @ backend.quantize(q)).norm() / max(lhs.norm(), 1.0)
    d = max(p.degree, q.degree, pq.degree, 0)
    blk = backend.interior(d)
    lhs = backend.quantize(pq)
    D = lhs - backend.quantize(p) @ backend.quantize(q)
    return float(np.max(np.abs(D[blk, blk])) / max(np.max(np.abs(lhs[blk, blk])), 1.0))


# -- standard test vectors ------------------------------------------------------------------
def ray_coherent_proxy(backend: HeisenbergSchrodinger, angle: float = 0.0, q_min: int = 1,
                       q_max: int = 16, power: float = 1.0) -> GridVector:
    """Sum of coherent states at ``r (cos angle, sin angle)``, ``r = q_min..q_max``, weighted ``r^-power``.

    The window norms along the ray decay only like ``t^-power``; every other
    direction decays rapidly, so the proxy has one singular direction.
    """
    c = sum(backend.coherent(r * np.cos(angle), r * np.sin(angle)) / r ** power
            for r in range(q_min, q_max + 1))
    return GridVector(backend, c, "distribution", f"ray@{angle:.4f}")


def standard_vector(backend, kind: str, **params) -> GridVector:
    """Named vectors used by the experiments.

    Abelian kinds: ``gaussian``, ``delta``, ``sign``, ``mollified-delta``
    (``smooth_side`` +1 or -1 gets a gaussian Fourier decay), ``layer`` (a
    delta across the first coordinate, constant in the others).  Heisenberg
    kinds: ``hermite``, ``coherent-ray``, ``delta-proxy`` (narrow gaussian),
    ``constant-proxy`` (broad gaussian).
    """
    label = params.pop("label", kind)
    if isinstance(backend, AbelianRegular):
        if kind == "gaussian":
            a = float(params.get("a", 4.0))
            return backend.vector(lambda x: np.exp(-a * np.sum(x ** 2, axis=-1)), "smooth", label)
        if kind == "delta":
            u = backend.delta(label)
            return u
        if kind == "sign":
            return backend.vector(lambda x: np.sign(x[..., 0]) + 0j, "distribution", label)
        if kind == "mollified-delta":
            side = float(params.get("smooth_side", -1))
            width = float(params.get("width", 8.0))
            return backend.vector(lambda k: np.exp(-(np.maximum(side * k[..., 0], 0) / width) ** 2),
                                  "distribution", label, fourier=True)
        if kind == "layer":
            return backend.vector(lambda x: (np.abs(x[..., 0]) < backend.dx / 2) / backend.dx + 0j,
                                  "distribution", label)
    elif isinstance(backend, HeisenbergSchrodinger):
        if kind == "hermite":
            u = backend.hermite(int(params.get("k", 0)))
            u.label = label
            return u
        if kind == "coherent-ray":
            u = ray_coherent_proxy(backend, float(params.get("angle", 0.0)), int(params.get("q_min", 1)),
                                   int(params.get("q_max", 16)), float(params.get("power", 1.0)))
            u.label = label
            return u
        if kind in ("delta-proxy", "constant-proxy"):
            w = float(params.get("width", 0.08 if kind == "delta-proxy" else 6.0))
            x = backend.x
            g = np.exp(-x ** 2 / (2 * w ** 2))
            if kind == "delta-proxy":
                g = g / np.sqrt(2 * np.pi * w ** 2)
            return backend.from_grid(g, "distribution", label)
    raise KeyError(f"unknown vector kind {kind!r} for the {backend.variant} backend")
