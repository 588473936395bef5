"""Sampled symbols on direction x radius grids, conic sets and the T^Q cutoff."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .poly import PolySymbol

IN, OUT, UNDECIDED = "in", "out", "undecided"

CHAR_TOL = 1e-6
ELLIPTICITY_TOL = 1e-2
N_RAPID = 8.0


# -- sampling grids ------------------------------------------------------------------
def directions(n: int, count: int | None = None) -> np.ndarray:
    """Unit directions: ``+-1`` for n=1, a uniform circle for n=2, a Fibonacci sphere for n=3.

    The Fibonacci sphere uses the first coordinate as its polar axis; with an
    odd count one point lies exactly on the equator ``xi1 = 0``.
    """
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        count = count or 32
        th = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if n == 3:
        count = count or 65
        i = np.arange(count)
        h = 1 - (2 * i + 1) / count
        r = np.sqrt(np.clip(1 - h * h, 0, None))
        phi = np.pi * (3 - np.sqrt(5)) * i
        return np.stack([h, r * np.cos(phi), r * np.sin(phi)], axis=1)
    raise ValueError("direction grids are provided for n <= 3")


def circle_directions(count: int, plane=(0, 1), n: int = 3, extra=()) -> np.ndarray:
    """Uniform circle in a coordinate plane of R^n plus optional extra unit vectors."""
    th = 2 * np.pi * np.arange(count) / count
    d = np.zeros((count, n))
    d[:, plane[0]] = np.cos(th)
    d[:, plane[1]] = np.sin(th)
    extra = [np.asarray(e, dtype=float) / np.linalg.norm(e) for e in extra]
    return np.vstack([d] + [e[None, :] for e in extra]) if extra else d


def angular_step(dirs: np.ndarray) -> float:
    """Largest nearest-neighbour angle of a direction sample."""
    dirs = np.asarray(dirs, dtype=float)
    if len(dirs) < 2:
        return np.pi
    G = np.clip(dirs @ dirs.T, -1, 1)
    np.fill_diagonal(G, -2)
    return float(np.max(np.arccos(np.clip(G.max(axis=1), -1, 1))))


def radial_ladder(R: int = 12, base: float = 2.0, start: int = 0) -> np.ndarray:
    """Geometric ladder ``base^k`` for ``k = start..R``."""
    return base ** np.arange(start, R + 1, dtype=float)


def top_half(radii) -> slice:
    return slice(len(radii) // 2, len(radii))


def decay_slope(radii, mags, floor: float | np.ndarray = 0.0, window: slice | None = None) -> float:
    """Least-squares slope of ``log|p|`` against ``log t`` over ``window``.

    Values at or below ``floor`` count as fully decayed.  If fewer than two
    points in the window are above the floor the decay is below resolution
    and ``-inf`` is returned.
    """
    radii = np.asarray(radii, dtype=float)
    mags = np.abs(np.asarray(mags))
    floor = np.broadcast_to(np.asarray(floor, dtype=float), mags.shape)
    if window is None:
        window = top_half(radii)
    t, m, f = radii[window], mags[window], floor[window]
    keep = m > np.maximum(f, 1e-300)
    if keep.sum() < 2:
        return -np.inf
    slope = _fit(t[keep], m[keep])
    if not keep[-1]:
        # the ray fell under the floor: its decay is at least the drop to the floor
        first = np.nonzero(keep)[0][0]
        drop = np.log(max(f[-1], 1e-300) / m[first]) / np.log(t[-1] / t[first])
        slope = min(slope, drop)
    return slope


def _fit(t, m):
    x, y = np.log(t), np.log(m)
    A = np.stack([x, np.ones_like(x)], axis=1)
    return float(np.linalg.lstsq(A, y, rcond=None)[0][0])


# -- data types ----------------------------------------------------------------------
@dataclass
class SampledSymbol:
    """Values of a symbol on rays ``t * omega``.

    ``values[d, r]`` is the value at ``radii[r] * directions[d]``.
    """

    order: float
    directions: np.ndarray
    radii: np.ndarray
    values: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        self.directions = np.asarray(self.directions, dtype=float)
        self.radii = np.asarray(self.radii, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if np.any(np.diff(self.radii) <= 0) or self.radii[0] < 1:
            raise ValueError("radii must be strictly increasing and >= 1")
        if self.values.shape != (len(self.directions), len(self.radii)):
            raise ValueError("values must have shape (directions, radii)")

    @classmethod
    def from_function(cls, f: Callable, order: float, dirs, radii, provenance: str = "") -> "SampledSymbol":
        dirs = np.asarray(dirs, dtype=float)
        radii = np.asarray(radii, dtype=float)
        pts = radii[None, :, None] * dirs[:, None, :]
        if not provenance:
            provenance = getattr(f, "to_text", lambda: repr(f))() if isinstance(f, PolySymbol) else repr(f)
        return cls(order, dirs, radii, np.asarray(f(pts)), provenance)

    @property
    def points(self) -> np.ndarray:
        return self.radii[None, :, None] * self.directions[:, None, :]

    def order_constant(self) -> float:
        """Fitted ``C`` in ``|p| <= C (1 + t^2)^{m/2}``."""
        w = (1 + self.radii ** 2) ** (self.order / 2)
        return float(np.max(np.abs(self.values) / w[None, :]))

    def ray_slopes(self, floor=0.0) -> np.ndarray:
        return np.array([decay_slope(self.radii, v, floor) for v in self.values])

    def __sub__(self, other: "SampledSymbol") -> "SampledSymbol":
        _same_grid(self, other)
        return SampledSymbol(max(self.order, other.order), self.directions, self.radii,
                             self.values - other.values, f"({self.provenance}) - ({other.provenance})")


def _same_grid(a, b):
    if a.values.shape != b.values.shape or not np.allclose(a.radii, b.radii) or not np.allclose(a.directions, b.directions):
        raise ValueError("symbols sampled on different grids")


@dataclass
class ConeSet:
    """Sampled conic set: one flag and one fitted slope per direction."""

    directions: np.ndarray
    flags: list
    slopes: np.ndarray = field(default_factory=lambda: np.array([]))

    def __post_init__(self):
        self.directions = np.asarray(self.directions, dtype=float)
        self.flags = list(self.flags)
        if len(self.slopes) == 0:
            self.slopes = np.full(len(self.flags), np.nan)
        self.slopes = np.asarray(self.slopes, dtype=float)
        if len(self.flags) != len(self.directions):
            raise ValueError("one flag per direction")
        bad = set(self.flags) - {IN, OUT, UNDECIDED}
        if bad:
            raise ValueError(f"unknown flags {bad}")

    def mask(self, conservative: bool = True) -> np.ndarray:
        """Boolean membership; undecided directions count as members when conservative."""
        f = np.array(self.flags)
        return (f == IN) | ((f == UNDECIDED) if conservative else False)

    @property
    def members(self) -> np.ndarray:
        return self.directions[self.mask()]

    def is_empty(self) -> bool:
        return not self.mask().any()

    def is_full(self) -> bool:
        return self.mask().all()

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.directions.shape[1]
        w.writerow([f"d{i + 1}" for i in range(n)] + ["flag", "slope"])
        for d, fl, s in zip(self.directions, self.flags, self.slopes):
            w.writerow([repr(float(v)) for v in d] + [fl, repr(float(s))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ConeSet":
        rows = list(csv.reader(io.StringIO(text)))[1:]
        dirs = [[float(v) for v in r[:-2]] for r in rows]
        return cls(np.array(dirs), [r[-2] for r in rows], np.array([float(r[-1]) for r in rows]))


def cone_contained(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    """Every direction of ``a`` lies within angle ``tol`` of some direction of ``b``."""
    a = np.asarray(a, dtype=float).reshape(-1, np.asarray(b).shape[-1] if len(b) else np.asarray(a).shape[-1])
    if len(a) == 0:
        return True
    if len(b) == 0:
        return False
    ang = np.arccos(np.clip(a @ np.asarray(b, dtype=float).T, -1, 1))
    return bool(np.all(ang.min(axis=1) <= tol + 1e-9))


def hausdorff_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Hausdorff distance between two finite direction sets (inf if exactly one is empty)."""
    if len(a) == 0 and len(b) == 0:
        return 0.0
    if len(a) == 0 or len(b) == 0:
        return np.inf
    ang = np.arccos(np.clip(np.asarray(a) @ np.asarray(b).T, -1, 1))
    return float(max(ang.min(axis=1).max(), ang.min(axis=0).max()))


# -- classification ------------------------------------------------------------------
def _as_sampled(p, dirs, radii, order=0.0):
    if isinstance(p, SampledSymbol):
        return p
    if dirs is None or radii is None:
        raise ValueError("directions and radii are required for unsampled symbols")
    return SampledSymbol.from_function(p, order, dirs, radii)


def char_set(p, dirs=None, radii=None, char_tol: float = CHAR_TOL,
             ellipticity_tol: float = ELLIPTICITY_TOL) -> ConeSet:
    """Characteristic directions of an order-0 symbol.

    A direction is ``in`` when ``min |p(t omega)|`` over the top half of the
    ladder is below ``char_tol``, ``out`` when it is at least
    ``ellipticity_tol`` and ``undecided`` otherwise.
    """
    s = _as_sampled(p, dirs, radii)
    if s.order != 0:
        raise ValueError("char_set expects an order-0 symbol")
    w = top_half(s.radii)
    m = np.abs(s.values[:, w]).min(axis=1)
    flags = [IN if v < char_tol else OUT if v >= ellipticity_tol else UNDECIDED for v in m]
    return ConeSet(s.directions, flags, s.ray_slopes())


def essential_support(p, dirs=None, radii=None, n_rapid: float = N_RAPID, floor: float = 0.0,
                      order: float = 0.0) -> ConeSet:
    """Directions where the symbol does not decay rapidly.

    ``out`` iff the fitted ray slope is ``<= -n_rapid``; everything else is
    reported ``in`` (there is no undecided class here).
    """
    s = _as_sampled(p, dirs, radii, order)
    slopes = s.ray_slopes(floor)
    flags = [OUT if sl <= -n_rapid else IN for sl in slopes]
    return ConeSet(s.directions, flags, slopes)


# -- the cutoff T^Q --------------------------------------------------------------------
def _smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.asarray(s, dtype=float)
    a = np.where(s > 0, np.exp(-1 / np.where(s > 0, s, 1)), 0.0)
    b = np.where(s < 1, np.exp(-1 / np.where(s < 1, 1 - s, 1)), 0.0)
    return a / (a + b)


def chi_plateau(x, Q: float, plateau: float = 0.5):
    """Radial bump equal to 1 on ``|x| <= plateau*Q`` and 0 for ``|x| >= Q``."""
    r = np.abs(x) / Q
    return 1 - _smooth_step((r - plateau) / (1 - plateau))


def chi_bump(x, Q: float):
    """``exp(1 - 1/(1 - |x/Q|^2))`` inside ``|x| < Q``."""
    r2 = (np.abs(x) / Q) ** 2
    out = np.zeros_like(r2, dtype=float)
    m = r2 < 1
    out[m] = np.exp(1 - 1 / (1 - r2[m]))
    return out


def cutoff_kernel(Q: float, profile: str = "plateau", dx: float | None = None, n: int = 4096):
    """Sampled kernel ``K = (2 pi)^{-1} int chi(x) e^{i x eta} dx`` on a uniform eta grid.

    Returns ``(eta, K)``.  The eta spacing is ``2 pi / (n dx)``, the kernel
    has unit mass because ``chi(0) = 1``.
    """
    chi = chi_plateau if profile == "plateau" else chi_bump
    dx = dx if dx is not None else 2 * Q / 256
    x = (np.arange(n) - n // 2) * dx
    vals = chi(x, Q)
    K = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(vals))).real * dx / (2 * np.pi)
    eta = (np.arange(n) - n // 2) * (2 * np.pi / (n * dx))
    return eta, K


class NyquistError(ValueError):
    pass


def cutoff_tq(p, Q_radius: float, points=None, profile: str = "plateau", deta: float | None = None,
              width: float | None = None, dirs=None, radii=None, order: float | None = None):
    """Apply ``T^Q = F chi F^{-1}`` to a symbol on R^1, i.e. convolve with ``F chi``.

    Parameters
    ----------
    p : callable or SampledSymbol provenance callable
        Symbol evaluable on arrays of shape ``(..., 1)``.
    Q_radius : float
        Support radius of ``chi``.
    points : array, optional
        Evaluation points as an array of scalars.  Alternatively pass
        ``dirs`` and ``radii`` to get a :class:`SampledSymbol`.
    deta : float, optional
        Quadrature step of the convolution; must resolve the kernel, whose
        oscillation scale is ``1/Q_radius`` (Nyquist guard).
    width : float, optional
        Half-width of the truncated kernel support in eta.

    Notes
    -----
    Polynomial symbols are returned unchanged: with a plateau profile every
    moment of the kernel vanishes.  For other symbols the convolution is
    computed by direct quadrature against the sampled kernel.
    """
    if isinstance(p, PolySymbol) and profile == "plateau":
        if dirs is not None:
            return SampledSymbol.from_function(p, order if order is not None else p.degree, dirs, radii,
                                               f"T^Q[{p.to_text()}], Q={Q_radius}")
        return p(np.asarray(points, dtype=float)[..., None])
    deta = deta if deta is not None else 0.25 / Q_radius
    if deta * Q_radius > np.pi / 2:
        raise NyquistError(f"eta step {deta} too coarse for a cutoff of radius {Q_radius}")
    width = width if width is not None else 2000.0 / Q_radius
    m = int(np.ceil(width / deta))
    eta = np.arange(-m, m + 1) * deta
    chi = chi_plateau if profile == "plateau" else chi_bump
    # kernel by quadrature of the compactly supported chi
    xq = np.linspace(-Q_radius, Q_radius, 2049)
    wq = np.full_like(xq, xq[1] - xq[0])
    cx = chi(xq, Q_radius) * wq
    K = (np.cos(np.outer(eta, xq)) @ cx) / (2 * np.pi) * deta

    def apply(xs):
        xs = np.asarray(xs, dtype=float)
        flat = xs.reshape(-1)
        out = np.empty(flat.shape, dtype=complex)
        for s in range(0, len(flat), 256):
            chunk = flat[s:s + 256]
            vals = p((chunk[:, None] - eta[None, :])[..., None])
            out[s:s + 256] = vals @ K
        return out.reshape(xs.shape)

    if dirs is not None:
        dirs = np.asarray(dirs, dtype=float)
        pts = np.asarray(radii)[None, :] * dirs[:, 0][:, None]
        return SampledSymbol(order if order is not None else 0.0, dirs, radii, apply(pts),
                             f"T^Q[{getattr(p, 'text', repr(p))}], Q={Q_radius}")
    return apply(points)
