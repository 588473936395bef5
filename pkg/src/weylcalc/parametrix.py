"""Ellipticity certificates, the resolvent weight and Neumann parametrices for ``p - lambda``.

Resolvent symbols are carried as Taylor jets so that the non-polynomial
factors ``1/(p - lambda)`` can enter the truncated #-product.  In one
variable the first approximation can be smoothed by the actual cutoff
``T^Q``; in several variables ``Q_radius`` is recorded but the reciprocal is
used as is (the limit of large ``Q``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .jets import Jet
from .lie import LieAlgebra
from .poly import PolySymbol
from .star import ShiftedPoly, ck_operator, sharp_jet
from .symbols import ELLIPTICITY_TOL, cutoff_tq, directions, radial_ladder

DIVISION_GUARD = 1e-14
SECTOR_MARGIN = np.deg2rad(5.0)


class SectorCollisionError(ValueError):
    """The range of the symbol at infinity meets the resolvent sector."""


class DivisionGuardError(ZeroDivisionError):
    pass


# -- ellipticity -----------------------------------------------------------------------
@dataclass
class EllipticCertificate:
    elliptic: bool
    order: float
    C1: float
    C2: float
    R: float
    failing_direction: Optional[np.ndarray] = None

    def to_json(self) -> dict:
        d = {"elliptic": self.elliptic, "order": self.order, "C1": self.C1, "C2": self.C2, "R": self.R}
        if self.failing_direction is not None:
            d["failing_direction"] = [float(v) for v in self.failing_direction]
        return d


def is_elliptic(p, m: float, R: float = 1.0, dirs=None, radii=None,
                tol: float = ELLIPTICITY_TOL) -> EllipticCertificate:
    """Fit ``C1 (1+|xi|^2)^{m/2} <= |p(xi)| <= C2 (1+|xi|^2)^{m/2}`` on ``|xi| > R``.

    Fails (with the worst direction) when the lower constant is below ``tol``.
    """
    n = p.nvars
    dirs = directions(n) if dirs is None else np.asarray(dirs, dtype=float)
    radii = radial_ladder(12) if radii is None else np.asarray(radii, dtype=float)
    radii = radii[radii > R]
    pts = radii[None, :, None] * dirs[:, None, :]
    ratio = np.abs(p(pts)) / (1 + radii[None, :] ** 2) ** (m / 2)
    per_dir = ratio.min(axis=1)
    C1, C2 = float(per_dir.min()), float(ratio.max())
    if C1 < tol:
        return EllipticCertificate(False, m, C1, C2, R, dirs[int(np.argmin(per_dir))])
    return EllipticCertificate(True, m, C1, C2, R)


def lambda_weight(xi, lam, d: float) -> np.ndarray:
    """``(1 + |xi|^2 + |lambda|^{2/d})^{1/2}``."""
    if d <= 0:
        raise ValueError("d must be positive")
    xi = np.asarray(xi, dtype=float)
    return np.sqrt(1 + np.sum(xi ** 2, axis=-1) + np.abs(lam) ** (2.0 / d))


# -- sectors ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Sector:
    """``P = {lambda : arg lambda >= b or arg lambda <= a}``, containing the negative axis.

    ``r`` is the radius of the disc around 0 on which the resolvent must
    also exist.
    """

    a: float = -0.6 * np.pi
    b: float = 0.6 * np.pi
    r: float = 0.5

    def __post_init__(self):
        if not (-np.pi < self.a < 0 < self.b < np.pi):
            raise ValueError("sector angles must satisfy -pi < a < 0 < b < pi")

    def contains(self, lam, margin: float = 0.0) -> np.ndarray:
        ang = np.angle(np.asarray(lam, dtype=complex))
        return (ang >= self.b - margin) | (ang <= self.a + margin)

    def to_json(self) -> dict:
        return {"a": self.a, "b": self.b, "r": self.r}


def range_collision(p, sector: Sector, dirs, radii, margin: float = SECTOR_MARGIN) -> bool:
    """True when sampled values of ``p`` on the top half of the ladder come within ``margin`` of P."""
    t = np.asarray(radii)[len(radii) // 2:]
    vals = p(t[None, :, None] * np.asarray(dirs)[:, None, :])
    vals = vals[np.abs(vals) > 0]
    return bool(np.any(sector.contains(vals, margin)))


def constant_shift(p: PolySymbol, sector: Sector, dirs, radii) -> float:
    """Smallest shift ``c`` from a doubling search with ``p + c`` nonzero on ``P`` and the disc."""
    pts = np.concatenate([np.zeros((1, p.nvars)),
                          (np.asarray(radii)[None, :, None] * np.asarray(dirs)[:, None, :]).reshape(-1, p.nvars)])

    def bad(c):
        v = p(pts) + c
        return bool(np.any(np.abs(v) <= sector.r) or np.any(sector.contains(v[np.abs(v) > 0])))

    if not bad(0.0):
        return 0.0
    c = max(sector.r, 1.0)
    for _ in range(60):
        if not bad(c):
            return c
        c *= 2
    raise SectorCollisionError("no real constant shift separates the range of p from the sector")


# -- the resolvent family --------------------------------------------------------------
def _max_derivative(A: LieAlgebra, K: int) -> int:
    return max((max(sum(a), sum(b)) for k in range(1, K + 1) for a, b, _ in ck_operator(A, k).terms), default=0)


@dataclass
class ResolventFamily:
    """Order-``N`` parametrix ``q^N_lambda`` of ``p - lambda`` for ``lambda`` in ``P`` or the disc.

    ``evaluator(lam, xi)`` and ``residual_evaluator(lam, xi)`` accept a scalar
    ``lam`` and points of shape ``(..., n)``.
    """

    algebra: LieAlgebra
    base: PolySymbol
    sector: Sector
    order_N: int
    K: int
    shift: float = 0.0
    Q_radius: Optional[float] = None
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        step = self.algebra.nilpotency_step
        # on a step-s nilpotent algebra C_k(p, .) vanishes once k > (s-1) deg p
        self.Kp = max(self.K, (step - 1) * self.base.degree) if step is not None else self.K
        self._dp = min(_max_derivative(self.algebra, self.Kp), self.base.degree)
        self._dk = _max_derivative(self.algebra, self.K)
        self.p = self.base + self.shift if self.shift else self.base

    # jets --------------------------------------------------------------------
    def _first(self, lam, points, degree):
        pj = Jet.from_poly(self.p, points, degree) - lam
        if np.min(np.abs(pj.value)) < DIVISION_GUARD:
            raise DivisionGuardError(f"|p - lambda| < {DIVISION_GUARD} at lambda={lam}")
        return pj.reciprocal()

    def _product(self, f, g, points):
        return sharp_jet(self.algebra, f, g, points, self.K)

    def q_jet(self, lam, points, degree: int = 0) -> Jet:
        """Jet of ``q^N_lambda`` of the requested degree at ``points``."""
        points = np.asarray(points, dtype=float)
        N, dp, dk = self.order_N, self._dp, self._dk
        D = degree + dp + N * dk
        q1 = self._first(lam, points, D)
        if N == 1 or self._dp == 0:
            return q1.truncate(degree)
        P = ShiftedPoly(self.p, lam)
        r = sharp_jet(self.algebra, P, q1, points, self.Kp) - 1
        # S = sum_{j<N} (-r)^{#j}
        S = Jet.constant(q1.nvars, r.degree, 1, r.batch_shape)
        power = None
        for _ in range(1, N):
            power = -r if power is None else self._product(power, -r, points)
            S = S + power
        return self._product(q1, S, points).truncate(degree)

    def evaluator(self, lam, xi) -> np.ndarray:
        return self.q_jet(lam, xi, 0).value

    def residual_evaluator(self, lam, xi, side: str = "left") -> np.ndarray:
        """``p_lambda # q^N - 1`` (side "left") or ``q^N # p_lambda - 1`` (side "right")."""
        xi = np.asarray(xi, dtype=float)
        P = ShiftedPoly(self.p, lam)
        q = self.q_jet(lam, xi, self._dp)
        prod = sharp_jet(self.algebra, P, q, xi, self.Kp, degree=0) if side == "left" \
            else sharp_jet(self.algebra, q, P, xi, self.Kp, degree=0)
        return prod.value - 1

    def to_json(self) -> dict:
        return {"base": self.base.to_text(), "sector": self.sector.to_json(), "N": self.order_N,
                "K": self.K, "shift": self.shift, "Q_radius": self.Q_radius, **self.notes}


def _check_sector(p, sector, dirs, radii, margin):
    if range_collision(p, sector, dirs, radii, margin):
        raise SectorCollisionError("the range of p at infinity meets the sector")


def first_parametrix(p: PolySymbol, sector: Sector | None = None, Q_radius: float | None = None,
                     dirs=None, radii=None, margin: float = SECTOR_MARGIN) -> Callable:
    """Evaluator ``(lam, xi) -> q^1_lambda(xi)``, the cutoff reciprocal of ``p - lambda``.

    In one variable with ``Q_radius`` given the reciprocal is smoothed by
    ``T^Q``; otherwise the plain reciprocal is returned.
    """
    if not isinstance(p, PolySymbol):
        raise TypeError("the first parametrix is built for polynomial symbols")
    sector = sector or Sector()
    dirs = directions(p.nvars) if dirs is None else dirs
    radii = radial_ladder(12) if radii is None else radii
    _check_sector(p, sector, dirs, radii, margin)

    def recip(lam):
        def f(xi):
            v = p(xi) - lam
            if np.min(np.abs(v)) < DIVISION_GUARD:
                raise DivisionGuardError(f"|p - lambda| < {DIVISION_GUARD}")
            return 1 / v
        return f

    if p.nvars == 1 and Q_radius is not None:
        def q1(lam, xi):
            xi = np.asarray(xi, dtype=float)
            return cutoff_tq(recip(lam), Q_radius, points=xi[..., 0])
    else:
        def q1(lam, xi):
            return recip(lam)(np.asarray(xi, dtype=float))
    q1.Q_radius = Q_radius
    return q1


def neumann_parametrix(A: LieAlgebra, p: PolySymbol, N: int = 2, sector: Sector | None = None,
                       K: int | None = None, Q_radius: float | None = None, dirs=None, radii=None,
                       margin: float = SECTOR_MARGIN, auto_shift: bool = True) -> ResolventFamily:
    """Order-``N`` Neumann parametrix ``q^1 # sum_{j<N} (-r)^{#j}``.

    ``K`` truncates every #-product between non-polynomial factors; it
    defaults to ``N`` (the first ``N`` terms beyond the pointwise product).
    A constant shift making ``p - lambda`` invertible on the sector and the
    disc is applied when needed and reported in ``shift``.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    sector = sector or Sector()
    dirs = directions(p.nvars) if dirs is None else dirs
    radii = radial_ladder(12) if radii is None else radii
    _check_sector(p, sector, dirs, radii, margin)
    shift = constant_shift(p, sector, dirs, radii) if auto_shift else 0.0
    K = N if K is None else K
    return ResolventFamily(A, p, sector, N, K, shift, Q_radius)


# -- diagnostics -----------------------------------------------------------------------
def joint_ladder(m: float, size: int = 8, start: int = 1):
    """``(t_j, lambda_k) = (2^j, -2^{m k})`` for ``j, k = start .. start+size-1``."""
    j = np.arange(start, start + size, dtype=float)
    return j, j.copy(), 2.0 ** j, -(2.0 ** (m * j))


def joint_order(f: Callable, dirs, m: float, size: int = 8, start: int = 1, floor: float = 1e-13):
    """Plane fit ``log2 |f| = c + a j + b k`` on the joint ladder, per direction.

    Returns ``(orders, planes)`` where ``orders[d] = a + b`` is the slope
    along the diagonal, on which ``Lambda_m`` grows like ``2^j``.  Values at
    or below ``floor`` are below resolution; a direction with fewer than three
    resolved points has order ``-inf``.
    """
    j, k, t, lam = joint_ladder(m, size, start)
    dirs = np.asarray(dirs, dtype=float)
    vals = np.empty((len(dirs), size, size))
    pts = t[None, :, None] * dirs[:, None, :]
    for ik, l in enumerate(lam):
        vals[:, :, ik] = np.abs(f(l, pts))
    JJ, KK = np.meshgrid(j, k, indexing="ij")
    orders, planes = [], []
    for d in range(len(dirs)):
        v = vals[d]
        keep = v > floor
        if keep.sum() < 3:
            orders.append(-np.inf)
            planes.append((np.nan, np.nan, np.nan))
            continue
        X = np.stack([np.ones(keep.sum()), JJ[keep], KK[keep]], axis=1)
        c, a, b = np.linalg.lstsq(X, np.log2(v[keep]), rcond=None)[0]
        orders.append(a + b)
        planes.append((c, a, b))
    return np.array(orders), np.array(planes)


def dbar_residual(f: Callable, lam, xi, h: float = 1e-4) -> float:
    """Discrete ``d/d(conj lambda)`` of ``lambda -> f(lambda, xi)`` relative to ``max |f|``."""
    fp, fm = f(lam + h, xi), f(lam - h, xi)
    gp, gm = f(lam + 1j * h, xi), f(lam - 1j * h, xi)
    dbar = 0.5 * ((fp - fm) / (2 * h) + 1j * (gp - gm) / (2 * h))
    scale = max(np.max(np.abs(f(lam, xi))), 1e-300)
    return float(np.max(np.abs(dbar)) / scale)


def resolvent_identity_defect(R: ResolventFamily, lam, mu, xi) -> np.ndarray:
    """``q_lam # q_mu - (q_lam - q_mu)/(lam - mu)`` at the points ``xi``."""
    xi = np.asarray(xi, dtype=float)
    dk = R._dk
    ql, qm = R.q_jet(lam, xi, dk), R.q_jet(mu, xi, dk)
    prod = sharp_jet(R.algebra, ql, qm, xi, R.K, degree=0).value
    return prod - (ql.value - qm.value) / (lam - mu)
