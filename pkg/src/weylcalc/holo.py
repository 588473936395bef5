"""Holomorphic functional calculus ``phi o# p`` by contour quadrature of resolvents.

The contour comes in from infinity along the ray of argument ``b``, follows
the circle of radius ``inner_radius`` clockwise, and leaves along the ray of
argument ``a``.  It encloses the range of ``p`` (the positive side), so

    phi o# p (xi) = -1/(2 pi i) int_Gamma phi(lambda) q_lambda(xi) dlambda.
"""
from __future__ import annotations

import ast
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .jets import Jet
from .parametrix import ResolventFamily, Sector
from .poly import PolySymbol
from .star import sharp, sharp_jet
from .symbols import N_RAPID, SampledSymbol, decay_slope

TAIL_TOL = 1e-12
R_LIMIT = 1e200


class ContourError(ValueError):
    pass


# -- holomorphic functions ----------------------------------------------------------------
class HoloFunction:
    """A function holomorphic off the negative real axis with growth ``|phi(z)| ~ |z|^s``."""

    def __init__(self, f: Callable, s: float, label: str = "phi", neg_int: int | None = None):
        self.f = f
        self.s = float(s)
        self.label = label
        self.neg_int = neg_int
        self.exponent = None

    def __call__(self, z):
        return self.f(np.asarray(z, dtype=complex))

    @classmethod
    def power(cls, a: float) -> "HoloFunction":
        """Principal branch ``z^a``."""
        a = float(a)
        if a == int(a):
            k = int(a)
            out = cls(lambda z: z ** k, a, f"z^{k}", -k if k < 0 else None)
        else:
            out = cls(lambda z: np.exp(a * np.log(z)), a, f"z^{a}")
        out.exponent = a
        return out

    @classmethod
    def zero(cls) -> "HoloFunction":
        return cls(lambda z: np.zeros_like(z), -np.inf, "0")

    def __mul__(self, other: "HoloFunction") -> "HoloFunction":
        if self.exponent is not None and other.exponent is not None:
            return HoloFunction.power(self.exponent + other.exponent)
        return HoloFunction(lambda z: self(z) * other(z), self.s + other.s, f"({self.label})*({other.label})")

    def times_power(self, k: int) -> "HoloFunction":
        return self * HoloFunction.power(k)

    def to_json(self) -> dict:
        return {"label": self.label, "growth": self.s}


_PHI_FUNCS = {"exp": np.exp, "log": np.log, "sqrt": np.sqrt}


def parse_phi(text: str, s: float) -> HoloFunction:
    """Parse an expression in ``z`` (``^`` or ``**`` for principal powers, ``exp``, ``log``, ``sqrt``)."""
    tree = ast.parse(text.replace("^", "**"), mode="eval").body

    def ev(node, z):
        if isinstance(node, ast.Name):
            if node.id != "z":
                raise ValueError(f"unknown name {node.id!r}")
            return z
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
            return node.value
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand, z)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            l, r = ev(node.left, z), ev(node.right, z)
            if isinstance(node.op, ast.Add):
                return l + r
            if isinstance(node.op, ast.Sub):
                return l - r
            if isinstance(node.op, ast.Mult):
                return l * r
            if isinstance(node.op, ast.Div):
                return l / r
            if isinstance(node.op, ast.Pow):
                if np.isscalar(r) and float(np.real(r)) == int(np.real(r)) and np.imag(r) == 0:
                    return l ** int(np.real(r))
                return np.exp(r * np.log(l))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _PHI_FUNCS:
            return _PHI_FUNCS[node.func.id](*[ev(a, z) for a in node.args])
        raise ValueError(f"unsupported expression: {ast.dump(node)}")

    ev(tree, np.array([1.0 + 0j]))
    return HoloFunction(lambda z: ev(tree, z) * np.ones_like(z), s, text)


# -- contours ---------------------------------------------------------------------------
def _gauss_panel(lo, hi, n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


@dataclass(frozen=True)
class ContourSpec:
    """Ray-arc-ray contour.

    Rays use the log-radius variable ``u = log |lambda|`` (so nodes cluster
    geometrically near the origin) split into Gauss-Legendre panels; the arc
    uses Gauss-Legendre in the angle.
    """

    angle_a: float = -0.75 * np.pi
    angle_b: float = 0.75 * np.pi
    inner_radius: float = 0.25
    ray_max: Optional[float] = None
    nodes_per_ray: int = 256
    nodes_per_arc: int = 64
    tail_tol: float = TAIL_TOL

    def __post_init__(self):
        if not (-np.pi < self.angle_a < self.angle_b < np.pi):
            raise ContourError("contour angles must satisfy -pi < a < b < pi")

    def check_sector(self, sector: Sector):
        """Both rays must lie inside the sector and the arc inside its disc."""
        if not (sector.contains(np.exp(1j * self.angle_a)) and sector.contains(np.exp(1j * self.angle_b))):
            raise ContourError("contour rays leave the resolvent sector")
        if self.inner_radius > sector.r:
            raise ContourError("the arc must lie inside the disc of the resolvent family")

    def ray_cut(self, phi: HoloFunction, angle: float, qmax: Callable | None = None,
                scale: float = 1.0) -> float:
        """Smallest radius (doubling search) with ``|phi| |lambda| max|q| < tail_tol * scale``."""
        if self.ray_max is not None:
            return self.ray_max
        if qmax is None:
            dist = max(np.sin(min(abs(angle), np.pi - 1e-3)) if abs(angle) < np.pi / 2 else 1.0, 1e-3)
            qmax = lambda R: 1.0 / (R * dist)
        R = max(4 * self.inner_radius, 1.0)
        while R < R_LIMIT:
            lam = R * np.exp(1j * angle)
            if abs(complex(phi(np.array([lam]))[0])) * R * qmax(R) < self.tail_tol * scale:
                return R
            R *= 2
        raise ContourError(f"tail estimate of {phi.label} stays above {self.tail_tol}")

    def ray_panels(self, Rmax: float, core: float, growth: float):
        """Panels in ``u = log|lambda|`` and the Gauss order of each.

        The core ``[log rho, log core]`` holds the poles of ``q_lambda`` and
        gets at least ``nodes_per_ray`` nodes on panels of width <= 1.  The
        tail up to ``Rmax`` uses geometrically widening panels, capped so
        that ``|lambda|^s`` varies by a bounded factor across each.
        """
        lo = np.log(self.inner_radius)
        uc = min(np.log(max(core, 4 * self.inner_radius)), np.log(Rmax))
        per = 8
        n_core = max(self.nodes_per_ray // per, int(np.ceil(uc - lo)))
        edges = list(np.linspace(lo, uc, n_core + 1))
        orders = [per] * n_core
        w = (uc - lo) / n_core
        cap = 8.0 / max(abs(growth), 0.05)
        u, top = uc, np.log(Rmax)
        while u < top - 1e-12:
            w = min(w * 1.5, cap)
            u = min(u + w, top)
            edges.append(u)
            orders.append(16)
        return np.array(edges), orders

    def nodes(self, phi: HoloFunction | None = None, qmax: Callable | None = None, scale: float = 1.0,
              core: float = 1e4):
        """Nodes ``lambda_k`` and weights ``w_k`` with ``int_Gamma f dlambda ~ sum w_k f(lambda_k)``.

        ``scale`` makes the tail criterion relative to the size of the result
        and ``core`` is the radius below which the integrand has structure
        (a multiple of the largest sampled ``|p|``).
        """
        rho = self.inner_radius
        growth = phi.s if phi is not None and np.isfinite(phi.s) else -1.0
        lam, w = [], []
        for angle, sign in ((self.angle_b, -1.0), (self.angle_a, 1.0)):
            Rmax = self.ray_cut(phi, angle, qmax, scale) if phi is not None else (self.ray_max or 1e12)
            edges, orders = self.ray_panels(Rmax, core, growth)
            e = np.exp(1j * angle)
            for lo, hi, n in zip(edges[:-1], edges[1:], orders):
                u, wu = _gauss_panel(lo, hi, n)
                lam.append(np.exp(u) * e)
                w.append(sign * wu * np.exp(u) * e)
        th, wt = _gauss_panel(self.angle_a, self.angle_b, self.nodes_per_arc)
        z = rho * np.exp(1j * th)
        lam.append(z)
        w.append(-1j * z * wt)  # clockwise: theta runs from b down to a
        return np.concatenate(lam), np.concatenate(w)

    def deformed(self, eps: float, radius: float) -> "ContourSpec":
        """The nearby contour with rays at ``b - eps``, ``a + eps`` and arc radius ``radius``."""
        return replace(self, angle_a=self.angle_a + eps, angle_b=self.angle_b - eps, inner_radius=radius)

    def to_json(self) -> dict:
        return {"angle_a": self.angle_a, "angle_b": self.angle_b, "inner_radius": self.inner_radius,
                "ray_max": self.ray_max, "nodes_per_ray": self.nodes_per_ray,
                "nodes_per_arc": self.nodes_per_arc, "tail_tol": self.tail_tol}


def _branch_check(phi: HoloFunction, lam: np.ndarray):
    vals = phi(lam)
    if not np.all(np.isfinite(vals)):
        raise ContourError(f"{phi.label} is not finite on the contour")
    if np.any(np.abs(np.abs(np.angle(lam)) - np.pi) < 1e-12):
        raise ContourError("contour meets the principal branch cut")
    return vals


# -- symbol side ------------------------------------------------------------------------
def _resolvent(R):
    if isinstance(R, ResolventFamily):
        return lambda lam, xi, degree: R.q_jet(lam, xi, degree) if degree else R.evaluator(lam, xi)
    return lambda lam, xi, degree: R(lam, xi)


def residue_power(R, k: int, xi, radius: float, degree: int = 0, nodes: int = 32):
    """``z^{-k} o# p = (1/(k-1)!) d^{k-1}/dlambda^{k-1} q_lambda`` at ``lambda = 0``.

    The derivative is a Cauchy integral over the circle ``|lambda| = radius``,
    on which the resolvent is holomorphic; the trapezoid rule is spectrally
    accurate there.
    """
    q = _resolvent(R)
    th = 2 * np.pi * np.arange(nodes) / nodes
    acc = None
    for t in th:
        lam = radius * np.exp(1j * t)
        c = lam ** (1 - k) / nodes
        term = q(lam, xi, degree) * c
        acc = term if acc is None else acc + term
    return acc


def holo_apply(phi: HoloFunction, R, xi, contour: ContourSpec | None = None, degree: int = 0,
               qmax: Callable | None = None, scale: float = 1.0, method: str = "auto"):
    """``phi o# p`` at the points ``xi`` for a negative growth order.

    ``R`` is a :class:`ResolventFamily` or a plain evaluator ``(lam, xi)``.
    With ``degree > 0`` a :class:`Jet` is returned (requires a family).
    ``scale`` integrates over the dilated contour ``scale * Gamma``.
    Negative integer powers use the residue at 0 unless ``method="contour"``.
    """
    if phi.s >= 0:
        raise ValueError("growth order must be negative; use holo_apply_positive")
    contour = contour or ContourSpec()
    xi = np.asarray(xi, dtype=float)
    if phi.neg_int and method in ("auto", "residue"):
        return residue_power(R, phi.neg_int, xi, contour.inner_radius, degree)
    if isinstance(R, ResolventFamily):
        contour.check_sector(R.sector)
    rel = 1.0
    if isinstance(R, ResolventFamily):
        # make the tail cut relative to the smallest |phi(p)| on the points
        pv = np.abs(phi(np.asarray(R.p(xi)).ravel()))
        pv = pv[np.isfinite(pv) & (pv > 0)]
        if pv.size:
            rel = min(1.0, float(pv.min()))
    core = 1e4
    if isinstance(R, ResolventFamily):
        core = 100 * max(1.0, float(np.max(np.abs(R.p(xi)))))
    lam, w = contour.nodes(phi, qmax, rel, core)
    lam, w = lam * scale, w * scale
    fv = _branch_check(phi, lam) * w
    q = _resolvent(R)
    acc = None
    for l, c in zip(lam, fv):
        term = q(l, xi, degree)
        acc = term * c if acc is None else acc + term * c
    return acc * (-1 / (2j * np.pi))


def positive_split(s: float) -> int:
    """Smallest integer ``k > s``, so that ``z^{-k} phi`` has negative order."""
    return int(np.floor(s)) + 1


def holo_apply_positive(phi: HoloFunction, R: ResolventFamily, xi, contour: ContourSpec | None = None,
                        degree: int = 0):
    """``p^{#k} # ((z^{-k} phi) o# p)`` with ``k`` the smallest integer above the growth order."""
    if phi.s < 0:
        return holo_apply(phi, R, xi, contour, degree)
    A = R.algebra
    k = positive_split(phi.s)
    pk = PolySymbol.constant(R.p.nvars, 1)
    for _ in range(k):
        pk = sharp(A, pk, R.p)
    inner_phi = phi.times_power(-k)
    step = A.nilpotency_step
    K = max(R.K, (step - 1) * pk.degree) if step is not None else R.K
    from .parametrix import _max_derivative
    need = min(_max_derivative(A, K), pk.degree) + degree
    xi = np.asarray(xi, dtype=float)
    if need == 0:
        inner = holo_apply(inner_phi, R, xi, contour)
        out = np.asarray(pk(xi)) * inner
        return out if degree == 0 else Jet(A.dim, 0, out[None, ...])
    inner = holo_apply(inner_phi, R, xi, contour, degree=need)
    prod = sharp_jet(A, pk, inner, xi, K, degree=degree)
    return prod.value if degree == 0 else prod


def holo_any(phi: HoloFunction, R, xi, contour=None, degree: int = 0):
    return holo_apply(phi, R, xi, contour, degree) if phi.s < 0 else holo_apply_positive(phi, R, xi, contour, degree)


def holo_symbol(phi: HoloFunction, R, dirs, radii, contour=None, m: float | None = None) -> SampledSymbol:
    """Sample ``phi o# p`` on rays; declared order ``m * s``."""
    dirs = np.asarray(dirs, dtype=float)
    radii = np.asarray(radii, dtype=float)
    pts = radii[None, :, None] * dirs[:, None, :]
    if m is None:
        m = R.base.degree if isinstance(R, ResolventFamily) else 2
    vals = holo_any(phi, R, pts, contour)
    return SampledSymbol(m * phi.s, dirs, radii, vals, f"{phi.label} o# p")


def certify_order(S: SampledSymbol, tol: float = 0.25) -> dict:
    """Fitted ray order against the declared order."""
    slopes = np.array([decay_slope(S.radii, v) for v in S.values])
    dev = float(np.max(np.abs(slopes - S.order)))
    return {"declared": S.order, "fitted": slopes.tolist(), "deviation": dev, "tolerance": tol, "pass": dev < tol}


# -- checks -----------------------------------------------------------------------------
def _sharp_values(R, f, g, xi, K):
    if isinstance(f, Jet) and isinstance(g, Jet):
        return sharp_jet(R.algebra, f, g, xi, K, degree=0).value
    return f * g


def _decay_report(diff, scale, radii, floor_rel, threshold):
    floor = floor_rel * np.maximum(scale, 1e-300)
    slopes = np.array([decay_slope(radii, d, f) for d, f in zip(np.abs(diff), floor)])
    return {"slopes": slopes.tolist(), "max_slope": float(np.max(slopes)), "threshold": threshold,
            "floor_rel": floor_rel, "max_abs": float(np.max(np.abs(diff))), "pass": bool(np.max(slopes) <= threshold)}


def _holo_jet(phi, R, pts, contour, degree):
    if not isinstance(R, ResolventFamily) or degree == 0:
        return holo_any(phi, R, pts, contour)
    return holo_any(phi, R, pts, contour, degree=degree)


def multiplicativity_check(phi: HoloFunction, psi: HoloFunction, R, dirs, radii, contour=None,
                           threshold: float = -N_RAPID, floor_rel: float = 1e-9, combined: HoloFunction | None = None,
                           K: int | None = None):
    """Ray-decay report of ``(phi o# p) # (psi o# p) - (phi psi) o# p``.

    Values at or below ``floor_rel`` times the size of the product count
    as decayed (quadrature noise).  ``K`` truncates the product of the two
    sampled symbols (default: two orders beyond the family's truncation).
    """
    dirs = np.asarray(dirs, dtype=float)
    radii = np.asarray(radii, dtype=float)
    pts = radii[None, :, None] * dirs[:, None, :]
    degree = 0
    if isinstance(R, ResolventFamily):
        from .parametrix import _max_derivative
        K = R.K + 2 if K is None else K
        degree = _max_derivative(R.algebra, K)
    a = _holo_jet(phi, R, pts, contour, degree)
    b = _holo_jet(psi, R, pts, contour, degree)
    prod = _sharp_values(R, a, b, pts, K)
    both = combined if combined is not None else phi * psi
    c = holo_any(both, R, pts, contour)
    if isinstance(c, Jet):
        c = c.value
    return _decay_report(prod - c, np.abs(c), radii, floor_rel, threshold)


def group_property_check(a: float, b: float, R, dirs, radii, contour=None, threshold: float = -N_RAPID,
                         floor_rel: float = 1e-9):
    """``phi_a o# p # phi_b o# p - phi_{a+b} o# p`` with ``phi_s = z^s``."""
    return multiplicativity_check(HoloFunction.power(a), HoloFunction.power(b), R, dirs, radii, contour,
                                  threshold, floor_rel, combined=HoloFunction.power(a + b))


def deformation_check(phi: HoloFunction, R, xi, contour: ContourSpec | None = None, eps: float = 0.1,
                      radius: float | None = None) -> float:
    """Max relative difference between the integrals over Gamma and the deformed Gamma'."""
    contour = contour or ContourSpec()
    radius = radius if radius is not None else 2 * contour.inner_radius
    g1 = holo_apply(phi, R, xi, contour)
    g2 = holo_apply(phi, R, xi, contour.deformed(eps, radius))
    return float(np.max(np.abs(g1 - g2)) / max(np.max(np.abs(g1)), 1e-300))


def scaling_check(phi: HoloFunction, R, xi, t: float, m: float, contour: ContourSpec | None = None) -> float:
    """Relative difference after the substitution ``lambda -> t^-m lambda``.

    The contour contracts towards 0; the swept region avoids the spectrum for
    every ``t >= 1``, whereas dilating would push the arc across it.
    """
    g1 = holo_apply(phi, R, xi, contour)
    g2 = holo_apply(phi, R, xi, contour, scale=t ** -m)
    return float(np.max(np.abs(g1 - g2)) / max(np.max(np.abs(g1)), 1e-300))


# -- operator side ----------------------------------------------------------------------
def holo_matrix(phi: HoloFunction, M: np.ndarray, contour: ContourSpec | None = None) -> np.ndarray:
    """``phi(M)`` for a matrix with spectrum inside the contour, by resolvent quadrature.

    Positive growth orders use ``M^k (z^{-k} phi)(M)``.
    """
    contour = contour or ContourSpec()
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    k = positive_split(phi.s) if phi.s >= 0 else 0
    inner = phi.times_power(-k) if k else phi
    lam, w = contour.nodes(inner, core=100 * max(1.0, float(np.max(np.abs(np.linalg.eigvals(M))))))
    fv = _branch_check(inner, lam) * w
    I = np.eye(n)
    acc = np.zeros((n, n), dtype=complex)
    for l, c in zip(lam, fv):
        acc += c * np.linalg.solve(M - l * I, I)
    out = acc * (-1 / (2j * np.pi))
    return np.linalg.matrix_power(M, k) @ out if k else out


def spectral_function(phi: HoloFunction, M: np.ndarray) -> np.ndarray:
    """``phi(M)`` for a Hermitian matrix through its eigendecomposition."""
    ev, V = np.linalg.eigh(0.5 * (M + M.conj().T))
    return (V * phi(ev.astype(complex))) @ V.conj().T
