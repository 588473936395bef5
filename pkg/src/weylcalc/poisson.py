"""Linear Poisson structure on g*, Hamiltonian flows and the transport equation."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence

import numpy as np
import sympy

from .lie import LieAlgebra
from .poly import PolySymbol, monomials_upto
from .star import poisson_bracket

NULL_TOL = 1e-9


class BlowUpError(RuntimeError):
    """Trajectory left the configured ball; ``partial`` holds what was computed."""

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


class RadialFieldError(ValueError):
    pass


class FlowError(RuntimeError):
    pass


def hamiltonian_field(A: LieAlgebra, a: PolySymbol) -> List[PolySymbol]:
    """Components ``H_a(xi)_k = {a, xi_k}(xi)``."""
    return [poisson_bracket(A, a, PolySymbol.variable(A.dim, k)) for k in range(A.dim)]


def apply_field(H: Sequence[PolySymbol], f: PolySymbol) -> PolySymbol:
    """Derivative of ``f`` along the polynomial vector field ``H``."""
    out = PolySymbol(f.nvars)
    for k, h in enumerate(H):
        out = out + h * f.diff(k)
    return out


def casimirs(A: LieAlgebra, max_degree: int = 2) -> List[PolySymbol]:
    """Basis of nonconstant polynomial Casimirs of degree ``<= max_degree``.

    Solves the exact linear system ``{C, xi_k} = 0`` for all ``k``.
    """
    n = A.dim
    monos = [m for m in monomials_upto(n, max_degree) if sum(m) > 0]
    images = []
    rows_index: Dict[tuple, int] = {}
    for m in monos:
        pm = PolySymbol(n, {m: 1})
        col = {}
        for k in range(n):
            b = poisson_bracket(A, pm, PolySymbol.variable(n, k))
            for mono, c in b.terms.items():
                key = (k, mono)
                if key not in rows_index:
                    rows_index[key] = len(rows_index)
                col[rows_index[key]] = sympy.Rational(int(c.x.numerator), int(c.x.denominator)) + \
                    sympy.I * sympy.Rational(int(c.y.numerator), int(c.y.denominator))
        images.append(col)
    if not rows_index:
        return [PolySymbol(n, {m: 1}) for m in monos]
    M = sympy.zeros(len(rows_index), len(monos))
    for j, col in enumerate(images):
        for i, v in col.items():
            M[i, j] = v
    out = []
    for vec in M.nullspace():
        terms = {}
        for j, v in enumerate(vec):
            if v != 0:
                re, im = sympy.re(v), sympy.im(v)
                terms[monos[j]] = (_frac(re), _frac(im))
        out.append(PolySymbol(n, terms))
    return out


def _frac(v):
    from fractions import Fraction
    num, den = sympy.fraction(sympy.nsimplify(v))
    return Fraction(int(num), int(den))


@dataclass
class Bicharacteristic:
    """Stored integral curve of ``H_a`` with conserved-quantity records."""

    times: np.ndarray
    points: np.ndarray
    hamiltonian: PolySymbol
    conserved: Dict[str, np.ndarray] = field(default_factory=dict)
    null: bool = False
    status: str = "ok"

    def drift(self, name: str) -> float:
        v = self.conserved[name]
        return float(np.max(np.abs(v - v[0])))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.points.shape[1]
        names = sorted(k for k in self.conserved if k != "a")
        w.writerow(["t"] + [f"xi{i + 1}" for i in range(n)] + ["a"] + names)
        for r in range(len(self.times)):
            w.writerow([repr(float(self.times[r]))] + [repr(float(v)) for v in self.points[r]]
                       + [repr(float(self.conserved["a"][r]))] + [repr(float(self.conserved[k][r])) for k in names])
        return buf.getvalue()


def _field_function(H: Sequence[PolySymbol]) -> Callable:
    comps = [h.compile() for h in H]

    def F(xi):
        return np.stack([np.real(c(xi)) * np.ones(np.shape(xi)[:-1]) for c in comps], axis=-1)
    return F


def rk4(F: Callable, x0: np.ndarray, t0: float, t1: float, h: float, bound: float = np.inf,
        stride: int = 1):
    """Fixed-step classical RK4 from ``t0`` to ``t1``; returns stored times and states."""
    nsteps = int(round(abs(t1 - t0) / h))
    if nsteps == 0:
        return np.array([t0]), np.asarray(x0, dtype=float)[None, ...]
    hh = (t1 - t0) / nsteps
    x = np.asarray(x0, dtype=float).copy()
    ts, xs = [t0], [x.copy()]
    for s in range(1, nsteps + 1):
        k1 = F(x)
        k2 = F(x + 0.5 * hh * k1)
        k3 = F(x + 0.5 * hh * k2)
        k4 = F(x + hh * k3)
        x = x + hh / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)) or np.max(np.linalg.norm(np.atleast_2d(x), axis=-1)) > bound:
            ts.append(t0 + s * hh)
            xs.append(x.copy())
            raise BlowUpError(f"trajectory exceeded the bound {bound} at t={t0 + s * hh}",
                              (np.array(ts), np.array(xs)))
        if s % stride == 0 or s == nsteps:
            ts.append(t0 + s * hh)
            xs.append(x.copy())
    return np.array(ts), np.array(xs)


def integrate_bicharacteristic(A: LieAlgebra, a: PolySymbol, xi0, t_span=(0.0, 1.0), step: float = 1e-3,
                               casimir_list: Sequence[PolySymbol] | None = None, bound: float = 1e6,
                               null_tol: float = NULL_TOL, stride: int = 1) -> Bicharacteristic:
    """Integrate ``d xi/dt = H_a(xi)`` with fixed-step RK4.

    Records ``a`` and the Casimirs along the curve.  If the trajectory leaves
    the ball of radius ``bound`` the returned curve is partial and has status
    ``"blowup"``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    H = hamiltonian_field(A, a)
    F = _field_function(H)
    xi0 = np.asarray(xi0, dtype=float)
    status = "ok"
    try:
        ts, xs = rk4(F, xi0, float(t_span[0]), float(t_span[1]), step, bound, stride)
    except BlowUpError as exc:
        ts, xs = exc.partial
        status = "blowup"
    if casimir_list is None:
        casimir_list = casimirs(A, 2)
    aval = np.real(a.compile()(xs))
    conserved = {"a": aval}
    for i, c in enumerate(casimir_list):
        conserved[f"C{i + 1}"] = np.real(c.compile()(xs))
    null = bool(abs(aval[0]) < null_tol)
    return Bicharacteristic(ts, xs, a, conserved, null, status)


# -- transport equation ------------------------------------------------------------------
@dataclass
class TransportSolution:
    """Characteristic solution of ``H_a c = g`` with ``c = 0`` on a section."""

    directions: np.ndarray
    values: np.ndarray
    degree: float
    evaluate: Callable
    field: Callable
    window: dict

    def residual(self, g: Callable, delta: float = 1e-3, exclude: np.ndarray | None = None) -> np.ndarray:
        """``|H_a c - g|`` on the stored directions by a centred difference along ``H_a``."""
        out = np.zeros(len(self.directions))
        for i, d in enumerate(self.directions):
            if exclude is not None and exclude[i]:
                out[i] = np.nan
                continue
            v = self.field(d)
            cp = self.evaluate(d + delta * v)
            cm = self.evaluate(d - delta * v)
            out[i] = abs((cp - cm) / (2 * delta) - g(d))
        return out


def transport_solve(A: LieAlgebra, a: PolySymbol, g: Callable, omega_normal, omega_side, s: float = 0.0,
                    dirs=None, step: float = 1e-3, t_max: float = 50.0, radial_tol: float = 1e-8):
    """Solve ``H_a c = g`` along bicharacteristics with ``c = 0`` on Omega.

    Parameters
    ----------
    g : callable
        Source term evaluated on points of shape ``(..., n)``; ``g = 0`` is
        detected on the sample and returns ``c = 0`` directly.
    omega_normal, omega_side : vectors
        ``Omega = {<omega_normal, xi> = 0, <omega_side, xi> > 0}``, a half
        hyperplane transverse to the flow.
    s : float
        Homogeneity degree used to extend ``c`` off the unit sphere.

    Raises
    ------
    RadialFieldError
        If ``H_a`` is radial (or zero) at a sampled direction.
    FlowError
        If a backward characteristic does not reach Omega within ``t_max``.
    """
    H = hamiltonian_field(A, a)
    F = _field_function(H)
    nrm = np.asarray(omega_normal, dtype=float)
    side = np.asarray(omega_side, dtype=float)
    dirs = np.asarray(dirs, dtype=float)
    for d in dirs:
        v = F(d)
        dn = d / np.linalg.norm(d)
        tang = v - (v @ dn) * dn
        if np.linalg.norm(tang) <= radial_tol * max(1.0, np.linalg.norm(v)):
            raise RadialFieldError(f"H_a is radial at direction {d}")

    gvals = np.asarray(g(dirs))
    if np.all(gvals == 0):
        zero = lambda xi: 0.0
        return TransportSolution(dirs, np.zeros(len(dirs)), s, zero, F,
                                 {"step": step, "t_max": t_max})

    def G(state):
        xi = state[:-1]
        return np.concatenate([-F(xi), [float(np.real(g(xi)))]])

    def on_sphere(xi):
        r = np.linalg.norm(xi)
        state = np.concatenate([xi / r, [0.0]])
        ell = nrm @ state[:-1]
        t = 0.0
        if abs(ell) < 1e-14 and side @ state[:-1] > 0:
            return 0.0
        while t < t_max:
            new = _rk4_step(G, state, step)
            ell_new = nrm @ new[:-1]
            if (ell_new == 0 or np.sign(ell_new) != np.sign(ell)) and side @ new[:-1] > 0:
                return _refine_crossing(G, state, step, nrm)[-1]
            state, ell, t = new, ell_new, t + step
        raise FlowError(f"characteristic from {xi} does not reach Omega within t={t_max}")

    def evaluate(xi):
        xi = np.asarray(xi, dtype=float)
        r = np.linalg.norm(xi)
        return r ** s * on_sphere(xi)

    values = np.array([evaluate(d) for d in dirs])
    return TransportSolution(dirs, values, s, evaluate, F, {"step": step, "t_max": t_max})


def _rk4_step(G, x, h):
    k1 = G(x)
    k2 = G(x + 0.5 * h * k1)
    k3 = G(x + 0.5 * h * k2)
    k4 = G(x + h * k3)
    return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _refine_crossing(G, state, h, nrm, iters: int = 40):
    """Secant search for the fraction of a step at which ``<nrm, xi>`` vanishes."""
    ell0 = nrm @ state[:-1]
    lo, hi = 0.0, h
    f_lo, f_hi = ell0, nrm @ _rk4_step(G, state, h)[:-1]
    for _ in range(iters):
        if f_hi == f_lo:
            break
        mid = hi - f_hi * (hi - lo) / (f_hi - f_lo)
        mid = min(max(mid, 0.0), h)
        f_mid = nrm @ _rk4_step(G, state, mid)[:-1]
        if abs(f_mid) < 1e-15:
            hi = mid
            break
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return _rk4_step(G, state, hi)
