from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weylcalc.holo import HoloFunction, holo_matrix, spectral_function
from weylcalc.lie import abelian, heisenberg3
from weylcalc.poly import PolySymbol, random_poly
from weylcalc.representations import (AbelianRegular, GridVector, HeisenbergSchrodinger, TruncationDominatedError,
                                      backend_from_json, garding_check, homomorphism_defect, ladder,
                                      smooth_decay_test, sobolev_continuity_norm, sobolev_norm, standard_vector)
from weylcalc.star import sharp
from weylcalc.symbols import directions, radial_ladder

seeds = st.integers(0, 2 ** 32 - 1)


@pytest.fixture(scope="module")
def H():
    return HeisenbergSchrodinger(64)


@pytest.fixture(scope="module")
def B():
    return AbelianRegular(1, 4096)


def xi(i):
    return PolySymbol.variable(3, i)


# -- quantization -----------------------------------------------------------------------------
def test_abelian_multiplier(B):
    p = PolySymbol.parse("1 + 2*xi1 + xi1^3", 1)
    M = B.quantize(p)
    assert np.allclose(M.values, p(B.freq_points))


def test_linear_symbols(H):
    Q, P = ladder(64)
    blk = H.interior(1)
    assert np.allclose(H.quantize(xi(0))[blk, blk], Q[blk, blk])
    assert np.allclose(H.quantize(xi(1))[blk, blk], P[blk, blk])
    assert np.allclose(H.quantize(xi(2))[blk, blk], np.eye(64)[blk, blk])
    C = H.quantize(xi(0)) @ H.quantize(xi(1)) - H.quantize(xi(1)) @ H.quantize(xi(0))
    assert np.max(np.abs(C[blk, blk] - 1j * np.eye(64)[blk, blk])) < 1e-12


def test_oscillator_spectrum(H):
    blk = H.interior(2)
    A = H.quantize(PolySymbol.parse("xi1^2 + xi2^2", 3))[blk, blk]
    assert np.allclose(np.linalg.eigvalsh(A)[:10], 2 * np.arange(10) + 1, atol=1e-9)


def test_commutator_symbol(H):
    blk = H.interior(2)
    D = H.quantize(sharp(heisenberg3(), xi(0), xi(1))) - H.quantize(xi(0)) @ H.quantize(xi(1))
    assert np.max(np.abs(D[blk, blk])) < 1e-12


@settings(max_examples=15, deadline=None)
@given(seeds, seeds)
def test_homomorphism_heisenberg(s1, s2):
    rng = np.random.default_rng([s1, s2])
    p, q = random_poly(rng, 3, 4), random_poly(rng, 3, 4)
    assert homomorphism_defect(HeisenbergSchrodinger(64), heisenberg3(), p, q) < 1e-10


@settings(max_examples=15, deadline=None)
@given(seeds, seeds)
def test_homomorphism_abelian(s1, s2):
    rng = np.random.default_rng([s1, s2])
    p, q = random_poly(rng, 1, 3), random_poly(rng, 1, 3)
    assert homomorphism_defect(AbelianRegular(1, 1024), abelian(1), p, q) <= 1e-10


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_real_symbols_self_adjoint(seed):
    p = random_poly(np.random.default_rng(seed), 3, 3, complex_coeffs=False)
    H = HeisenbergSchrodinger(64)
    blk = H.interior(p.degree)
    A = H.quantize(p)[blk, blk]
    assert np.max(np.abs(A - A.conj().T)) <= 1e-10 * max(1, np.max(np.abs(A)))


def test_truncation_guard():
    with pytest.raises(TruncationDominatedError):
        HeisenbergSchrodinger(8).interior(5)


def test_grid_kernel_matches_polynomial(H):
    p = PolySymbol.parse("xi1^2 + xi1*xi2 + 3", 3)
    blk = H.interior(2)
    K = H.quantize_symbol(lambda x: p(x), cut=False)
    assert np.max(np.abs(K[blk, blk] - H.quantize(p)[blk, blk])[:20, :20]) < 1e-8


def test_concurrent_cache(H):
    syms = [PolySymbol.parse(f"xi1^2 + {k}*xi2", 3) for k in range(6)] * 4
    with ThreadPoolExecutor(8) as pool:
        mats = list(pool.map(H.quantize, syms))
    for s, m in zip(syms, mats):
        assert m is H.quantize(s)


@pytest.mark.parametrize("t", [0.3, 1.7])
def test_linear_flows_unitary(H, t):
    blk = H.interior(1)
    for a in ("xi1", "xi2", "xi1 + 2*xi2 - xi3"):
        U = H.flow(PolySymbol.parse(a, 3), t)
        v = np.zeros(64, complex)
        v[:blk.stop // 2] = np.random.default_rng(0).normal(size=blk.stop // 2)
        assert abs(np.linalg.norm(U @ v) - np.linalg.norm(v)) < 1e-10 * np.linalg.norm(v)


# -- Sobolev norms ----------------------------------------------------------------------------
def test_sobolev_zero_is_norm(H, B):
    u = GridVector(H, H.coherent(1.0, 0.5))
    assert sobolev_norm(H, u, 0) == pytest.approx(u.norm())
    w = standard_vector(B, "gaussian")
    assert sobolev_norm(B, w, 0) == pytest.approx(w.norm())


def test_sobolev_gaussian_closed_form():
    B = AbelianRegular(1, 4096, extent=20.0)
    u = B.vector(lambda x: np.exp(-x[..., 0] ** 2 / 2), "smooth")
    # int (1+k^2)^2 e^{-k^2} dk / int e^{-k^2} dk = 1 + 1 + 3/4
    assert sobolev_norm(B, u, 2) ** 2 / u.norm() ** 2 == pytest.approx(2.75, abs=1e-8)


@pytest.mark.parametrize("k", [0, 3, 10])
@pytest.mark.parametrize("s", [-1.0, 0.5, 2.0])
def test_sobolev_hermite(H, k, s):
    assert sobolev_norm(H, H.hermite(k), s) == pytest.approx((2 * k + 3) ** (s / 2))


@given(st.floats(-2, 2), st.floats(0, 2))
def test_sobolev_monotone(s, ds):
    H = HeisenbergSchrodinger(64)
    u = GridVector(H, H.coherent(0.5, -0.3))
    assert sobolev_norm(H, u, s) <= sobolev_norm(H, u, s + ds) * (1 + 1e-12)
    if s >= 0:
        assert sobolev_norm(H, u, s) >= u.norm() * (1 - 1e-12)


@pytest.mark.parametrize("text", ["xi1^2", "xi1*xi2 + xi3", "xi1^2*xi2^2"])
def test_sobolev_continuity_stable(text):
    p = PolySymbol.parse(text, 3)
    a = sobolev_continuity_norm(HeisenbergSchrodinger(64), p, 0.5)
    b = sobolev_continuity_norm(HeisenbergSchrodinger(128), p, 0.5)
    assert np.isfinite(a) and abs(a - b) / max(a, b) < 0.10


def test_fractional_powers_of_L(H):
    L = PolySymbol.parse("1 + xi1^2 + xi2^2 + xi3^2", 3)
    blk = H.interior(2)
    M = H.quantize(L)[blk, blk]
    for s in (-1, -0.5, 0.5, 1):
        phi = HoloFunction.power(s / 2)
        assert np.max(np.abs(holo_matrix(phi, M) - spectral_function(phi, M))) < 1e-6


# -- decay tests ------------------------------------------------------------------------------
def test_decay_abelian_examples(B):
    d, r = directions(1), radial_ladder(10)
    assert smooth_decay_test(B, standard_vector(B, "gaussian"), d, r).flags == ["out", "out"]
    assert smooth_decay_test(B, standard_vector(B, "delta"), d, r).flags == ["in", "in"]
    sign = smooth_decay_test(B, standard_vector(B, "sign"), d, r)
    assert sign.flags == ["in", "in"] and np.allclose(sign.slopes, -1, atol=0.1)


def test_decay_hermite_smooth():
    H = HeisenbergSchrodinger(256)
    est = smooth_decay_test(H, H.hermite(2), directions(3, 8), radial_ladder(4))
    assert est.is_empty()


def test_decay_flags_tail_mass(H):
    u = GridVector(H, np.ones(64, complex), "distribution")
    est = smooth_decay_test(H, u, directions(3, 4), radial_ladder(3))
    assert est.notes["truncation_dominated"]


# -- Garding ---------------------------------------------------------------------------------
def test_garding_abelian(B):
    r = garding_check(B, PolySymbol.parse("xi1^2 * (xi1 - 2)^2", 1))
    assert r["min_eig"] >= 0 and r["C"] == 0 and r["pass"]


def test_garding_oscillator(H):
    r = garding_check(H, PolySymbol.parse("xi1^2 + xi2^2", 3))
    assert r["min_eig"] == pytest.approx(1.0) and r["C"] == 0


def test_garding_quartic():
    p = PolySymbol.parse("xi1^2*xi2^2", 3)
    a, b = garding_check(HeisenbergSchrodinger(64), p), garding_check(HeisenbergSchrodinger(128), p)
    assert a["min_eig"] < 0 and b["min_eig"] < 0
    assert abs(a["C"] - b["C"]) / max(a["C"], b["C"]) < 0.10
    assert a["pass"] and b["pass"]


# -- serialization ----------------------------------------------------------------------------
def test_backend_json_roundtrip(H, B):
    for be in (H, B):
        assert backend_from_json(be.to_json()).to_json() == be.to_json()
    with pytest.raises(ValueError):
        backend_from_json({"variant": "lorentz"})


def test_vector_csv_roundtrip(H):
    u = GridVector(H, H.coherent(0.3, 0.2))
    v = GridVector.from_csv(H, u.to_csv())
    assert np.allclose(v.coefficients, u.coefficients)


def test_quartic_is_shifted_square():
    # Op(xi1^2 xi2^2) = Op(xi1 xi2)^2 - 1/4, so its truncated minima decrease towards -1/4
    mins = []
    for N in (32, 64, 128):
        H = HeisenbergSchrodinger(N)
        blk = H.interior(2)
        M = H.quantize(PolySymbol.parse("xi1^2*xi2^2", 3))
        A = H.quantize(xi(0) * xi(1))
        assert np.max(np.abs((M - A @ A)[blk, blk] + 0.25 * np.eye(blk.stop))) < 1e-10
        mins.append(garding_check(H, PolySymbol.parse("xi1^2*xi2^2", 3))["min_eig"])
    assert -0.25 < mins[2] < mins[1] < mins[0] < 0
