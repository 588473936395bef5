import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weylcalc.lie import abelian, heisenberg3, so3
from weylcalc.poly import PolySymbol, random_poly
from weylcalc.star import (NotNilpotentError, ck_operator, ck_table_json, poisson_bracket, psi_k, sharp,
                           st_jacobian, st_map, stable_order)

seeds = st.integers(0, 2 ** 32 - 1)
I2 = (0, Fraction(1, 2))


def rp(seed, deg=3, n=3):
    return random_poly(np.random.default_rng(seed), n, deg)


def xi(i, n=3):
    return PolySymbol.variable(n, i)


def test_psi_abelian_vanishes():
    for k in (1, 2, 3):
        assert psi_k(abelian(2), k).is_zero()


def test_psi1_is_half_bracket_pairing():
    # variables are x1..x3, y1..y3, xi1..xi3
    expected = PolySymbol.parse("(0,-1/2)*xi1*xi5*xi9 + (0,1/2)*xi2*xi4*xi9", 9)
    assert psi_k(heisenberg3(), 1) == expected


def test_ck_structure():
    for A in (heisenberg3(), so3()):
        C0 = ck_operator(A, 0)
        assert len(C0.terms) == 1
        for k in (1, 2, 3):
            for alpha, beta, coeff in ck_operator(A, k).terms:
                assert sum(alpha) >= 1 and sum(beta) >= 1
                assert coeff.degree <= k


def test_abelian_ck_vanish():
    for k in (1, 2):
        assert not ck_operator(abelian(3), k).terms


@settings(max_examples=40, deadline=None)
@given(seeds, seeds)
def test_c0_c1_exact(s1, s2):
    p, q = rp(s1, 4), rp(s2, 4)
    for A in (heisenberg3(), so3()):
        assert ck_operator(A, 0)(p, q) == p * q
        assert ck_operator(A, 1)(p, q) == poisson_bracket(A, p, q) * I2


def test_heisenberg_commutator():
    H = heisenberg3()
    d = sharp(H, xi(0), xi(1)) - sharp(H, xi(1), xi(0))
    assert d == xi(2) * (0, 1)


@settings(max_examples=40, deadline=None)
@given(seeds, seeds)
def test_order_drop(s1, s2):
    p, q = rp(s1, 4), rp(s2, 4)
    for A in (heisenberg3(), so3()):
        for k in range(0, 4):
            c = ck_operator(A, k)(p, q)
            assert c.is_zero() or c.degree <= p.degree + q.degree - k


@settings(max_examples=40, deadline=None)
@given(seeds, seeds, st.integers(0, 4))
def test_hermitian_symmetry(s1, s2, N):
    p, q = rp(s1), rp(s2)
    for A in (heisenberg3(), so3()):
        assert sharp(A, p, q, N).conj() == sharp(A, q.conj(), p.conj(), N)


@given(seeds, st.integers(0, 4))
def test_unit(s, N):
    p = rp(s)
    one = PolySymbol.constant(3)
    for A in (heisenberg3(), so3()):
        assert sharp(A, one, p, N) == p and sharp(A, p, one, N) == p


@settings(max_examples=25, deadline=None)
@given(seeds, seeds, seeds)
def test_associative_heisenberg(s1, s2, s3):
    H = heisenberg3()
    p, q, r = rp(s1, 4), rp(s2, 4), rp(s3, 4)
    assert sharp(H, sharp(H, p, q), r) == sharp(H, p, sharp(H, q, r))


def test_oscillator_square_and_centre():
    H = heisenberg3()
    p = PolySymbol.parse("xi1^2 + xi2^2", 3)
    pp = sharp(H, p, p)
    # C1 vanishes since {p, p} = 0; the Moyal second-order term gives -xi3^2
    assert pp == p * p - xi(2) * xi(2)
    r = xi(2)
    assert sharp(H, sharp(H, p, p), r) == sharp(H, p, sharp(H, p, r))


@given(seeds, seeds)
def test_stabilization(s1, s2):
    H = heisenberg3()
    p, q = rp(s1), rp(s2)
    K = stable_order(H, p, q)
    assert sharp(H, p, q, K) == sharp(H, p, q, K + 3) == sharp(H, p, q)


def test_non_nilpotent_needs_truncation():
    with pytest.raises(NotNilpotentError):
        sharp(so3(), xi(0), xi(1))


def test_abelian_is_pointwise():
    A = abelian(2)
    p, q = rp(1, 3, 2), rp(2, 3, 2)
    for N in (0, 1, 3):
        assert sharp(A, p, q, N) == p * q


def test_st_map():
    H = heisenberg3()
    x, y = np.array([0.3, -0.2, 0.1]), np.array([0.5, 0.4, -0.3])
    a, b = st_map(H, 0, x, y)
    assert np.allclose(a, x) and np.allclose(b, y)
    assert st_jacobian(H, 0, x, y) == pytest.approx(1.0)
    a, b = st_map(abelian(3), 0.7, x, y)
    assert np.allclose(a, x) and np.allclose(b, y)
    assert st_jacobian(H, 1, x, y) == 1
    assert st_jacobian(abelian(3), 0.7, x, y) == pytest.approx(1.0)


def test_ck_table_export():
    d = json.loads(ck_table_json(heisenberg3(), 2))
    assert d["algebra"] and len(d["operators"]) == 3
