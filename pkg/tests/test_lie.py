import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm, logm

from weylcalc.lie import (DimensionError, abelian, bch_terms, builtin, from_json, heisenberg3,
                          load_algebra, so3)

small = st.floats(-1, 1, allow_nan=False)
vec3 = st.lists(small, min_size=3, max_size=3)
exact3 = st.lists(st.fractions(-3, 3, max_denominator=5), min_size=3, max_size=3)


def test_brackets_of_builtins():
    H, S = heisenberg3(), so3()
    assert H.bracket([1, 0, 0], [0, 1, 0]) == [0, 0, 1]
    assert S.bracket([1, 0, 0], [0, 1, 0]) == [0, 0, 1]
    assert S.bracket([0, 1, 0], [0, 0, 1]) == [1, 0, 0]


@pytest.mark.parametrize("name", ["heisenberg3", "so3", "abelian_1", "abelian_4"])
def test_jacobi_exact(name):
    assert builtin(name).jacobi_residual == 0


def test_nilpotency_steps():
    assert heisenberg3().nilpotency_step == 2
    assert abelian(3).nilpotency_step == 1
    assert so3().nilpotency_step is None


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        heisenberg3().bracket([1, 0], [0, 1, 0])


def test_bad_structure_rejected():
    # antisymmetric but violates Jacobi
    bad = {"dim": 3, "structure": [[0, 1, 2, 1], [0, 2, 0, 1]]}
    with pytest.raises(ValueError):
        from_json(bad)


def test_json_roundtrip(tmp_path):
    S = so3()
    path = tmp_path / "so3.json"
    path.write_text(json.dumps(S.to_json()))
    T = load_algebra(path)
    assert T.bracket([1, 0, 0], [0, 1, 0]) == S.bracket([1, 0, 0], [0, 1, 0])


@given(exact3, exact3)
def test_bracket_antisymmetric(x, y):
    for A in (heisenberg3(), so3()):
        assert A.bracket(x, x) == [0, 0, 0]
        assert A.bracket(x, y) == [-v for v in A.bracket(y, x)]


def test_bch_heisenberg_exact():
    z = heisenberg3().bch([1, 0, 0], [0, 1, 0])
    assert z == [1, 1, Fraction(1, 2)]


def test_bch_abelian():
    assert abelian(3).bch([1, 2, 3], [4, 5, 6], t=Fraction(1, 3)) == [5, 7, 9]


def test_bch_low_terms():
    x, y = [1, 2, 0], [0, 1, 3]
    A = so3()
    terms = bch_terms(A, x, y, 2)
    assert terms[0] == [a + b for a, b in zip(x, y)]
    assert terms[1] == [Fraction(1, 2) * v for v in A.bracket(x, y)]
    xxy = A.bracket(x, A.bracket(x, y))
    yyx = A.bracket(y, A.bracket(y, x))
    assert terms[2] == [Fraction(1, 12) * (a + b) for a, b in zip(xxy, yyx)]


def _mat(A, v):
    return sum(v[i] * A.ad(np.eye(A.dim)[i]) for i in range(A.dim))


def test_bch_so3_matrix_log():
    A = so3()
    x, y = np.array([0.05, -0.04, 0.03]), np.array([-0.02, 0.06, 0.01])
    Z = logm(expm(_mat(A, x)) @ expm(_mat(A, y))).real
    basis = np.stack([A.ad(np.eye(3)[i]).ravel() for i in range(3)], axis=1)
    z = np.linalg.lstsq(basis, Z.ravel(), rcond=None)[0]
    got = np.array(A.bch(x, y, order=4), dtype=float)
    assert np.max(np.abs(got - z)) < 1e-7


@given(exact3, exact3)
def test_bch_identities_nilpotent(x, y):
    H = heisenberg3()
    assert H.bch(x, [0, 0, 0]) == list(x)
    assert H.bch([0, 0, 0], y) == list(y)
    inv = H.bch([-v for v in y], [-v for v in x])
    assert H.bch(x, y) == [-v for v in inv]


@settings(max_examples=30)
@given(vec3, vec3)
def test_bch_inverse_law_so3(x, y):
    A = so3()
    x, y = 0.2 * np.array(x), 0.2 * np.array(y)
    a = np.array(A.bch(x, y, order=6), dtype=float)
    b = -np.array(A.bch(-y, -x, order=6), dtype=float)
    assert np.max(np.abs(a - b)) < 1e-12


@given(vec3)
def test_jacobian_trivial_cases(x):
    assert heisenberg3().jacobian_jg(x) == pytest.approx(1.0)
    assert abelian(3).jacobian_jg(x) == pytest.approx(1.0)


@pytest.mark.parametrize("theta", [0.1, 1.0, 2.5, 4.0, 7.0])
def test_jacobian_so3_closed_form(theta):
    got = so3().jacobian_jg([theta, 0, 0])
    assert got == pytest.approx((2 - 2 * np.cos(theta)) / theta ** 2, rel=1e-10, abs=1e-14)
    assert got >= 0


@settings(max_examples=30)
@given(vec3, st.floats(-np.pi, np.pi))
def test_jacobian_rotation_invariant(x, angle):
    # rotations of R^3 preserve the so(3) structure constants
    A = so3()
    c, s = np.cos(angle), np.sin(angle)
    R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    x = 2 * np.array(x)
    assert A.jacobian_jg(R @ x) == pytest.approx(A.jacobian_jg(x), rel=1e-9, abs=1e-12)
