import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weylcalc.holo import (ContourError, ContourSpec, HoloFunction, certify_order, deformation_check,
                           group_property_check, holo_any, holo_apply, holo_apply_positive, holo_matrix,
                           holo_symbol, multiplicativity_check, parse_phi, positive_split, residue_power,
                           scaling_check, spectral_function)
from weylcalc.lie import abelian, heisenberg3
from weylcalc.parametrix import Sector, neumann_parametrix
from weylcalc.poly import PolySymbol
from weylcalc.symbols import directions, radial_ladder

P1 = PolySymbol.parse("1 + xi1^2", 1)
L3 = PolySymbol.parse("1 + xi1^2 + xi2^2 + xi3^2", 3)
XI = np.linspace(-10, 10, 201)[:, None]
EXACT = 1 + XI[:, 0] ** 2


@pytest.fixture(scope="module")
def R1():
    return neumann_parametrix(abelian(1), P1)


@pytest.mark.parametrize("s", [-0.5, -1.5, 0.5, 1.0, 1.5])
def test_powers_match_closed_form(R1, s):
    got = holo_any(HoloFunction.power(s), R1, XI)
    assert np.max(np.abs(got - EXACT ** s) / EXACT ** s) < 1e-6


def test_minus_one_is_resolvent_at_zero(R1):
    got = holo_apply(HoloFunction.power(-1), R1, XI, method="contour")
    assert np.max(np.abs(got - R1.evaluator(0.0, XI))) < 1e-8


def test_zero_function(R1):
    assert np.all(holo_any(HoloFunction.zero(), R1, XI) == 0)


def test_identity_function(R1):
    assert np.max(np.abs(holo_apply_positive(HoloFunction.power(1), R1, XI) - EXACT)) < 1e-8


@pytest.mark.parametrize("k", [1, 2, 3])
def test_residue_identity(R1, k):
    assert np.max(np.abs(residue_power(R1, k, XI, 0.25) * EXACT ** k - 1)) < 1e-8


def test_positive_split():
    assert positive_split(0.5) == 1 and positive_split(1.0) == 2 and positive_split(0) == 1


def test_negative_branch_rejects_growth(R1):
    with pytest.raises(ValueError):
        holo_apply(HoloFunction.power(0.5), R1, XI)


def test_contour_must_sit_in_sector():
    R = neumann_parametrix(abelian(1), P1, sector=Sector(-0.9 * np.pi, 0.9 * np.pi, 0.5))
    with pytest.raises(ContourError):
        holo_apply(HoloFunction.power(-0.5), R, XI, ContourSpec())


def test_parse_phi():
    f = parse_phi("z^(-1/2) * exp(-z)", -0.5)
    z = np.array([2.0 + 0j])
    assert f(z)[0] == pytest.approx(2 ** -0.5 * np.exp(-2))
    with pytest.raises(Exception):
        parse_phi("__import__('os')", 0)


def test_group_property(R1):
    r = group_property_check(0.5, -0.25, R1, directions(1), radial_ladder(10))
    assert r["max_slope"] <= -8


def test_multiplicativity_abelian(R1):
    r = multiplicativity_check(HoloFunction.power(-1), HoloFunction.power(-1), R1, directions(1), radial_ladder(10))
    assert r["pass"]
    unit = multiplicativity_check(HoloFunction.power(-1), parse_phi("1", 0), R1, directions(1), radial_ladder(10))
    assert unit["max_abs"] < 1e-8


def test_multiplicativity_heisenberg():
    R = neumann_parametrix(heisenberg3(), L3)
    r = multiplicativity_check(HoloFunction.power(-1), HoloFunction.power(-1), R, directions(3, 6), radial_ladder(8))
    assert r["max_slope"] <= -6


def test_deformation_invariance(R1):
    assert deformation_check(HoloFunction.power(-0.5), R1, XI) < 1e-8


@pytest.mark.parametrize("t", [2.0, 4.0])
def test_scaling_covariance(R1, t):
    assert scaling_check(HoloFunction.power(-0.5), R1, XI, t, 2) < 1e-8


@pytest.mark.parametrize("s", [-0.5, -0.25, 0.5])
def test_order_certification(R1, s):
    S = holo_symbol(HoloFunction.power(s), R1, directions(1), radial_ladder(10), m=2)
    assert certify_order(S)["pass"]


@settings(max_examples=10, deadline=None)
@given(st.floats(-1.9, -0.1), st.floats(-1.9, -0.1))
def test_product_of_powers(a, b):
    R1 = neumann_parametrix(abelian(1), P1)
    x = np.linspace(-5, 5, 21)[:, None]
    lhs = holo_any(HoloFunction.power(a), R1, x) * holo_any(HoloFunction.power(b), R1, x)
    rhs = holo_any(HoloFunction.power(a + b), R1, x)
    assert np.max(np.abs(lhs - rhs) / np.abs(rhs)) < 1e-6


def test_matrix_power_matches_spectral():
    rng = np.random.default_rng(0)
    Q = np.linalg.qr(rng.normal(size=(12, 12)))[0]
    M = Q @ np.diag(np.linspace(1, 40, 12)) @ Q.T
    for s in (-1, -0.5, 0.5, 1):
        phi = HoloFunction.power(s)
        assert np.max(np.abs(holo_matrix(phi, M) - spectral_function(phi, M))) < 1e-8 * max(1, 40 ** s)
