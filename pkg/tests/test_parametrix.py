import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weylcalc.lie import abelian, heisenberg3
from weylcalc.parametrix import (Sector, SectorCollisionError, dbar_residual, first_parametrix, is_elliptic,
                                 joint_order, lambda_weight, neumann_parametrix, resolvent_identity_defect)
from weylcalc.poly import PolySymbol
from weylcalc.symbols import directions, radial_ladder

L3 = PolySymbol.parse("1 + xi1^2 + xi2^2 + xi3^2", 3)
P1 = PolySymbol.parse("1 + xi1^2", 1)
XI = np.linspace(-10, 10, 201)[:, None]


def test_ellipticity_certificates():
    c = is_elliptic(L3, 2)
    assert c.elliptic and c.C1 == pytest.approx(1) and c.C2 == pytest.approx(1)
    bad = is_elliptic(PolySymbol.parse("xi1", 2), 1)
    assert not bad.elliptic
    assert np.allclose(np.abs(bad.failing_direction), [0, 1], atol=1e-12)
    quart = is_elliptic(PolySymbol.parse("(xi1^2 + xi2^2)^2 + 1", 2), 4, R=2)
    assert quart.elliptic and quart.C1 >= 0.25


def test_lambda_weight_values():
    assert lambda_weight(np.zeros((1, 3)), 0, 2)[0] == 1
    xi = np.array([[1.0, 2.0, 0.0]])
    assert lambda_weight(xi, -3.0, 2)[0] ** 2 == pytest.approx(1 + 5 + 3)


@settings(max_examples=30)
@given(st.floats(0, 50), st.floats(0, 50), st.floats(0.5, 4))
def test_lambda_weight_monotone(a, b, d):
    lo, hi = min(a, b), max(a, b)
    xi = np.array([[1.0, 0.5]])
    assert lambda_weight(xi, -lo, d)[0] <= lambda_weight(xi, -hi, d)[0]
    assert lambda_weight(lo * xi, -1.0, d)[0] <= lambda_weight(hi * xi, -1.0, d)[0]


def test_encadrement_on_negative_ray():
    d = directions(3, 16)
    r = radial_ladder(8)
    pts = (r[:, None, None] * d[None]).reshape(-1, 3)
    ratios = []
    for lam in -(2.0 ** np.arange(0, 10)):
        ratios.append(np.abs(L3(pts) - lam) / lambda_weight(pts, lam, 2) ** 2)
    ratios = np.concatenate(ratios)
    assert ratios.min() >= 0.5 and ratios.max() <= 2


def test_first_parametrix_converges_in_Q():
    exact = 1 / (2 + XI[:, 0] ** 2)
    errs = [np.max(np.abs(first_parametrix(P1, Q_radius=Q)(-1.0, XI) - exact)) for Q in (1.0, 2.0, 4.0)]
    assert errs[0] > errs[1] > errs[2]


def test_first_parametrix_decays_like_inverse_lambda():
    q1 = first_parametrix(P1)
    lam = -(2.0 ** np.arange(2, 14))
    C = [np.max(np.abs(q1(l, XI))) * abs(l) for l in lam]
    assert max(C) <= 1.0 + 1e-12


def test_first_residual_order():
    R = neumann_parametrix(heisenberg3(), L3, N=1)
    orders, _ = joint_order(lambda lam, xi: R.residual_evaluator(lam, xi), directions(3, 9), 2.0)
    assert np.max(orders) <= -1 + 0.25


@pytest.mark.parametrize("side", ["left", "right"])
def test_neumann_residual_both_sides(side):
    R = neumann_parametrix(heisenberg3(), L3, N=2)
    orders, _ = joint_order(lambda lam, xi: R.residual_evaluator(lam, xi, side), directions(3, 9), 2.0)
    assert np.max(orders) <= -2 + 0.25


@pytest.mark.parametrize("N", [1, 2, 3])
def test_abelian_residual_every_order(N):
    R = neumann_parametrix(abelian(1), P1, N=N)
    orders, _ = joint_order(lambda lam, xi: R.residual_evaluator(lam, xi), directions(1), 2.0)
    assert np.max(orders) <= -N


def test_holomorphic_in_lambda():
    R = neumann_parametrix(heisenberg3(), L3, N=2)
    pts = 3 * directions(3, 9)
    for lam in (-1 + 0.5j, -4 - 2j, 20j):
        assert dbar_residual(R.evaluator, lam, pts) < 1e-6


def test_resolvent_identity():
    R = neumann_parametrix(heisenberg3(), L3, N=2)
    pts = radial_ladder(8)[:, None] * directions(3, 3)[0]
    q = R.evaluator(-1.0, pts)
    D = resolvent_identity_defect(R, -1.0, -3.0, pts)
    assert np.max(np.abs(D)) < 1e-10 * np.max(np.abs(q))


def test_sector_collision():
    # the range of -1 - xi1^2 runs along the negative axis, inside the sector
    with pytest.raises(SectorCollisionError):
        first_parametrix(PolySymbol.parse("-1 - xi1^2", 1), sector=Sector())
    with pytest.raises(ValueError):
        Sector(np.pi / 4, 3 * np.pi / 4, 0.5)


def test_auto_shift_reported():
    p = PolySymbol.parse("xi1^2", 1)
    R = neumann_parametrix(abelian(1), p, N=1)
    assert R.to_json()["shift"] > 0
