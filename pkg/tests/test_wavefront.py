import numpy as np
import pytest

from weylcalc.lie import abelian, heisenberg3
from weylcalc.poisson import Bicharacteristic
from weylcalc.poly import PolySymbol
from weylcalc.representations import AbelianRegular, GridVector, HeisenbergSchrodinger, standard_vector
from weylcalc.wavefront import (EmptyFamilyError, NoWitnessError, TestSymbol, apply_symbol, bump_family,
                                coadjoint, contained, default_grid, estimate_wf, grid_step, howe_wf,
                                propagation_experiment, restriction_experiment, wf_decomposition_check)


@pytest.fixture(scope="module")
def B():
    return AbelianRegular(1, 4096)


@pytest.fixture(scope="module")
def H():
    return HeisenbergSchrodinger(128)


def mask(backend, kind, **kw):
    return estimate_wf(backend, standard_vector(backend, kind), **kw).cone.mask()


def test_abelian_examples(B):
    assert not mask(B, "gaussian").any()
    assert mask(B, "delta").all()
    assert mask(B, "sign").all()
    # default: smooth on the negative side, singular along +1
    dirs = default_grid(B)
    m = mask(B, "mollified-delta", dirs=dirs)
    assert dirs[m].tolist() == [[1.0]]
    m2 = estimate_wf(B, standard_vector(B, "mollified-delta", smooth_side=1)).cone.mask()
    assert (m2 != m).all()


def test_layer_in_the_plane():
    B2 = AbelianRegular(2, 256)
    rep = estimate_wf(B2, standard_vector(B2, "layer"))
    members = rep.cone.members
    assert len(members) > 0
    # a layer across x1 is singular only along +-e1
    assert np.all(np.abs(members[:, 0]) > np.cos(2 * grid_step(rep.cone.directions)))


def test_witnesses_recorded(B):
    rep = estimate_wf(B, standard_vector(B, "gaussian"))
    assert set(rep.witnesses) == {0, 1}
    assert all(w["slope"] <= -B.rapid_slope for w in rep.witnesses.values())
    js = rep.to_json()
    assert js["flags"] == ["out", "out"]


def test_empty_family(B):
    with pytest.raises(EmptyFamilyError):
        estimate_wf(B, standard_vector(B, "delta"), test_family=[])
    with pytest.raises(EmptyFamilyError):
        howe_wf(B, [standard_vector(B, "delta")], test_family=[])


@pytest.mark.parametrize("kind", ["delta", "sign", "mollified-delta", "gaussian"])
def test_sobolev_monotone(B, kind):
    u = standard_vector(B, kind)
    dirs = default_grid(B)
    ladder = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0]
    rep = estimate_wf(B, u, s_ladder=ladder)
    cones = [rep.s_ladder[s] for s in ladder] + [rep.cone]
    assert all(contained(a, b, dirs) for a, b in zip(cones, cones[1:]))


def test_sobolev_levels_of_delta(B):
    # the delta lies in H^s exactly for s < -1/2
    rep = estimate_wf(B, standard_vector(B, "delta"), s_ladder=[-1.0, 0.0])
    assert not rep.s_ladder[-1.0].mask().any()
    assert rep.s_ladder[0.0].mask().all()


def test_sign_sobolev_level(B):
    rep = estimate_wf(B, standard_vector(B, "sign"), s_ladder=[-0.5, 1.0])
    assert not rep.s_ladder[-0.5].mask().any()
    assert rep.s_ladder[1.0].mask().all()


@pytest.mark.parametrize("kind", ["delta", "mollified-delta", "sign"])
def test_elliptic_invariance(B, kind):
    u = standard_vector(B, kind)
    dirs = default_grid(B)
    e = lambda xi: 2 + xi[..., 0] / np.sqrt(1 + xi[..., 0] ** 2)
    a, b = estimate_wf(B, u), estimate_wf(B, apply_symbol(B, e, u))
    assert contained(a, b, dirs) and contained(b, a, dirs)


def test_cutoff_shrinks(B):
    u = standard_vector(B, "delta")
    cut = TestSymbol("cut", np.array([1.0]), np.pi / 4)
    m = estimate_wf(B, apply_symbol(B, cut, u)).cone.mask()
    dirs = default_grid(B)
    assert m[dirs[:, 0] > 0].all() and not m[dirs[:, 0] < 0].any()


def test_decomposition(B):
    u = standard_vector(B, "mollified-delta")
    dirs = default_grid(B)
    smooth = dirs[~estimate_wf(B, u).cone.mask()][0]
    dec = wf_decomposition_check(B, u, smooth, 0.0)
    assert dec.report["pass"]
    assert np.allclose(dec.u1.coefficients + dec.u2.coefficients, u.coefficients)
    with pytest.raises(NoWitnessError):
        wf_decomposition_check(B, u, -smooth, 0.0)


def test_howe_abelian(B):
    # the frame of a delta and a gaussian sees every direction
    frame = [standard_vector(B, "delta"), standard_vector(B, "gaussian")]
    assert howe_wf(B, frame).mask().all()
    assert not howe_wf(B, [standard_vector(B, "gaussian")]).mask().any()
    with pytest.raises(ValueError):
        howe_wf(B, [])


def test_wf_within_minus_howe(B):
    frame = [standard_vector(B, k) for k in ("delta", "sign", "gaussian")]
    hw = howe_wf(B, frame)
    dirs = default_grid(B)
    minus = type(hw)(-dirs, hw.flags)
    for u in frame:
        assert contained(estimate_wf(B, u), minus, dirs)


def test_coherent_ray_single_direction():
    H = HeisenbergSchrodinger(256)
    dirs = default_grid(H)
    u = standard_vector(H, "coherent-ray", angle=0.0)
    rep = estimate_wf(H, u)
    m = rep.cone.mask()
    assert m.any() and not rep.cone.notes["truncation_dominated"]
    assert np.all(dirs[m] @ np.array([1.0, 0, 0]) > np.cos(2 * grid_step(dirs)))


def test_coadjoint_fixes_centre():
    A = heisenberg3()
    M = coadjoint(A, [0.3, -0.7, 0.2])
    # linear functionals vanishing on the centre are fixed; xi3 is sheared
    assert np.allclose(M[:, :2], np.eye(3)[:, :2])
    assert M[2, 2] == pytest.approx(1.0) and not np.allclose(M[:2, 2], 0)
    assert np.allclose(M @ coadjoint(A, [-0.3, 0.7, -0.2]), np.eye(3))
    assert np.allclose(coadjoint(abelian(3), [1, 2, 3]), np.eye(3))


def test_restriction_hermite_vacuous(H):
    out = restriction_experiment(H, [[1.0, 0.0, 0.0]], H.hermite(0), H.hermite(1), k_max=2)
    assert out["part1"]["status"] in ("vacuous", "pass")
    assert out["part2"]["status"] in ("vacuous", "pass", "inconclusive")


def test_restriction_flat_inconclusive(H):
    flat = GridVector(H, np.ones(H.N), "distribution", "flat")
    out = restriction_experiment(H, [[1.0, 0.0, 0.0]], flat, k_max=2)
    assert not out["part1"]["resolved"] and out["part1"]["status"] == "inconclusive"
    assert "part2" not in out


def test_propagation_abelian_static(B):
    rep = propagation_experiment(B, abelian(1), PolySymbol.parse("xi1^2", 1),
                                 standard_vector(B, "mollified-delta"), 0.7)
    assert rep["flags_t0"] == rep["flags_t1"] and rep["invariant"]


def test_propagation_argument_checks(B):
    u = standard_vector(B, "delta")
    a = PolySymbol.parse("xi1^2", 1)
    with pytest.raises(ValueError):
        propagation_experiment(B, abelian(1), a, u, 1.0, delta=0.5)
    with pytest.raises(ValueError):
        propagation_experiment(B, abelian(1), a, u, 1.0, p=PolySymbol.parse("-i*xi1^2", 1))
    gamma = Bicharacteristic(np.zeros(1), np.ones((1, 1)), a, null=False)
    with pytest.raises(ValueError):
        propagation_experiment(B, abelian(1), a, u, 1.0, gamma=gamma)


def test_bump_family_shapes():
    dirs = default_grid(HeisenbergSchrodinger(16))
    fam = bump_family(dirs)
    assert fam[-1].center is None and len(fam) == len(dirs) + 1
    xi = np.array([[5.0, 0, 0], [-5.0, 0, 0], [0.2, 0, 0]])
    assert np.allclose(fam[0](xi[:2] if dirs[0, 0] > 0 else -xi[:2]), [1, 0])
    assert fam[0](xi[2:] * np.sign(dirs[0, 0]))[0] == 0
