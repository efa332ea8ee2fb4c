import numpy as np
import pytest

from epcore import finder, linalg
from epcore.errors import BadFit, InvalidRegion
from epcore.family import MatrixFamily
from epcore.models import lipkin
from epcore.monodromy import (CCW_PATTERN, CW_PATTERN, LoopPath, encircle, exponent_fit,
                              start_gauge, track_loop, verify_cycle)
from epcore.twolevel import TwoLevelParams


@pytest.fixture(scope="module")
def dimer_ep():
    return finder.refine_ep(TwoLevelParams.canonical_dimer().family(), -0.9j)


@pytest.fixture(scope="module")
def lipkin2():
    fam = lipkin(2).blocks["even"]
    return fam, finder.refine_ep(fam, 0.9j)


def test_loop_validation():
    for kw in ({"radius": 0}, {"radius": 1, "orientation": "up"},
               {"radius": 1, "samples": 8}, {"radius": 1, "turns": 0}):
        with pytest.raises(InvalidRegion):
            LoopPath(0, **kw)


def test_loop_points_close():
    loop = LoopPath(1j, 0.5, "cw", samples=16, turns=2)
    pts = loop.points()
    assert len(pts) == 33 and pts[0] == pts[-1] == loop.start
    assert np.allclose(np.abs(pts - 1j), 0.5)
    # cw runs clockwise
    assert np.angle((pts[1] - 1j) / (pts[0] - 1j)) < 0


def test_loop_clearance():
    loop = LoopPath(-1j, 0.5)
    loop.check_clearance([-1j, 1j], enclosed=-1j)
    with pytest.raises(InvalidRegion):
        LoopPath(-1j, 1.2).check_clearance([-1j, 1j], enclosed=-1j)


def test_dimer_single_loop_swaps(dimer):
    res = track_loop(dimer, LoopPath(-1j, 0.5))
    assert res.permutation == (1, 0)
    assert all(abs(abs(f) - 1) < 1e-6 for f in res.end_factors)


def test_no_ep_loop_is_identity(dimer):
    res = track_loop(dimer, LoopPath(1.0, 0.5))
    assert res.permutation == (0, 1)
    np.testing.assert_allclose(res.end_factors, [1, 1], atol=1e-8)


def test_loop_around_both_points_is_identity(dimer):
    res = track_loop(dimer, LoopPath(0.0, 2.0))
    assert res.permutation == (0, 1)


def test_loop_then_reverse_is_identity(dimer):
    loop = LoopPath(-1j, 0.5, start_angle=0.3)
    fwd = track_loop(dimer, loop)
    back = track_loop(dimer, loop.reversed())
    # compose: level i goes to fwd.perm[i], then back along the reverse loop
    for i in range(2):
        j = fwd.permutation[i]
        assert back.permutation[j] == i
        assert abs(fwd.end_factors[i] * back.end_factors[j] - 1) < 1e-8


@pytest.mark.parametrize("radius", [0.3, 0.5, 1.5])
def test_permutation_homotopy_invariant(dimer, radius):
    for samples in (64, 128):
        res = track_loop(dimer, LoopPath(-1j, radius, samples=samples))
        assert res.permutation == (1, 0)


def test_lipkin_two_swaps(lipkin2):
    fam, ep = lipkin2
    for radius in (0.3, 0.8):
        assert track_loop(fam, LoopPath(ep.lam, radius)).permutation == (1, 0)


def test_census_points_swap_recorded_levels(dimer):
    for ep in finder.census(dimer, finder.SearchRegion((-2, 2), (-2, 2))):
        loop = LoopPath(ep.lam, 0.5)
        res = track_loop(dimer, loop)
        assert sorted(res.swapped) == sorted([(ep.level_indices[0], ep.level_indices[1]),
                                              (ep.level_indices[1], ep.level_indices[0])])


def test_cycle_pattern_dimer(dimer, dimer_ep):
    rep = verify_cycle(dimer, dimer_ep, 0.5, census=[-1j, 1j])
    assert rep.passed and rep.error < 1e-6
    np.testing.assert_allclose(rep.ccw, [-1, -1, 1, 1], atol=1e-6)
    np.testing.assert_allclose(rep.cw, [1, -1, -1, 1], atol=1e-6)
    assert rep.ccw[0] == pytest.approx(-rep.cw[0], abs=1e-6)
    assert rep.expected_ccw == tuple(float(s) for s, _ in CCW_PATTERN)
    assert rep.expected_cw == tuple(float(s) for s, _ in CW_PATTERN)
    assert abs(rep.frame_determinant - 1) < 1e-6


def test_cycle_pattern_lipkin_two(lipkin2):
    fam, ep = lipkin2
    assert verify_cycle(fam, ep, 0.5).passed


def test_two_loops_give_minus_identity(dimer):
    res = encircle(dimer, -1j, 0.5, turns=2)
    assert res.permutation == (0, 1)
    np.testing.assert_allclose(res.end_factors, [-1, -1], atol=1e-6)


def test_four_loops_give_identity(dimer):
    res = encircle(dimer, -1j, 0.5, turns=4)
    assert res.permutation == (0, 1)
    np.testing.assert_allclose(res.end_factors, [1, 1], atol=1e-6)


def test_start_gauge_biorthonormal(dimer):
    w, R, L = start_gauge(dimer, 0.3 + 0.1j)
    assert np.abs(L @ R - np.eye(2)).max() < 1e-12
    # complex-symmetric matrix: left rows are the transposed right vectors
    np.testing.assert_allclose(L, R.T, atol=1e-12)


def test_exponent_fit_dimer(dimer, dimer_ep):
    g, c = exponent_fit(dimer, dimer_ep)
    assert abs(g - 0.5) < 0.02 and abs(c + 0.25) < 0.02


def test_exponent_fit_lipkin_two(lipkin2):
    g, c = exponent_fit(*lipkin2)
    assert abs(g - 0.5) < 0.02 and abs(c + 0.25) < 0.02


def test_exponent_fit_semisimple():
    fam = MatrixFamily.single(np.eye(2), np.diag([1.0, -1.0]))
    ep = finder.refine_ep(fam, 0.01)
    assert ep.kind == "semisimple"
    g, c = exponent_fit(fam, ep)
    assert abs(g - 1) < 0.05 and abs(c) < 0.05


def test_exponent_fit_contaminated(dimer, dimer_ep):
    # the approach runs past the partner point at +i
    with pytest.raises(BadFit):
        exponent_fit(dimer, dimer_ep, distances=(3.0, 2.0, 1.0, 0.1, 0.01), direction=1j)


def test_quarter_turn_phase_at_closest_approach(dimer):
    sys = linalg.eig(dimer(-1j + 1e-7))
    for k in range(2):
        r = sys.right[:, k]
        dphi = np.angle(r[0] / r[1])
        assert abs(abs(dphi) - np.pi / 2) < 1e-3
