import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epcore import finder, linalg
from epcore.errors import (ClusterAmbiguous, InsufficientParameters, InvalidRegion,
                           NoConvergence, OrderMismatch)
from epcore.family import MatrixFamily
from epcore.models import ep3_family, ep3_two_parameter, lipkin
from epcore.twolevel import TwoLevelParams, ep_locations

from conftest import random_params

FULL = finder.SearchRegion((-2, 2), (-2, 2), step=0.05)


def _winding(fam, center, radius, n=2000):
    t = np.linspace(0, 2 * np.pi, n + 1)
    vals = np.array([linalg.char_discriminant(fam, center + radius * np.exp(1j * s)) for s in t])
    return (np.unwrap(np.angle(vals))[-1] - np.angle(vals[0])) / (2 * np.pi)


def _rect_winding(fam, a, b, c, d, n=3000):
    s = np.linspace(0, 1, n, endpoint=False)
    pts = np.concatenate([a + (b - a) * s + 1j * c, b + 1j * (c + (d - c) * s),
                          b - (b - a) * s + 1j * d, a + 1j * (d - (d - c) * s)])
    vals = np.array([linalg.char_discriminant(fam, z) for z in pts])
    ph = np.unwrap(np.angle(np.append(vals, vals[0])))
    return (ph[-1] - ph[0]) / (2 * np.pi)


# -- regions and grid scan ------------------------------------------------------

def test_region_validation():
    with pytest.raises(InvalidRegion):
        finder.SearchRegion((1, 1), (0, 1))
    with pytest.raises(InvalidRegion):
        finder.SearchRegion((0, 1), (0, 1), step=0)
    r = finder.SearchRegion.around(1j, 0.5)
    assert r.contains(1j) and not r.contains(0)


def test_scan_grid_dimer(dimer):
    seeds = finder.scan_grid(dimer, FULL)
    for target in (-1j, 1j):
        assert min(abs(s - target) for s in seeds) <= 0.05


def test_scan_grid_constant_family():
    fam = MatrixFamily.single(np.diag([1.0, 2.0]), np.zeros((2, 2)))
    assert finder.scan_grid(fam, FULL) == []


def test_scan_grid_lipkin_two():
    block = lipkin(2).blocks["even"]
    np.testing.assert_allclose(block(0.3), [[-1, 0.3], [0.3, 1]])
    seeds = finder.scan_grid(block, FULL)
    for target in (-1j, 1j):
        assert min(abs(s - target) for s in seeds) <= 0.05


def test_scan_grid_deterministic(dimer):
    assert finder.scan_grid(dimer, FULL) == finder.scan_grid(dimer, FULL)


# -- refinement and classification ---------------------------------------------

def test_refine_dimer(dimer):
    ep = finder.refine_ep(dimer, -0.9j)
    assert abs(ep.lam + 1j) < 1e-10
    assert abs(ep.energy - 0.5) < 1e-10
    assert ep.order == 2 and ep.is_ep
    assert ep.level_indices == (0, 1)
    assert 0.45 <= ep.exponent <= 0.55


def test_refine_crossing_without_branching():
    p = TwoLevelParams(1, 0, -1, 0, 0.5, 0)
    ep = finder.refine_ep(p.family(), 0.9)
    assert abs(ep.lam - 1) < 1e-10
    assert ep.kind == "crossing" and ep.order == 0
    assert abs(ep.exponent - 1) < 0.05


def test_refine_far_seed_fails(dimer):
    with pytest.raises(NoConvergence):
        finder.refine_ep(dimer, 40 + 40j, max_radius=1.0)


def test_refine_rejects_multiparameter():
    with pytest.raises(ValueError):
        finder.refine_ep(ep3_two_parameter(), 0.0)


def test_classify_dimer(dimer):
    cls = finder.classify(dimer, -1j)
    assert abs(cls.exponent - 0.5) <= 0.02
    assert cls.defect_overlap < 1e-6
    assert cls.kind == "EP" and cls.order == 2


def test_classify_semisimple():
    fam = MatrixFamily.single(np.eye(2), np.zeros((2, 2)))
    cls = finder.classify(fam, 0.7 - 0.2j)
    assert cls.kind == "semisimple" and cls.order == 0
    assert np.isclose(cls.defect_overlap, 1)


def test_classify_ep3():
    cls = finder.classify(ep3_family(0.0), 0.0)
    assert abs(cls.exponent - 1 / 3) <= 0.02
    assert cls.order == 3 and cls.kind == "EP"


def test_classify_ambiguous_cluster():
    with pytest.raises(ClusterAmbiguous):
        finder.classify(ep3_family(0.0), 0.0, cluster=(0, 1))


def test_exponent_classes_are_separated(dimer):
    ep2 = finder.classify(dimer, -1j).exponent
    ep3 = finder.classify(ep3_family(0.0), 0.0).exponent
    ss = finder.classify(MatrixFamily.single(np.eye(2), np.diag([1.0, -1.0])), 0.0).exponent
    assert abs(ep3 - 1 / 3) < 0.05 and abs(ep2 - 0.5) < 0.05 and abs(ss - 1) < 0.1


def test_fit_power_exact():
    d = np.array([1e-2, 1e-3, 1e-4])
    slope, r2 = finder.fit_power(d, 3 * d**0.5)
    assert slope == pytest.approx(0.5) and r2 == pytest.approx(1)


def test_cluster_residual_zero_for_exact_pair():
    assert finder.cluster_residual(np.array([1.0, 1.0, 3.0]), (0, 1), 1.0) == 0


def test_symmetric_triple_coalescence_is_square_root():
    # a +-E pair meets the symmetry-pinned zero level of the even Lipkin block
    fam = lipkin(8).blocks["even"]
    ep = finder.refine_ep(fam, 0.67j)
    assert abs(ep.lam.real) < 1e-12 and ep.lam.imag == pytest.approx(0.672, abs=1e-3)
    assert len(ep.level_indices) == 3
    assert ep.order == 2 and abs(ep.exponent - 0.5) < 0.02
    nullity, chain = finder.jordan_chain_length(fam(ep.lam) - ep.energy * np.eye(fam.dim))
    assert (nullity, chain) == (1, 3)


# -- census -----------------------------------------------------------------------

def test_census_dimer(dimer):
    eps = finder.census(dimer, FULL)
    assert len(eps) == 2
    assert abs(eps[0].lam + 1j) < 1e-8 and abs(eps[1].lam - 1j) < 1e-8
    assert all(e.order == 2 for e in eps)


def test_census_empty_region(dimer):
    assert finder.census(dimer, finder.SearchRegion((0.5, 1.5), (-0.5, 0.5), step=0.05)) == []


def test_census_sorted_and_deterministic():
    fam = lipkin(8).blocks["even"]
    region = finder.SearchRegion((0, 2), (0, 2), step=0.02)
    a = finder.census(fam, region, workers=1)
    b = finder.census(fam, region, workers=4)
    assert a == b and len(a) > 0
    keys = [(e.lam.real, e.lam.imag) for e in a]
    assert keys == sorted(keys)
    assert all(e.order == 2 for e in a)


def test_census_recovers_random_closed_forms(rng):
    for _ in range(25):
        p = random_params(rng)
        eps = ep_locations(p)
        pts = (eps.lam1, eps.lam2)
        lo = min(min(z.real for z in pts), min(z.imag for z in pts)) - 0.5
        hi = max(max(z.real for z in pts), max(z.imag for z in pts)) + 0.5
        found = finder.census(p.family(), finder.SearchRegion((lo, hi), (lo, hi), step=0.05))
        for z in pts:
            assert min(abs(e.lam - z) for e in found) < 1e-8


@settings(max_examples=10)
@given(st.integers(0, 2**31 - 1))
def test_refine_matches_closed_form(seed):
    p = random_params(np.random.default_rng(seed))
    eps = ep_locations(p)
    for lam, E in ((eps.lam1, eps.E1), (eps.lam2, eps.E2)):
        ep = finder.refine_ep(p.family(), lam * (1 + 1e-3) + 1e-3, max_radius=0.1)
        assert abs(ep.lam - lam) < 1e-8 * (1 + abs(lam))
        assert abs(ep.energy - E) < 1e-6 * (1 + abs(E))


def test_census_misses_no_zero_in_lipkin_quadrant():
    # argument principle: the local windings of the found points account for
    # every zero of the discriminant inside the rectangle
    for fam in lipkin(8).blocks.values():
        a, b, c, d = 0.013, 2.0, 0.017, 2.0
        eps = finder.census(fam, finder.SearchRegion((a, b), (c, d), step=0.01))
        total = _rect_winding(fam, a, b, c, d)
        local = sum(_winding(fam, e.lam, 1e-3) for e in eps)
        assert round(total) == round(local) and round(total) > 0


def test_approach_distances_shrink_near_neighbours():
    assert finder.approach_distances(0, [1.0]) == finder.DEFAULT_DISTANCES
    d = finder.approach_distances(0, [1e-3])
    assert d[0] == pytest.approx(1e-4) and len(d) == len(finder.DEFAULT_DISTANCES)


# -- higher order -----------------------------------------------------------------

def test_find_epn_ep3_exact_seed():
    ep = finder.find_epn(ep3_two_parameter(), (0, 0), 3)
    assert ep.order == 3 and abs(ep.exponent - 1 / 3) <= 0.02
    assert max(abs(x) for x in ep.location) < 1e-10
    assert abs(ep.energy) < 1e-8


def test_find_epn_ep3_nearby_seed():
    ep = finder.find_epn(ep3_two_parameter(), (0.01, 0.01), 3)
    assert max(abs(x) for x in ep.location) < 1e-10


def test_no_ep3_at_finite_eps():
    # the only triple point of the two-parameter family has eps = 0 ...
    ep = finder.find_epn(ep3_two_parameter(), (0.0, 0.01), 3)
    assert abs(ep.location[1]) < 1e-10
    # ... while at eps = 0.01 the census shows two sprouted EP2
    eps = finder.census(ep3_family(0.01), finder.SearchRegion.around(0, 0.2, step=0.01, dedup=1e-13))
    near = [e for e in eps if abs(e.lam) < 0.1]
    assert len(near) == 2 and all(e.order == 2 for e in near)


def test_find_epn_reduces_to_refine(dimer):
    ep = finder.find_epn(dimer, -0.9j, 2)
    assert abs(ep.lam + 1j) < 1e-10 and ep.order == 2


def test_find_epn_order_mismatch():
    with pytest.raises(OrderMismatch):
        finder.find_epn(ep3_two_parameter(), (0, 0), 2)


def test_find_epn_insufficient_parameters():
    with pytest.raises(InsufficientParameters):
        finder.find_epn(ep3_family(0.0), 0.0, 3)


def test_jordan_chain_length_blocks():
    J = np.diag([1.0, 1.0, 0.0, 0.0], 1)[:4, :4]
    assert finder.jordan_chain_length(J) == (2, 3)
    assert finder.jordan_chain_length(np.zeros((3, 3))) == (3, 1)
