import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from epcore import finder, response
from epcore.errors import FitFailed, NotIsolated, NotResonant, PoleHit
from epcore.family import MatrixFamily
from epcore.models import lipkin
from epcore.response import LineShape
from epcore.twolevel import TwoLevelParams, ep_eigenvectors, greens_2x2

N_DIMER = 0.5 * np.array([[1, -1j], [-1j, -1]])


@pytest.fixture(scope="module")
def dimer_ep():
    return finder.refine_ep(TwoLevelParams.canonical_dimer().family(), -0.9j)


@pytest.fixture(scope="module")
def open_ep():
    fam = response.open_dimer().family()
    return fam, finder.refine_ep(fam, response.open_dimer_ep()[0], max_radius=0.1)


def _ring(center, radii=np.geomspace(0.1, 10, 25), n=8):
    return [center + r * np.exp(2j * np.pi * k / n + 0.1j) for r in radii for k in range(n)]


# -- Green's function ------------------------------------------------------------

def test_greens_diagonal(dimer):
    np.testing.assert_allclose(response.greens(dimer, 0, 3), np.diag([0.5, 1 / 3]))


def test_greens_matches_two_level_oracle(dimer, dimer_params):
    np.testing.assert_allclose(response.greens(dimer, -1j, 1.0),
                               greens_2x2(dimer_params, -1j, 1.0), atol=1e-13)


def test_greens_residual_and_pole(dimer, rng):
    for _ in range(20):
        lam = complex(*rng.normal(size=2))
        E = complex(*rng.normal(size=2))
        H = dimer(lam)
        G = response.greens(dimer, lam, E)
        A = E * np.eye(2) - H
        assert np.abs(A @ G - np.eye(2)).max() <= 1e-12 * np.linalg.cond(A)
    with pytest.raises(PoleHit):
        response.greens(dimer, 0, 1.0)


def test_greens_adjoint_identity_real_symmetric(dimer, rng):
    for lam in rng.normal(size=5):
        for E in rng.normal(size=4) + 1j * rng.normal(size=4):
            G = response.greens(dimer, lam, E)
            np.testing.assert_allclose(G.conj().T, response.greens(dimer, lam, np.conj(E)),
                                       atol=1e-12)


# -- pole decomposition ----------------------------------------------------------

def test_dimer_nilpotent(dimer, dimer_ep):
    g = response.pole_decomposition(dimer, dimer_ep)
    np.testing.assert_allclose(g.second_order, N_DIMER, atol=1e-7)
    assert np.abs(g.second_order @ g.second_order).max() < 1e-7
    np.testing.assert_allclose(g.first_order, np.eye(2), atol=1e-12)


def test_nilpotent_exactly_squares_to_zero():
    assert not np.any(N_DIMER @ N_DIMER)


def test_nilpotent_along_ep_eigenvector(dimer, dimer_ep, dimer_params):
    phi, _, phit, _ = ep_eigenvectors(dimer_params)
    outer = np.outer(phi, phit)
    N = response.pole_decomposition(dimer, dimer_ep).second_order
    c = np.vdot(outer.ravel(), N.ravel()) / np.vdot(outer.ravel(), outer.ravel())
    assert np.abs(N - c * outer).max() < 1e-7
    assert c == pytest.approx(-0.5, abs=1e-7)


def test_reconstruction_dimer(dimer, dimer_ep):
    g = response.pole_decomposition(dimer, dimer_ep)
    err = max(np.abs(g.reconstruct(E) - response.greens(dimer, dimer_ep.lam, E)).max()
              for E in _ring(dimer_ep.energy))
    assert err < 1e-9


def test_reconstruction_with_spectator_level(dimer):
    H0 = np.zeros((3, 3), complex)
    V = np.zeros((3, 3), complex)
    H0[:2, :2], V[:2, :2], H0[2, 2] = dimer.H0, dimer.V, 5.0
    fam = MatrixFamily.single(H0, V)
    ep = finder.refine_ep(fam, -0.9j)
    g = response.pole_decomposition(fam, ep)
    assert np.isclose(np.trace(g.first_order).real, 2)
    err = max(np.abs(g.reconstruct(E) - response.greens(fam, ep.lam, E)).max()
              for E in _ring(ep.energy) if abs(E - 5) > 0.05)
    assert err < 1e-9


def test_remainder_analytic_at_ep(dimer, dimer_ep):
    g = response.pole_decomposition(dimer, dimer_ep)
    vals = []
    for r in (1e-1, 1e-2, 1e-3):
        E = dimer_ep.energy + r * np.exp(0.4j)
        vals.append(np.abs(response.greens(dimer, dimer_ep.lam, E) - g.singular(E)).max())
    # the remainder stays bounded while the singular part grows like 1/r^2
    assert max(vals) < 1e-3


def test_pole_decomposition_not_isolated():
    fam = lipkin(8).blocks["even"]
    ep = finder.refine_ep(fam, 0.67j)
    with pytest.raises(NotIsolated):
        response.pole_decomposition(fam, ep)


# -- line shapes -----------------------------------------------------------------

def test_single_level_is_lorentzian():
    E0, gamma = 0.3, 0.2
    grid = np.linspace(E0 - 2, E0 + 2, 801)
    fit = response.lorentz_fit(response.cross_section(response.single_level(E0, gamma),
                                                      0, [1], [1], grid))
    assert fit.residual < 1e-10
    assert fit.center == pytest.approx(E0, abs=1e-8)
    assert fit.width == pytest.approx(gamma, rel=1e-8)


def test_lorentz_fit_exact_input():
    E = np.linspace(-5, 5, 400)
    y = response.lorentzian(E, 0.7, 0.9, 2.5)
    fit = response.lorentz_fit(LineShape(E, y, np.ones(1), np.ones(1)))
    assert fit.residual < 1e-10
    assert fit.width == pytest.approx(0.9)


def test_lorentz_fit_failures():
    E = np.linspace(-1, 1, 100)
    with pytest.raises(FitFailed):
        response.lorentz_fit(LineShape(E, np.ones_like(E), np.ones(1), np.ones(1)))
    with pytest.raises(FitFailed):
        response.lorentz_fit(LineShape(E[:10], np.arange(10.0), np.ones(1), np.ones(1)))


def test_open_dimer_point_is_resonant(open_ep):
    fam, ep = open_ep
    lam, E = response.open_dimer_ep()
    assert abs(ep.lam - lam) < 1e-10 and abs(ep.energy - E) < 1e-8
    assert E.imag < 0


def test_open_dimer_line_shape_is_not_lorentzian(open_ep):
    fam, ep = open_ep
    grid = np.linspace(ep.energy.real - 3, ep.energy.real + 3, 801)
    shape = response.cross_section(fam, ep.lam, [1, 0], [1, 0], grid)
    assert np.all(shape.values >= 0) and np.all(np.isfinite(shape.values))
    control = response.lorentz_fit(response.cross_section(
        response.single_level(0.0, -2 * ep.energy.imag), 0, [1], [1], grid - ep.energy.real))
    fit = response.lorentz_fit(shape)
    assert fit.residual > 1e-3
    assert fit.residual >= 1e3 * control.residual


def test_channel_orthogonal_to_nilpotent_range_is_lorentzian(open_ep):
    fam, ep = open_ep
    N = response.pole_decomposition(fam, ep).second_order
    u = N[:, np.argmax(np.linalg.norm(N, axis=0))]
    f_vec = np.array([u[1], -u[0]]).conj()     # <f|u> = 0
    assert abs(np.vdot(f_vec, N @ np.array([1, 0]))) < 1e-6
    grid = np.linspace(ep.energy.real - 3, ep.energy.real + 3, 801)
    fit = response.lorentz_fit(response.cross_section(fam, ep.lam, [1, 0], f_vec, grid))
    assert fit.residual < 1e-6


def test_cross_section_rejects_gain():
    fam = response.single_level(0.0, -0.1)
    with pytest.raises(NotResonant):
        response.cross_section(fam, 0, [1], [1], np.linspace(-1, 1, 50))


# -- time evolution --------------------------------------------------------------

def test_propagate_zero_time(rng):
    H = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    psi = rng.normal(size=3) + 0j
    np.testing.assert_allclose(response.propagate(H, psi, 0.0), psi)
    with pytest.raises(ValueError):
        response.propagate(H, psi, -1.0)


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_propagator_at_ep_is_linear_in_time(dimer, t):
    H = dimer(-1j)
    psi0 = np.array([1.0, 0.0])
    ref = response.ep_propagator(0.5, N_DIMER, t) @ psi0
    assert np.abs(response.propagate(H, psi0, t) - ref).max() < 1e-10
    if t == 1.0:
        np.testing.assert_allclose(ref, np.exp(-0.5j) * (np.eye(2) - 1j * N_DIMER) @ psi0)


def test_ep_eigenvector_evolves_exponentially(dimer, dimer_params):
    phi = ep_eigenvectors(dimer_params)[0]
    for t in (0.5, 3.0, 20.0):
        np.testing.assert_allclose(response.propagate(dimer(-1j), phi, t),
                                   np.exp(-0.5j * t) * phi, atol=1e-10)


@settings(max_examples=30)
@given(st.integers(0, 2**31 - 1), st.floats(0, 3), st.floats(0, 3))
def test_propagate_semigroup(seed, t1, t2):
    rng = np.random.default_rng(seed)
    H = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) - 2j * np.eye(4)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    once = response.propagate(H, psi, t1 + t2)
    twice = response.propagate(H, response.propagate(H, psi, t1), t2)
    assert np.abs(once - twice).max() <= 1e-9 * max(1, np.abs(once).max())


def test_propagate_matches_eigendecomposition(rng):
    H = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    w, R = sla.eig(H)
    psi = rng.normal(size=5) + 0j
    ref = R @ (np.exp(-1j * w * 0.7) * np.linalg.solve(R, psi))
    np.testing.assert_allclose(response.propagate(H, psi, 0.7), ref, atol=1e-10)


def test_time_profile_depends_on_initial_state(open_ep):
    fam, ep = open_ep
    H = fam(ep.lam)
    times = np.linspace(0, 5, 41)
    generic = response.ep_time_profile(H, ep.energy, [1.0, 0.0], times)
    assert generic.residual < 1e-6
    assert np.linalg.norm(generic.b) > 0.1
    N = response.pole_decomposition(fam, ep).second_order
    np.testing.assert_allclose(generic.b, -1j * N @ [1.0, 0.0], atol=1e-6)
    phi = N[:, np.argmax(np.linalg.norm(N, axis=0))]
    pure = response.ep_time_profile(H, ep.energy, phi, times)
    assert pure.residual < 1e-6 and np.linalg.norm(pure.b) < 1e-6
    norms = [np.linalg.norm(response.propagate(H, phi, t)) * np.exp(-ep.energy.imag * t)
             for t in times]
    np.testing.assert_allclose(norms, norms[0], rtol=1e-6)
