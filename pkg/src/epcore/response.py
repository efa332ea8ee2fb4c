"""Green's functions, line shapes and time evolution near exceptional points."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
from scipy.optimize import OptimizeWarning, curve_fit

from . import linalg
from .errors import FitFailed, NotIsolated, NotResonant, PoleHit
from .family import MatrixFamily, as_matrix
from .finder import ExceptionalPoint
from .twolevel import TwoLevelParams, ep_locations

POLE_RTOL = 1e-14


def greens(family: MatrixFamily, lam, E) -> np.ndarray:
    """``(E - H(lam))^-1``; raises PoleHit when ``E`` is numerically an eigenvalue."""
    H = family(lam)
    A = E * np.eye(len(H)) - H
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] <= POLE_RTOL * max(s[0], 1.0):
        raise PoleHit(f"E={E} is an eigenvalue of H({lam})")
    return np.linalg.solve(A, np.eye(len(H)))


@dataclass(frozen=True, eq=False)
class GreensDecomposition:
    """Singular part ``P/(E - E_ep) + N/(E - E_ep)^2`` of the resolvent.

    ``first_order`` is the spectral projector ``P`` onto the coalescing
    pair and ``second_order`` the nilpotent ``N = (H - E_ep) P``.
    """

    E_ep: complex
    first_order: np.ndarray
    second_order: np.ndarray
    H: np.ndarray = field(repr=False)

    def singular(self, E) -> np.ndarray:
        z = E - self.E_ep
        return self.first_order / z + self.second_order / z**2

    def regular(self, E) -> np.ndarray:
        """Resolvent restricted to the complement of the pair; analytic at ``E_ep``."""
        n = len(self.H)
        Q = np.eye(n) - self.first_order
        return np.linalg.solve(E * np.eye(n) - self.H, Q)

    def reconstruct(self, E) -> np.ndarray:
        return self.singular(E) + self.regular(E)


def pole_decomposition(family: MatrixFamily, ep: ExceptionalPoint, isolation: float = 10.0,
                       n_points: int = 256) -> GreensDecomposition:
    """Split the resolvent at an EP2 into first- and second-order pole terms.

    The projector is a contour integral around ``E_ep`` with radius half
    the distance to the nearest other level.

    Raises
    ------
    NotIsolated
        If another level lies within `isolation` times the pair's spread.
    """
    H = family(ep.lam)
    E = complex(ep.energy)
    w = linalg.eigenvalues(H)
    scale = max(1.0, float(np.linalg.norm(H, 2)))
    pair = linalg.nearest(w, E, 2)
    spread = max(float(np.abs(w[pair] - E).max()), 1e-8 * scale)
    others = np.delete(w, pair)
    if others.size:
        gap = float(np.abs(others - E).min())
        if gap <= isolation * spread:
            raise NotIsolated(f"level at distance {gap:.3g} from the EP energy")
        radius = 0.5 * gap
    else:
        radius = scale
    if others.size:
        P = linalg.riesz_projector(H, E, radius, n_points)
    else:
        P = np.eye(len(H), dtype=complex)
    N = linalg.nilpotent_part(H, E, radius=radius if others.size else None)
    return GreensDecomposition(E, P, N, H)


@dataclass(frozen=True, eq=False)
class LineShape:
    E_grid: np.ndarray
    values: np.ndarray
    i_vec: np.ndarray = field(repr=False)
    f_vec: np.ndarray = field(repr=False)


def cross_section(family: MatrixFamily, lam, i_vec, f_vec, E_grid) -> LineShape:
    """``sigma(E) = |<f|G(E)|i>|^2`` on a real energy grid.

    Raises
    ------
    NotResonant
        If some eigenvalue of ``H(lam)`` has a positive imaginary part.
    """
    H = family(lam)
    w = linalg.eigenvalues(H)
    scale = max(1.0, float(np.linalg.norm(H, 2)))
    if np.any(w.imag > 1e-12 * scale):
        raise NotResonant("eigenvalues with positive imaginary part")
    i_vec = np.asarray(i_vec, dtype=complex)
    f_vec = np.asarray(f_vec, dtype=complex)
    E_grid = np.asarray(E_grid, dtype=float)
    vals = np.empty(E_grid.size)
    for k, E in enumerate(E_grid):
        amp = np.vdot(f_vec, greens(family, lam, E) @ i_vec)
        vals[k] = abs(amp) ** 2
    return LineShape(E_grid, vals, i_vec, f_vec)


class LorentzFit(NamedTuple):
    center: float
    width: float
    amplitude: float
    residual: float


def lorentzian(E, center, width, amplitude):
    h = 0.5 * width
    return amplitude * h * h / ((E - center) ** 2 + h * h)


def lorentz_fit(shape: LineShape) -> LorentzFit:
    """Least-squares Lorentzian; residual is RMS misfit over RMS data.

    Raises
    ------
    FitFailed
        For flat data, a non-convergent fit, or a width too large for the grid.
    """
    E = np.asarray(shape.E_grid, dtype=float)
    y = np.asarray(shape.values, dtype=float)
    if E.size < 20:
        raise FitFailed("need at least 20 points")
    span = float(E.max() - E.min())
    if np.ptp(y) <= 1e-12 * max(np.abs(y).max(), 1e-300):
        raise FitFailed("flat line shape")
    k = int(np.argmax(y))
    above = E[y >= 0.5 * y[k]]
    width0 = max(float(above.max() - above.min()), span / E.size)
    try:
        with warnings.catch_warnings():
            # covariance is never used
            warnings.simplefilter("ignore", OptimizeWarning)
            p, _ = curve_fit(lorentzian, E, y, p0=(E[k], width0, y[k]),
                             ftol=1e-15, xtol=1e-15, gtol=1e-15, maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise FitFailed(f"Lorentzian fit did not converge: {exc}") from exc
    center, width, amp = (float(x) for x in p)
    width = abs(width)
    if not np.isfinite(width) or width > 4 * span:
        raise FitFailed(f"fitted width {width:.3g} diverged")
    resid = y - lorentzian(E, center, width, amp)
    rms = float(np.sqrt(np.mean(resid**2)) / np.sqrt(np.mean(y**2)))
    return LorentzFit(center, width, amp, rms)


def propagate(H, psi0, t: float) -> np.ndarray:
    """``exp(-i H t) psi0`` by scaling and squaring."""
    if t < 0:
        raise ValueError("t must be non-negative")
    H = as_matrix(H)
    return sla.expm(-1j * t * H) @ np.asarray(psi0, dtype=complex)


def ep_propagator(E, N, t: float) -> np.ndarray:
    """Closed form ``exp(-i E t)(I - i N t)`` for ``H = E + N`` with ``N^2 = 0``."""
    N = as_matrix(N)
    return np.exp(-1j * E * t) * (np.eye(len(N)) - 1j * t * N)


class TimeProfile(NamedTuple):
    a: np.ndarray
    b: np.ndarray
    residual: float


def ep_time_profile(H, E, psi0, times) -> TimeProfile:
    """Fit ``exp(i E t) psi(t) = a + b t`` over `times`.

    At an EP ``b = -i N psi0``; it vanishes when ``psi0`` is the EP
    eigenvector. The residual is the relative RMS misfit.
    """
    times = np.asarray(times, dtype=float)
    Y = np.array([np.exp(1j * E * t) * propagate(H, psi0, t) for t in times])
    A = np.vstack([np.ones_like(times), times]).T.astype(complex)
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    resid = Y - A @ coef
    rel = float(np.linalg.norm(resid) / max(np.linalg.norm(Y), 1e-300))
    return TimeProfile(coef[0], coef[1], rel)


def open_dimer() -> TwoLevelParams:
    """Two decaying levels with couplings 1/2; its first EP has ``Im E < 0``."""
    return TwoLevelParams(1 - 0.3j, -1 - 0.1j, 0.0, 0.0, 0.5, 0.5)


def open_dimer_ep() -> tuple[complex, complex]:
    eps = ep_locations(open_dimer())
    return eps.lam1, eps.E1


def single_level(E0: float, gamma: float) -> MatrixFamily:
    """One decaying level ``E0 - i gamma/2`` (parameter has no effect)."""
    return MatrixFamily.single([[E0 - 0.5j * gamma]], [[0.0]], name="single_level")
