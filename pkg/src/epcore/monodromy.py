"""Transport of eigenpairs around closed loops in the parameter plane.

Right vectors ``psi`` and left rows ``phi`` are carried with ``phi @ psi = 1``.
Between neighbouring samples the new pair ``(v, w)`` is rescaled to
``(k v, w / k)`` with ``k^2 = (w @ psi) / (phi @ v)``, which makes the two
cross overlaps equal and positive-real. This discrete parallel transport has
an even error expansion in the step, so results from ``M`` and ``2M``
samples are Richardson-extrapolated.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import linalg
from .errors import BadFit, InvalidRegion, RefineSampling, TrackingFailed
from .family import MatrixFamily
from .finder import DEFAULT_DISTANCES, ExceptionalPoint, fit_power

GAUGE = "biorthogonal-transport"
AMBIGUITY = 0.9
STABLE_TOL = 1e-8


@dataclass(frozen=True)
class LoopPath:
    """Circle ``center + radius * exp(+-i theta)`` traversed `turns` times."""

    center: complex
    radius: float
    orientation: str = "ccw"
    samples: int = 64
    turns: int = 1
    start_angle: float = 0.0

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidRegion("loop radius must be positive")
        if self.orientation not in ("ccw", "cw"):
            raise InvalidRegion("orientation must be 'ccw' or 'cw'")
        if self.samples < 16:
            raise InvalidRegion("at least 16 samples per turn are required")
        if self.turns < 1:
            raise InvalidRegion("turns must be a positive integer")

    @property
    def start(self) -> complex:
        return complex(self.center) + self.radius * np.exp(1j * self.start_angle)

    def points(self, samples: int | None = None) -> np.ndarray:
        """Sample points, first and last both equal to :attr:`start`."""
        m = (samples or self.samples) * self.turns
        sign = 1.0 if self.orientation == "ccw" else -1.0
        theta = self.start_angle + sign * 2 * np.pi * self.turns * np.arange(m + 1) / m
        pts = complex(self.center) + self.radius * np.exp(1j * theta)
        pts[-1] = self.start
        return pts

    def reversed(self) -> "LoopPath":
        other = "cw" if self.orientation == "ccw" else "ccw"
        return LoopPath(self.center, self.radius, other, self.samples, self.turns,
                        self.start_angle)

    def check_clearance(self, zeros, enclosed=None) -> None:
        """Raise unless every zero except `enclosed` lies beyond ``2 * radius``."""
        c = complex(self.center)
        for z in zeros:
            z = complex(z)
            if enclosed is not None and abs(z - complex(enclosed)) <= 1e-9 * (1 + abs(z)):
                continue
            if abs(z - c) <= 2 * self.radius:
                raise InvalidRegion(f"discriminant zero {z} within twice the loop radius")


@dataclass(frozen=True, eq=False)
class MonodromyResult:
    """Level permutation and end factors of one transport run.

    ``permutation[i]`` is the start level on which tracked level
    ``levels[i]`` ends; its transported vector is
    ``end_factors[i] * right[:, permutation[i]]`` in the start gauge.
    """

    permutation: tuple
    end_factors: tuple
    samples_used: int
    levels: tuple
    loop: LoopPath
    right: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    gauge: str = GAUGE

    @property
    def swapped(self) -> list:
        return [(a, b) for a, b in zip(self.levels, self.permutation) if a != b]

    def end_vector(self, i: int) -> np.ndarray:
        return self.end_factors[i] * self.right[:, self.permutation[i]]


def _balanced_pairs(sys: linalg.EigenSystem):
    """Bi-orthonormal pairs with equal left/right norms (gauge still free)."""
    R = sys.right.copy()
    L = sys.left.copy()
    for k in range(sys.dim):
        s = L[k] @ R[:, k]
        if s == 0:
            raise RefineSampling(f"self-orthogonal level {k} on the loop")
        root = np.sqrt(s)
        R[:, k] /= root
        L[k] /= root
        a = np.sqrt(np.linalg.norm(L[k]) / np.linalg.norm(R[:, k]))
        R[:, k] *= a
        L[k] /= a
    return R, L


def start_gauge(family: MatrixFamily, lam):
    """Eigen-data at `lam` in the reference gauge.

    Each pair is balanced and phased so that ``phi`` is as close as possible
    to ``psi^T`` (exactly equal for complex-symmetric matrices); the sign
    makes the largest component of ``psi`` have a positive real part.
    """
    sys = linalg.eig(family(lam))
    R, L = _balanced_pairs(sys)
    for k in range(sys.dim):
        alpha = 0.5 * np.angle(np.sum(L[k] * R[:, k].conj()))
        c = np.exp(1j * alpha)
        R[:, k] *= c
        L[k] /= c
        big = R[np.argmax(np.abs(R[:, k])), k]
        if big.real < 0 or (big.real == 0 and big.imag < 0):
            R[:, k] *= -1
            L[k] *= -1
    return sys.eigenvalues, R, L


def _match(psi, phi, R, L):
    """Best candidate for the pair ``(psi, phi)`` and its transport factor."""
    A = phi @ R                      # phi . v_m
    B = L @ psi                      # w_m . psi
    score = np.abs(A * B)
    order = np.argsort(score)[::-1]
    best = order[0]
    if len(order) > 1 and score[order[1]] >= AMBIGUITY * score[best]:
        raise RefineSampling("two candidates overlap within 10%")
    k = np.sqrt(B[best] / A[best])
    if (k * A[best]).real < 0:
        k = -k
    return int(best), k


def _transport(family, loop: LoopPath, levels, samples, start):
    w0, R0, L0 = start
    pts = loop.points(samples)
    psi = {i: R0[:, i].copy() for i in levels}
    phi = {i: L0[i].copy() for i in levels}
    for lam in pts[1:-1]:
        R, L = _balanced_pairs(linalg.eig(family(lam)))
        taken = set()
        for i in levels:
            m, k = _match(psi[i], phi[i], R, L)
            if m in taken:
                raise RefineSampling("two tracked levels matched the same candidate")
            taken.add(m)
            psi[i] = k * R[:, m]
            phi[i] = L[m] / k
    perm, factors = [], []
    taken = set()
    for i in levels:
        m, k = _match(psi[i], phi[i], R0, L0)
        if m in taken:
            raise RefineSampling("closing step is ambiguous")
        taken.add(m)
        perm.append(m)
        factors.append(k)
    return tuple(perm), np.array(factors)


def track_loop(family: MatrixFamily, loop: LoopPath, levels=None,
               max_samples: int = 8192) -> MonodromyResult:
    """Transport the chosen levels once around `loop`.

    Levels are indexed by the sorted spectrum at the loop's start point.
    Sampling starts at ``loop.samples`` per turn and doubles until the
    permutation and the extrapolated end factors agree within 1e-8 between
    successive runs.

    Raises
    ------
    TrackingFailed
        If matching is still ambiguous, or the factors have not settled,
        at `max_samples` per turn.
    """
    start = start_gauge(family, loop.start)
    n = len(start[0])
    levels = tuple(range(n)) if levels is None else tuple(int(i) for i in levels)
    samples = loop.samples
    prev = None          # (samples, permutation, raw factors)
    prev_extrap = None
    while samples <= max_samples:
        try:
            perm, raw = _transport(family, loop, levels, samples, start)
        except RefineSampling:
            prev = prev_extrap = None
            samples *= 2
            continue
        if prev is not None and prev[1] == perm:
            extrap = raw * (raw / prev[2]) ** (1.0 / 3.0)
            if prev_extrap is not None and np.max(np.abs(extrap - prev_extrap)) <= STABLE_TOL:
                return MonodromyResult(perm, tuple(complex(x) for x in extrap), samples,
                                       levels, loop, start[1], start[2], start[0])
            prev_extrap = extrap
        else:
            prev_extrap = None
        prev = (samples, perm, raw)
        samples *= 2
    raise TrackingFailed(f"transport did not settle within {max_samples} samples per turn")


@dataclass(frozen=True, eq=False)
class CycleReport:
    """Four ccw and four cw turns expressed in the frame ``(psi_a, psi_b)``.

    ``psi_b`` is defined by one ccw turn, ``psi_a -> -psi_b``; the other
    seven states are then predictions. ``ccw[k-1]``/``cw[k-1]`` hold the
    coefficient of the expected basis vector after ``k`` turns.
    """

    levels: tuple
    ccw: tuple
    cw: tuple
    expected_ccw: tuple
    expected_cw: tuple
    error: float
    frame_determinant: complex | None
    start_factors: tuple
    samples_used: int

    @property
    def passed(self) -> bool:
        return self.error <= 1e-6


# state after k turns, as (sign, basis) with basis 'a' or 'b'
CCW_PATTERN = ((-1, "b"), (-1, "a"), (1, "b"), (1, "a"))
CW_PATTERN = ((1, "b"), (-1, "a"), (-1, "b"), (1, "a"))


def _coefficient(v, basis):
    c = np.vdot(basis, v) / np.vdot(basis, basis)
    return complex(c), float(np.linalg.norm(v - c * basis) / np.linalg.norm(basis))


def verify_cycle(family: MatrixFamily, ep: ExceptionalPoint, radius: float,
                 samples: int = 64, census=None, start_angle: float = 0.0) -> CycleReport:
    """Check the four-turn sign pattern and its reversal under cw traversal."""
    center = ep.lam
    base = LoopPath(center, radius, "ccw", samples, 1, start_angle)
    if census is not None:
        base.check_clearance([e.lam if isinstance(e, ExceptionalPoint) else e
                              for e in census], enclosed=center)
    one = track_loop(family, base)
    pairs = one.swapped
    if len(pairs) != 2:
        raise TrackingFailed("loop does not exchange exactly two levels")
    a, b = sorted({pairs[0][0], pairs[0][1]})
    psi_a = one.right[:, a]
    v1 = one.end_vector(one.levels.index(a))
    psi_b = -v1
    bases = {"a": psi_a, "b": psi_b}
    runs = {}
    coeffs = {}
    err = 0.0
    for orient, pattern in (("ccw", CCW_PATTERN), ("cw", CW_PATTERN)):
        out = []
        for k, (sign, key) in enumerate(pattern, start=1):
            res = one if (orient == "ccw" and k == 1) else track_loop(
                family, LoopPath(center, radius, orient, samples, k, start_angle), levels=(a, b))
            runs[(orient, k)] = res
            v = res.end_vector(res.levels.index(a))
            c, resid = _coefficient(v, bases[key])
            out.append(c)
            err = max(err, abs(c - sign), resid)
        coeffs[orient] = tuple(out)
    det = None
    if family.dim == 2:
        det = complex(np.linalg.det(np.column_stack([psi_a, psi_b])))
    ia, ib = one.levels.index(a), one.levels.index(b)
    return CycleReport(
        levels=(a, b), ccw=coeffs["ccw"], cw=coeffs["cw"],
        expected_ccw=tuple(float(s) for s, _ in CCW_PATTERN),
        expected_cw=tuple(float(s) for s, _ in CW_PATTERN),
        error=float(err), frame_determinant=det,
        start_factors=(one.end_factors[ia], one.end_factors[ib]),
        samples_used=max(r.samples_used for r in runs.values()))


class ExponentFit(NamedTuple):
    gap_exponent: float
    component_exponent: float


def exponent_fit(family: MatrixFamily, ep: ExceptionalPoint, distances=None,
                 direction: complex = 1.0, min_r2: float = 0.999) -> ExponentFit:
    """Power laws of the level gap and of normalized eigenvector components.

    Along ``lam* + d * direction`` the pair's right vectors, normalized by
    ``phi @ psi = 1`` with the scaling split evenly, have sup-norm
    ``|r|_inf / sqrt|s|``; its geometric mean over the pair is fitted.

    Raises
    ------
    BadFit
        If either log-log fit has R^2 below `min_r2`.
    """
    distances = tuple(DEFAULT_DISTANCES if distances is None else distances)
    d = complex(direction) / abs(direction)
    m = len(ep.level_indices)
    gaps, comps = [], []
    for t in distances:
        sys = linalg.eig(family(ep.lam + t * d))
        idx = linalg.nearest(sys.eigenvalues, ep.energy, m)
        w = sys.eigenvalues[idx]
        gaps.append(np.mean([abs(w[i] - w[j]) for i in range(m) for j in range(i + 1, m)]))
        sizes = [np.abs(sys.right[:, k]).max() / np.sqrt(abs(sys.overlaps[k])) for k in idx]
        comps.append(np.exp(np.mean(np.log(sizes))))
    g, r2g = fit_power(distances, gaps)
    c, r2c = fit_power(distances, comps)
    worst = min(r2g, r2c)
    if worst < min_r2:
        raise BadFit(f"power-law fit R^2 = {worst:.6f} below {min_r2}", r_squared=worst)
    return ExponentFit(g, c)


def encircle(family: MatrixFamily, center, radius: float, turns: int = 1,
             orientation: str = "ccw", samples: int = 64, levels=None) -> MonodromyResult:
    return track_loop(family, LoopPath(center, radius, orientation, samples, turns), levels)
