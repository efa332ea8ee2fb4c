"""Locate, refine and classify exceptional points of affine families.

The EP indicator is the discriminant ``D(lam) = prod_{i<j} (E_i - E_j)^2``,
an entire function of ``lam`` for an affine family. It is evaluated in
log/phase form so that large spectra neither overflow nor underflow, and
its zeros are refined by complex Newton with central finite differences.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from . import linalg
from .errors import (ClusterAmbiguous, EpcoreError, InsufficientParameters,
                     InvalidRegion, NoConvergence, OrderMismatch)
from .family import MatrixFamily

log = logging.getLogger(__name__)

DEFAULT_DISTANCES = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7)
EXPONENT_TOL = 0.05
LINEAR_TOL = 0.1
DEFECT_THRESHOLD = 1e-3
NULL_RTOL = 1e-8


@dataclass(frozen=True)
class SearchRegion:
    """Rectangle ``re x im`` of the complex parameter plane.

    Attributes
    ----------
    step : float
        Grid spacing used to seed Newton.
    tol : float
        Refinement tolerance on the relative cluster discriminant.
    dedup : float
        Refined zeros closer than this are merged.
    """

    re: tuple
    im: tuple
    step: float = 0.05
    tol: float = 1e-12
    dedup: float = 1e-6

    def __post_init__(self):
        (a, b), (c, d) = self.re, self.im
        if not (b > a and d > c):
            raise InvalidRegion(f"empty region re={self.re} im={self.im}")
        if not (self.step > 0 and self.tol > 0 and self.dedup > 0):
            raise InvalidRegion("step, tol and dedup must be positive")

    @classmethod
    def around(cls, center, half_width, **kw) -> "SearchRegion":
        c = complex(center)
        return cls((c.real - half_width, c.real + half_width),
                   (c.imag - half_width, c.imag + half_width), **kw)

    def axes(self):
        """Grid axes padded by one step on every side."""
        (a, b), (c, d) = self.re, self.im
        nx = int(round((b - a) / self.step))
        ny = int(round((d - c) / self.step))
        xs = np.linspace(a - self.step, b + self.step, nx + 3)
        ys = np.linspace(c - self.step, d + self.step, ny + 3)
        return xs, ys

    def contains(self, lam, slack: float = 0.0) -> bool:
        lam = complex(lam)
        s = slack * (1 + abs(lam))
        return (self.re[0] - s <= lam.real <= self.re[1] + s
                and self.im[0] - s <= lam.imag <= self.im[1] + s)


@dataclass(frozen=True)
class Classification:
    kind: str               # "EP", "semisimple", "crossing" or "unclassified"
    order: int              # coalescing levels for an EP, 0 otherwise
    exponent: float
    r_squared: float
    defect_overlap: float
    energy: complex
    level_indices: tuple
    distances: tuple = field(default=(), repr=False)
    gaps: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class ExceptionalPoint:
    """A refined spectral coalescence.

    ``location`` is a complex number for single-parameter families and a
    tuple of complex numbers otherwise. ``order`` is 0 for degeneracies that
    are not EPs (see ``kind``).
    """

    location: object
    energy: complex
    order: int
    level_indices: tuple
    defect_overlap: float
    exponent: float
    residual: float
    kind: str = "EP"
    block: str | None = None

    @property
    def is_ep(self) -> bool:
        return self.kind == "EP"

    @property
    def lam(self) -> complex:
        loc = self.location
        return complex(loc[0]) if isinstance(loc, tuple) else complex(loc)


# -- discriminant evaluation --------------------------------------------------

def _log_disc(family: MatrixFamily, lam):
    return linalg.log_discriminant(linalg.eigenvalues(family(lam)))


def log_abs_discriminant_grid(family: MatrixFamily, lams, chunk: int = 4096):
    """``log|D|`` at many parameter values (single-parameter family)."""
    lams = np.asarray(lams, dtype=complex).ravel()
    out = np.empty(lams.size)
    n = family.dim
    i, j = np.triu_indices(n, 1)
    for start in range(0, lams.size, chunk):
        w = np.linalg.eigvals(family.stack(lams[start:start + chunk]))
        d = np.abs(w[:, i] - w[:, j])
        with np.errstate(divide="ignore"):
            out[start:start + chunk] = 2 * np.log(d).sum(axis=1)
    return out


def _newton_step(family, lam, roots, h):
    """Newton step for ``D(lam) / prod(lam - r)`` using scaled values."""
    l0, p0 = _log_disc(family, lam)
    if l0 == -np.inf:
        return 0j, l0
    lp, pp = _log_disc(family, lam + h)
    lm, pm = _log_disc(family, lam - h)
    m = max(l0, lp, lm)
    A = np.exp(lp - m) * pp - np.exp(lm - m) * pm
    B = 2 * h * np.exp(l0 - m) * p0
    S = sum(1.0 / (lam - r) for r in roots)
    den = A - S * B
    if den == 0 or not np.isfinite(den):
        raise NoConvergence(f"flat discriminant at {lam}")
    return -B / den, l0


def newton_discriminant(family: MatrixFamily, seed, roots=(), max_iter: int = 100,
                        max_radius: float = 1.0) -> complex:
    """Complex Newton on the (optionally deflated) discriminant.

    Stops on a relative step below 1e-14, or when steps stop shrinking at
    the rounding floor (multiple zeros converge only to about sqrt(eps)).
    The iterate may not leave the disc of `max_radius` around `seed`.
    """
    seed = complex(seed)
    lam = seed
    best = (np.inf, lam)
    prev = None
    stalls = 0
    for _ in range(max_iter):
        h = 1e-6 * (1 + abs(lam))
        if any(lam == r for r in roots):
            lam = lam + h
        step, l0 = _newton_step(family, lam, roots, h)
        if l0 < best[0]:
            best = (l0, lam)
        if step == 0:
            return complex(lam)
        lam = lam + step
        if abs(lam - seed) > max_radius or not np.isfinite(lam):
            raise NoConvergence(f"Newton left radius {max_radius} around {seed}")
        if abs(step) <= 1e-14 * (1 + abs(lam)):
            return complex(lam)
        if prev is not None and abs(step) >= 0.9 * abs(prev):
            stalls += 1
            if stalls >= 3:
                return complex(best[1])
        else:
            stalls = 0
        prev = step
    raise NoConvergence(f"no convergence from {seed} after {max_iter} iterations")


def _cluster_power_sum(family, lam, size):
    w = linalg.eigenvalues(family(lam))
    idx = cluster_at(w, family.scale(lam), size=size)
    x = w[idx] - w[idx].mean()
    return np.sum(x * x)


def polish(family: MatrixFamily, lam, max_iter: int = 40) -> complex:
    """Newton on ``sum (E_i - mean)^2`` over the cluster found at `lam`.

    A discriminant zero shared by more than two levels (for example a pair
    meeting a symmetry-protected level) is a multiple zero of ``D``, where
    Newton stalls early. The cluster power sum is analytic and has a simple
    zero there. Returns `lam` unchanged if the iteration wanders off.
    """
    lam0 = complex(lam)
    w = linalg.eigenvalues(family(lam0))
    size = len(cluster_at(w, family.scale(lam0)))
    if size < 2:
        return lam0
    lam = lam0
    f = _cluster_power_sum(family, lam, size)
    best = (abs(f), lam)
    for _ in range(max_iter):
        h = 1e-6 * (1 + abs(lam))
        df = (_cluster_power_sum(family, lam + h, size)
              - _cluster_power_sum(family, lam - h, size)) / (2 * h)
        if df == 0 or not np.isfinite(df):
            break
        step = -f / df
        lam = lam + step
        if abs(lam - lam0) > 1e-3 * (1 + abs(lam0)):
            break
        f = _cluster_power_sum(family, lam, size)
        if abs(f) < best[0]:
            best = (abs(f), lam)
        if abs(step) <= 1e-15 * (1 + abs(lam)):
            break
    return complex(best[1])


# -- clusters and classification ----------------------------------------------

def cluster_at(w, scale: float, size: int | None = None) -> list[int]:
    """Indices of the coalescing cluster in the spectrum `w`.

    With `size` given, the tightest group of that many eigenvalues;
    otherwise the closest pair, widened by any level within ten times its
    gap when that gap is small.
    """
    w = np.asarray(w)
    n = len(w)
    if size is not None:
        if size > n:
            raise ValueError("cluster larger than the spectrum")
        best = None
        for k in range(n):
            idx = linalg.nearest(w, w[k], size)
            spread = np.abs(w[idx] - w[idx].mean()).max()
            if best is None or spread < best[0]:
                best = (spread, idx)
        return best[1]
    if n < 2:
        return list(range(n))
    pairs = min(combinations(range(n), 2), key=lambda ij: abs(w[ij[0]] - w[ij[1]]))
    gap = abs(w[pairs[0]] - w[pairs[1]])
    if gap > 1e-3 * scale:
        # nothing is coalescing; do not grow a spurious cluster
        return sorted(pairs)
    center = 0.5 * (w[pairs[0]] + w[pairs[1]])
    reach = max(10 * gap, 1e-9 * scale)
    return sorted(int(k) for k in np.flatnonzero(np.abs(w - center) <= reach))


def cluster_residual(w, idx, scale: float) -> float:
    """Cluster discriminant ``prod |E_i - E_j|^2`` in units of ``scale``."""
    pairs = list(combinations(idx, 2))
    if not pairs:
        return 0.0
    with np.errstate(divide="ignore"):
        logs = [2 * np.log(abs(w[i] - w[j]) / scale) for i, j in pairs]
    return float(np.exp(np.sum(logs)))


def _mean_gap(x) -> float:
    return float(np.mean([abs(a - b) for a, b in combinations(x, 2)]))


def fit_power(distances, values):
    """Least-squares slope and R^2 of ``log values`` against ``log distances``."""
    x = np.log(np.asarray(distances, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    ss_res = float(((y - A @ np.array([slope, icpt])) ** 2).sum())
    r2 = 1.0 if ss_tot < 1e-20 else 1.0 - ss_res / ss_tot
    return float(slope), r2


def _approach_points(family, lam, distances, direction):
    if family.n_params == 1:
        d = complex(direction if direction is not None else 1.0)
        d /= abs(d)
        return [complex(lam) + t * d for t in distances]
    lam = np.asarray(lam, dtype=complex)
    d = np.zeros(family.n_params, complex)
    if direction is None:
        d[0] = 1.0
    else:
        d[:] = direction
    d /= np.linalg.norm(d)
    return [lam + t * d for t in distances]


def classify(family: MatrixFamily, lam, cluster=None, distances=None,
             direction=None) -> Classification:
    """Decide whether a coalescence at `lam` is an EP, and of which order.

    The gap between the clustered levels is sampled at ``lam + d*direction``
    for each ``d`` in `distances` and fitted to a power law. The defect
    overlap combines the left/right null-space overlap of ``H - E*`` with the
    bi-orthogonal overlaps along the approach.

    Raises
    ------
    ClusterAmbiguous
        If a level outside `cluster` is as close to the cluster energy as
        the cluster members are to each other.
    """
    distances = tuple(DEFAULT_DISTANCES if distances is None else distances)
    H = family(lam)
    sys = linalg.eig(H)
    w = sys.eigenvalues
    scale = sys.scale
    cluster = cluster_at(w, scale) if cluster is None else sorted(cluster)
    m = len(cluster)
    if m < 2:
        raise ValueError("a cluster needs at least two levels")
    E = complex(w[cluster].mean())
    others = [k for k in range(len(w)) if k not in cluster]
    spread = float(np.abs(w[cluster] - E).max())
    if others:
        nearest_other = float(np.abs(w[others] - E).min())
        if nearest_other <= 10 * max(spread, 1e-9 * scale):
            raise ClusterAmbiguous(
                f"level(s) outside {cluster} lie within the cluster scale at {lam}")

    nullity, ov0 = linalg.null_overlap(H - E * np.eye(len(w)), NULL_RTOL)
    overlaps = [ov0] if nullity else []
    gaps = []
    for pt in _approach_points(family, lam, distances, direction):
        s = linalg.eig(family(pt))
        idx = linalg.nearest(s.eigenvalues, E, m)
        gaps.append(_mean_gap(s.eigenvalues[idx]))
        overlaps.append(linalg.cluster_overlap(s, idx))
    defect = float(min(overlaps))

    if min(gaps) <= 1e-14 * scale:
        exponent, r2 = np.inf, 1.0
    else:
        exponent, r2 = fit_power(distances, gaps)
    defective = defect < DEFECT_THRESHOLD
    # order from the branching exponent; it can be below the cluster size
    # when a symmetry pins one level inside the coalescing group
    branch = [k for k in range(2, m + 1) if abs(exponent - 1.0 / k) <= EXPONENT_TOL]
    if defective and branch:
        kind, order = "EP", branch[0]
    elif not defective and (exponent == np.inf or abs(exponent - 1) <= LINEAR_TOL):
        kind, order = "semisimple", 0
    elif defective and abs(exponent - 1) <= LINEAR_TOL:
        kind, order = "crossing", 0
    else:
        kind, order = "unclassified", 0
    return Classification(kind, order, exponent, r2, defect, E, tuple(cluster),
                          distances, tuple(gaps))


def _record(family, lam, cls: Classification, tol_scale: float) -> ExceptionalPoint:
    w = linalg.eigenvalues(family(lam))
    res = cluster_residual(w, cls.level_indices, tol_scale)
    return ExceptionalPoint(lam, cls.energy, cls.order, cls.level_indices,
                            cls.defect_overlap, cls.exponent, res, cls.kind)


def _unclassified(family, lam, scale) -> ExceptionalPoint:
    w = linalg.eigenvalues(family(lam))
    idx = cluster_at(w, scale)
    return ExceptionalPoint(lam, complex(w[idx].mean()), 0, tuple(idx), float("nan"),
                            float("nan"), cluster_residual(w, idx, scale), "ambiguous")


def refine_ep(family: MatrixFamily, seed, tol: float = 1e-12, max_iter: int = 100,
              max_radius: float = 1.0, distances=None, direction=None) -> ExceptionalPoint:
    """Refine a discriminant zero near `seed` and classify it.

    Raises
    ------
    NoConvergence
        If Newton diverges or the cluster discriminant at the end exceeds
        ``tol * scale^(2*pairs)``.
    """
    if family.n_params != 1:
        raise ValueError("refine_ep works on single-parameter families; use find_epn")
    lam = newton_discriminant(family, seed, max_iter=max_iter, max_radius=max_radius)
    lam = polish(family, lam)
    scale = family.scale(lam)
    w = linalg.eigenvalues(family(lam))
    res = cluster_residual(w, cluster_at(w, scale), scale)
    if res > tol:
        raise NoConvergence(f"residual {res:.3g} above tolerance at {lam}")
    cls = classify(family, lam, distances=distances, direction=direction)
    return _record(family, lam, cls, scale)


def scan_grid(family: MatrixFamily, region: SearchRegion) -> list[complex]:
    """Grid points where ``|D|`` is a local minimum, below the local median."""
    if family.n_params != 1:
        raise ValueError("scan_grid needs a single-parameter family")
    xs, ys = region.axes()
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    L = log_abs_discriminant_grid(family, (X + 1j * Y).ravel()).reshape(X.shape)
    seeds = []
    for a in range(1, len(xs) - 1):
        for b in range(1, len(ys) - 1):
            nb = L[a - 1:a + 2, b - 1:b + 2]
            v = L[a, b]
            if v <= nb.min() and v < np.median(nb):
                seeds.append(complex(xs[a], ys[b]))
    return sorted(seeds, key=lambda z: (z.real, z.imag))


def _dedup(points, radius):
    kept = []
    for p in sorted(points, key=lambda z: (z.real, z.imag)):
        if all(abs(p - q) > radius for q in kept):
            kept.append(p)
    return kept


def approach_distances(lam, neighbors, base=DEFAULT_DISTANCES):
    """Shrink the approach sequence below a tenth of the nearest other zero."""
    others = [abs(complex(lam) - complex(q)) for q in neighbors if q != lam]
    rho = min(others, default=np.inf)
    top = min(base[0], 0.1 * rho)
    if top >= base[0]:
        return tuple(base)
    ratio = np.asarray(base) / base[0]
    return tuple(float(top * r) for r in ratio)


def census(family: MatrixFamily, region: SearchRegion, workers: int = 1,
           deflate: bool = True) -> list[ExceptionalPoint]:
    """All discriminant zeros found in `region`, refined and classified.

    Each grid seed is refined by Newton; with `deflate`, a second Newton
    run on ``D(lam)/(lam - r)`` looks for a partner zero too close to be
    resolved by the grid. Failures are logged and skipped. The output is
    sorted by (Re, Im) and independent of `workers`.
    """
    seeds = scan_grid(family, region)
    radius = 4 * region.step

    def run(seed):
        found = []
        try:
            r = newton_discriminant(family, seed, max_radius=radius)
        except EpcoreError as exc:
            log.debug("seed %s skipped: %s", seed, exc)
            return found
        found.append(r)
        if deflate:
            try:
                found.append(newton_discriminant(family, seed, roots=(r,),
                                                 max_radius=radius))
            except EpcoreError:
                pass
        return found

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, seeds))
    else:
        results = [run(s) for s in seeds]
    candidates = _dedup([polish(family, r) for rs in results for r in rs], region.dedup)

    def build(lam):
        scale = family.scale(lam)
        w = linalg.eigenvalues(family(lam))
        res = cluster_residual(w, cluster_at(w, scale), scale)
        if res > region.tol:
            log.debug("candidate %s rejected: residual %.3g", lam, res)
            return None
        dist = approach_distances(lam, candidates)
        try:
            cls = classify(family, lam, distances=dist)
        except ClusterAmbiguous as exc:
            log.debug("candidate %s ambiguous: %s", lam, exc)
            return _unclassified(family, lam, scale)
        return _record(family, lam, cls, scale)

    inside = [c for c in candidates if region.contains(c, slack=1e-9)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            eps = list(pool.map(build, inside))
    else:
        eps = [build(c) for c in inside]
    return [e for e in eps if e is not None]


# -- higher-order points --------------------------------------------------------

def _centered_power_sums(family, lam, n):
    w = linalg.eigenvalues(family(lam))
    idx = cluster_at(w, family.scale(lam), size=n)
    x = w[idx] - w[idx].mean()
    return np.array([np.sum(x**k) for k in range(2, n + 1)]), w, idx


def jordan_chain_length(A, rtol: float = NULL_RTOL) -> tuple[int, int]:
    """``(nullity, chain length)`` of the zero eigenvalue of `A`.

    The chain length is the smallest ``k`` with ``rank(A^k) == rank(A^(k+1))``.
    """
    n = A.shape[0]
    ranks = [n]
    P = np.eye(n, dtype=complex)
    base = max(1.0, np.linalg.norm(A, 2))
    for k in range(1, n + 2):
        P = P @ A
        s = np.linalg.svd(P, compute_uv=False)
        ranks.append(int(np.sum(s > rtol * base**k)))
        if ranks[-1] == ranks[-2]:
            return n - ranks[1], k - 1
    return n - ranks[1], n


def find_epn(family: MatrixFamily, seed, n: int, tol: float = 1e-12, max_iter: int = 100,
             distances=None, direction=None) -> ExceptionalPoint:
    """Locate a point where `n` levels coalesce.

    Multivariate Newton drives the centered power sums ``sum (E_i - mean)^k``,
    ``k = 2..n``, of the tightest `n`-cluster to zero; these are symmetric
    functions of the cluster and hence analytic in the parameters. With more
    parameters than conditions the minimum-norm Newton step is used.

    Raises
    ------
    InsufficientParameters
        If the family has fewer than ``n - 1`` parameters.
    OrderMismatch
        If the splitting exponent is not ``1/n``, the eigenvalue has more
        than one eigenvector, or its Jordan chain is not of length `n`.
    """
    if n < 2:
        raise ValueError("order must be at least 2")
    if family.n_params < n - 1:
        raise InsufficientParameters(
            f"an EP{n} needs {n - 1} complex parameters, family has {family.n_params}")
    if n > family.dim:
        raise ValueError("order exceeds the matrix dimension")
    lam = np.atleast_1d(np.asarray(seed, dtype=complex)).copy()
    if lam.shape != (family.n_params,):
        raise ValueError("seed does not match the number of parameters")
    prev = None
    stalls = 0
    best = (np.inf, lam.copy())
    for _ in range(max_iter):
        F, _, _ = _centered_power_sums(family, lam, n)
        nf = np.linalg.norm(F)
        if nf < best[0]:
            best = (nf, lam.copy())
        if nf == 0:
            break
        h = 1e-6 * (1 + np.linalg.norm(lam))
        J = np.empty((n - 1, family.n_params), dtype=complex)
        for p in range(family.n_params):
            e = np.zeros(family.n_params, complex)
            e[p] = h
            J[:, p] = (_centered_power_sums(family, lam + e, n)[0]
                       - _centered_power_sums(family, lam - e, n)[0]) / (2 * h)
        step = -np.linalg.lstsq(J, F, rcond=None)[0]
        lam = lam + step
        ns = np.linalg.norm(step)
        if ns <= 1e-14 * (1 + np.linalg.norm(lam)):
            break
        if prev is not None and ns >= 0.9 * prev:
            stalls += 1
            if stalls >= 3:
                lam = best[1]
                break
        else:
            stalls = 0
        prev = ns
    else:
        raise NoConvergence(f"EP{n} search from {seed} did not converge")

    point = complex(lam[0]) if family.n_params == 1 else tuple(complex(x) for x in lam)
    H = family(point)
    scale = family.scale(point)
    w = linalg.eigenvalues(H)
    idx = cluster_at(w, scale, size=n)
    res = cluster_residual(w, idx, scale)
    if res > tol:
        raise NoConvergence(f"EP{n} residual {res:.3g} above tolerance")
    E = complex(w[idx].mean())

    distances = tuple(DEFAULT_DISTANCES if distances is None else distances)
    gaps = []
    for pt in _approach_points(family, point, distances, direction):
        ws = linalg.eigenvalues(family(pt))
        gaps.append(_mean_gap(ws[linalg.nearest(ws, E, n)]))
    exponent, _ = fit_power(distances, gaps)
    A = H - E * np.eye(family.dim)
    nullity, chain = jordan_chain_length(A)
    _, ov = linalg.null_overlap(A, NULL_RTOL)
    if abs(exponent - 1.0 / n) > EXPONENT_TOL:
        raise OrderMismatch(f"splitting exponent {exponent:.3f} is not 1/{n}")
    if nullity != 1 or chain != n:
        raise OrderMismatch(f"nullity {nullity}, Jordan chain {chain}; expected 1, {n}")
    return ExceptionalPoint(point, E, n, tuple(idx), ov, exponent, res, "EP")


def with_block(ep: ExceptionalPoint, block: str) -> ExceptionalPoint:
    return replace(ep, block=block)
