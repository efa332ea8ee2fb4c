"""Concrete families: Lipkin model, PT dimer, RPA block, EP3 family, metric."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import finder, linalg
from .errors import BrokenPhase, MetricBlowup, NearDefective, NoConvergence
from .family import MatrixFamily, as_matrix
from .finder import ExceptionalPoint, SearchRegion

# -- Lipkin ---------------------------------------------------------------------


@dataclass(frozen=True)
class LipkinSpec:
    """Angular-momentum representation for ``N`` particles, ``j = N/2``.

    Basis ordered by ``m = -j, ..., j``; ``Jp[m+1, m] = sqrt(j(j+1) - m(m+1))``.
    """

    N: int

    def __post_init__(self):
        N = self.N
        if not isinstance(N, (int, np.integer)) or N < 2 or N > 64 or N % 2:
            raise ValueError(f"N must be an even integer in [2, 64], got {N!r}")

    @property
    def j(self) -> float:
        return self.N / 2

    @property
    def m(self) -> np.ndarray:
        return np.arange(-self.j, self.j + 1)

    @property
    def Jz(self) -> np.ndarray:
        return np.diag(self.m)

    @property
    def Jp(self) -> np.ndarray:
        m = self.m[:-1]
        return np.diag(np.sqrt(self.j * (self.j + 1) - m * (m + 1)), -1)

    @property
    def Jm(self) -> np.ndarray:
        return self.Jp.T.copy()

    def algebra_residual(self) -> float:
        """``max ||[Jz, J+-] -+ J+-||``."""
        Jz, Jp, Jm = self.Jz, self.Jp, self.Jm
        return float(max(np.abs(Jz @ Jp - Jp @ Jz - Jp).max(),
                         np.abs(Jz @ Jm - Jm @ Jz + Jm).max()))

    def block_indices(self) -> dict:
        """Basis indices of the two parity sectors (parity of ``m + j``)."""
        k = np.arange(self.N + 1)
        return {"even": k[k % 2 == 0], "odd": k[k % 2 == 1]}


@dataclass(frozen=True, eq=False)
class LipkinModel:
    spec: LipkinSpec
    family: MatrixFamily
    blocks: dict = field(default_factory=dict)


def lipkin(N: int) -> LipkinModel:
    """``H(lam) = Jz + (lam/N)(J+^2 + J-^2)`` with its parity blocks."""
    spec = LipkinSpec(N)
    V = (spec.Jp @ spec.Jp + spec.Jm @ spec.Jm) / N
    fam = MatrixFamily.single(spec.Jz, V, name=f"lipkin{N}")
    blocks = {name: fam.restrict(idx) for name, idx in spec.block_indices().items()}
    return LipkinModel(spec, fam, blocks)


def quartet_images(lam: complex) -> tuple:
    lam = complex(lam)
    return (lam.conjugate(), -lam, -lam.conjugate())


def quartet_closure_defect(points) -> float:
    """Largest distance from a symmetry image to the nearest listed point."""
    pts = np.array([complex(p) for p in points])
    if pts.size == 0:
        return 0.0
    worst = 0.0
    for p in pts:
        for q in quartet_images(p):
            worst = max(worst, float(np.abs(pts - q).min()))
    return worst


def _complete_quartets(family, eps, dedup, tol):
    """Refine each missing symmetry image by Newton seeded at the image."""
    pts = [e.lam for e in eps]
    out = list(eps)
    for e in eps:
        for q in quartet_images(e.lam):
            if min(abs(q - p) for p in pts) <= dedup:
                continue
            try:
                lam = finder.newton_discriminant(family, q, max_radius=1e-3)
                ep = finder.refine_ep(family, lam, tol=tol, max_radius=1e-3)
            except Exception as exc:  # pragma: no cover - logged by caller
                finder.log.debug("image %s of %s not refined: %s", q, e.lam, exc)
                continue
            if min(abs(ep.lam - p) for p in pts) > dedup:
                pts.append(ep.lam)
                out.append(ep)
    return out


def lipkin_region(step: float = 0.01) -> SearchRegion:
    return SearchRegion((0.0, 2.0), (0.0, 2.0), step=step)


def lipkin_census(N: int, region: SearchRegion | None = None, workers: int = 1,
                  complete: bool = True) -> list[ExceptionalPoint]:
    """Per-block EP census tagged by parity block.

    With `complete`, every EP is joined by its images under
    ``lam -> conj(lam), -lam, -conj(lam)``, each refined independently.
    """
    model = lipkin(N)
    region = lipkin_region() if region is None else region
    out = []
    for name, fam in model.blocks.items():
        if fam.dim < 2:
            continue
        eps = finder.census(fam, region, workers=workers)
        if complete:
            eps = _complete_quartets(fam, eps, region.dedup, region.tol)
        out.extend(finder.with_block(e, name) for e in eps)
    return sorted(out, key=lambda e: (e.lam.real, e.lam.imag, e.block))


# -- PT dimer and metric --------------------------------------------------------


def pt_dimer(kappa: float) -> MatrixFamily:
    """``H(gamma) = [[i gamma, kappa], [kappa, -i gamma]]``."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    H0 = np.array([[0, kappa], [kappa, 0]], dtype=complex)
    V = np.diag([1j, -1j])
    return MatrixFamily.single(H0, V, name="pt_dimer")


def _all_real(H, rtol=1e-8) -> bool:
    w = linalg.eigenvalues(H)
    return bool(np.all(np.abs(w.imag) <= rtol * max(1.0, np.linalg.norm(H, 2))))


def symmetry_breaking_threshold(kappa: float, tol: float = 1e-13):
    """Bisect ``gamma`` in ``[0, 2 kappa]`` on "spectrum real"; classify the boundary.

    Returns ``(gamma_c, ExceptionalPoint)``.
    """
    fam = pt_dimer(kappa)
    lo, hi = 0.0, 2.0 * kappa
    if not _all_real(fam(lo)) or _all_real(fam(hi)):
        raise NoConvergence("no real-to-complex transition in [0, 2 kappa]")
    while hi - lo > tol * kappa:
        mid = 0.5 * (lo + hi)
        if _all_real(fam(mid)):
            lo = mid
        else:
            hi = mid
    gamma = 0.5 * (lo + hi)
    return gamma, finder.refine_ep(fam, gamma, max_radius=1e-3)


@dataclass(frozen=True, eq=False)
class MetricResult:
    """Metric ``Theta`` with ``Theta H = H^dagger Theta`` and its root ``S``."""

    theta: np.ndarray
    S: np.ndarray
    condition: float
    intertwining_residual: float
    hermiticity_residual: float
    eigenvalues: np.ndarray
    H: np.ndarray = field(repr=False)

    @property
    def h_s(self) -> np.ndarray:
        """The Hermitian partner ``S H S^-1``."""
        return self.S @ self.H @ np.linalg.inv(self.S)


def quasi_metric(H, max_condition: float = 1e12, real_rtol: float = 1e-9) -> MetricResult:
    """Metric from bi-orthonormal left eigenvectors, ``Theta = sum l_k^dagger l_k``.

    Raises
    ------
    BrokenPhase
        If any eigenvalue has a non-negligible imaginary part.
    MetricBlowup
        If ``H`` is too close to defective or ``cond(Theta)`` exceeds
        `max_condition`.
    """
    H = as_matrix(H)
    sys = linalg.eig(H)
    if np.any(np.abs(sys.eigenvalues.imag) > real_rtol * sys.scale):
        raise BrokenPhase("complex spectrum: no positive metric exists")
    try:
        sys = linalg.biorthogonalize(sys, tol_overlap=1e-12)
    except NearDefective as exc:
        raise MetricBlowup(f"near-defective spectrum: {exc}", condition=np.inf) from exc
    L = sys.left
    theta = L.conj().T @ L
    theta = 0.5 * (theta + theta.conj().T)
    vals, U = np.linalg.eigh(theta)
    cond = float(vals[-1] / vals[0]) if vals[0] > 0 else np.inf
    if not cond <= max_condition:
        raise MetricBlowup(f"metric condition {cond:.3g} too large", condition=cond)
    S = (U * np.sqrt(vals)) @ U.conj().T
    inter = float(np.linalg.norm(theta @ H - H.conj().T @ theta, 2))
    hS = S @ H @ np.linalg.solve(S, np.eye(len(H)))
    herm = float(np.linalg.norm(hS - hS.conj().T, 2))
    return MetricResult(theta, S, cond, inter, herm, sys.eigenvalues, H)


# -- RPA --------------------------------------------------------------------------


@dataclass(frozen=True)
class RPAParams:
    a: float
    b: float

    @property
    def omega(self) -> complex:
        return np.sqrt(complex(self.a**2 - self.b**2))

    def matrix(self) -> np.ndarray:
        return rpa_block(self.a)(self.b)


def rpa_block(a: float) -> MatrixFamily:
    """``[[a, b], [-b, -a]]`` as a family in ``b``."""
    if not a > 0:
        raise ValueError("a must be positive")
    return MatrixFamily.single(np.diag([a, -a]).astype(complex),
                               np.array([[0, 1], [-1, 0]], dtype=complex), name="rpa")


# -- EP3 --------------------------------------------------------------------------

# Generic perturbation shipped as a constant; B[1,0] + B[2,1] != 0 keeps the
# (lam, eps) Jacobian of the EP3 conditions nonsingular.
EP3_B = np.array([[0.3, -0.7, 0.2],
                  [0.9, 0.1, -0.4],
                  [0.5, 1.1, -0.6]])


def _j3():
    return np.diag([1.0, 1.0], 1).astype(complex)


def _corner():
    C = np.zeros((3, 3), dtype=complex)
    C[2, 0] = 1.0
    return C


def ep3_family(eps: float) -> MatrixFamily:
    """``J3(0) + lam e3 e1^T + eps B``; an exact EP3 at ``lam = 0`` when ``eps = 0``."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return MatrixFamily.single(_j3() + eps * EP3_B, _corner(), name=f"ep3[{eps:g}]")


def ep3_two_parameter() -> MatrixFamily:
    """The same construction with ``(lam, eps)`` both free."""
    return MatrixFamily(_j3(), (_corner(), EP3_B.astype(complex)), name="ep3")


def ep3_sprouting(eps: float, half_width: float | None = None) -> list[ExceptionalPoint]:
    """Census of ``ep3_family(eps)`` around the origin.

    The sprouted EP2 pair sits at distance O(eps) from the origin and is
    separated by O(eps^1.5), so merging uses a tiny dedup radius.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    hw = 20 * eps if half_width is None else half_width
    region = SearchRegion.around(0.0, hw, step=hw / 20, dedup=1e-13)
    return finder.census(ep3_family(eps), region)
