"""Dense complex eigen-kernel for non-Hermitian matrices.

Left eigenvectors are stored as *rows* ``l_k`` with ``l_k @ M = E_k l_k``, so
the bi-orthogonal pairing is the plain product ``l_k @ r_j`` (no conjugation).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from .errors import EigenError, NearDefective, NotDefective
from .family import MatrixFamily, as_matrix

DEFAULT_CLUSTER_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigenvalues with paired right (columns) and left (rows) eigenvectors.

    Attributes
    ----------
    eigenvalues : (n,) complex ndarray
        Sorted by real part, then imaginary part.
    right : (n, n) complex ndarray
        ``right[:, k]`` is the right eigenvector of ``eigenvalues[k]``.
    left : (n, n) complex ndarray
        ``left[k]`` is the left eigenvector (row) of ``eigenvalues[k]``.
    overlaps : (n,) complex ndarray
        ``left[k] @ right[:, k]``; close to zero near an exceptional point.
    normalized : bool
        True once :func:`biorthogonalize` has enforced ``left @ right = I``.
    scale : float
        Spectral norm of the decomposed matrix (at least 1).
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    overlaps: np.ndarray
    normalized: bool
    scale: float

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)


def _sort_order(w):
    return np.lexsort((w.imag, w.real))


def eig(M) -> EigenSystem:
    """General complex eigen-decomposition with unit-norm left and right vectors."""
    M = as_matrix(M)
    try:
        w, vl, vr = sla.eig(M, left=True, right=True)
    except np.linalg.LinAlgError as exc:  # LAPACK reports unconverged count only
        raise EigenError(f"eigen-solver did not converge: {exc}") from exc
    order = _sort_order(w)
    w = w[order]
    right = vr[:, order]
    left = vl[:, order].conj().T
    right = right / np.linalg.norm(right, axis=0)
    left = left / np.linalg.norm(left, axis=1)[:, None]
    overlaps = np.einsum("ij,ji->i", left, right)
    scale = max(1.0, float(np.linalg.norm(M, 2)))
    return EigenSystem(w, right, left, overlaps, False, scale)


def eigenvalues(M) -> np.ndarray:
    """Sorted eigenvalues only."""
    w = sla.eigvals(as_matrix(M))
    return w[_sort_order(w)]


def clusters(w, tol) -> list[list[int]]:
    """Group indices of `w` whose values chain together within `tol`."""
    n = len(w)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(w[i] - w[j]) <= tol:
                parent[find(j)] = find(i)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values())


def biorthogonalize(sys: EigenSystem, tol_overlap: float = 1e-6,
                    cluster_tol: float | None = None) -> EigenSystem:
    """Rescale so that ``left @ right`` is the identity.

    Isolated levels are scaled by ``1/sqrt(s_k)`` on both sides (principal
    root). Levels coinciding within `cluster_tol` (default ``1e-8 * scale``)
    are treated as a semisimple block and re-paired through the inverse of
    their overlap matrix.

    Raises
    ------
    NearDefective
        If an overlap, or the smallest singular value of a cluster's overlap
        matrix, falls below `tol_overlap`.
    """
    if cluster_tol is None:
        cluster_tol = DEFAULT_CLUSTER_RTOL * sys.scale
    right = sys.right.copy()
    left = sys.left.copy()
    for group in clusters(sys.eigenvalues, cluster_tol):
        if len(group) == 1:
            k = group[0]
            s = left[k] @ right[:, k]
            if abs(s) < tol_overlap:
                raise NearDefective(
                    f"level {k} has overlap |s|={abs(s):.3g} < {tol_overlap:g}",
                    index=k, overlap=abs(s))
            root = np.sqrt(s)
            right[:, k] /= root
            left[k] /= root
        else:
            G = left[group] @ right[:, group]
            smin = np.linalg.svd(G, compute_uv=False)[-1]
            if smin < tol_overlap:
                raise NearDefective(
                    f"cluster {group} is nearly defective (sigma_min={smin:.3g})",
                    index=group[0], overlap=smin)
            left[group] = np.linalg.solve(G, left[group])
    overlaps = np.einsum("ij,ji->i", left, right)
    return replace(sys, right=right, left=left, overlaps=overlaps, normalized=True)


def nearest(w, E, m) -> list[int]:
    """Indices of the `m` entries of `w` closest to `E`, in ascending index order."""
    idx = np.argsort(np.abs(np.asarray(w) - E), kind="stable")[:m]
    return sorted(int(i) for i in idx)


def cluster_overlap(sys: EigenSystem, idx) -> float:
    """Smallest singular value of the unit-vector overlap block on `idx`.

    Equals ``min |l_k r_k|`` for distinct eigenvalues and stays meaningful for
    exactly degenerate ones.
    """
    idx = list(idx)
    L = sys.left[idx]
    L = L / np.linalg.norm(L, axis=1)[:, None]
    R = sys.right[:, idx]
    R = R / np.linalg.norm(R, axis=0)
    return float(np.linalg.svd(L @ R, compute_uv=False)[-1])


def null_overlap(A, rtol: float = 1e-8) -> tuple[int, float]:
    """Nullity of `A` and the self-overlap of its left/right null spaces.

    Returns ``(nullity, sigma_min(U_null^H V_null))``; the overlap is zero for
    a defective eigenvalue and of order one for a semisimple one.
    """
    A = as_matrix(A)
    U, S, Vh = np.linalg.svd(A)
    thresh = rtol * max(1.0, S[0])
    null = np.flatnonzero(S <= thresh)
    if null.size == 0:
        return 0, float("nan")
    Ln = U[:, null].conj().T
    Rn = Vh[null].conj().T
    return int(null.size), float(np.linalg.svd(Ln @ Rn, compute_uv=False)[-1])


def riesz_projector(M, center, radius, n_points: int = 128) -> np.ndarray:
    """Spectral projector onto eigenvalues inside the circle |z - center| < radius.

    Trapezoidal contour integral of the resolvent; converges geometrically
    as long as no eigenvalue sits near the circle.
    """
    M = as_matrix(M)
    n = M.shape[0]
    theta = 2 * np.pi * (np.arange(n_points) + 0.5) / n_points
    P = np.zeros((n, n), dtype=complex)
    eye = np.eye(n)
    for t in theta:
        dz = radius * np.exp(1j * t)
        P += dz * np.linalg.solve((center + dz) * eye - M, eye)
    return P / n_points


def nilpotent_part(M, E_ep, tol: float = 1e-8, radius: float | None = None) -> np.ndarray:
    """Return ``N = (M - E_ep I) P`` and check that it is nilpotent of order 2.

    `P` is the identity unless `radius` is given, in which case it is the
    spectral projector onto the eigenvalues within `radius` of `E_ep`.

    Raises
    ------
    NotDefective
        If ``||N^2|| > tol ||N||^2`` (a semisimple crossing or no coalescence).
    """
    M = as_matrix(M)
    N = M - E_ep * np.eye(M.shape[0])
    if radius is not None:
        N = N @ riesz_projector(M, E_ep, radius)
    nN = np.linalg.norm(N, 2)
    if nN == 0.0:
        return N
    ratio = np.linalg.norm(N @ N, 2) / nN**2
    if ratio > tol:
        raise NotDefective(f"||N^2||/||N||^2 = {ratio:.3g} exceeds {tol:g}")
    return N


def log_discriminant(w) -> tuple[float, complex]:
    """``(log|D|, D/|D|)`` for ``D = prod_{i<j} (w_i - w_j)^2``.

    Working in log form keeps large spectra from overflowing.
    """
    w = np.asarray(w)
    i, j = np.triu_indices(len(w), 1)
    d = w[i] - w[j]
    if d.size == 0:
        return 0.0, 1.0 + 0j
    if np.any(d == 0):
        return -np.inf, 1.0 + 0j
    return float(2 * np.log(np.abs(d)).sum()), complex(np.exp(2j * np.angle(d).sum()))


def char_discriminant(family: MatrixFamily, lam) -> complex:
    """Product of squared eigenvalue differences of ``family(lam)``."""
    logabs, phase = log_discriminant(eigenvalues(family(lam)))
    if logabs == -np.inf:
        return 0j
    return phase * np.exp(logabs)
